use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded analysis window in ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!("invalid box side [{lo}, {hi}]")));
            }
        }
        Ok(Region::Box { lower, upper })
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![lo], vec![hi])
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("invalid ball radius {radius}")));
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lower, .. } => lower.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi),
            Region::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() <= *radius
            }
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lower, upper } => (lower.clone(), upper.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Region::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect()
            }
            Region::Ball { center, .. } => center.clone(),
        }
    }

    /// Side lengths of the bounding box.
    pub fn widths(&self) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        lo.iter().zip(&hi).map(|(a, b)| b - a).collect()
    }

    /// Uniform sample from the region.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Region::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
            Region::Ball { center, radius } => {
                let n = center.len();
                let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                for (d, c) in dir.iter_mut().zip(center) {
                    *d = c + r * *d / len;
                }
                dir
            }
        }
    }

    /// Vertices of a box (empty for balls or for more than 12 axes).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        match self {
            Region::Box { lower, upper } if lower.len() <= 12 => {
                let n = lower.len();
                (0..1usize << n)
                    .map(|mask| {
                        (0..n)
                            .map(|i| if mask >> i & 1 == 1 { upper[i] } else { lower[i] })
                            .collect()
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Region scaled by `factor` about the origin (box bounds multiplied; ball radius multiplied).
    pub fn scaled(&self, factor: f64) -> Region {
        match self {
            Region::Box { lower, upper } => Region::Box {
                lower: lower.iter().map(|v| v * factor).collect(),
                upper: upper.iter().map(|v| v * factor).collect(),
            },
            Region::Ball { center, radius } => Region::Ball {
                center: center.clone(),
                radius: radius * factor,
            },
        }
    }

    /// Whether `x` lies at least `margin` (a fraction of the width along each axis, or of
    /// the radius) away from the boundary.
    pub fn is_interior(&self, x: &[f64], margin: f64) -> bool {
        match self {
            Region::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).all(|(v, (lo, hi))| {
                    let pad = margin * (hi - lo);
                    *v >= lo + pad && *v <= hi - pad
                })
            }
            Region::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() <= radius * (1.0 - margin)
            }
        }
    }

    /// Whether `other` lies inside `self` (checked on bounding boxes for boxes, exactly for balls).
    pub fn contains_region(&self, other: &Region) -> bool {
        let tol = 1e-12;
        match (self, other) {
            (Region::Ball { center, radius }, Region::Ball { center: c2, radius: r2 }) => {
                let d: f64 = center.iter().zip(c2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                d + r2 <= radius + tol
            }
            _ => {
                let (lo, hi) = self.bounds();
                let (lo2, hi2) = other.bounds();
                lo.iter().zip(&lo2).all(|(a, b)| *b >= a - tol)
                    && hi.iter().zip(&hi2).all(|(a, b)| *b <= a + tol)
            }
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Box { lower, upper } => {
                let sides: Vec<String> = lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| format!("[{a}, {b}]"))
                    .collect();
                if sides.len() > 3 && sides.iter().all(|s| *s == sides[0]) {
                    write!(f, "{}^{}", sides[0], sides.len())
                } else {
                    write!(f, "{}", sides.join("x"))
                }
            }
            Region::Ball { center, radius } => write!(f, "B({center:?}, {radius})"),
        }
    }
}
