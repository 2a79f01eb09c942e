use std::fmt;
use std::ops::{Add, Deref};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// A point of ℝⁿ with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Precondition("a point needs at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Precondition(format!("non-finite coordinate {bad}")));
        }
        Ok(Point(coords))
    }

    /// Wraps coordinates produced internally (already known to be finite).
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::scalar(x)
    }
}

/// Lexicographic comparison of coordinate tuples; used for deterministic tie-breaking.
pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// An element of ℝ ∪ {+∞}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    /// Converts a raw float: `+∞` and NaN map to [`ExtReal::PosInf`]; `−∞` is clamped to
    /// the most negative finite double.
    pub fn from_f64(v: f64) -> Self {
        if v.is_nan() || v == f64::INFINITY {
            ExtReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtReal::Finite(f64::MIN)
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Raw float view, `+∞` for [`ExtReal::PosInf`].
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// `self + k·t` with `k ≥ 0`, `t ≥ 0` finite.
    pub fn add_scaled(self, k: f64, t: f64) -> Self {
        self + ExtReal::Finite(k * t)
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from_f64(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("+inf"),
        }
    }
}

/// Norm used for distances on ℝⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Euclidean,
    Max,
}

impl Norm {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Norm::Max => v.iter().fold(0.0, |m, c| m.max(c.abs())),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Norm::Max => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_real_arithmetic() {
        let a = ExtReal::Finite(1.5);
        assert_eq!(a + ExtReal::Finite(2.0), ExtReal::Finite(3.5));
        assert_eq!(a + ExtReal::PosInf, ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf + ExtReal::PosInf, ExtReal::PosInf);
        assert_eq!(ExtReal::from_f64(f64::NAN), ExtReal::PosInf);
        assert!(ExtReal::Finite(1e300) < ExtReal::PosInf);
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![0.0, -2.0]).is_ok());
    }

    #[test]
    fn norms() {
        assert_eq!(Norm::Euclidean.norm(&[3.0, 4.0]), 5.0);
        assert_eq!(Norm::Max.norm(&[3.0, -4.0]), 4.0);
        assert_eq!(Norm::Max.distance(&[1.0, 1.0], &[0.0, 3.0]), 2.0);
    }

    #[test]
    fn lexicographic_order() {
        use std::cmp::Ordering::*;
        assert_eq!(lex_cmp(&[0.0, 1.0], &[0.0, 2.0]), Less);
        assert_eq!(lex_cmp(&[1.0], &[0.5]), Greater);
        assert_eq!(lex_cmp(&[1.0, 2.0], &[1.0, 2.0]), Equal);
    }
}
