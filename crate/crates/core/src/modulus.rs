use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A rate modulus `w: ℝ₊ → ℝ₊` with `w(0) = 0`.
#[derive(Clone)]
pub enum RateModulus {
    /// `w(t) = L·t`.
    Linear(f64),
    /// `w(t) = C·t^α`.
    Power { coef: f64, exponent: f64 },
    /// Piecewise-linear interpolation through `(0,0)` and the given knots; the last
    /// segment's slope is extended beyond the final knot.
    Table(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl RateModulus {
    pub fn identity() -> Self {
        RateModulus::Linear(1.0)
    }

    pub fn power(coef: f64, exponent: f64) -> Result<Self> {
        if !(coef > 0.0 && exponent > 0.0) {
            return Err(Error::Config(format!(
                "power modulus needs C > 0 and alpha > 0, got C={coef}, alpha={exponent}"
            )));
        }
        Ok(RateModulus::Power { coef, exponent })
    }

    pub fn table(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.iter().any(|(t, w)| !(*t > 0.0) || *w < 0.0 || !t.is_finite() || !w.is_finite()) {
            return Err(Error::Config("table knots need t > 0 and w >= 0".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("duplicate table abscissa".into()));
        }
        if knots.is_empty() {
            return Err(Error::Config("empty table".into()));
        }
        Ok(RateModulus::Table(knots))
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RateModulus::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            RateModulus::Linear(l) => l * t,
            RateModulus::Power { coef, exponent } => coef * t.powf(*exponent),
            RateModulus::Table(knots) => {
                let mut prev = (0.0, 0.0);
                for &(tk, wk) in knots {
                    if t <= tk {
                        return prev.1 + (wk - prev.1) * (t - prev.0) / (tk - prev.0);
                    }
                    prev = (tk, wk);
                }
                let n = knots.len();
                let before = if n >= 2 { knots[n - 2] } else { (0.0, 0.0) };
                let slope = (prev.1 - before.1) / (prev.0 - before.0);
                prev.1 + slope * (t - prev.0)
            }
            RateModulus::Custom(f) => f(t),
        }
    }

    /// Checks `w(0) = 0` and strict increase on `grid` (positive points).
    pub fn check_strictly_increasing(&self, grid: &[f64]) -> Result<()> {
        if self.raw_at_zero() != 0.0 {
            return Err(Error::Precondition("rate modulus must vanish at 0".into()));
        }
        let mut ts: Vec<f64> = grid.iter().copied().filter(|t| *t > 0.0).collect();
        ts.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for t in ts {
            let w = self.eval(t);
            if !(w > prev) {
                return Err(Error::Precondition(format!(
                    "rate modulus is not strictly increasing at t={t}"
                )));
            }
            prev = w;
        }
        Ok(())
    }

    fn raw_at_zero(&self) -> f64 {
        match self {
            RateModulus::Custom(f) => f(0.0),
            _ => 0.0,
        }
    }
}

impl fmt::Debug for RateModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateModulus::Linear(l) => write!(f, "Linear({l})"),
            RateModulus::Power { coef, exponent } => write!(f, "Power({coef}, {exponent})"),
            RateModulus::Table(k) => write!(f, "Table({k:?})"),
            RateModulus::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Geometric grid `2^{-j}`, `j = 0..=last`.
pub fn dyadic_grid(last: usize) -> Vec<f64> {
    (0..=last).map(|j| 0.5f64.powi(j as i32)).collect()
}
