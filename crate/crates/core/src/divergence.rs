//! One numeric notion of "diverging" shared by every limsup/liminf estimator.
//!
//! A sequence of magnitudes measured at shrinking scales diverges when it is strictly
//! increasing and either its last value exceeds [`DIVERGENCE_THRESHOLD`] or every
//! consecutive step grows at least like `scale^(-MIN_GROWTH_EXPONENT)`.

pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
pub const MIN_GROWTH_EXPONENT: f64 = 0.25;

/// `values[i]` is measured at `scales[i]`, with scales strictly decreasing towards 0.
pub fn diverges(values: &[f64], scales: &[f64]) -> bool {
    debug_assert_eq!(values.len(), scales.len());
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if !values.windows(2).all(|w| w[1] > w[0]) {
        return false;
    }
    if *values.last().unwrap() > DIVERGENCE_THRESHOLD {
        return true;
    }
    if values[0] <= 0.0 {
        return false;
    }
    values.windows(2).zip(scales.windows(2)).all(|(v, s)| {
        let shrink = (s[0] / s[1]).ln();
        shrink > 0.0 && (v[1] / v[0]).ln() / shrink >= MIN_GROWTH_EXPONENT
    })
}
