//! Multistart derivative-free minimisation over a region.
//!
//! Seeds come from a uniform grid (up to three axes) or a Latin-hypercube sample plus
//! dense axis sweeps through the region centre. The best seeds are polished by a
//! coordinate pattern search whose step is halved on failure. Points outside the
//! region, or where the objective is `+∞`, act as an extreme barrier.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::problem::{lex_cmp, Region};
use crate::sampling;

/// Values within this distance of the best are tie-broken lexicographically.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Initial pattern-search step as a fraction of the region width along each axis.
pub const INITIAL_STEP_DIVISOR: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    /// Evaluation cap per local descent.
    pub max_evals: usize,
    /// Local descents per axis.
    pub starts_per_dim: usize,
    /// Grid resolution per axis when the dimension is at most 3.
    pub grid_per_axis: usize,
    /// Latin-hypercube seeds in higher dimension.
    pub lhs_points: usize,
    /// Points per axis sweep in higher dimension.
    pub sweep_points: usize,
    /// A descent stops once every coordinate step is below this.
    pub min_step: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            max_evals: 200_000,
            starts_per_dim: 16,
            grid_per_axis: 64,
            lhs_points: 4096,
            sweep_points: 4096,
            min_step: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub status: InnerStatus,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi == lo {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn grid_seeds(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(l, h)| linspace(*l, *h, per_axis)).collect();
    let mut pts = vec![Vec::new()];
    for axis in &axes {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    pts
}

fn latin_hypercube(lo: &[f64], hi: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = lo.len();
    let mut rng = sampling::stream(&[seed, 0x1A5]);
    let mut pts = vec![vec![0.0; dim]; n];
    for i in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (k, s) in strata.into_iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            pts[k][i] = lo[i] + (hi[i] - lo[i]) * u;
        }
    }
    pts
}

fn seeds(region: &Region, opts: &InnerOptions, seed: u64) -> Vec<Vec<f64>> {
    let (lo, hi) = region.bounds();
    let dim = lo.len();
    let mut pts = vec![region.center()];
    if dim <= 3 {
        pts.extend(grid_seeds(&lo, &hi, opts.grid_per_axis));
    } else {
        pts.extend(latin_hypercube(&lo, &hi, opts.lhs_points, seed));
        let c = region.center();
        for i in 0..dim {
            for v in linspace(lo[i], hi[i], opts.sweep_points) {
                let mut p = c.clone();
                p[i] = v;
                pts.push(p);
            }
        }
    }
    pts
}

/// Coordinate pattern search from `x` with extreme-barrier objective `f`.
fn pattern_search<F>(f: &F, mut x: Vec<f64>, mut fx: f64, widths: &[f64], opts: &InnerOptions) -> InnerResult
where
    F: Fn(&[f64]) -> f64,
{
    let mut steps: Vec<f64> = widths.iter().map(|w| w / INITIAL_STEP_DIVISOR).collect();
    let mut evals = 0;
    loop {
        if steps.iter().all(|s| *s < opts.min_step) {
            return InnerResult { x, value: fx, status: InnerStatus::Converged };
        }
        let mut improved = false;
        for i in 0..x.len() {
            if steps[i] < opts.min_step {
                continue;
            }
            for sign in [1.0, -1.0] {
                if evals >= opts.max_evals {
                    return InnerResult { x, value: fx, status: InnerStatus::BudgetExhausted };
                }
                let old = x[i];
                x[i] = old + sign * steps[i];
                evals += 1;
                let v = f(&x);
                if v < fx {
                    fx = v;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
}

fn better(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0))
}

/// Minimises `objective` over `region`. `objective` should return `+∞` off the admissible
/// set; points outside `region` are excluded automatically. `warm` starts are always
/// descended from.
pub fn minimize<F>(objective: F, region: &Region, warm: &[Vec<f64>], opts: &InnerOptions, seed: u64) -> Result<InnerResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let barrier = |x: &[f64]| {
        if region.contains(x) {
            let v = objective(x);
            if v.is_nan() { f64::INFINITY } else { v }
        } else {
            f64::INFINITY
        }
    };
    let pool = seeds(region, opts, seed);
    let values = par::map(&pool, |x| barrier(x));
    let mut ranked: Vec<(Vec<f64>, f64)> = pool
        .into_iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .collect();
    ranked.sort_by(better);
    ranked.dedup_by(|a, b| a.0 == b.0);
    let n_starts = opts.starts_per_dim * region.dim();
    ranked.truncate(n_starts);
    for w in warm {
        if w.len() == region.dim() {
            let v = barrier(w);
            if v.is_finite() && !ranked.iter().any(|(p, _)| p == w) {
                ranked.push((w.clone(), v));
            }
        }
    }
    if ranked.is_empty() {
        return Err(Error::EmptyRegion(format!("no admissible point with finite value in {region}")));
    }
    let widths = region.widths();
    let results = par::map(&ranked, |(x, v)| pattern_search(&barrier, x.clone(), *v, &widths, opts));
    Ok(select_best(results))
}

/// Single pattern-search descent from `x0` over `region`.
pub fn descend<F>(objective: F, region: &Region, x0: &[f64], opts: &InnerOptions) -> InnerResult
where
    F: Fn(&[f64]) -> f64,
{
    let barrier = |x: &[f64]| {
        if region.contains(x) {
            let v = objective(x);
            if v.is_nan() { f64::INFINITY } else { v }
        } else {
            f64::INFINITY
        }
    };
    let v0 = barrier(x0);
    pattern_search(&barrier, x0.to_vec(), v0, &region.widths(), opts)
}

/// The lowest value, ties within [`TIE_TOLERANCE`] broken by the lexicographically smallest point.
pub(crate) fn select_best(results: Vec<InnerResult>) -> InnerResult {
    let best = results.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    results
        .into_iter()
        .filter(|r| r.value <= best + TIE_TOLERANCE)
        .min_by(|a, b| lex_cmp(&a.x, &b.x))
        .expect("non-empty result set")
}
