//! Local exactness: the sampled `λ̄(x*)`, least local exact parameters, local minimality
//! checks and error-bound verifications.

use serde::{Serialize, Serializer};

use crate::divergence::diverges;
use crate::error::{Error, Result};
use crate::modulus::RateModulus;
use crate::par;
use crate::problem::{ConstrainedProblem, ExtReal, PenaltyFunction, Region};
use crate::sampling::{self, tail_len, SamplingSchedule};
use crate::witness::Witness;

/// Samples with `φ(y)` at or below this are treated as points of M.
pub const RATIO_PHI_FLOOR: f64 = 1e-14;
/// Slack used by [`check_local_minimum`].
pub const LOCAL_MIN_SLACK: f64 = 1e-12;
/// Slack used by the error-bound verifications.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaBarValue {
    Finite(f64),
    MinusInfinity,
    Diverging,
}

impl Serialize for LambdaBarValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaBarValue::Finite(v) => s.serialize_f64(*v),
            LambdaBarValue::MinusInfinity => s.serialize_str("minus_infinity"),
            LambdaBarValue::Diverging => s.serialize_str("diverging"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalVerdict {
    Finite,
    Diverging,
    NoInfeasiblePoints,
}

/// Sampled estimate of `λ̄(x*) = limsup (f(x*) − f(y)) / φ(y)` over `y → x*`, `y ∈ A∖M`.
///
/// Every sampled ratio is a witness, so a finite value is a lower bound on the true
/// limsup; finiteness itself is only a heuristic verdict.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaBarEstimate {
    pub value: LambdaBarValue,
    /// Per-shell supremum; `None` when no sample of the shell lies in `A∖M`.
    pub per_shell_sup: Vec<Option<f64>>,
    pub samples_used: usize,
    pub skipped_infinite: usize,
    pub verdict: LocalVerdict,
    /// The maximising sample of each tail shell.
    pub witnesses: Vec<Witness>,
}

struct ShellSup {
    sup: Option<Witness>,
    used: usize,
    skipped: usize,
}

/// Estimates `λ̄(x*)` on shrinking shells; the value is the maximum over the tail shells.
pub fn estimate_lambda_bar(
    problem: &ConstrainedProblem,
    x_star: &[f64],
    schedule: &SamplingSchedule,
) -> Result<LambdaBarEstimate> {
    problem.check_dim(x_star)?;
    schedule.validate()?;
    if !problem.is_feasible(x_star) {
        return Err(Error::Precondition(format!(
            "x* = {:?} is not feasible (phi = {:e})",
            x_star,
            problem.penalty(x_star)
        )));
    }
    let f_star = problem.objective(x_star).finite().ok_or_else(|| {
        Error::Precondition("f(x*) = +inf".into())
    })?;
    let norm = problem.norm();
    let shells = par::map_range(schedule.shells, |j| {
        let mut out = ShellSup { sup: None, used: 0, skipped: 0 };
        for y in schedule.shell_points(x_star, j, norm) {
            if !problem.in_ambient(&y) {
                continue;
            }
            let phi = problem.penalty(&y);
            if phi <= RATIO_PHI_FLOOR {
                continue;
            }
            let fy = match problem.objective(&y) {
                ExtReal::Finite(v) => v,
                ExtReal::PosInf => {
                    out.skipped += 1;
                    continue;
                }
            };
            out.used += 1;
            let ratio = (f_star - fy) / phi;
            if out.sup.as_ref().is_none_or(|w| ratio > w.value) {
                out.sup = Some(Witness::new(&y, ratio));
            }
        }
        out
    });
    let per_shell_sup: Vec<Option<f64>> =
        shells.iter().map(|s| s.sup.as_ref().map(|w| w.value)).collect();
    let samples_used = shells.iter().map(|s| s.used).sum();
    let skipped_infinite = shells.iter().map(|s| s.skipped).sum();
    let tail = schedule.tail_start()..schedule.shells;
    let witnesses: Vec<Witness> = shells[tail.clone()].iter().filter_map(|s| s.sup.clone()).collect();

    if samples_used == 0 {
        return Ok(LambdaBarEstimate {
            value: LambdaBarValue::MinusInfinity,
            per_shell_sup,
            samples_used,
            skipped_infinite,
            verdict: LocalVerdict::NoInfeasiblePoints,
            witnesses,
        });
    }
    let tail_sups: Vec<Option<f64>> = per_shell_sup[tail.clone()].to_vec();
    let radii: Vec<f64> = tail.map(|j| schedule.radius(j)).collect();
    let (value, verdict) = if tail_sups.iter().all(Option::is_some) {
        let vals: Vec<f64> = tail_sups.iter().map(|v| v.unwrap()).collect();
        if diverges(&vals, &radii) {
            (LambdaBarValue::Diverging, LocalVerdict::Diverging)
        } else {
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (LambdaBarValue::Finite(max), LocalVerdict::Finite)
        }
    } else {
        match tail_sups.iter().flatten().copied().reduce(f64::max) {
            Some(max) => (LambdaBarValue::Finite(max), LocalVerdict::Finite),
            None => (LambdaBarValue::MinusInfinity, LocalVerdict::Finite),
        }
    };
    Ok(LambdaBarEstimate { value, per_shell_sup, samples_used, skipped_infinite, verdict, witnesses })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalParameter {
    Value(f64),
    NotExact,
}

impl LocalParameter {
    pub fn value(self) -> Option<f64> {
        match self {
            LocalParameter::Value(v) => Some(v),
            LocalParameter::NotExact => None,
        }
    }
}

/// `λ*(x*) = max{λ̄(x*), 0}`, or not exact when the estimate diverges.
pub fn least_local_parameter(est: &LambdaBarEstimate) -> LocalParameter {
    match est.value {
        LambdaBarValue::Diverging => LocalParameter::NotExact,
        LambdaBarValue::MinusInfinity => LocalParameter::Value(0.0),
        LambdaBarValue::Finite(v) => LocalParameter::Value(v.max(0.0)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalMinimumCheck {
    pub is_local_minimum: bool,
    pub lambda: f64,
    /// The sample with the lowest `F_λ` when it undercuts `F_λ(x*)`.
    pub witness: Option<Witness>,
}

/// Whether no sample of the three smallest shells undercuts `F_λ(x*)` by more than 1e−12.
pub fn check_local_minimum(
    pf: &PenaltyFunction,
    x_star: &[f64],
    schedule: &SamplingSchedule,
) -> Result<LocalMinimumCheck> {
    let problem = pf.problem();
    problem.check_dim(x_star)?;
    schedule.validate()?;
    if !problem.in_ambient(x_star) {
        return Err(Error::Precondition("x* is not in the ambient set".into()));
    }
    let base = pf.eval(x_star);
    let first = schedule.shells.saturating_sub(3);
    let per_shell = par::map_range(schedule.shells - first, |i| {
        let mut best: Option<Witness> = None;
        for y in schedule.shell_points(x_star, first + i, problem.norm()) {
            if !problem.in_ambient(&y) {
                continue;
            }
            if let ExtReal::Finite(v) = pf.eval(&y) {
                if best.as_ref().is_none_or(|w| v < w.value) {
                    best = Some(Witness::new(&y, v));
                }
            }
        }
        best
    });
    let lowest = per_shell
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.value < a.value { b } else { a });
    let witness = match (base, lowest) {
        (ExtReal::Finite(b), Some(w)) if w.value < b - LOCAL_MIN_SLACK => Some(w),
        (ExtReal::PosInf, Some(w)) => Some(w),
        _ => None,
    };
    Ok(LocalMinimumCheck { is_local_minimum: witness.is_none(), lambda: pf.lambda(), witness })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaEstimate {
    Finite(f64),
    Diverging,
}

/// `σ = limsup_{t→0+} ω(t)/η(t)` over the tail of a grid decreasing to 0.
pub fn error_bound_sigma(omega: &RateModulus, eta: &RateModulus, t_grid: &[f64]) -> Result<SigmaEstimate> {
    if t_grid.is_empty() {
        return Err(Error::Precondition("empty t grid".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0)) || t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("t grid must be positive and strictly decreasing".into()));
    }
    let mut ratios = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let e = eta.eval(t);
        if !(e > 0.0) {
            return Err(Error::Precondition(format!("eta vanishes at t = {t}")));
        }
        ratios.push(omega.eval(t) / e);
    }
    let start = t_grid.len() - tail_len(t_grid.len());
    let tail = &ratios[start..];
    if diverges(tail, &t_grid[start..]) {
        return Ok(SigmaEstimate::Diverging);
    }
    Ok(SigmaEstimate::Finite(tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
}

/// Outcome of a sampled inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Samples of `region ∩ A` at which the inequality was tested.
    pub samples: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Smallest `lhs − rhs` observed.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub distance_approximate: bool,
}

fn bound_cloud(region: &Region, n: usize, tags: &[u64]) -> Vec<Vec<f64>> {
    let mut pts = region.corners();
    pts.extend(sampling::cloud(region, n, tags));
    pts
}

fn summarize(margins: Vec<Option<(f64, Vec<f64>)>>, approx: bool) -> BoundReport {
    let mut samples = 0;
    let mut violations = 0;
    let mut worst: Option<(f64, Vec<f64>)> = None;
    for (m, x) in margins.into_iter().flatten() {
        samples += 1;
        if m < -BOUND_SLACK {
            violations += 1;
        }
        if worst.as_ref().is_none_or(|(w, _)| m < *w) {
            worst = Some((m, x));
        }
    }
    let worst_margin = worst.as_ref().map_or(f64::INFINITY, |(m, _)| *m);
    let witness = worst.filter(|(m, _)| *m < -BOUND_SLACK).map(|(m, x)| Witness::new(&x, m));
    BoundReport {
        samples,
        violations,
        violation_fraction: if samples == 0 { 0.0 } else { violations as f64 / samples as f64 },
        worst_margin,
        witness,
        distance_approximate: approx,
    }
}

/// Checks `φ(x) ≥ η(d(x, Ω))` on a deterministic sample of `region ∩ A`.
pub fn verify_penalty_error_bound(
    problem: &ConstrainedProblem,
    eta: &RateModulus,
    region: &Region,
    n_samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    check_region_dim(problem, region)?;
    let dist = problem.distance_source()?;
    let pts = bound_cloud(region, n_samples, &[seed, 0xE7A]);
    let norm = problem.norm();
    let margins = par::map(&pts, |x| {
        if !problem.in_ambient(x) {
            return None;
        }
        let d = distance_with(&dist, x, norm);
        Some((problem.penalty(x) - eta.eval(d), x.clone()))
    });
    Ok(summarize(margins, problem.distance_is_approximate()))
}

/// Checks `f(y) ≥ f(x*) − ω(d(y, Ω))` on a deterministic sample of `region ∩ A`.
pub fn verify_objective_bound(
    problem: &ConstrainedProblem,
    omega: &RateModulus,
    x_star: &[f64],
    region: &Region,
    n_samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    problem.check_dim(x_star)?;
    check_region_dim(problem, region)?;
    let f_star = problem
        .objective(x_star)
        .finite()
        .ok_or_else(|| Error::Precondition("f(x*) = +inf".into()))?;
    let dist = problem.distance_source()?;
    let pts = bound_cloud(region, n_samples, &[seed, 0x0B7]);
    let norm = problem.norm();
    let margins = par::map(&pts, |y| {
        if !problem.in_ambient(y) {
            return None;
        }
        let fy = problem.objective(y).finite()?;
        let d = distance_with(&dist, y, norm);
        Some((fy - (f_star - omega.eval(d)), y.clone()))
    });
    Ok(summarize(margins, problem.distance_is_approximate()))
}

pub(crate) fn distance_with(src: &crate::problem::DistanceSource, x: &[f64], norm: crate::problem::Norm) -> f64 {
    match src {
        crate::problem::DistanceSource::Oracle(d) => d(x),
        crate::problem::DistanceSource::Cloud(c) => crate::problem::cloud_distance(c, x, norm),
    }
}

pub(crate) fn check_region_dim(problem: &ConstrainedProblem, region: &Region) -> Result<()> {
    if region.dim() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: region.dim() });
    }
    Ok(())
}
