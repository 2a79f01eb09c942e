//! Rates of steepest descent, strong slopes, inf-stationary points and the infeasible
//! stationarity filter `λ > L/a`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner::{self, InnerOptions};
use crate::local::check_region_dim;
use crate::par;
use crate::problem::{lex_cmp, Ambient, ConstrainedProblem, ExtReal, Norm, PenaltyFunction, Point, Region, PHI_ZERO};
use crate::sampling::{self, SamplingSchedule};
use crate::witness::Witness;

/// Default tolerance on the rate for inf-stationarity.
pub const DEFAULT_TOL: f64 = 1e-4;
/// Clusters with `φ` at or below this are feasible.
pub const FEASIBLE_PHI: f64 = 1e-8;
/// Stationary points closer than this are merged.
pub const CLUSTER_RADIUS: f64 = 1e-4;
/// Rate and Cauchy tolerance of the Palais–Smale probe.
pub const PS_TOLERANCE: f64 = 1e-3;
/// Minimum sequence length accepted by the Palais–Smale probe.
pub const PS_MIN_LEN: usize = 8;
/// Cap on the number of pairs used by the Lipschitz estimate.
pub const MAX_LIPSCHITZ_PAIRS: usize = 1_000_000;

/// The schedule used for descent rates: shells from `1e−3` down to about `2e−9`.
pub fn default_schedule(dim: usize) -> SamplingSchedule {
    SamplingSchedule::default_for(dim).with_r0(1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentEstimate {
    /// Estimate of `g↓_A(x)`; `+∞` (null in JSON) when no tail sample lies in A.
    pub rate: f64,
    pub strong_slope: f64,
    pub samples: usize,
    pub shells_used: usize,
}

fn rate_with<G>(g: &G, in_a: &(dyn Fn(&[f64]) -> bool + Sync), x: &[f64], schedule: &SamplingSchedule, norm: Norm) -> Result<DescentEstimate>
where
    G: Fn(&[f64]) -> ExtReal + Sync,
{
    schedule.validate()?;
    let gx = g(x).finite().ok_or_else(|| Error::Precondition("g(x) = +inf".into()))?;
    let start = schedule.tail_start();
    let per_shell = par::map_range(schedule.shells - start, |i| {
        let mut min = f64::INFINITY;
        let mut n = 0;
        for y in schedule.shell_points(x, start + i, norm) {
            if !in_a(&y) {
                continue;
            }
            if let ExtReal::Finite(gy) = g(&y) {
                let d = norm.distance(&y, x);
                if d > 0.0 {
                    n += 1;
                    min = min.min((gy - gx) / d);
                }
            }
        }
        (min, n)
    });
    let rate = per_shell.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    Ok(DescentEstimate {
        rate,
        strong_slope: (-rate).max(0.0),
        samples: per_shell.iter().map(|s| s.1).sum(),
        shells_used: per_shell.iter().filter(|s| s.1 > 0).count(),
    })
}

/// `g↓_A(x) = liminf (g(y) − g(x)) / ‖y − x‖`: minimum over the tail shells of the
/// per-shell minimum ratio, with the Euclidean norm.
pub fn rate_of_steepest_descent<G>(g: G, ambient: &Ambient, x: &[f64], schedule: &SamplingSchedule) -> Result<DescentEstimate>
where
    G: Fn(&[f64]) -> ExtReal + Sync,
{
    if !ambient.contains(x) {
        return Err(Error::Precondition("x is not in the ambient set".into()));
    }
    rate_with(&g, &|y: &[f64]| ambient.contains(y), x, schedule, Norm::Euclidean)
}

/// Rate of steepest descent of `F_λ` over A in the problem norm.
pub fn penalized_rate(pf: &PenaltyFunction, x: &[f64], schedule: &SamplingSchedule) -> Result<DescentEstimate> {
    let p = pf.problem();
    rate_with(&|y: &[f64]| pf.eval(y), &|y: &[f64]| p.in_ambient(y), x, schedule, p.norm())
}

/// Rate of steepest descent of φ over A in the problem norm.
pub fn penalty_rate(problem: &ConstrainedProblem, x: &[f64], schedule: &SamplingSchedule) -> Result<DescentEstimate> {
    rate_with(
        &|y: &[f64]| ExtReal::Finite(problem.penalty(y)),
        &|y: &[f64]| problem.in_ambient(y),
        x,
        schedule,
        problem.norm(),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryCluster {
    pub x: Point,
    pub rate: f64,
    pub phi: f64,
    pub feasible: bool,
    pub members: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    pub lambda: f64,
    pub clusters: Vec<StationaryCluster>,
    /// Seeds whose search ended at a point with rate below `−tol`.
    pub unresolved: usize,
    pub tol: f64,
}

impl StationaryReport {
    pub fn infeasible(&self) -> impl Iterator<Item = &StationaryCluster> {
        self.clusters.iter().filter(|c| !c.feasible)
    }
}

/// Inf-stationary points of `F_λ` reached from deterministic seeds in `region`.
///
/// Each seed is first descended on `F_λ`. When the rate there is still below `−tol`
/// (typically a region boundary point), the estimated strong slope is minimised
/// from that point, which reaches stationary points that are not local minimisers.
pub fn find_inf_stationary(
    pf: &PenaltyFunction,
    region: &Region,
    n_seeds: usize,
    schedule: &SamplingSchedule,
    tol: f64,
    seed: u64,
) -> Result<StationaryReport> {
    let problem = pf.problem();
    check_region_dim(problem, region)?;
    schedule.validate()?;
    let mut starts = region.corners();
    starts.push(region.center());
    starts.extend(sampling::cloud(region, n_seeds, &[seed, 0x57A7]));
    let descent_opts = InnerOptions { max_evals: 20_000, ..InnerOptions::default() };
    let slope_opts = InnerOptions { max_evals: 1_000, ..InnerOptions::default() };
    let value = |x: &[f64]| if problem.in_ambient(x) { pf.eval(x).to_f64() } else { f64::INFINITY };
    let slope = |x: &[f64]| {
        if !problem.in_ambient(x) || !pf.eval(x).is_finite() {
            return f64::INFINITY;
        }
        penalized_rate(pf, x, schedule).map_or(f64::INFINITY, |e| e.strong_slope)
    };
    let outcomes = par::map(&starts, |x0| {
        if !value(x0).is_finite() {
            return None;
        }
        let x1 = inner::descend(value, region, x0, &descent_opts).x;
        let r1 = penalized_rate(pf, &x1, schedule).ok()?.rate;
        if r1 >= -tol {
            return Some(Ok((x1, r1)));
        }
        let x2 = inner::descend(slope, region, &x1, &slope_opts).x;
        let r2 = penalized_rate(pf, &x2, schedule).ok()?.rate;
        Some(if r2 >= -tol { Ok((x2, r2)) } else { Err(()) })
    });
    let unresolved = outcomes.iter().filter(|o| matches!(o, Some(Err(())))).count();
    let mut found: Vec<(Vec<f64>, f64)> = outcomes.into_iter().flatten().flatten().collect();
    found.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let norm = problem.norm();
    let mut clusters: Vec<StationaryCluster> = Vec::new();
    for (x, rate) in found {
        if let Some(c) = clusters.iter_mut().find(|c| norm.distance(c.x.coords(), &x) < CLUSTER_RADIUS) {
            c.members += 1;
            continue;
        }
        let phi = problem.penalty(&x);
        clusters.push(StationaryCluster { x: Point::from_vec(x), rate, phi, feasible: phi <= FEASIBLE_PHI, members: 1 });
    }
    Ok(StationaryReport { lambda: pf.lambda(), clusters, unresolved, tol })
}

/// `L/a`: no inf-stationary points of `F_λ` outside Ω for `λ > L/a`.
pub fn infeasible_stationarity_bound(l: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("a must be positive, got {a}")));
    }
    if !(l >= 0.0) {
        return Err(Error::Precondition(format!("L must be non-negative, got {l}")));
    }
    Ok(l / a)
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentHypothesisReport {
    pub a: f64,
    /// Infeasible samples of `region ∩ A` tested.
    pub samples: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Largest rate of φ observed (the hypothesis asks for at most `−a`).
    pub worst_rate: f64,
    pub witnesses: Vec<Witness>,
}

/// Checks `φ↓_A(x) ≤ −a` (up to [`DEFAULT_TOL`]) at infeasible samples of `region`.
pub fn verify_descent_hypothesis(
    problem: &ConstrainedProblem,
    region: &Region,
    a: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DescentHypothesisReport> {
    check_region_dim(problem, region)?;
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("a must be positive, got {a}")));
    }
    let schedule = default_schedule(problem.dim());
    let mut pts = region.corners();
    pts.extend(sampling::cloud(region, n_samples, &[seed, 0xDE5C]));
    let pts: Vec<Vec<f64>> = pts
        .into_iter()
        .filter(|x| problem.in_ambient(x) && problem.penalty(x) > PHI_ZERO)
        .collect();
    let rates = par::map(&pts, |x| penalty_rate(problem, x, &schedule).map(|e| e.rate));
    let rates = rates.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut witnesses = Vec::new();
    let mut violations = 0;
    for (x, r) in pts.iter().zip(&rates) {
        if *r > -a + DEFAULT_TOL {
            violations += 1;
            if witnesses.len() < 8 {
                witnesses.push(Witness::new(x, *r));
            }
        }
    }
    let samples = pts.len();
    Ok(DescentHypothesisReport {
        a,
        samples,
        violations,
        violation_fraction: if samples == 0 { 0.0 } else { violations as f64 / samples as f64 },
        worst_rate: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        witnesses,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PalaisSmaleProbe {
    pub violates: bool,
    pub tail_phi: Vec<f64>,
    pub phi_to_zero: bool,
    pub tail_rates: Vec<f64>,
    pub rates_nonnegative: bool,
    pub min_tail_distance: f64,
    pub has_cauchy_pair: bool,
}

/// Tests whether an infeasible sequence witnesses failure of the generalized
/// Palais–Smale condition: along the tail (last third) φ decreases to at most 1e−3, the
/// descent rates of φ stay above −1e−3 and no two tail points are within 1e−3.
pub fn palais_smale_probe(problem: &ConstrainedProblem, sequence: &[Point]) -> Result<PalaisSmaleProbe> {
    if sequence.len() < PS_MIN_LEN {
        return Err(Error::Precondition(format!(
            "sequence needs at least {PS_MIN_LEN} points, got {}",
            sequence.len()
        )));
    }
    for x in sequence {
        problem.check_dim(x)?;
        if !problem.in_ambient(x) || problem.penalty(x) <= PHI_ZERO {
            return Err(Error::Precondition("sequence points must be infeasible points of A".into()));
        }
    }
    let tail = &sequence[sequence.len() - sampling::tail_len(sequence.len())..];
    let tail_phi: Vec<f64> = tail.iter().map(|x| problem.penalty(x)).collect();
    let phi_to_zero = tail_phi.windows(2).all(|w| w[1] <= w[0])
        && tail_phi.iter().copied().fold(f64::INFINITY, f64::min) <= PS_TOLERANCE;
    let schedule = default_schedule(problem.dim());
    let tail_rates = par::map(tail, |x| penalty_rate(problem, x, &schedule).map(|e| e.rate))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let rates_nonnegative = tail_rates.iter().all(|r| *r >= -PS_TOLERANCE);
    let norm = problem.norm();
    let mut min_tail_distance = f64::INFINITY;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            min_tail_distance = min_tail_distance.min(norm.distance(&tail[i], &tail[j]));
        }
    }
    let has_cauchy_pair = min_tail_distance < PS_TOLERANCE;
    Ok(PalaisSmaleProbe {
        violates: phi_to_zero && rates_nonnegative && !has_cauchy_pair,
        tail_phi,
        phi_to_zero,
        tail_rates,
        rates_nonnegative,
        min_tail_distance,
        has_cauchy_pair,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzEstimate {
    /// Largest sampled difference quotient; a lower estimate of the true constant.
    pub l: f64,
    pub pairs: usize,
}

/// Lower estimate of the Lipschitz constant of f on `region ∖ Ω` from pairwise quotients.
pub fn estimate_lipschitz(problem: &ConstrainedProblem, region: &Region, n_samples: usize, seed: u64) -> Result<LipschitzEstimate> {
    check_region_dim(problem, region)?;
    let cap = ((1.0 + (1.0 + 8.0 * MAX_LIPSCHITZ_PAIRS as f64).sqrt()) / 2.0) as usize;
    let mut pts = region.corners();
    pts.extend(sampling::cloud(region, n_samples, &[seed, 0x11B5]));
    let pts: Vec<(Vec<f64>, f64)> = pts
        .into_iter()
        .filter(|x| problem.in_ambient(x) && problem.penalty(x) > PHI_ZERO)
        .filter_map(|x| problem.objective(&x).finite().map(|f| (x, f)))
        .take(cap)
        .collect();
    let norm = problem.norm();
    let per_row = par::map_range(pts.len(), |i| {
        let mut best = 0.0f64;
        for j in i + 1..pts.len() {
            let d = norm.distance(&pts[i].0, &pts[j].0);
            if d > 0.0 {
                best = best.max((pts[i].1 - pts[j].1).abs() / d);
            }
        }
        best
    });
    let n = pts.len();
    Ok(LipschitzEstimate { l: per_row.into_iter().fold(0.0, f64::max), pairs: n * n.saturating_sub(1) / 2 })
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterScan {
    pub lambdas: Vec<f64>,
    pub infeasible_clusters: Vec<usize>,
    /// Smallest ladder value from which no infeasible cluster was found.
    pub threshold: Option<f64>,
}

/// Runs [`find_inf_stationary`] along a ladder and locates where infeasible clusters vanish.
pub fn filter_threshold_scan(
    problem: &ConstrainedProblem,
    ladder: &[f64],
    region: &Region,
    n_seeds: usize,
    seed: u64,
) -> Result<FilterScan> {
    let schedule = default_schedule(problem.dim());
    let mut counts = Vec::with_capacity(ladder.len());
    for &l in ladder {
        let pf = PenaltyFunction::new(problem.clone(), l)?;
        counts.push(find_inf_stationary(&pf, region, n_seeds, &schedule, DEFAULT_TOL, seed)?.infeasible().count());
    }
    let mut threshold = None;
    for i in (0..ladder.len()).rev() {
        if counts[i] > 0 {
            break;
        }
        threshold = Some(ladder[i]);
    }
    Ok(FilterScan { lambdas: ladder.to_vec(), infeasible_clusters: counts, threshold })
}
