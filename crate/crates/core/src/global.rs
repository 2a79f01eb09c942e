//! Global exactness: the minimiser map `G(λ)`, the sup formula for `λ*`, exactness on
//! bounded sets, the sublevel slabs `Ω_δ`, the exactness lemma bound and
//! (strong) non-degeneracy of computed minimiser paths.
//!
//! Every statement is certified only on the named bounded region.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner::{self, InnerOptions, InnerStatus};
use crate::local::check_region_dim;
use crate::par;
use crate::problem::{ConstrainedProblem, Point, Region, PHI_ZERO};
use crate::sampling::{self, SamplingSchedule};
use crate::witness::Witness;

/// Slack of [`check_exact_on_set`].
pub const EXACT_SLACK: f64 = 1e-9;
/// Tolerance on the norm trend of [`nondegeneracy_diagnostic`].
pub const TREND_TOLERANCE: f64 = 1e-6;
/// Distance to Ω under which a tail rung counts as approaching Ω.
pub const STRONG_DISTANCE: f64 = 1e-3;
/// Relative margin defining the region interior for path diagnostics.
pub const INTERIOR_MARGIN: f64 = 0.01;
/// Cloud refinements of the sup formula grow by this factor.
pub const REFINEMENT_FACTOR: usize = 4;
/// Fixed-region divergence requires the bound to exceed this after both refinements.
pub const SUP_DIVERGENCE_FLOOR: f64 = 1e4;

/// One rung of a penalty path: the selected minimiser of `F_λ` on `A ∩ region`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rung {
    pub lambda: f64,
    pub x: Point,
    pub f_val: f64,
    pub phi_val: f64,
    pub inner_status: InnerStatus,
}

impl Rung {
    pub fn value(&self) -> f64 {
        if self.phi_val == 0.0 { self.f_val } else { self.f_val + self.lambda * self.phi_val }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyPath {
    pub rungs: Vec<Rung>,
    pub fstar: Option<f64>,
    pub region: Region,
}

impl PenaltyPath {
    /// Indices `i` where rung `i+1` breaks `f↑` or `φ↓` by more than `tol`.
    pub fn monotonicity_violations(&self, tol: f64) -> Vec<usize> {
        self.rungs
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].f_val < w[0].f_val - tol || w[1].phi_val > w[0].phi_val + tol)
            .map(|(i, _)| i)
            .collect()
    }
}

fn penalized_objective(problem: &ConstrainedProblem, lambda: f64) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| {
        if problem.in_ambient(x) {
            problem.penalized(lambda, x).to_f64()
        } else {
            f64::INFINITY
        }
    }
}

/// Approximate global minimiser of `F_λ` on `A ∩ region`.
pub fn solve_g(problem: &ConstrainedProblem, lambda: f64, region: &Region, opts: &InnerOptions, seed: u64) -> Result<Rung> {
    solve_g_warm(problem, lambda, region, opts, seed, &[])
}

/// [`solve_g`] with extra starting points.
pub fn solve_g_warm(
    problem: &ConstrainedProblem,
    lambda: f64,
    region: &Region,
    opts: &InnerOptions,
    seed: u64,
    warm: &[Vec<f64>],
) -> Result<Rung> {
    check_region_dim(problem, region)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("penalty parameter must be >= 0, got {lambda}")));
    }
    let res = inner::minimize(penalized_objective(problem, lambda), region, warm, opts, seed)?;
    Ok(Rung {
        lambda,
        f_val: problem.objective(&res.x).to_f64(),
        phi_val: problem.penalty(&res.x),
        x: Point::from_vec(res.x),
        inner_status: res.status,
    })
}

/// Minimum of f over `Ω ∩ region` and a minimiser.
pub fn constrained_minimum(
    problem: &ConstrainedProblem,
    region: &Region,
    opts: &InnerOptions,
    seed: u64,
) -> Result<(f64, Point)> {
    check_region_dim(problem, region)?;
    let mut warm = Vec::new();
    if let Some(p) = problem.with_region(region.clone())?.find_feasible_point(4096, seed) {
        warm.push(p.into_vec());
    }
    let objective = |x: &[f64]| {
        if problem.is_feasible(x) {
            problem.objective(x).to_f64()
        } else {
            f64::INFINITY
        }
    };
    match inner::minimize(objective, region, &warm, opts, seed) {
        Ok(r) => Ok((r.value, Point::from_vec(r.x))),
        Err(Error::EmptyRegion(_)) => Err(Error::InfeasibleRegion(format!(
            "no feasible point with finite objective found in {region}"
        ))),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FstarSource {
    Supplied,
    Hint,
    Computed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fstar {
    pub value: f64,
    pub source: FstarSource,
    /// A feasible point attaining the value, when one was computed.
    pub point: Option<Point>,
}

/// `f*`: the supplied value, else the problem's hint, else a constrained solve. A minimiser
/// is computed in every case (it seeds the sup-formula samples).
pub fn resolve_fstar(
    problem: &ConstrainedProblem,
    region: &Region,
    fstar: Option<f64>,
    opts: &InnerOptions,
    seed: u64,
) -> Result<Fstar> {
    let computed = constrained_minimum(problem, region, opts, seed);
    let (value, source) = match (fstar, problem.fstar_hint()) {
        (Some(v), _) => (v, FstarSource::Supplied),
        (None, Some(v)) => (v, FstarSource::Hint),
        (None, None) => (computed.as_ref().map_err(Clone::clone)?.0, FstarSource::Computed),
    };
    Ok(Fstar { value, source, point: computed.ok().map(|c| c.1) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupVerdict {
    Finite,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Refinement {
    pub samples: usize,
    pub infeasible_samples: usize,
    pub lower_bound: f64,
}

/// Sampled `λ* = sup_{A∖Ω} (f* − f(x)) / φ(x)` on a region.
#[derive(Debug, Clone, Serialize)]
pub struct SupEstimate {
    pub region: Region,
    pub fstar: f64,
    /// Largest witnessed ratio; `−∞` when no infeasible sample was found.
    pub lower_bound: f64,
    pub refinements: Vec<Refinement>,
    pub verdict: SupVerdict,
    pub witness: Option<Witness>,
}

fn sup_ratio(problem: &ConstrainedProblem, fstar: f64, x: &[f64]) -> Option<f64> {
    if !problem.in_ambient(x) {
        return None;
    }
    let phi = problem.penalty(x);
    if phi <= PHI_ZERO {
        return None;
    }
    let f = problem.objective(x).finite()?;
    Some((fstar - f) / phi)
}

/// Points shared by every refinement: box corners and shrinking shells around `anchor`.
fn fixed_samples(problem: &ConstrainedProblem, region: &Region, anchor: Option<&[f64]>, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = region.corners();
    if let Some(a) = anchor {
        let schedule = SamplingSchedule::default_for(problem.dim()).with_seed(seed);
        for j in 0..schedule.shells {
            pts.extend(schedule.shell_points(a, j, problem.norm()).into_iter().filter(|y| region.contains(y)));
        }
    }
    pts
}

fn sup_on_region(
    problem: &ConstrainedProblem,
    region: &Region,
    n_samples: usize,
    seed: u64,
    fstar: f64,
    anchor: Option<&[f64]>,
) -> SupEstimate {
    let mut pts = fixed_samples(problem, region, anchor, seed);
    let n_fixed = pts.len();
    let largest = n_samples * REFINEMENT_FACTOR * REFINEMENT_FACTOR;
    pts.extend(sampling::cloud(region, largest, &[seed, 0x5DF]));
    let ratios = par::map(&pts, |x| sup_ratio(problem, fstar, x));

    let mut best: Option<usize> = None;
    let mut infeasible = 0;
    let mut refinements = Vec::with_capacity(3);
    let mut done = 0;
    for k in 0..3 {
        let upto = n_fixed + n_samples * REFINEMENT_FACTOR.pow(k);
        for (i, r) in ratios.iter().enumerate().take(upto).skip(done) {
            if let Some(r) = r {
                infeasible += 1;
                if best.is_none_or(|b| *r > ratios[b].unwrap()) {
                    best = Some(i);
                }
            }
        }
        done = upto;
        refinements.push(Refinement {
            samples: upto,
            infeasible_samples: infeasible,
            lower_bound: best.map_or(f64::NEG_INFINITY, |b| ratios[b].unwrap()),
        });
    }
    let lbs: Vec<f64> = refinements.iter().map(|r| r.lower_bound).collect();
    let verdict = if best.is_none() {
        SupVerdict::Inconclusive
    } else if lbs[0] > 0.0 && lbs[1] >= 2.0 * lbs[0] && lbs[2] >= 2.0 * lbs[1] && lbs[2] > SUP_DIVERGENCE_FLOOR {
        SupVerdict::Diverging
    } else {
        SupVerdict::Finite
    };
    SupEstimate {
        region: region.clone(),
        fstar,
        lower_bound: lbs[2],
        refinements,
        verdict,
        witness: best.map(|b| Witness::new(&pts[b], ratios[b].unwrap())),
    }
}

/// Sup formula on one region with three cloud refinements (`n`, `4n`, `16n` samples).
///
/// `fstar` defaults to the problem hint, then to a constrained solve on `region`.
pub fn lambda_star_sup(
    problem: &ConstrainedProblem,
    region: &Region,
    n_samples: usize,
    seed: u64,
    fstar: Option<f64>,
) -> Result<SupEstimate> {
    check_region_dim(problem, region)?;
    let fs = resolve_fstar(problem, region, fstar, &InnerOptions::default(), seed)?;
    Ok(sup_on_region(problem, region, n_samples.max(1), seed, fs.value, fs.point.as_ref().map(|p| p.coords())))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpandingSup {
    pub per_region: Vec<SupEstimate>,
    pub lower_bounds: Vec<f64>,
    pub verdict: SupVerdict,
}

/// Sup formula on a sequence of growing regions. Diverging when any region diverges or
/// the lower bound at least doubles at every expansion.
pub fn lambda_star_sup_expanding(
    problem: &ConstrainedProblem,
    regions: &[Region],
    n_samples: usize,
    seed: u64,
    fstar: Option<f64>,
) -> Result<ExpandingSup> {
    let first = regions.first().ok_or_else(|| Error::Config("no regions given".into()))?;
    for r in regions {
        check_region_dim(problem, r)?;
    }
    let fs = resolve_fstar(problem, first, fstar, &InnerOptions::default(), seed)?;
    let anchor = fs.point.as_ref().map(|p| p.coords());
    let per_region: Vec<SupEstimate> = regions
        .iter()
        .map(|r| sup_on_region(problem, r, n_samples.max(1), seed, fs.value, anchor))
        .collect();
    let lower_bounds: Vec<f64> = per_region.iter().map(|s| s.lower_bound).collect();
    let verdict = expanding_verdict(&per_region);
    Ok(ExpandingSup { per_region, lower_bounds, verdict })
}

fn expanding_verdict(per_region: &[SupEstimate]) -> SupVerdict {
    if per_region.iter().any(|s| s.verdict == SupVerdict::Diverging) {
        return SupVerdict::Diverging;
    }
    if per_region.iter().all(|s| s.verdict == SupVerdict::Inconclusive) {
        return SupVerdict::Inconclusive;
    }
    let lbs: Vec<f64> = per_region.iter().map(|s| s.lower_bound).collect();
    let doubling = lbs.len() >= 2 && lbs[0] > 0.0 && lbs.windows(2).all(|w| w[1] >= 2.0 * w[0]);
    if doubling { SupVerdict::Diverging } else { SupVerdict::Finite }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactOnSet {
    pub exact: bool,
    pub lambda: f64,
    /// `min F_λ − f*` over the samples.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
}

/// Whether `F_λ ≥ f* − 1e−9` on a deterministic sample of `C ∩ A`.
pub fn check_exact_on_set(
    problem: &ConstrainedProblem,
    set: &Region,
    lambda: f64,
    fstar: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ExactOnSet> {
    check_region_dim(problem, set)?;
    let mut pts = set.corners();
    pts.push(set.center());
    pts.extend(sampling::cloud(set, n_samples, &[seed, 0xC5E7]));
    let vals = par::map(&pts, |x| {
        if problem.in_ambient(x) {
            problem.penalized(lambda, x).to_f64()
        } else {
            f64::INFINITY
        }
    });
    let (i, min) = vals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let margin = min - fstar;
    let exact = margin >= -EXACT_SLACK;
    Ok(ExactOnSet {
        exact,
        lambda,
        worst_margin: margin,
        witness: (!exact).then(|| Witness::new(&pts[i], min)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaDelta {
    pub delta: f64,
    pub sampled: usize,
    #[serde(skip)]
    pub points: Vec<Vec<f64>>,
    pub size: usize,
    /// All cloud points lie in the region interior, away from its boundary.
    pub interior: bool,
}

/// Deterministic sample of `Ω_δ = {x ∈ A : φ(x) < δ}` inside `region`.
pub fn omega_delta(problem: &ConstrainedProblem, delta: f64, region: &Region, n_samples: usize, seed: u64) -> Result<OmegaDelta> {
    check_region_dim(problem, region)?;
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!("delta must be positive, got {delta}")));
    }
    let mut pts = region.corners();
    pts.extend(sampling::cloud(region, n_samples, &[seed, 0x0DE1]));
    let sampled = pts.len();
    let keep = par::map(&pts, |x| problem.in_ambient(x) && problem.penalty(x) < delta);
    let points: Vec<Vec<f64>> = pts.into_iter().zip(keep).filter(|(_, k)| *k).map(|(x, _)| x).collect();
    if points.is_empty() {
        return Err(Error::EmptyRegion(format!("no sample of {region} has phi < {delta}")));
    }
    let interior = points.iter().all(|x| region.is_interior(x, INTERIOR_MARGIN));
    Ok(OmegaDelta { delta, sampled, size: points.len(), points, interior })
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaBound {
    pub mu: f64,
    pub delta: f64,
    pub fstar: f64,
    /// `c = inf F_μ` on the first region.
    pub c: f64,
    pub c_per_region: Vec<f64>,
    pub lambda_star_omega_delta: f64,
    /// `max{λ*(Ω_δ), μ + (f* − c)/δ}`; absent when `F_μ` looks unbounded below.
    pub bound: Option<f64>,
    pub unbounded_below: bool,
}

/// Bound of the exactness lemma. With three or more (growing) regions, `F_μ` is flagged
/// unbounded below when `c` drops at every expansion by growing amounts.
#[allow(clippy::too_many_arguments)]
pub fn lemma_exactness_bound(
    problem: &ConstrainedProblem,
    mu: f64,
    delta: f64,
    regions: &[Region],
    opts: &InnerOptions,
    seed: u64,
    fstar: Option<f64>,
    n_samples: usize,
) -> Result<LemmaBound> {
    if !(mu >= 0.0) {
        return Err(Error::Precondition(format!("mu must be >= 0, got {mu}")));
    }
    let first = regions.first().ok_or_else(|| Error::Config("no regions given".into()))?;
    let fs = resolve_fstar(problem, first, fstar, opts, seed)?;
    let od = omega_delta(problem, delta, first, n_samples, seed)?;
    let ratios = par::map(&od.points, |x| sup_ratio(problem, fs.value, x));
    let lambda_od = ratios.into_iter().flatten().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let mut c_per_region = Vec::with_capacity(regions.len());
    let mut warm: Vec<Vec<f64>> = Vec::new();
    for r in regions {
        let rung = solve_g_warm(problem, mu, r, opts, seed, &warm)?;
        c_per_region.push(rung.value());
        warm = vec![rung.x.into_vec()];
    }
    let drops: Vec<f64> = c_per_region.windows(2).map(|w| w[0] - w[1]).collect();
    let unbounded_below =
        drops.len() >= 2 && drops.iter().all(|d| *d > 0.0) && drops.windows(2).all(|w| w[1] > w[0]);
    let c = c_per_region[0];
    let bound = (!unbounded_below).then(|| lambda_od.max(mu + (fs.value - c) / delta));
    Ok(LemmaBound {
        mu,
        delta,
        fstar: fs.value,
        c,
        c_per_region,
        lambda_star_omega_delta: lambda_od,
        bound,
        unbounded_below,
    })
}

/// Builds the path `λ ↦ x(λ)` over a strictly increasing ladder, warm-starting each rung.
pub fn build_penalty_path(
    problem: &ConstrainedProblem,
    ladder: &[f64],
    region: &Region,
    opts: &InnerOptions,
    seed: u64,
) -> Result<PenaltyPath> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("ladder must be non-empty and strictly increasing".into()));
    }
    let mut rungs: Vec<Rung> = Vec::with_capacity(ladder.len());
    for &lambda in ladder {
        let warm: Vec<Vec<f64>> = rungs.last().map(|r| vec![r.x.coords().to_vec()]).unwrap_or_default();
        rungs.push(solve_g_warm(problem, lambda, region, opts, seed, &warm)?);
    }
    Ok(PenaltyPath { rungs, fstar: problem.fstar_hint(), region: region.clone() })
}

#[derive(Debug, Clone, Serialize)]
pub struct NondegeneracyEvidence {
    pub tail_lambdas: Vec<f64>,
    pub tail_norms: Vec<f64>,
    pub tail_distances: Vec<f64>,
    pub all_interior: bool,
    pub norm_non_increasing: bool,
    pub distance_approximate: bool,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Nondegeneracy {
    pub nondegenerate: bool,
    pub strongly: bool,
    pub evidence: NondegeneracyEvidence,
}

/// Heuristic (strong) non-degeneracy flags for one computed selection of `G(·)`: the
/// tail rungs (last half) must stay inside the region with non-increasing norm, and
/// for strong non-degeneracy come within 1e−3 of Ω.
pub fn nondegeneracy_diagnostic(path: &PenaltyPath, problem: &ConstrainedProblem) -> Result<Nondegeneracy> {
    if path.rungs.len() < 4 {
        return Err(Error::Precondition(format!(
            "non-degeneracy needs at least 4 rungs, got {}",
            path.rungs.len()
        )));
    }
    let start = path.rungs.len() / 2;
    let tail = &path.rungs[start..];
    let norm = problem.norm();
    let tail_norms: Vec<f64> = tail.iter().map(|r| norm.norm(r.x.coords())).collect();
    let tail_distances = tail
        .iter()
        .map(|r| problem.distance_to_feasible(r.x.coords()))
        .collect::<Result<Vec<f64>>>()?;
    let all_interior = path.rungs.iter().all(|r| path.region.is_interior(r.x.coords(), INTERIOR_MARGIN));
    let norm_non_increasing = tail_norms
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + TREND_TOLERANCE) + TREND_TOLERANCE);
    let nondegenerate = all_interior && norm_non_increasing;
    let min_d = tail_distances.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Nondegeneracy {
        nondegenerate,
        strongly: nondegenerate && min_d < STRONG_DISTANCE,
        evidence: NondegeneracyEvidence {
            tail_lambdas: tail.iter().map(|r| r.lambda).collect(),
            tail_norms,
            tail_distances,
            all_interior,
            norm_non_increasing,
            distance_approximate: problem.distance_is_approximate(),
            note: "inspects a single computed selection of G; a negative flag falsifies, a positive one does not certify",
        },
    })
}
