//! Perturbed feasible families `Ω(p)`, the optimal value function `h(p)` and calmness.

use std::sync::Arc;

use serde::Serialize;

use crate::divergence::{diverges, DIVERGENCE_THRESHOLD};
use crate::error::{Error, Result};
use crate::inner::{self, InnerOptions};
use crate::local::{check_region_dim, estimate_lambda_bar, LambdaBarEstimate, LocalVerdict};
use crate::modulus::{dyadic_grid, RateModulus};
use crate::par;
use crate::problem::{ConstrainedProblem, Point, Region, PHI_ZERO};
use crate::sampling::{tail_len, SamplingSchedule};
use crate::witness::Witness;

pub type FeasibleAtFn = Arc<dyn Fn(f64, &[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum FamilyKind {
    /// `Ω(p) = {x ∈ A : φ(x) ≤ p}`.
    PhiLevel,
    /// `Ω(p) = Ω` for every `p`.
    Constant,
    /// User-supplied scalar family with its inverse distance `d(0, Ω⁻¹(x))`.
    Custom { feasible_at: FeasibleAtFn, inverse_distance: crate::problem::RealFn },
}

/// A scalar family `p ↦ Ω(p)` with base point `p* = 0`.
#[derive(Clone)]
pub struct PerturbedFamily {
    problem: ConstrainedProblem,
    kind: FamilyKind,
}

impl std::fmt::Debug for PerturbedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            FamilyKind::PhiLevel => "phi_level",
            FamilyKind::Constant => "constant",
            FamilyKind::Custom { .. } => "custom",
        };
        f.debug_struct("PerturbedFamily").field("problem", &self.problem.name()).field("kind", &kind).finish()
    }
}

impl PerturbedFamily {
    pub fn phi_level(problem: &ConstrainedProblem) -> Self {
        PerturbedFamily { problem: problem.clone(), kind: FamilyKind::PhiLevel }
    }

    pub fn constant(problem: &ConstrainedProblem) -> Self {
        PerturbedFamily { problem: problem.clone(), kind: FamilyKind::Constant }
    }

    pub fn custom(
        problem: &ConstrainedProblem,
        feasible_at: impl Fn(f64, &[f64]) -> bool + Send + Sync + 'static,
        inverse_distance: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        PerturbedFamily {
            problem: problem.clone(),
            kind: FamilyKind::Custom { feasible_at: Arc::new(feasible_at), inverse_distance: Arc::new(inverse_distance) },
        }
    }

    pub fn problem(&self) -> &ConstrainedProblem {
        &self.problem
    }

    /// `x ∈ Ω(p)`; at `p = 0` this is membership in Ω up to φ ≤ 1e−12.
    pub fn feasible_at(&self, p: f64, x: &[f64]) -> bool {
        if !self.problem.in_ambient(x) {
            return false;
        }
        match &self.kind {
            FamilyKind::PhiLevel => self.problem.penalty(x) <= p.max(PHI_ZERO),
            FamilyKind::Constant => self.problem.penalty(x) <= PHI_ZERO,
            FamilyKind::Custom { feasible_at, .. } => feasible_at(p, x),
        }
    }

    /// `d(p*, Ω⁻¹(x))`; equals `φ(x)` for the φ-level family.
    pub fn inverse_distance(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FamilyKind::PhiLevel => self.problem.penalty(x),
            FamilyKind::Constant => {
                if self.problem.penalty(x) <= PHI_ZERO { 0.0 } else { f64::INFINITY }
            }
            FamilyKind::Custom { inverse_distance, .. } => inverse_distance(x),
        }
    }
}

/// Samples of `h(p) = inf_{Ω(p)} f` on a grid decreasing to 0.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalValueSamples {
    pub p_grid: Vec<f64>,
    /// `h(p)`; `+∞` (serialised as null) where `Ω(p) ∩ region` looked empty.
    pub h_vals: Vec<f64>,
    pub h0: f64,
    /// `(h(p) − h(0)) / p`.
    pub slope_trace: Vec<f64>,
    pub calm_from_below: bool,
    pub modulus_estimate: f64,
    pub minimizers: Vec<Option<Point>>,
}

impl OptimalValueSamples {
    /// Samples from known values (no solves); calmness is evaluated with `ω = identity`.
    pub fn from_values(p_grid: Vec<f64>, h_vals: Vec<f64>, h0: f64) -> Result<Self> {
        if p_grid.len() != h_vals.len() || p_grid.is_empty() {
            return Err(Error::Precondition("p grid and h values must be non-empty and of equal length".into()));
        }
        check_grid(&p_grid)?;
        let minimizers = vec![None; p_grid.len()];
        let mut s = OptimalValueSamples {
            slope_trace: p_grid.iter().zip(&h_vals).map(|(p, h)| (h - h0) / p).collect(),
            p_grid,
            h_vals,
            h0,
            calm_from_below: false,
            modulus_estimate: 0.0,
            minimizers,
        };
        if h0.is_finite() {
            let c = check_calm_from_below(&s, &RateModulus::identity())?;
            s.calm_from_below = c.calm;
            s.modulus_estimate = c.l_estimate;
        }
        Ok(s)
    }
}

fn check_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.iter().any(|p| !(*p > 0.0)) || p_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("p grid must be positive and strictly decreasing".into()));
    }
    Ok(())
}

/// The default grid `p_j = 2^{−j}`, `j = 0..20`.
pub fn default_p_grid() -> Vec<f64> {
    dyadic_grid(20)
}

/// Computes `h(p)` on `p_grid` (and `h(0)`) by barrier solves over `Ω(p) ∩ region`.
pub fn optimal_value_function(
    family: &PerturbedFamily,
    p_grid: &[f64],
    region: &Region,
    opts: &InnerOptions,
    seed: u64,
) -> Result<OptimalValueSamples> {
    let problem = family.problem();
    check_region_dim(problem, region)?;
    check_grid(p_grid)?;
    let solve = |p: f64| -> Option<(f64, Vec<f64>)> {
        let objective = |x: &[f64]| {
            if family.feasible_at(p, x) {
                problem.objective(x).to_f64()
            } else {
                f64::INFINITY
            }
        };
        let warm: Vec<Vec<f64>> = problem
            .with_region(region.clone())
            .ok()
            .and_then(|q| q.find_feasible_point(1024, seed))
            .map(|x| vec![x.into_vec()])
            .unwrap_or_default();
        inner::minimize(objective, region, &warm, opts, seed).ok().map(|r| (r.value, r.x))
    };
    let h0 = solve(0.0).map(|r| r.0).ok_or_else(|| {
        Error::InfeasibleRegion(format!("Omega(0) has no point with finite objective in {region}"))
    })?;
    let solved = par::map(p_grid, |p| solve(*p));
    let h_vals: Vec<f64> = solved.iter().map(|s| s.as_ref().map_or(f64::INFINITY, |r| r.0)).collect();
    let minimizers = solved.into_iter().map(|s| s.map(|r| Point::from_vec(r.1))).collect();
    let mut samples = OptimalValueSamples::from_values(p_grid.to_vec(), h_vals, h0)?;
    samples.minimizers = minimizers;
    Ok(samples)
}

#[derive(Debug, Clone, Serialize)]
pub struct CalmFromBelow {
    pub calm: bool,
    pub l_estimate: f64,
    /// `inf (h(p) − h(0)) / ω(p)` over the grid tail.
    pub tail_inf: f64,
}

/// `h` is calm from below when the tail ratios `(h(p) − h(0))/ω(p)` stay bounded below:
/// their infimum exceeds −1e6 and their magnitudes do not grow like a power of `1/p`.
pub fn check_calm_from_below(samples: &OptimalValueSamples, omega: &RateModulus) -> Result<CalmFromBelow> {
    if !samples.h0.is_finite() {
        return Err(Error::Precondition("h(0) is not finite".into()));
    }
    let n = samples.p_grid.len();
    let start = n - tail_len(n);
    let mut ratios = Vec::new();
    let mut scales = Vec::new();
    for (p, h) in samples.p_grid[start..].iter().zip(&samples.h_vals[start..]) {
        let w = omega.eval(*p);
        if !(w > 0.0) {
            return Err(Error::Precondition(format!("omega vanishes at p = {p}")));
        }
        if h.is_finite() {
            ratios.push((h - samples.h0) / w);
            scales.push(*p);
        }
    }
    if ratios.is_empty() {
        return Err(Error::Precondition("h is infinite on the whole grid tail".into()));
    }
    let tail_inf = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let magnitudes: Vec<f64> = ratios.iter().map(|r| -r).collect();
    let calm = tail_inf > -DIVERGENCE_THRESHOLD && !diverges(&magnitudes, &scales);
    Ok(CalmFromBelow { calm, l_estimate: (-tail_inf).max(0.0), tail_inf })
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaCalmness {
    pub calm: bool,
    pub a_estimate: f64,
    /// Per level `p_j`: `inf (f(x) − f(x*)) / ω(p_j)` over sampled `x ∈ Ω(p_j)`.
    pub level_inf: Vec<Option<f64>>,
    pub samples: usize,
    pub witnesses: Vec<Witness>,
}

/// ω-calmness of the perturbed problem at `x*`: levels are the shell radii and the
/// candidate points are all shell samples around `x*` lying in `Ω(p_j)`.
pub fn check_problem_omega_calmness(
    family: &PerturbedFamily,
    x_star: &[f64],
    omega: &RateModulus,
    schedule: &SamplingSchedule,
) -> Result<OmegaCalmness> {
    let problem = family.problem();
    problem.check_dim(x_star)?;
    schedule.validate()?;
    if !problem.is_feasible(x_star) {
        return Err(Error::Precondition("x* is not feasible".into()));
    }
    let f_star = problem
        .objective(x_star)
        .finite()
        .ok_or_else(|| Error::Precondition("f(x*) = +inf".into()))?;
    let shells = par::map_range(schedule.shells, |j| {
        schedule
            .shell_points(x_star, j, problem.norm())
            .into_iter()
            .filter(|y| problem.in_ambient(y))
            .filter_map(|y| problem.objective(&y).finite().map(|f| (y, f)))
            .collect::<Vec<_>>()
    });
    let pts: Vec<(Vec<f64>, f64)> = shells.into_iter().flatten().collect();
    let levels = schedule.radii();
    let per_level = par::map(&levels, |p| {
        let w = omega.eval(*p);
        let mut best: Option<(f64, usize)> = None;
        for (i, (y, f)) in pts.iter().enumerate() {
            if !family.feasible_at(*p, y) {
                continue;
            }
            let r = (f - f_star) / w;
            if best.is_none_or(|b| r < b.0) {
                best = Some((r, i));
            }
        }
        best
    });
    if levels.iter().any(|p| !(omega.eval(*p) > 0.0)) {
        return Err(Error::Precondition("omega must be positive on the levels".into()));
    }
    let start = schedule.tail_start();
    let tail: Vec<(f64, f64)> = per_level[start..]
        .iter()
        .zip(&levels[start..])
        .filter_map(|(b, p)| b.map(|b| (b.0, *p)))
        .collect();
    let witnesses = per_level[start..]
        .iter()
        .flatten()
        .map(|(r, i)| Witness::new(&pts[*i].0, *r))
        .collect();
    let tail_inf = tail.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
    let magnitudes: Vec<f64> = tail.iter().map(|t| -t.0).collect();
    let scales: Vec<f64> = tail.iter().map(|t| t.1).collect();
    let calm = tail.is_empty() || (tail_inf > -DIVERGENCE_THRESHOLD && !diverges(&magnitudes, &scales));
    Ok(OmegaCalmness {
        calm,
        a_estimate: if tail.is_empty() { 0.0 } else { (-tail_inf).max(0.0) },
        level_inf: per_level.iter().map(|b| b.map(|b| b.0)).collect(),
        samples: pts.len(),
        witnesses,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CalmnessCrossCheck {
    pub lambda_bar: LambdaBarEstimate,
    pub lambda_bar_finite: bool,
    pub calmness: OmegaCalmness,
    pub agree: bool,
}

/// Compares local exactness (finite `λ̄`) with calmness of the φ-level family (`ω = identity`).
pub fn cross_check_calmness_vs_exactness(
    problem: &ConstrainedProblem,
    x_star: &[f64],
    schedule: &SamplingSchedule,
) -> Result<CalmnessCrossCheck> {
    let lambda_bar = estimate_lambda_bar(problem, x_star, schedule)?;
    let lambda_bar_finite = lambda_bar.verdict != LocalVerdict::Diverging;
    let calmness =
        check_problem_omega_calmness(&PerturbedFamily::phi_level(problem), x_star, &RateModulus::identity(), schedule)?;
    let agree = lambda_bar_finite == calmness.calm;
    Ok(CalmnessCrossCheck { lambda_bar, lambda_bar_finite, calmness, agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::local::LambdaBarValue;

    fn load(id: &str) -> ConstrainedProblem {
        corpus::load(id, &Default::default()).unwrap().problem
    }

    #[test]
    fn phi_level_identities() {
        let p = load("example_1d");
        let fam = PerturbedFamily::phi_level(&p);
        for x in [-2.0, 0.0, 0.3, 2.5] {
            assert_eq!(fam.inverse_distance(&[x]), p.penalty(&[x]));
            assert_eq!(fam.feasible_at(0.0, &[x]), p.is_feasible(&[x]));
        }
        assert!(fam.feasible_at(0.5, &[0.5]));
        assert!(!fam.feasible_at(0.5, &[0.6]));
    }

    #[test]
    fn example_value_function() {
        let p = load("example_1d");
        let grid = default_p_grid();
        let s = optimal_value_function(&PerturbedFamily::phi_level(&p), &grid, &Region::interval(-3.0, 3.0).unwrap(), &InnerOptions::default(), 0)
            .unwrap();
        assert!(s.h0.abs() < 1e-12);
        for (pv, h) in grid.iter().zip(&s.h_vals) {
            assert!((h - (1.0 - (pv + 1.0).powi(2))).abs() < 1e-6, "p={pv} h={h}");
        }
        assert!(s.calm_from_below);
        assert!((s.modulus_estimate - 2.0).abs() < 0.05);
    }

    #[test]
    fn closed_form_calmness() {
        let grid = default_p_grid();
        let root: Vec<f64> = grid.iter().map(|p| -p.sqrt()).collect();
        let s = OptimalValueSamples::from_values(grid.clone(), root, 0.0).unwrap();
        assert!(!check_calm_from_below(&s, &RateModulus::identity()).unwrap().calm);
        let c = check_calm_from_below(&s, &RateModulus::power(1.0, 0.5).unwrap()).unwrap();
        assert!(c.calm);
        assert!((c.l_estimate - 1.0).abs() < 1e-12);
        let zero = OptimalValueSamples::from_values(grid.clone(), vec![0.0; grid.len()], 0.0).unwrap();
        assert!(zero.calm_from_below && zero.modulus_estimate == 0.0);
        let bad = OptimalValueSamples { h0: f64::INFINITY, ..zero };
        assert!(check_calm_from_below(&bad, &RateModulus::identity()).is_err());
    }

    #[test]
    fn omega_calmness_of_example() {
        let p = load("example_1d");
        let s = SamplingSchedule::default_for(1);
        let c = check_problem_omega_calmness(&PerturbedFamily::phi_level(&p), &[0.0], &RateModulus::identity(), &s).unwrap();
        assert!(c.calm);
        assert!((c.a_estimate - 2.0).abs() < 0.05, "{}", c.a_estimate);
        let k = check_problem_omega_calmness(&PerturbedFamily::constant(&p), &[0.0], &RateModulus::identity(), &s).unwrap();
        assert!(k.calm && k.a_estimate == 0.0);
    }

    #[test]
    fn cross_checks() {
        let s = SamplingSchedule::default_for(1);
        let e = cross_check_calmness_vs_exactness(&load("example_1d"), &[0.0], &s).unwrap();
        assert!(e.agree && e.lambda_bar_finite && e.calmness.calm);
        let LambdaBarValue::Finite(v) = e.lambda_bar.value else { panic!() };
        assert!((v - e.calmness.a_estimate).abs() < 0.05);
        let q = cross_check_calmness_vs_exactness(&load("sqrt_noncalm"), &[0.0], &s).unwrap();
        assert!(q.agree && !q.lambda_bar_finite && !q.calmness.calm);
    }
}
