//! Combined exactness diagnosis of `F_λ` on a region or on growing regions.

use serde::Serialize;

use crate::error::Result;
use crate::global::{
    check_exact_on_set, lambda_star_sup, lambda_star_sup_expanding, lemma_exactness_bound, nondegeneracy_diagnostic,
    resolve_fstar, ExactOnSet, Fstar, LemmaBound, Nondegeneracy, SupEstimate, SupVerdict,
};
use crate::inner::InnerOptions;
use crate::local::check_region_dim;
use crate::modulus::RateModulus;
use crate::perturbation::{
    check_calm_from_below, default_p_grid, optimal_value_function, CalmFromBelow, OptimalValueSamples, PerturbedFamily,
};
use crate::problem::{ConstrainedProblem, Region};
use crate::solver::{solve, SolveReport, SolveStatus, SolverConfig};

/// Expansion factors of the growing-region sequence.
pub const EXPANSIONS: [f64; 3] = [1.0, 10.0, 100.0];
/// Lemma slab width `δ`.
pub const LEMMA_DELTA: f64 = 1.0;
/// Safety factor over the sup-formula bound when confirming exactness on a fixed region.
pub const CONFIRM_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exact,
    NotExact,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Exact => "exact",
            Verdict::NotExact => "not_exact",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Exactness on one given region.
    Region,
    /// Exactness on the whole space, probed on growing regions.
    Global,
}

#[derive(Debug, Clone)]
pub struct ExactnessOptions {
    pub region: Option<Region>,
    pub fstar: Option<f64>,
    pub n_samples: usize,
    pub inner: InnerOptions,
    pub seed: u64,
}

impl ExactnessOptions {
    pub fn new(problem: &ConstrainedProblem) -> Self {
        ExactnessOptions {
            region: None,
            fstar: None,
            n_samples: (2048 * problem.dim()).min(16_384),
            inner: InnerOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactnessReport {
    pub problem: String,
    pub scope: Scope,
    pub regions: Vec<Region>,
    pub fstar: Fstar,
    pub sup: Vec<SupEstimate>,
    pub sup_verdict: SupVerdict,
    /// Largest witnessed `(f* − f)/φ`, a lower bound for the least exact parameter.
    pub lambda_star_lower: f64,
    pub solve: SolveReport,
    pub exact_checks: Vec<ExactOnSet>,
    pub lemma: Option<LemmaBound>,
    pub nondegeneracy: Option<Nondegeneracy>,
    pub value_function: Option<OptimalValueSamples>,
    pub calmness: Option<CalmFromBelow>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

/// Runs the sup formula, the adaptive solver, the exactness lemma, the non-degeneracy
/// diagnostic and the calmness of `h` and merges them into one verdict.
///
/// With an explicit region the question is exactness on that region; otherwise the
/// problem's default region is expanded by the factors in [`EXPANSIONS`].
pub fn analyze_exactness(problem: &ConstrainedProblem, opts: &ExactnessOptions) -> Result<ExactnessReport> {
    let (scope, base) = match &opts.region {
        Some(r) => (Scope::Region, r.clone()),
        None => (Scope::Global, problem.region().clone()),
    };
    check_region_dim(problem, &base)?;
    let regions: Vec<Region> = match scope {
        Scope::Region => vec![base.clone()],
        Scope::Global => EXPANSIONS.iter().map(|f| base.scaled(*f)).collect(),
    };
    let fstar = resolve_fstar(problem, &base, opts.fstar, &opts.inner, opts.seed)?;
    let (sup, sup_verdict) = match scope {
        Scope::Region => {
            let s = lambda_star_sup(problem, &base, opts.n_samples, opts.seed, Some(fstar.value))?;
            let v = s.verdict;
            (vec![s], v)
        }
        Scope::Global => {
            let e = lambda_star_sup_expanding(problem, &regions, opts.n_samples, opts.seed, Some(fstar.value))?;
            (e.per_region, e.verdict)
        }
    };
    let lambda_star_lower = sup.iter().map(|s| s.lower_bound).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let config = SolverConfig { region: Some(base.clone()), inner: opts.inner.clone(), seed: opts.seed, ..SolverConfig::default() };
    let solve = solve(problem, &config)?;
    let lemma = lemma_exactness_bound(
        problem,
        solve.lambda_final,
        LEMMA_DELTA,
        &regions,
        &opts.inner,
        opts.seed,
        Some(fstar.value),
        opts.n_samples,
    )
    .ok();
    let nondegeneracy = (solve.path.rungs.len() >= 4).then(|| nondegeneracy_diagnostic(&solve.path, problem).ok()).flatten();
    let value_function =
        optimal_value_function(&PerturbedFamily::phi_level(problem), &default_p_grid(), &base, &opts.inner, opts.seed).ok();
    let calmness = value_function.as_ref().and_then(|s| check_calm_from_below(s, &RateModulus::identity()).ok());

    let mut reasons = Vec::new();
    let mut not_exact = false;
    if sup_verdict == SupVerdict::Diverging {
        not_exact = true;
        reasons.push("sup-formula lower bounds diverge".to_string());
    }
    if let Some(c) = calmness.as_ref().filter(|c| !c.calm) {
        not_exact = true;
        reasons.push(format!("optimal value function is not calm from below (tail inf {:.6e})", c.tail_inf));
    }
    if solve.escaped {
        reasons.push("penalty-path minimisers escape toward the region boundary".to_string());
    }
    if lemma.as_ref().is_some_and(|l| l.unbounded_below) {
        reasons.push("penalty function looks unbounded below on growing regions".to_string());
    }
    if let Some(nd) = nondegeneracy.as_ref().filter(|n| !n.nondegenerate) {
        if !nd.evidence.all_interior || !nd.evidence.norm_non_increasing {
            reasons.push("penalty path is degenerate".to_string());
        }
    }
    let check_lambda = match scope {
        Scope::Region => CONFIRM_FACTOR * lambda_star_lower + 1.0,
        Scope::Global => solve.lambda_final,
    };
    let exact_checks = regions
        .iter()
        .map(|r| check_exact_on_set(problem, r, check_lambda, fstar.value, opts.n_samples, opts.seed ^ 0x5EED))
        .collect::<Result<Vec<_>>>()?;
    let confirmed = exact_checks.iter().all(|c| c.exact);
    let verdict = if not_exact {
        Verdict::NotExact
    } else {
        let supported = match scope {
            Scope::Region => sup_verdict == SupVerdict::Finite,
            Scope::Global => sup_verdict == SupVerdict::Finite && solve.status == SolveStatus::Solved,
        };
        if supported && confirmed {
            reasons.push(format!("F_lambda >= f* on all samples at lambda = {check_lambda:.6}"));
            Verdict::Exact
        } else {
            if !confirmed {
                reasons.push(format!("F_lambda < f* on a sample at lambda = {check_lambda:.6}"));
            }
            Verdict::Inconclusive
        }
    };
    Ok(ExactnessReport {
        problem: problem.name().to_string(),
        scope,
        regions,
        fstar,
        sup,
        sup_verdict,
        lambda_star_lower,
        solve,
        exact_checks,
        lemma,
        nondegeneracy,
        value_function,
        calmness,
        verdict,
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn run(id: &str, region: Option<Region>) -> ExactnessReport {
        let p = corpus::load(id, &Default::default()).unwrap().problem;
        let opts = ExactnessOptions { region, ..ExactnessOptions::new(&p) };
        analyze_exactness(&p, &opts).unwrap()
    }

    #[test]
    fn example_on_region_is_exact() {
        let r = run("example_1d", Some(Region::interval(-3.0, 3.0).unwrap()));
        assert_eq!(r.verdict, Verdict::Exact, "{:?}", r.reasons);
        assert!((r.lambda_star_lower - 5.0).abs() < 0.05);
    }

    #[test]
    fn example_globally_is_not_exact() {
        let r = run("example_1d", None);
        assert_eq!(r.verdict, Verdict::NotExact, "{:?}", r.reasons);
    }

    #[test]
    fn staircase_is_not_exact() {
        let r = run("stairs", None);
        assert_eq!(r.verdict, Verdict::NotExact, "{:?}", r.reasons);
        assert_eq!(r.solve.status, SolveStatus::NotExactSuspected);
    }

    #[test]
    fn convex_is_exact() {
        let r = run("convex_slater", None);
        assert_eq!(r.verdict, Verdict::Exact, "{:?}", r.reasons);
        assert!((r.lambda_star_lower - 4.0).abs() < 0.1, "{}", r.lambda_star_lower);
    }
}
