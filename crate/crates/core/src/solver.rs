//! Adaptive exact-penalty method: a geometric λ-ladder of inner minimisations of `F_λ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::global::{solve_g_warm, PenaltyPath, Rung};
use crate::inner::{self, InnerOptions};
use crate::local::{check_region_dim, estimate_lambda_bar, least_local_parameter};
use crate::problem::{lex_cmp, ConstrainedProblem, Point, Region};
use crate::sampling::{self, SamplingSchedule};

/// Consecutive feasible rung values agreeing within this (relative to `max(1, |v|)`) stop the ladder.
pub const STABLE_TOL: f64 = 1e-6;
/// Boundary margin (fraction of the region width) of the escape test.
pub const ESCAPE_MARGIN: f64 = 0.05;
/// Safety factor applied to the largest local parameter by [`auto_lambda0`].
pub const AUTO_SAFETY: f64 = 1.5;
/// Number of feasible candidates polished by [`auto_lambda0`].
pub const AUTO_CANDIDATES: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Initial penalty parameter; `None` selects [`auto_lambda0`].
    pub lambda0: Option<f64>,
    pub ladder_factor: f64,
    pub max_rungs: usize,
    pub feas_tol: f64,
    /// Search region; `None` uses the problem's default region.
    pub region: Option<Region>,
    pub inner: InnerOptions,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda0: None,
            ladder_factor: 2.0,
            max_rungs: 25,
            feas_tol: 1e-8,
            region: None,
            inner: InnerOptions::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ladder_factor > 1.0 && self.ladder_factor.is_finite()) {
            return Err(Error::Config(format!("ladder_factor must be > 1, got {}", self.ladder_factor)));
        }
        if !(self.feas_tol > 0.0) {
            return Err(Error::Config(format!("feas_tol must be > 0, got {}", self.feas_tol)));
        }
        if self.max_rungs == 0 {
            return Err(Error::Config("max_rungs must be positive".into()));
        }
        if let Some(l) = self.lambda0 {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda0 must be >= 0, got {l}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    NotExactSuspected,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::NotExactSuspected => "not_exact_suspected",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Point,
    #[serde(rename = "f")]
    pub f_val: f64,
    #[serde(rename = "phi")]
    pub phi_val: f64,
    pub lambda_final: f64,
    /// Rungs whose minimiser escaped toward the region boundary.
    pub escaped: bool,
    #[serde(rename = "rungs")]
    pub path: PenaltyPath,
}

/// Next ladder value `max(factor·λ, λ + 1)`.
pub fn next_lambda(lambda: f64, factor: f64) -> f64 {
    (factor * lambda).max(lambda + 1.0)
}

fn feasible_samples(problem: &ConstrainedProblem, region: &Region, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let n = (1024 * problem.dim()).min(8192);
    let mut pts = vec![region.center()];
    pts.extend(region.corners());
    pts.extend(sampling::cloud(region, n, &[seed, 0xA170]));
    pts.into_iter()
        .filter(|x| region.contains(x) && problem.in_ambient(x) && problem.is_feasible(x))
        .filter_map(|x| problem.objective(&x).finite().map(|f| (x, f)))
        .collect()
}

/// Initial penalty parameter: `1.5 ×` the largest least local parameter over up to five
/// polished near-optimal feasible samples; `1.0` when that is zero or unavailable.
pub fn auto_lambda0(problem: &ConstrainedProblem, region: &Region, schedule: &SamplingSchedule) -> Result<f64> {
    check_region_dim(problem, region)?;
    let mut feas = feasible_samples(problem, region, schedule.seed);
    if feas.is_empty() {
        return Err(Error::InfeasibleRegion("no feasible sample in region".into()));
    }
    feas.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0)));
    let opts = InnerOptions { max_evals: 20_000, ..InnerOptions::default() };
    let restricted = |x: &[f64]| {
        if problem.in_ambient(x) && problem.is_feasible(x) {
            problem.objective(x).to_f64()
        } else {
            f64::INFINITY
        }
    };
    let norm = problem.norm();
    let mut polished: Vec<Vec<f64>> = Vec::new();
    for (x0, _) in feas.iter().take(AUTO_CANDIDATES) {
        let x = inner::descend(restricted, region, x0, &opts).x;
        if !polished.iter().any(|p| norm.distance(p, &x) < 1e-6) {
            polished.push(x);
        }
    }
    let mut best = 0.0f64;
    for x in &polished {
        if let Some(v) = estimate_lambda_bar(problem, x, schedule).ok().map(|e| least_local_parameter(&e)).and_then(|p| p.value()) {
            if v.is_finite() {
                best = best.max(v);
            }
        }
    }
    Ok(if best > 0.0 { AUTO_SAFETY * best } else { 1.0 })
}

fn escaping(rungs: &[Rung], region: &Region, feas_tol: f64, problem: &ConstrainedProblem) -> bool {
    if rungs.len() < 3 {
        return false;
    }
    let tail = &rungs[rungs.len() - 3..];
    let norm = problem.norm();
    let norms: Vec<f64> = tail.iter().map(|r| norm.norm(r.x.coords())).collect();
    tail.iter().all(|r| r.phi_val > feas_tol)
        && norms.windows(2).all(|w| w[1] > w[0])
        && !region.is_interior(tail[2].x.coords(), ESCAPE_MARGIN)
}

fn stable(a: &Rung, b: &Rung, feas_tol: f64) -> bool {
    let (va, vb) = (a.value(), b.value());
    a.phi_val <= feas_tol && b.phi_val <= feas_tol && (va - vb).abs() <= STABLE_TOL * va.abs().max(vb.abs()).max(1.0)
}

/// Runs the ladder until two consecutive feasible rungs agree in value, the rung
/// minimisers escape toward the region boundary, or `max_rungs` is exhausted.
pub fn solve(problem: &ConstrainedProblem, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let region = config.region.clone().unwrap_or_else(|| problem.region().clone());
    check_region_dim(problem, &region)?;
    let mut lambda = match config.lambda0 {
        Some(l) => l,
        None => auto_lambda0(problem, &region, &SamplingSchedule::default_for(problem.dim()).with_seed(config.seed))?,
    };
    let mut rungs: Vec<Rung> = Vec::new();
    let mut status = SolveStatus::NotExactSuspected;
    let mut escaped = false;
    for _ in 0..config.max_rungs {
        let warm: Vec<Vec<f64>> = rungs.last().map(|r| vec![r.x.coords().to_vec()]).unwrap_or_default();
        rungs.push(solve_g_warm(problem, lambda, &region, &config.inner, config.seed, &warm)?);
        let n = rungs.len();
        if n >= 2 && stable(&rungs[n - 2], &rungs[n - 1], config.feas_tol) {
            status = SolveStatus::Solved;
            break;
        }
        if escaping(&rungs, &region, config.feas_tol, problem) {
            escaped = true;
            break;
        }
        lambda = next_lambda(lambda, config.ladder_factor);
    }
    if status != SolveStatus::Solved
        && rungs.iter().all(|r| r.phi_val > config.feas_tol)
        && feasible_samples(problem, &region, config.seed).is_empty()
    {
        return Err(Error::InfeasibleRegion("no feasible point found in region".into()));
    }
    let last = rungs.last().expect("at least one rung").clone();
    Ok(SolveReport {
        status,
        x: last.x,
        f_val: last.f_val,
        phi_val: last.phi_val,
        lambda_final: last.lambda,
        escaped,
        path: PenaltyPath { rungs, fstar: problem.fstar_hint(), region },
    })
}
