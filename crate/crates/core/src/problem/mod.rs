//! Constrained problems, penalty terms and penalty functions.

mod definition;
mod expr;
mod point;
mod region;

use std::fmt;
use std::sync::{Arc, OnceLock};

pub use definition::{NlpSpec, PenaltyAggregation, ProblemDefinition};
pub use expr::Expr;
pub use point::{ExtReal, Norm, Point};
pub(crate) use point::lex_cmp;
pub use region::Region;

use crate::error::{Error, Result};
use crate::modulus::RateModulus;
use crate::sampling;

pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> ExtReal + Send + Sync>;
pub type RealFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PredicateFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
type FeasibleCloud = Result<Arc<Vec<Vec<f64>>>>;

/// Penalty values at or below this count as zero when deciding membership in M.
pub const PHI_ZERO: f64 = 1e-12;

/// Tolerance used to collect the fallback feasible cloud.
const FALLBACK_PHI_TOL: f64 = 1e-10;
const FALLBACK_CLOUD_SIZE: usize = 4096;

/// The ambient set A: an optional membership predicate plus the default analysis window.
#[derive(Clone)]
pub struct Ambient {
    predicate: Option<PredicateFn>,
    region: Region,
}

impl Ambient {
    /// A = ℝⁿ, analysed on `region`.
    pub fn whole(region: Region) -> Self {
        Ambient { predicate: None, region }
    }

    pub fn with_predicate(region: Region, predicate: PredicateFn) -> Self {
        Ambient { predicate: Some(predicate), region }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.predicate.as_ref().is_none_or(|p| p(x))
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn is_whole_space(&self) -> bool {
        self.predicate.is_none()
    }
}

/// Source of `d(x, Ω)`.
#[derive(Clone)]
pub enum DistanceSource {
    Oracle(RealFn),
    /// Minimum distance to a rejection-sampled cloud of feasible points.
    Cloud(Arc<Vec<Vec<f64>>>),
}

/// Problem `min f(x)` subject to `x ∈ Ω = M ∩ A`, with `M = {φ = 0}`.
#[derive(Clone)]
pub struct ConstrainedProblem {
    name: String,
    description: String,
    dim: usize,
    objective: ObjectiveFn,
    penalty: RealFn,
    ambient: Ambient,
    distance: Option<RealFn>,
    fallback_cloud: Arc<OnceLock<FeasibleCloud>>,
    fstar_hint: Option<f64>,
    norm: Norm,
}

impl fmt::Debug for ConstrainedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstrainedProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("region", &self.ambient.region)
            .field("fstar_hint", &self.fstar_hint)
            .field("norm", &self.norm)
            .finish_non_exhaustive()
    }
}

pub struct ProblemBuilder {
    name: String,
    description: String,
    dim: usize,
    objective: ObjectiveFn,
    penalty: RealFn,
    region: Option<Region>,
    predicate: Option<PredicateFn>,
    distance: Option<RealFn>,
    fstar_hint: Option<f64>,
    norm: Norm,
}

impl ProblemBuilder {
    pub fn description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }

    pub fn region(mut self, r: Region) -> Self {
        self.region = Some(r);
        self
    }

    pub fn ambient_predicate(mut self, p: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.predicate = Some(Arc::new(p));
        self
    }

    pub fn distance(mut self, d: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.distance = Some(Arc::new(d));
        self
    }

    pub fn fstar(mut self, v: f64) -> Self {
        self.fstar_hint = Some(v);
        self
    }

    pub fn norm(mut self, n: Norm) -> Self {
        self.norm = n;
        self
    }

    pub fn build(self) -> Result<ConstrainedProblem> {
        if self.dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let region = match self.region {
            Some(r) => r,
            None => Region::cube(self.dim, -1.0, 1.0)?,
        };
        if region.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: region.dim() });
        }
        let ambient = Ambient { predicate: self.predicate, region };
        Ok(ConstrainedProblem {
            name: self.name,
            description: self.description,
            dim: self.dim,
            objective: self.objective,
            penalty: self.penalty,
            ambient,
            distance: self.distance,
            fallback_cloud: Arc::new(OnceLock::new()),
            fstar_hint: self.fstar_hint,
            norm: self.norm,
        })
    }
}

impl ConstrainedProblem {
    /// Starts a builder from an extended-real objective and a penalty term.
    pub fn builder(
        name: impl Into<String>,
        dim: usize,
        objective: impl Fn(&[f64]) -> ExtReal + Send + Sync + 'static,
        penalty: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> ProblemBuilder {
        ProblemBuilder {
            name: name.into(),
            description: String::new(),
            dim,
            objective: Arc::new(objective),
            penalty: Arc::new(penalty),
            region: None,
            predicate: None,
            distance: None,
            fstar_hint: None,
            norm: Norm::Euclidean,
        }
    }

    /// Builder for a real-valued objective.
    pub fn builder_real(
        name: impl Into<String>,
        dim: usize,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        penalty: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> ProblemBuilder {
        Self::builder(name, dim, move |x| ExtReal::from_f64(objective(x)), penalty)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn region(&self) -> &Region {
        &self.ambient.region
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    pub fn fstar_hint(&self) -> Option<f64> {
        self.fstar_hint
    }

    pub fn has_distance_oracle(&self) -> bool {
        self.distance.is_some()
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// `f(x)`.
    pub fn objective(&self, x: &[f64]) -> ExtReal {
        (self.objective)(x)
    }

    /// `φ(x) ≥ 0`.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        (self.penalty)(x)
    }

    pub fn in_ambient(&self, x: &[f64]) -> bool {
        self.ambient.contains(x)
    }

    /// `x ∈ Ω` up to [`PHI_ZERO`].
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.in_ambient(x) && self.penalty(x) <= PHI_ZERO
    }

    /// `F_λ(x) = f(x) + λφ(x)`.
    pub fn penalized(&self, lambda: f64, x: &[f64]) -> ExtReal {
        let phi = self.penalty(x);
        if phi == 0.0 {
            return self.objective(x);
        }
        self.objective(x).add_scaled(lambda, phi)
    }

    /// Distance source: the oracle when present, else the fallback feasible cloud.
    pub fn distance_source(&self) -> Result<DistanceSource> {
        if let Some(d) = &self.distance {
            return Ok(DistanceSource::Oracle(d.clone()));
        }
        let cloud = self.fallback_cloud.get_or_init(|| self.build_fallback_cloud());
        cloud.clone().map(DistanceSource::Cloud)
    }

    /// Whether `d(x, Ω)` is approximated from a sampled cloud.
    pub fn distance_is_approximate(&self) -> bool {
        self.distance.is_none()
    }

    /// `d(x, Ω)` from the oracle or the fallback cloud.
    pub fn distance_to_feasible(&self, x: &[f64]) -> Result<f64> {
        Ok(match self.distance_source()? {
            DistanceSource::Oracle(d) => d(x),
            DistanceSource::Cloud(c) => cloud_distance(&c, x, self.norm),
        })
    }

    fn build_fallback_cloud(&self) -> FeasibleCloud {
        let region = self.region();
        let mut rng = sampling::stream(&[0xD15C, self.dim as u64]);
        let mut pts = Vec::with_capacity(FALLBACK_CLOUD_SIZE);
        let max_draws = FALLBACK_CLOUD_SIZE * 64;
        let mut draws = 0;
        while pts.len() < FALLBACK_CLOUD_SIZE && draws < max_draws {
            let x = region.sample(&mut rng);
            draws += 1;
            if self.in_ambient(&x) && self.penalty(&x) <= FALLBACK_PHI_TOL {
                pts.push(x);
            }
        }
        if pts.is_empty() {
            return Err(Error::Config(format!(
                "problem `{}` has no distance oracle and no feasible point was found in {}",
                self.name, region
            )));
        }
        Ok(Arc::new(pts))
    }

    /// A copy with a different penalty term.
    pub fn with_penalty(&self, penalty: RealFn) -> ConstrainedProblem {
        let mut p = self.clone();
        p.penalty = penalty;
        p.fallback_cloud = Arc::new(OnceLock::new());
        p
    }

    /// A copy with a different objective.
    pub fn with_objective(&self, objective: ObjectiveFn) -> ConstrainedProblem {
        let mut p = self.clone();
        p.objective = objective;
        p.fstar_hint = None;
        p
    }

    /// A copy analysed on a different default region.
    pub fn with_region(&self, region: Region) -> Result<ConstrainedProblem> {
        if region.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: region.dim() });
        }
        let mut p = self.clone();
        p.ambient.region = region;
        p.fallback_cloud = Arc::new(OnceLock::new());
        Ok(p)
    }

    /// A copy with a `d(·, Ω)` oracle.
    pub fn with_distance(&self, distance: RealFn) -> ConstrainedProblem {
        let mut p = self.clone();
        p.distance = Some(distance);
        p
    }

    pub fn with_description(&self, description: impl Into<String>) -> ConstrainedProblem {
        let mut p = self.clone();
        p.description = description.into();
        p
    }

    pub fn with_fstar(&self, fstar: Option<f64>) -> ConstrainedProblem {
        let mut p = self.clone();
        p.fstar_hint = fstar;
        p
    }

    /// `(f, c·φ)`.
    pub fn with_scaled_penalty(&self, c: f64) -> ConstrainedProblem {
        let phi = self.penalty.clone();
        self.with_penalty(Arc::new(move |x| c * phi(x)))
    }

    /// `(c·f, φ)`.
    pub fn with_scaled_objective(&self, c: f64) -> ConstrainedProblem {
        let f = self.objective.clone();
        let fstar = self.fstar_hint.map(|v| c * v);
        let mut p = self.with_objective(Arc::new(move |x| match f(x) {
            ExtReal::Finite(v) => ExtReal::Finite(c * v),
            ExtReal::PosInf => ExtReal::PosInf,
        }));
        p.fstar_hint = fstar;
        p
    }

    /// Looks for a feasible point with finite objective: the region centre, the origin,
    /// then a deterministic sample of the region.
    pub fn find_feasible_point(&self, samples: usize, seed: u64) -> Option<Point> {
        let region = self.region();
        let mut candidates = vec![region.center(), vec![0.0; self.dim]];
        candidates.extend(sampling::cloud(region, samples, &[seed, 0xFEA5]));
        candidates
            .into_iter()
            .find(|x| region.contains(x) && self.is_feasible(x) && self.objective(x).is_finite())
            .map(Point::from_vec)
    }
}

pub(crate) fn cloud_distance(cloud: &[Vec<f64>], x: &[f64], norm: Norm) -> f64 {
    cloud
        .iter()
        .map(|c| norm.distance(c, x))
        .fold(f64::INFINITY, f64::min)
}

/// A problem paired with a penalty parameter λ ≥ 0.
#[derive(Clone, Debug)]
pub struct PenaltyFunction {
    problem: ConstrainedProblem,
    lambda: f64,
}

impl PenaltyFunction {
    pub fn new(problem: ConstrainedProblem, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("penalty parameter must be >= 0, got {lambda}")));
        }
        Ok(PenaltyFunction { problem, lambda })
    }

    pub fn problem(&self) -> &ConstrainedProblem {
        &self.problem
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, x: &[f64]) -> ExtReal {
        self.problem.penalized(self.lambda, x)
    }
}

/// `F_λ(x)`; `+∞` exactly when `f(x) = +∞`.
pub fn eval_penalized(pf: &PenaltyFunction, x: &[f64]) -> Result<ExtReal> {
    pf.problem.check_dim(x)?;
    Ok(pf.eval(x))
}

/// Nonlinear program with equality and inequality constraints.
#[derive(Clone)]
pub struct NlpModel {
    pub name: String,
    pub dim: usize,
    pub objective: RealFn,
    pub equalities: Vec<RealFn>,
    pub inequalities: Vec<RealFn>,
    pub ambient: Ambient,
    pub fstar_hint: Option<f64>,
}

impl NlpModel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        objective: RealFn,
        equalities: Vec<RealFn>,
        inequalities: Vec<RealFn>,
        ambient: Ambient,
    ) -> Result<Self> {
        if equalities.is_empty() && inequalities.is_empty() {
            return Err(Error::Config("an NLP model needs at least one constraint".into()));
        }
        if ambient.region().dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: ambient.region().dim() });
        }
        Ok(NlpModel {
            name: name.into(),
            dim,
            objective,
            equalities,
            inequalities,
            ambient,
            fstar_hint: None,
        })
    }

    fn terms(&self) -> (Vec<RealFn>, Vec<RealFn>) {
        (self.equalities.clone(), self.inequalities.clone())
    }

    fn into_problem(self, penalty: RealFn, label: &str) -> ConstrainedProblem {
        let objective = self.objective.clone();
        ConstrainedProblem {
            name: self.name.clone(),
            description: format!("NLP with {label} penalty"),
            dim: self.dim,
            objective: Arc::new(move |x| ExtReal::from_f64(objective(x))),
            penalty,
            ambient: self.ambient,
            distance: None,
            fallback_cloud: Arc::new(OnceLock::new()),
            fstar_hint: self.fstar_hint,
            norm: Norm::Euclidean,
        }
    }
}

/// `φ(x) = Σ|hᵢ(x)| + Σ max{gⱼ(x), 0}`.
pub fn build_l1_penalty(model: NlpModel) -> ConstrainedProblem {
    let (eqs, ineqs) = model.terms();
    let phi: RealFn = Arc::new(move |x| {
        let e: f64 = eqs.iter().map(|h| h(x).abs()).sum();
        let i: f64 = ineqs.iter().map(|g| g(x).max(0.0)).sum();
        e + i
    });
    model.into_problem(phi, "l1")
}

/// `φ(x) = max{0, |h₁(x)|, …, g₁(x), …}`.
pub fn build_max_penalty(model: NlpModel) -> ConstrainedProblem {
    let (eqs, ineqs) = model.terms();
    let phi: RealFn = Arc::new(move |x| {
        let e = eqs.iter().map(|h| h(x).abs()).fold(0.0, f64::max);
        ineqs.iter().map(|g| g(x)).fold(e, f64::max)
    });
    model.into_problem(phi, "max")
}

/// Replaces φ by `η(d(·, Ω))`; requires a distance oracle.
pub fn build_distance_penalty(problem: &ConstrainedProblem, eta: RateModulus) -> Result<ConstrainedProblem> {
    let dist = problem.distance.clone().ok_or_else(|| {
        Error::Config(format!("problem `{}` has no distance-to-feasible oracle", problem.name))
    })?;
    eta.check_strictly_increasing(&crate::modulus::dyadic_grid(40))?;
    let phi: RealFn = Arc::new(move |x| eta.eval(dist(x)));
    let mut p = problem.with_penalty(phi);
    p.description = format!("{} (distance penalty)", problem.description);
    Ok(p)
}
