//! Built-in problem instances with closed-form ground truth.
//!
//! | id                   | dim | feasible set        | notes                                    |
//! |----------------------|-----|---------------------|------------------------------------------|
//! | `example_1d`         | 1   | `(-inf, 0]`         | local parameter 2 at the origin          |
//! | `stairs`             | 1   | `(-inf, 0]`         | global minimiser of `F_k` is `4k^2`      |
//! | `l2_not_strong_reg`  | N   | `{0}`               | minimisers have norm 2                   |
//! | `l2_unbounded_local` | N   | unit ball           | local parameter `n` at `e_n`             |
//! | `l2_not_lip`         | N   | unit ball           | local parameter 0 at global solutions    |
//! | `convex_slater`      | 2   | `x1 <= 0`           | convex QP, l1 penalty                    |
//! | `sqrt_noncalm`       | 1   | `(-inf, 0]`         | diverging local parameter                |

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{
    build_l1_penalty, Ambient, ConstrainedProblem, NlpModel, Point, RealFn, Region,
};

pub const INSTANCE_IDS: [&str; 7] = [
    "example_1d",
    "stairs",
    "l2_not_strong_reg",
    "l2_unbounded_local",
    "l2_not_lip",
    "convex_slater",
    "sqrt_noncalm",
];

pub const DEFAULT_TRUNCATION: usize = 50;

pub type CorpusParams = BTreeMap<String, f64>;

/// Known least local exact penalty parameter at a feasible point; `None` when the
/// penalty function is not exact there.
#[derive(Debug, Clone, Serialize)]
pub struct LocalTruth {
    pub point: Point,
    pub lambda_star: Option<f64>,
    pub provenance: &'static str,
}

/// Known global behaviour on a bounded region (or on the whole space when `region` is `None`).
#[derive(Debug, Clone, Serialize)]
pub struct RegionTruth {
    pub region: Option<Region>,
    pub exact: bool,
    pub lambda_star: Option<f64>,
    pub provenance: &'static str,
}

/// Closed-form global minimum of `F_λ`: minimiser and value.
pub type PenaltyMinimum = Arc<dyn Fn(f64) -> (Point, f64) + Send + Sync>;

#[derive(Clone, Serialize)]
pub struct GroundTruth {
    pub fstar: f64,
    pub fstar_provenance: &'static str,
    pub local: Vec<LocalTruth>,
    pub regions: Vec<RegionTruth>,
    #[serde(skip)]
    pub penalty_minimum: Option<PenaltyMinimum>,
    pub penalty_minimum_provenance: Option<&'static str>,
}

#[derive(Clone)]
pub struct CorpusInstance {
    pub id: &'static str,
    pub problem: ConstrainedProblem,
    pub ground_truth: GroundTruth,
}

/// Builds a corpus instance. The `l2_*` instances accept `N` (truncation dimension, ≥ 2).
pub fn load(id: &str, params: &CorpusParams) -> Result<CorpusInstance> {
    let allowed: &[&str] = match id {
        "l2_not_strong_reg" | "l2_unbounded_local" | "l2_not_lip" => &["N"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Config(format!("instance `{id}` has no parameter `{k}`")));
    }
    let truncation = || -> Result<usize> {
        let n = params.get("N").copied().unwrap_or(DEFAULT_TRUNCATION as f64);
        if n.fract() != 0.0 || !(2.0..=10_000.0).contains(&n) {
            return Err(Error::Config(format!("N must be an integer in [2, 10000], got {n}")));
        }
        Ok(n as usize)
    };
    match id {
        "example_1d" => example_1d(),
        "stairs" => stairs(),
        "l2_not_strong_reg" => l2_not_strong_reg(truncation()?),
        "l2_unbounded_local" => l2_unbounded_local(truncation()?),
        "l2_not_lip" => l2_not_lip(truncation()?),
        "convex_slater" => convex_slater(),
        "sqrt_noncalm" => sqrt_noncalm(),
        other => Err(Error::UnknownInstance(other.to_string())),
    }
}

pub fn describe(id: &str) -> &'static str {
    match id {
        "example_1d" => "f = -x (x<=0), -(x+1)^2+1 (x>0); phi = max{0,x}; local parameter 2 at 0",
        "stairs" => "piecewise-linear staircase with phi = x on (0,1], 1/x beyond; minimisers 4k^2 escape",
        "l2_not_strong_reg" => "truncated l2 example, Omega = {0}: non-degenerate but not strongly",
        "l2_unbounded_local" => "truncated l2 example, Omega = unit ball: local parameters n at e_n",
        "l2_not_lip" => "truncated l2 example, Omega = unit ball: local parameters 0, not exact",
        "convex_slater" => "f = |x - (2,0)|^2, x1 <= 0 via l1 penalty; exact with parameter 4",
        "sqrt_noncalm" => "f = -sqrt(max{0,x}), phi = max{0,x}; not calm, not exact",
        _ => "",
    }
}

fn positive_part(x: &[f64]) -> f64 {
    x[0].max(0.0)
}

pub fn example_1d_objective(x: f64) -> f64 {
    if x <= 0.0 {
        -x
    } else {
        -(x + 1.0) * (x + 1.0) + 1.0
    }
}

fn example_1d() -> Result<CorpusInstance> {
    let problem = ConstrainedProblem::builder_real("example_1d", 1, |x| example_1d_objective(x[0]), positive_part)
        .description(describe("example_1d"))
        .region(Region::interval(-3.0, 3.0)?)
        .distance(positive_part)
        .fstar(0.0)
        .build()?;
    Ok(CorpusInstance {
        id: "example_1d",
        problem,
        ground_truth: GroundTruth {
            fstar: 0.0,
            fstar_provenance: "x* = 0 minimises f on (-inf, 0]",
            local: vec![LocalTruth {
                point: Point::scalar(0.0),
                lambda_star: Some(2.0),
                provenance: "published example: least exact parameter at 0 equals 2",
            }],
            regions: vec![
                RegionTruth {
                    region: Some(Region::interval(-3.0, 3.0)?),
                    exact: true,
                    lambda_star: Some(5.0),
                    provenance: "sup of ((x+1)^2-1)/x = x+2 over (0,3]",
                },
                RegionTruth {
                    region: None,
                    exact: false,
                    lambda_star: None,
                    provenance: "F_lambda(x) = -x^2 + (lambda-2)x is unbounded below",
                },
            ],
            penalty_minimum: None,
            penalty_minimum_provenance: None,
        },
    })
}

/// Index `n ≥ 2` with `x ∈ ((n−1)², n²]`, for `x > 1`.
fn stair_index(x: f64) -> u64 {
    let mut n = x.sqrt().ceil() as u64;
    while n > 2 && ((n - 1) * (n - 1)) as f64 >= x {
        n -= 1;
    }
    while ((n * n) as f64) < x {
        n += 1;
    }
    n.max(2)
}

/// Continuous piecewise-linear staircase.
pub fn stairs_objective(x: f64) -> f64 {
    if x <= 1.0 {
        return -x;
    }
    let n = stair_index(x);
    let prev = (n - 1) as f64;
    let t = x - prev * prev;
    if t <= 1.0 {
        // linear ramp from -1/(n-1) to -1/n, written so that t = 1 gives -1/n exactly
        -(1.0 - t) / prev - t / n as f64
    } else {
        -1.0 / n as f64
    }
}

pub fn stairs_penalty(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x <= 1.0 {
        x
    } else {
        1.0 / x
    }
}

/// Unique global minimiser of `F_k` for integer `k ≥ 2`: `x = 4k²`, value `−1/(4k)`.
pub fn stairs_global_minimizer(k: u32) -> (f64, f64) {
    let k = k as f64;
    (4.0 * k * k, -1.0 / (4.0 * k))
}

fn stairs() -> Result<CorpusInstance> {
    let problem = ConstrainedProblem::builder_real("stairs", 1, |x| stairs_objective(x[0]), |x| stairs_penalty(x[0]))
        .description(describe("stairs"))
        .region(Region::interval(-1.0, 400.0)?)
        .distance(positive_part)
        .fstar(0.0)
        .build()?;
    Ok(CorpusInstance {
        id: "stairs",
        problem,
        ground_truth: GroundTruth {
            fstar: 0.0,
            fstar_provenance: "f = -x >= 0 on (-inf, 0], attained at 0",
            local: vec![LocalTruth {
                point: Point::scalar(0.0),
                lambda_star: Some(1.0),
                provenance: "published example: least exact parameter at 0 equals 1",
            }],
            regions: vec![RegionTruth {
                region: None,
                exact: false,
                lambda_star: None,
                provenance: "published example: global minimisers 4k^2 escape to infinity",
            }],
            penalty_minimum: Some(Arc::new(|lambda: f64| {
                let k = lambda.round().max(2.0) as u32;
                let (x, v) = stairs_global_minimizer(k);
                (Point::scalar(x), v)
            })),
            penalty_minimum_provenance: Some("integer lambda = k >= 2 only"),
        },
    })
}

fn l1_weighted(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| v.abs() / ((i + 1) * (i + 1)) as f64)
        .sum()
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn outside_unit_ball(x: &[f64]) -> f64 {
    (euclid(x) - 1.0).max(0.0)
}

fn axis_point(dim: usize, n: usize, value: f64) -> Point {
    let mut v = vec![0.0; dim];
    v[n - 1] = value;
    Point::from_vec(v)
}

/// `min(0, min_{n ≤ N} g(n))` over the admissible `n`, returning `(n̄, value)`;
/// `n̄ = None` when the origin is optimal. Ties go to the smallest `n`.
fn enumerate_min(n_max: usize, admissible: impl Fn(usize) -> bool, g: impl Fn(f64) -> f64) -> (Option<usize>, f64) {
    let mut best = (None, 0.0);
    for n in 1..=n_max {
        if !admissible(n) {
            continue;
        }
        let v = g(n as f64);
        if v < best.1 {
            best = (Some(n), v);
        }
    }
    best
}

/// Truncated minimum of `F_λ` for `l2_not_strong_reg`: `min_{n ≤ N} (2λ/n² − 2/n)`.
pub fn l2_not_strong_reg_min(lambda: f64, n_max: usize) -> (Option<usize>, f64) {
    enumerate_min(n_max, |_| true, |n| 2.0 * lambda / (n * n) - 2.0 / n)
}

/// Truncated minimum for `l2_unbounded_local`: `min_{λ ≤ n ≤ N} (−1/n + λ/n²)`.
pub fn l2_unbounded_local_min(lambda: f64, n_max: usize) -> (Option<usize>, f64) {
    enumerate_min(n_max, |n| n as f64 >= lambda, |n| -1.0 / n + lambda / (n * n))
}

/// Truncated minimum for `l2_not_lip`: `min_{2λ ≤ n ≤ N} (−1/n + 2λ/n²)`.
pub fn l2_not_lip_min(lambda: f64, n_max: usize) -> (Option<usize>, f64) {
    enumerate_min(n_max, |n| n as f64 >= 2.0 * lambda, |n| -1.0 / n + 2.0 * lambda / (n * n))
}

fn l2_not_strong_reg(n_max: usize) -> Result<CorpusInstance> {
    let objective = |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(i, v)| if *v >= 1.0 { -v.min(2.0) / (i + 1) as f64 } else { 0.0 })
            .fold(0.0, f64::min)
    };
    let problem = ConstrainedProblem::builder_real("l2_not_strong_reg", n_max, objective, l1_weighted)
        .description(describe("l2_not_strong_reg"))
        .region(Region::cube(n_max, -3.0, 3.0)?)
        .distance(euclid)
        .fstar(0.0)
        .build()?;
    Ok(CorpusInstance {
        id: "l2_not_strong_reg",
        problem,
        ground_truth: GroundTruth {
            fstar: 0.0,
            fstar_provenance: "Omega = {0}",
            local: vec![LocalTruth {
                point: Point::zeros(n_max),
                lambda_star: Some(0.0),
                provenance: "published example: f vanishes on the open unit ball",
            }],
            regions: vec![RegionTruth {
                region: None,
                exact: false,
                lambda_star: None,
                provenance: "published example (infinite-dimensional): not exact, minimisers have norm 2",
            }],
            penalty_minimum: Some(Arc::new(move |lambda| {
                let (n, v) = l2_not_strong_reg_min(lambda, n_max);
                (n.map_or_else(|| Point::zeros(n_max), |n| axis_point(n_max, n, 2.0)), v)
            })),
            penalty_minimum_provenance: Some("enumeration over n <= N of 2 lambda/n^2 - 2/n"),
        },
    })
}

fn l2_unbounded_local(n_max: usize) -> Result<CorpusInstance> {
    let objective = |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let n = (i + 1) as f64;
                (-n * (v - 1.0)).max(-1.0 / n).min(0.0)
            })
            .fold(0.0, f64::min)
    };
    let problem = ConstrainedProblem::builder_real("l2_unbounded_local", n_max, objective, outside_unit_ball)
        .description(describe("l2_unbounded_local"))
        .region(Region::cube(n_max, -3.0, 3.0)?)
        .distance(outside_unit_ball)
        .fstar(0.0)
        .build()?;
    let local = (1..=3.min(n_max))
        .map(|n| LocalTruth {
            point: axis_point(n_max, n, 1.0),
            lambda_star: Some(n as f64),
            provenance: "published example: local parameter at e_n equals n",
        })
        .chain(std::iter::once(LocalTruth {
            point: Point::zeros(n_max),
            lambda_star: Some(0.0),
            provenance: "f vanishes near interior points with all x_n < 1",
        }))
        .collect();
    Ok(CorpusInstance {
        id: "l2_unbounded_local",
        problem,
        ground_truth: GroundTruth {
            fstar: 0.0,
            fstar_provenance: "f = 0 on the unit ball",
            local,
            regions: vec![RegionTruth {
                region: None,
                exact: false,
                lambda_star: None,
                provenance: "published example (infinite-dimensional): strongly non-degenerate, not exact",
            }],
            penalty_minimum: Some(Arc::new(move |lambda| {
                let (n, v) = l2_unbounded_local_min(lambda, n_max);
                let x = n.map_or_else(
                    || Point::zeros(n_max),
                    |n| axis_point(n_max, n, 1.0 + 1.0 / (n * n) as f64),
                );
                (x, v)
            })),
            penalty_minimum_provenance: Some("enumeration over lambda <= n <= N of -1/n + lambda/n^2"),
        },
    })
}

fn l2_not_lip(n_max: usize) -> Result<CorpusInstance> {
    let objective = |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let n = (i + 1) as f64;
                if *v <= 1.0 {
                    ((2.0 * v - 1.0) / n).max(0.0)
                } else {
                    (-n * (v - 1.0) + 1.0 / n).max(-1.0 / n)
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    let problem = ConstrainedProblem::builder_real("l2_not_lip", n_max, objective, outside_unit_ball)
        .description(describe("l2_not_lip"))
        .region(Region::cube(n_max, -3.0, 3.0)?)
        .distance(outside_unit_ball)
        .fstar(0.0)
        .build()?;
    Ok(CorpusInstance {
        id: "l2_not_lip",
        problem,
        ground_truth: GroundTruth {
            fstar: 0.0,
            fstar_provenance: "f >= 0 on the unit ball, f(0) = 0",
            local: vec![LocalTruth {
                point: Point::zeros(n_max),
                lambda_star: Some(0.0),
                provenance: "published example: global solutions are local minimisers of f",
            }],
            regions: vec![RegionTruth {
                region: None,
                exact: false,
                lambda_star: None,
                provenance: "published example (infinite-dimensional): strongly non-degenerate, not exact",
            }],
            penalty_minimum: Some(Arc::new(move |lambda| {
                let (n, v) = l2_not_lip_min(lambda, n_max);
                let x = n.map_or_else(
                    || Point::zeros(n_max),
                    |n| axis_point(n_max, n, 1.0 + 2.0 / (n * n) as f64),
                );
                (x, v)
            })),
            penalty_minimum_provenance: Some("enumeration over 2 lambda <= n <= N of -1/n + 2 lambda/n^2"),
        },
    })
}

fn convex_slater() -> Result<CorpusInstance> {
    let objective: RealFn = Arc::new(|x: &[f64]| (x[0] - 2.0) * (x[0] - 2.0) + x[1] * x[1]);
    let g1: RealFn = Arc::new(|x: &[f64]| x[0]);
    let mut model = NlpModel::new(
        "convex_slater",
        2,
        objective,
        vec![],
        vec![g1],
        Ambient::whole(Region::cube(2, -3.0, 3.0)?),
    )?;
    model.fstar_hint = Some(4.0);
    let problem = build_l1_penalty(model)
        .with_distance(Arc::new(|x: &[f64]| x[0].max(0.0)))
        .with_description(describe("convex_slater"));
    Ok(CorpusInstance {
        id: "convex_slater",
        problem,
        ground_truth: GroundTruth {
            fstar: 4.0,
            fstar_provenance: "projection of (2,0) onto x1 <= 0 is the origin",
            local: vec![LocalTruth {
                point: Point::zeros(2),
                lambda_star: Some(4.0),
                provenance: "dense-grid sup-formula oracle (tests/oracles.rs)",
            }],
            regions: vec![RegionTruth {
                region: Some(Region::cube(2, -3.0, 3.0)?),
                exact: true,
                lambda_star: Some(4.0),
                provenance: "dense-grid sup-formula oracle (tests/oracles.rs)",
            }],
            penalty_minimum: Some(Arc::new(|lambda: f64| {
                let x1 = (2.0 - lambda / 2.0).max(0.0);
                let v = if x1 > 0.0 { (x1 - 2.0) * (x1 - 2.0) + lambda * x1 } else { 4.0 };
                (Point::from_vec(vec![x1, 0.0]), v)
            })),
            penalty_minimum_provenance: Some("one-dimensional minimisation along x2 = 0, checked by grid oracle"),
        },
    })
}

pub fn sqrt_noncalm_objective(x: f64) -> f64 {
    -x.max(0.0).sqrt()
}

fn sqrt_noncalm() -> Result<CorpusInstance> {
    let problem = ConstrainedProblem::builder_real("sqrt_noncalm", 1, |x| sqrt_noncalm_objective(x[0]), positive_part)
        .description(describe("sqrt_noncalm"))
        .region(Region::interval(-3.0, 3.0)?)
        .distance(positive_part)
        .fstar(0.0)
        .build()?;
    Ok(CorpusInstance {
        id: "sqrt_noncalm",
        problem,
        ground_truth: GroundTruth {
            fstar: 0.0,
            fstar_provenance: "f = 0 on (-inf, 0]",
            local: vec![LocalTruth {
                point: Point::scalar(0.0),
                lambda_star: None,
                provenance: "ratio sqrt(y)/y diverges as y -> 0+",
            }],
            regions: vec![RegionTruth {
                region: None,
                exact: false,
                lambda_star: None,
                provenance: "h(p) = -sqrt(p) is not calm from below",
            }],
            penalty_minimum: Some(Arc::new(|lambda: f64| {
                let x = 1.0 / (4.0 * lambda * lambda);
                (Point::scalar(x), -1.0 / (4.0 * lambda))
            })),
            penalty_minimum_provenance: Some("stationary point of -sqrt(x) + lambda x"),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_loads() {
        for id in INSTANCE_IDS {
            let inst = load(id, &CorpusParams::new()).unwrap();
            assert_eq!(inst.id, id);
            assert!(!describe(id).is_empty());
        }
        assert!(matches!(load("nope", &CorpusParams::new()), Err(Error::UnknownInstance(_))));
    }

    #[test]
    fn parameter_validation() {
        let mut p = CorpusParams::new();
        p.insert("N".into(), 1.0);
        assert!(load("l2_not_lip", &p).is_err());
        p.insert("N".into(), 2.5);
        assert!(load("l2_not_lip", &p).is_err());
        p.insert("N".into(), 10.0);
        assert_eq!(load("l2_not_lip", &p).unwrap().problem.dim(), 10);
        assert!(load("stairs", &p).is_err());
    }

    #[test]
    fn staircase_matches_definition_exactly() {
        for n in 2u64..=20 {
            let nf = n as f64;
            let left = ((n - 1) * (n - 1) + 1) as f64;
            let right = (n * n) as f64;
            assert_eq!(stairs_objective(left), -1.0 / nf, "n={n}");
            assert_eq!(stairs_objective(right), -1.0 / nf, "n={n}");
            let mid = ((n - 1) * (n - 1)) as f64 + 0.5;
            let expected = -1.0 / (nf - 1.0) + (1.0 / (nf - 1.0) - 1.0 / nf) * 0.5;
            assert!((stairs_objective(mid) - expected).abs() < 1e-15);
        }
        assert_eq!(stairs_objective(1.0), -1.0);
        assert!((stairs_objective(1.0 + 1e-12) + 1.0).abs() < 1e-11);
        assert_eq!(stairs_penalty(1.0), 1.0);
        assert_eq!(stairs_penalty(4.0), 0.25);
    }

    #[test]
    fn staircase_minimum_formula() {
        for k in 2u32..=6 {
            let (x, v) = stairs_global_minimizer(k);
            let kf = k as f64;
            assert_eq!(stairs_objective(x) + kf * stairs_penalty(x), v);
        }
    }

    #[test]
    fn l2_closed_forms_reproduce_minimum() {
        let n_max = DEFAULT_TRUNCATION;
        for id in ["l2_not_strong_reg", "l2_unbounded_local", "l2_not_lip"] {
            let inst = load(id, &CorpusParams::new()).unwrap();
            let closed = inst.ground_truth.penalty_minimum.as_ref().unwrap();
            for lambda in [1.0, 2.5, 7.0] {
                let (x, v) = closed(lambda);
                let got = inst.problem.penalized(lambda, &x).to_f64();
                assert!((got - v).abs() < 1e-12, "{id} lambda={lambda}: {got} vs {v}");
                assert!(v < 0.0);
            }
        }
        let (n, v) = l2_not_strong_reg_min(7.0, n_max);
        assert_eq!(n, Some(14));
        assert!((v + 1.0 / 14.0).abs() < 1e-15);
        assert_eq!(l2_not_lip_min(7.0, n_max).0, Some(28));
        assert_eq!(l2_unbounded_local_min(2.5, n_max).0, Some(5));
    }

    #[test]
    fn penalty_vanishes_on_declared_feasible_sets() {
        let params = CorpusParams::new();
        let p = load("l2_not_strong_reg", &params).unwrap().problem;
        assert_eq!(p.penalty(&vec![0.0; 50]), 0.0);
        assert!(p.penalty(&axis_point(50, 3, 1e-3)) > 0.0);
        let p = load("l2_unbounded_local", &params).unwrap().problem;
        assert_eq!(p.penalty(&axis_point(50, 7, 1.0)), 0.0);
        assert!(p.penalty(&axis_point(50, 7, 1.0 + 1e-9)) > 0.0);
        let p = load("convex_slater", &params).unwrap().problem;
        assert_eq!(p.penalty(&[-1.0, 2.0]), 0.0);
        assert_eq!(p.penalty(&[0.5, 2.0]), 0.5);
    }
}
