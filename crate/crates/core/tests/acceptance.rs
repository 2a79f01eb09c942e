//! Acceptance suite: one PASS/FAIL line per criterion. Run with `cargo test --test acceptance`.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use exactpen::corpus::{self, CorpusParams};
use exactpen::global::{
    build_penalty_path, lambda_star_sup, lambda_star_sup_expanding, lemma_exactness_bound, nondegeneracy_diagnostic,
    solve_g, SupVerdict,
};
use exactpen::inner::InnerOptions;
use exactpen::local::{check_local_minimum, estimate_lambda_bar, LambdaBarValue, LocalVerdict};
use exactpen::modulus::{dyadic_grid, RateModulus};
use exactpen::perturbation::{check_calm_from_below, optimal_value_function, PerturbedFamily};
use exactpen::stationarity::{
    default_schedule, estimate_lipschitz, filter_threshold_scan, find_inf_stationary, infeasible_stationarity_bound,
    penalized_rate, verify_descent_hypothesis, DEFAULT_TOL,
};
use exactpen::{ConstrainedProblem, ExtReal, PenaltyFunction, Region, SamplingSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn load(id: &str) -> ConstrainedProblem {
    corpus::load(id, &CorpusParams::new()).expect("corpus instance").problem
}

fn load_n(id: &str, n: usize) -> ConstrainedProblem {
    let mut params = CorpusParams::new();
    params.insert("N".into(), n as f64);
    corpus::load(id, &params).expect("corpus instance").problem
}

fn interval(a: f64, b: f64) -> Region {
    Region::interval(a, b).unwrap()
}

fn within(elapsed: Duration, limit: f64) -> std::result::Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, format!("took {:.2}s, limit {limit}s", elapsed.as_secs_f64()))
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let p = load("example_1d");
    let schedule = SamplingSchedule::default_for(1);
    let est = estimate_lambda_bar(&p, &[0.0], &schedule).map_err(|e| e.to_string())?;
    let LambdaBarValue::Finite(v) = est.value else {
        return Err(format!("lambda_bar not finite: {:?}", est.value));
    };
    ensure((v - 2.0).abs() <= 0.05, format!("lambda_bar = {v}"))?;
    let at = |l: f64| {
        check_local_minimum(&PenaltyFunction::new(p.clone(), l).unwrap(), &[0.0], &schedule).map(|c| c.is_local_minimum)
    };
    ensure(!at(2.0).map_err(|e| e.to_string())?, "x* = 0 reported as local minimum of F_2")?;
    ensure(at(2.5).map_err(|e| e.to_string())?, "x* = 0 not a local minimum of F_2.5")?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("lambda_bar = {v:.6}, F_2 not minimal, F_2.5 minimal"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let p = load("stairs");
    let opts = InnerOptions::default();
    for k in 2..=6u32 {
        let kf = k as f64;
        let r = solve_g(&p, kf, &interval(-1.0, 10.0 * kf * kf), &opts, 0).map_err(|e| e.to_string())?;
        ensure((r.x[0] - 4.0 * kf * kf).abs() <= 1e-3, format!("k = {k}: x = {}", r.x[0]))?;
        ensure((r.value() + 1.0 / (4.0 * kf)).abs() <= 1e-6, format!("k = {k}: value = {}", r.value()))?;
    }
    let path = build_penalty_path(&p, &[2.0, 3.0, 4.0, 5.0, 6.0], &interval(-1.0, 360.0), &opts, 0).map_err(|e| e.to_string())?;
    let nd = nondegeneracy_diagnostic(&path, &p).map_err(|e| e.to_string())?;
    ensure(!nd.nondegenerate && !nd.strongly, "staircase path flagged non-degenerate")?;
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = exactpen::cli::run(["exactpen", "global", "--builtin", "stairs"], &mut out, &mut err);
    let text = String::from_utf8_lossy(&out);
    ensure(code == 3 && text.contains("not_exact"), format!("global verdict exit code {code}"))?;
    within(start.elapsed(), 30.0)?;
    Ok("x_k = 4k^2 and value -1/(4k) for k = 2..6, path degenerate, global verdict not_exact".into())
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let n = 50;
    let opts = InnerOptions::default();
    let lambdas = [1.0, 2.5, 7.0];
    let cases: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("l2_not_strong_reg", Box::new(|l| common::enumerate_min(1..=n, |k| 2.0 * l / (k * k) - 2.0 / k))),
        (
            "l2_unbounded_local",
            Box::new(|l| common::enumerate_min((1..=n).filter(|k| *k as f64 >= l), |k| -1.0 / k + l / (k * k))),
        ),
        (
            "l2_not_lip",
            Box::new(|l| common::enumerate_min((1..=n).filter(|k| *k as f64 >= 2.0 * l), |k| -1.0 / k + 2.0 * l / (k * k))),
        ),
    ];
    for (id, oracle) in &cases {
        let p = load_n(id, n);
        for &l in &lambdas {
            let r = solve_g(&p, l, p.region(), &opts, 0).map_err(|e| e.to_string())?;
            let want = oracle(l);
            ensure((r.value() - want).abs() <= 1e-6, format!("{id} lambda {l}: {} vs {want}", r.value()))?;
            if *id == "l2_not_strong_reg" {
                let norm = r.x.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
                ensure((norm - 2.0).abs() <= 1e-6, format!("{id} lambda {l}: |x| = {norm}"))?;
            }
        }
    }
    let p = load_n("l2_not_strong_reg", n);
    let path = build_penalty_path(&p, &[1.0, 2.5, 7.0, 12.0], p.region(), &opts, 0).map_err(|e| e.to_string())?;
    let nd = nondegeneracy_diagnostic(&path, &p).map_err(|e| e.to_string())?;
    ensure(nd.nondegenerate && !nd.strongly, format!("nondegenerate = {}, strongly = {}", nd.nondegenerate, nd.strongly))?;
    within(start.elapsed(), 60.0)?;
    Ok("truncated minima match enumeration for N = 50, |x| = 2, non-degenerate but not strongly".into())
}

fn criterion_4() -> Check {
    let p = load("example_1d");
    let mut regions = Vec::new();
    let mut bounds = Vec::new();
    for r in [3.0, 10.0, 30.0] {
        let region = interval(-r, r);
        let s = lambda_star_sup(&p, &region, 4096, 0, Some(0.0)).map_err(|e| e.to_string())?;
        let oracle = common::grid_sup_1d(|x| -common::example_f(x) / common::example_phi(x), 0.0, r, 1_000_000);
        ensure((s.lower_bound - (r + 2.0)).abs() <= 0.01 * (r + 2.0), format!("R = {r}: {}", s.lower_bound))?;
        ensure((oracle - (r + 2.0)).abs() <= 0.01 * (r + 2.0), format!("R = {r}: oracle {oracle}"))?;
        bounds.push(s.lower_bound);
        regions.push(region);
    }
    let e = lambda_star_sup_expanding(&p, &regions, 4096, 0, Some(0.0)).map_err(|e| e.to_string())?;
    ensure(e.verdict == SupVerdict::Diverging, format!("expanding verdict {:?}", e.verdict))?;
    Ok(format!("lambda*(C) = {:.4}, {:.4}, {:.4} for R = 3, 10, 30; expanding regions diverge", bounds[0], bounds[1], bounds[2]))
}

fn criterion_5() -> Check {
    let p = load("example_1d");
    let region = interval(-3.0, 3.0);
    let b = lemma_exactness_bound(&p, 6.0, 1.0, std::slice::from_ref(&region), &InnerOptions::default(), 0, None, 4096)
        .map_err(|e| e.to_string())?;
    let witnessed = lambda_star_sup(&p, &region, 4096, 0, Some(0.0)).map_err(|e| e.to_string())?.lower_bound;
    let bound = b.bound.ok_or("lemma bound missing")?;
    ensure(bound.is_finite() && bound >= witnessed, format!("bound {bound} < witnessed {witnessed}"))?;
    let (_, c_oracle) = common::grid_min_1d(|x| common::example_f(x) + 6.0 * common::example_phi(x), -3.0, 3.0, 10_000);
    ensure((b.c - c_oracle).abs() <= 1e-6, format!("c = {} vs oracle {c_oracle}", b.c))?;
    Ok(format!("bound = {bound:.6} >= lambda*(C) = {witnessed:.6}, c = {:.3e}", b.c))
}

fn criterion_6() -> Check {
    let p = load("example_1d");
    let grid = dyadic_grid(20);
    let opts = InnerOptions::default();
    let s = optimal_value_function(&PerturbedFamily::phi_level(&p), &grid, &interval(-3.0, 3.0), &opts, 0)
        .map_err(|e| e.to_string())?;
    for (pv, h) in grid.iter().zip(&s.h_vals) {
        let want = 1.0 - (pv + 1.0) * (pv + 1.0);
        ensure((h - want).abs() <= 1e-6, format!("h({pv}) = {h}, expected {want}"))?;
    }
    let calm = check_calm_from_below(&s, &RateModulus::identity()).map_err(|e| e.to_string())?;
    ensure(calm.calm, "example h not calm")?;
    ensure((s.modulus_estimate - 2.0).abs() <= 0.05, format!("modulus {}", s.modulus_estimate))?;
    let est = estimate_lambda_bar(&p, &[0.0], &SamplingSchedule::default_for(1)).map_err(|e| e.to_string())?;
    let LambdaBarValue::Finite(lb) = est.value else { return Err("lambda_bar not finite".into()) };
    ensure((lb - s.modulus_estimate).abs() <= 0.05, format!("lambda_bar {lb} vs modulus {}", s.modulus_estimate))?;
    let q = load("sqrt_noncalm");
    let qe = estimate_lambda_bar(&q, &[0.0], &SamplingSchedule::default_for(1)).map_err(|e| e.to_string())?;
    ensure(qe.verdict == LocalVerdict::Diverging, format!("sqrt lambda_bar verdict {:?}", qe.verdict))?;
    let qs = optimal_value_function(&PerturbedFamily::phi_level(&q), &grid, &interval(-3.0, 3.0), &opts, 0)
        .map_err(|e| e.to_string())?;
    let qc = check_calm_from_below(&qs, &RateModulus::identity()).map_err(|e| e.to_string())?;
    ensure(!qc.calm, "sqrt h reported calm")?;
    Ok(format!("h matches on 20 dyadic levels, modulus {:.4} vs lambda_bar {lb:.4}; sqrt instance diverging and not calm", s.modulus_estimate))
}

fn criterion_7() -> Check {
    let p = load("example_1d");
    let region = interval(-1.0, 3.0);
    let schedule = default_schedule(1);
    let at = |l: f64| find_inf_stationary(&PenaltyFunction::new(p.clone(), l).unwrap(), &region, 32, &schedule, DEFAULT_TOL, 0);
    let r3 = at(3.0).map_err(|e| e.to_string())?;
    let inf: Vec<_> = r3.infeasible().collect();
    ensure(inf.len() == 1 && (inf[0].x[0] - 0.5).abs() <= 1e-3, format!("lambda 3 infeasible clusters {inf:?}"))?;
    let r10 = at(10.0).map_err(|e| e.to_string())?;
    ensure(r10.infeasible().count() == 0, "lambda 10 has infeasible clusters")?;
    let d = verify_descent_hypothesis(&p, &interval(0.0, 3.0), 1.0, 1000, 0).map_err(|e| e.to_string())?;
    ensure(d.samples > 0 && d.violations == 0, format!("{} descent violations", d.violations))?;
    let lip = estimate_lipschitz(&p, &region, 1000, 0).map_err(|e| e.to_string())?;
    let bound = infeasible_stationarity_bound(lip.l, 1.0).map_err(|e| e.to_string())?;
    ensure(bound > 7.9 && bound <= 8.0, format!("L/a = {bound}"))?;
    let ladder: Vec<f64> = (1..=12).map(f64::from).collect();
    let scan = filter_threshold_scan(&p, &ladder, &region, 32, 0).map_err(|e| e.to_string())?;
    let threshold = scan.threshold.ok_or("infeasible clusters at every ladder value")?;
    let clean_above = scan.lambdas.iter().zip(&scan.infeasible_clusters).all(|(l, c)| *l <= bound || *c == 0);
    ensure(clean_above && threshold <= bound.ceil(), format!("threshold {threshold} vs L/a {bound}"))?;
    Ok(format!("cluster at {:.6} for lambda 3, none for lambda 10; threshold {threshold} vs L/a = {bound:.4}", inf[0].x[0]))
}

fn property_monotone(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for id in corpus::INSTANCE_IDS {
        let p = if id.starts_with("l2_") { load_n(id, 8) } else { load(id) };
        let (lo, hi) = p.region().bounds();
        for _ in 0..200 {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..=*b)).collect();
            let l = rng.random_range(0.0..50.0);
            let m = l + rng.random_range(0.0..50.0);
            if let (ExtReal::Finite(a), ExtReal::Finite(b)) = (p.penalized(l, &x), p.penalized(m, &x)) {
                ensure(a <= b, format!("{id}: F_{l} > F_{m} at {x:?}"))?;
            }
        }
    }
    Ok(())
}

fn property_scale_covariance() -> std::result::Result<(), String> {
    for (id, x) in [("example_1d", 0.0), ("stairs", 0.0)] {
        let p = load(id);
        let schedule = SamplingSchedule::default_for(1).with_seed(7);
        let base = estimate_lambda_bar(&p, &[x], &schedule).map_err(|e| e.to_string())?;
        for c in [0.25, 0.5, 2.0, 4.0] {
            let f = estimate_lambda_bar(&p.with_scaled_objective(c), &[x], &schedule).map_err(|e| e.to_string())?;
            let g = estimate_lambda_bar(&p.with_scaled_penalty(c), &[x], &schedule).map_err(|e| e.to_string())?;
            for ((b, fs), gs) in base.per_shell_sup.iter().zip(&f.per_shell_sup).zip(&g.per_shell_sup) {
                ensure(b.map(|v| v * c) == *fs, format!("{id}: objective scaling by {c} not exact"))?;
                ensure(b.map(|v| v / c) == *gs, format!("{id}: penalty scaling by {c} not exact"))?;
            }
        }
    }
    Ok(())
}

fn property_path_monotone() -> std::result::Result<(), String> {
    let opts = InnerOptions::default();
    for id in corpus::INSTANCE_IDS {
        let p = if id.starts_with("l2_") { load_n(id, 20) } else { load(id) };
        let path = build_penalty_path(&p, &[0.5, 1.0, 2.0, 4.0, 8.0], p.region(), &opts, 0).map_err(|e| e.to_string())?;
        let bad = path.monotonicity_violations(1e-6);
        ensure(bad.is_empty(), format!("{id}: monotonicity violated at rungs {bad:?}"))?;
    }
    Ok(())
}

fn property_strong_slope(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let p = load("example_1d");
    let schedule = default_schedule(1);
    for _ in 0..100 {
        let x = rng.random_range(-3.0..3.0);
        let l = rng.random_range(0.0..10.0);
        let e = penalized_rate(&PenaltyFunction::new(p.clone(), l).unwrap(), &[x], &schedule).map_err(|e| e.to_string())?;
        ensure(e.strong_slope == (-e.rate).max(0.0), format!("strong slope mismatch at {x}"))?;
        ensure((e.rate < 0.0) == (e.strong_slope > 0.0), format!("sign relation fails at {x}"))?;
    }
    Ok(())
}

fn property_solve_vs_grid() -> std::result::Result<(), String> {
    let opts = InnerOptions::default();
    let one_d: [(&str, fn(f64) -> f64, fn(f64) -> f64, f64, f64, [f64; 3]); 3] = [
        ("example_1d", common::example_f, common::example_phi, -3.0, 3.0, [1.0, 3.0, 6.0]),
        ("stairs", common::stairs_f, common::stairs_phi, -1.0, 400.0, [2.0, 3.5, 6.0]),
        ("sqrt_noncalm", |x| -x.max(0.0).sqrt(), common::example_phi, -3.0, 3.0, [0.5, 1.0, 2.0]),
    ];
    for (id, f, phi, a, b, lambdas) in one_d {
        let p = load(id);
        for l in lambdas {
            let r = solve_g(&p, l, &interval(a, b), &opts, 0).map_err(|e| e.to_string())?;
            let (_, want) = common::grid_min_1d(|x| f(x) + l * phi(x), a, b, 200_000);
            ensure((r.value() - want).abs() <= 1e-4, format!("{id} lambda {l}: {} vs grid {want}", r.value()))?;
        }
    }
    let p = load("convex_slater");
    for l in [1.0, 2.0, 6.0] {
        let r = solve_g(&p, l, p.region(), &opts, 0).map_err(|e| e.to_string())?;
        let (_, want) = common::grid_min_2d(
            |u, v| (u - 2.0) * (u - 2.0) + v * v + l * u.max(0.0),
            [-3.0, -3.0],
            [3.0, 3.0],
            400,
        );
        ensure((r.value() - want).abs() <= 1e-4, format!("convex_slater lambda {l}: {} vs grid {want}", r.value()))?;
    }
    Ok(())
}

fn property_cli_reruns() -> std::result::Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 3] = [
        &["local", "--builtin", "example_1d", "--point", "0"],
        &["solve", "--builtin", "convex_slater"],
        &["stationary", "--builtin", "example_1d", "--lambda", "3", "--region", "-1:3"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let json = dir.path().join(format!("run{i}_{rep}.json"));
            let out = Command::new(env!("CARGO_BIN_EXE_exactpen"))
                .args(*args)
                .args(["--seed", "11", "--json"])
                .arg(&json)
                .output()
                .map_err(|e| e.to_string())?;
            let bytes = std::fs::read(&json).map_err(|e| e.to_string())?;
            outputs.push((out.status.code(), out.stdout, bytes));
        }
        ensure(outputs[0] == outputs[1], format!("rerun of {args:?} differs"))?;
    }
    Ok(())
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    property_monotone(&mut rng).map_err(|e| format!("lambda monotonicity: {e}"))?;
    property_scale_covariance().map_err(|e| format!("scale covariance: {e}"))?;
    property_path_monotone().map_err(|e| format!("path monotonicity: {e}"))?;
    property_strong_slope(&mut rng).map_err(|e| format!("strong slope: {e}"))?;
    property_solve_vs_grid().map_err(|e| format!("solve vs grid: {e}"))?;
    property_cli_reruns().map_err(|e| format!("cli reruns: {e}"))?;
    Ok("lambda monotonicity, scale covariance, path monotonicity, strong slope, grid agreement, byte-identical reruns".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("local parameter reproduction", criterion_1),
        ("staircase non-exactness", criterion_2),
        ("truncated l2 examples", criterion_3),
        ("sup formula on regions", criterion_4),
        ("lemma bound consistency", criterion_5),
        ("calmness cross-check", criterion_6),
        ("stationarity filter", criterion_7),
        ("property suites", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
