//! The `exactpen` command line: argument parsing, orchestration and report output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use crate::corpus::{self, CorpusParams};
use crate::error::{Error, Result};
use crate::exactness::{analyze_exactness, ExactnessOptions, ExactnessReport, Verdict};
use crate::export::{self, sig6};
use crate::global::PenaltyPath;
use crate::local::{check_local_minimum, estimate_lambda_bar, least_local_parameter, LambdaBarEstimate, LambdaBarValue, LocalMinimumCheck, LocalParameter};
use crate::problem::{ConstrainedProblem, PenaltyFunction, Point, ProblemDefinition, Region};
use crate::sampling::SamplingSchedule;
use crate::solver::{solve, SolveReport, SolveStatus, SolverConfig};
use crate::stationarity::{
    self, estimate_lipschitz, find_inf_stationary, infeasible_stationarity_bound, verify_descent_hypothesis,
    DescentHypothesisReport, StationaryCluster,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_EXACT: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

/// Offset around the estimated local parameter at which local minimality is checked.
pub const LOCAL_CHECK_OFFSET: f64 = 0.1;

#[derive(Parser, Debug)]
#[command(name = "exactpen", version, about = "Exactness diagnostics for linear penalty functions f + lambda*phi")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the least exact penalty parameter at a feasible point.
    Local(LocalArgs),
    /// Diagnose global exactness (or exactness on --region).
    Global(GlobalArgs),
    /// Run the adaptive exact-penalty method.
    Solve(SolveArgs),
    /// Locate inf-stationary points of the penalty function.
    Stationary(StationaryArgs),
    /// List the built-in problem instances.
    CorpusList,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["builtin", "nlp"])))]
pub struct ProblemArgs {
    /// Built-in instance id (see corpus-list).
    #[arg(long)]
    pub builtin: Option<String>,
    /// Instance parameter, repeatable.
    #[arg(long = "params", value_name = "K=V", requires = "builtin")]
    pub params: Vec<String>,
    /// JSON problem definition file.
    #[arg(long, value_name = "FILE")]
    pub nlp: Option<PathBuf>,
    /// Box region: `a:b` (every axis) or `a1:b1,a2:b2,...`.
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
    #[arg(long, env = "EXACTPEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the full report as JSON.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    /// Largest shell radius.
    #[arg(long)]
    pub r0: Option<f64>,
    /// Number of shells.
    #[arg(long)]
    pub shells: Option<usize>,
    /// Random directions per shell.
    #[arg(long)]
    pub per_shell: Option<usize>,
}

#[derive(Args, Debug)]
pub struct LocalArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Feasible point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Known optimal value of the constrained problem.
    #[arg(long, allow_hyphen_values = true)]
    pub fstar: Option<f64>,
    /// Samples per sup-formula cloud.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Write the penalty path as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write the optimal value function samples as CSV.
    #[arg(long, value_name = "PATH")]
    pub h_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Initial penalty parameter (automatic when absent).
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub factor: f64,
    #[arg(long, default_value_t = 25)]
    pub max_rungs: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub feas_tol: f64,
    /// Inner evaluation budget per rung.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Write the penalty path as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StationaryArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long)]
    pub lambda: f64,
    /// Number of random starts.
    #[arg(long, default_value_t = 64)]
    pub seeds: usize,
    #[arg(long, default_value_t = stationarity::DEFAULT_TOL)]
    pub tol: f64,
    /// Descent constant a of the condition rate(phi) <= -a.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Samples for the Lipschitz estimate and the descent check.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn dispatch(command: &Command) -> Result<(String, i32)> {
    match command {
        Command::Local(a) => cmd_local(a),
        Command::Global(a) => cmd_global(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Stationary(a) => cmd_stationary(a),
        Command::CorpusList => Ok((corpus_list(), EXIT_OK)),
    }
}

fn parse_params(raw: &[String]) -> Result<CorpusParams> {
    let mut params = CorpusParams::new();
    for item in raw.iter().flat_map(|s| s.split(',')) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("parameter `{item}` is not of the form k=v")))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("parameter `{k}` is not a number")))?;
        params.insert(k.trim().to_string(), v);
    }
    Ok(params)
}

fn load_problem(args: &ProblemArgs) -> Result<ConstrainedProblem> {
    match (&args.builtin, &args.nlp) {
        (Some(id), None) => Ok(corpus::load(id, &parse_params(&args.params)?)?.problem),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            ProblemDefinition::from_json(&text)?.load()
        }
        _ => Err(Error::Config("give exactly one of --builtin and --nlp".into())),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Config(format!("`{s}` is not a number")))
}

/// Parses `a:b` or `a1:b1,...,an:bn`; a single interval is repeated on every axis.
pub fn parse_region(spec: &str, dim: usize) -> Result<Region> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for part in spec.split(',') {
        let (a, b) = part
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("region interval `{part}` is not of the form a:b")))?;
        lower.push(parse_f64(a)?);
        upper.push(parse_f64(b)?);
    }
    if lower.len() == 1 && dim > 1 {
        lower = vec![lower[0]; dim];
        upper = vec![upper[0]; dim];
    }
    if lower.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: lower.len() });
    }
    Region::new_box(lower, upper)
}

pub fn parse_point(spec: &str, dim: usize) -> Result<Point> {
    let coords = spec.split(',').map(parse_f64).collect::<Result<Vec<f64>>>()?;
    if coords.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: coords.len() });
    }
    Point::new(coords)
}

fn region_of(args: &ProblemArgs, problem: &ConstrainedProblem) -> Result<Option<Region>> {
    args.region.as_deref().map(|s| parse_region(s, problem.dim())).transpose()
}

fn schedule_of(args: &ScheduleArgs, dim: usize, seed: u64, base: SamplingSchedule) -> Result<SamplingSchedule> {
    let mut s = base.with_seed(seed);
    if let Some(r0) = args.r0 {
        s.r0 = r0;
    }
    if let Some(j) = args.shells {
        s.shells = j;
    }
    if let Some(k) = args.per_shell {
        s.samples_per_shell = k;
    }
    let _ = dim;
    s.validate()?;
    Ok(s)
}

fn emit_json<T: Serialize>(args: &ProblemArgs, value: &T) -> Result<()> {
    if let Some(path) = &args.json {
        export::write_json(value, path)?;
    }
    Ok(())
}

fn fmt_point(x: &[f64]) -> String {
    if x.len() <= 4 {
        x.iter().map(|v| sig6(*v)).collect::<Vec<_>>().join(",")
    } else {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        format!("[dim {} |x|={}]", x.len(), sig6(norm))
    }
}

fn row(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key:<24}{value}");
}

#[derive(Serialize)]
struct LocalReport {
    problem: String,
    point: Point,
    lambda_bar: LambdaBarEstimate,
    least_local_parameter: Option<f64>,
    exact: bool,
    checks: Vec<LocalMinimumCheck>,
}

fn cmd_local(args: &LocalArgs) -> Result<(String, i32)> {
    let problem = load_problem(&args.problem)?;
    let x = parse_point(&args.point, problem.dim())?;
    let schedule = schedule_of(&args.schedule, problem.dim(), args.problem.seed, SamplingSchedule::default_for(problem.dim()))?;
    let est = estimate_lambda_bar(&problem, x.coords(), &schedule)?;
    let param = least_local_parameter(&est);
    let mut checks = Vec::new();
    if let LocalParameter::Value(v) = param {
        for lambda in [v - LOCAL_CHECK_OFFSET, v + LOCAL_CHECK_OFFSET] {
            if lambda >= 0.0 {
                let pf = PenaltyFunction::new(problem.clone(), lambda)?;
                checks.push(check_local_minimum(&pf, x.coords(), &schedule)?);
            }
        }
    }
    let report = LocalReport {
        problem: problem.name().to_string(),
        point: x.clone(),
        lambda_bar: est.clone(),
        least_local_parameter: param.value(),
        exact: param != LocalParameter::NotExact,
        checks,
    };
    emit_json(&args.problem, &report)?;
    let mut t = String::new();
    row(&mut t, "problem", &report.problem);
    row(&mut t, "point", fmt_point(x.coords()));
    let lambda_bar = match est.value {
        LambdaBarValue::Finite(v) => sig6(v),
        LambdaBarValue::MinusInfinity => "-inf".to_string(),
        LambdaBarValue::Diverging => "diverging".to_string(),
    };
    row(&mut t, "lambda_bar", lambda_bar);
    row(&mut t, "least parameter", param.value().map_or("not exact".to_string(), sig6));
    row(&mut t, "samples", est.samples_used);
    for c in &report.checks {
        row(&mut t, &format!("local min at {}", sig6(c.lambda)), c.is_local_minimum);
    }
    Ok((t, if report.exact { EXIT_OK } else { EXIT_NOT_EXACT }))
}

fn path_table(t: &mut String, path: &PenaltyPath) {
    let _ = writeln!(t, "{:>12}  {:<28}  {:>12}  {:>12}  {:>12}", "lambda", "x", "f", "phi", "F_lambda");
    for r in &path.rungs {
        let _ = writeln!(
            t,
            "{:>12}  {:<28}  {:>12}  {:>12}  {:>12}",
            sig6(r.lambda),
            fmt_point(r.x.coords()),
            sig6(r.f_val),
            sig6(r.phi_val),
            sig6(r.value())
        );
    }
}

fn cmd_global(args: &GlobalArgs) -> Result<(String, i32)> {
    let problem = load_problem(&args.problem)?;
    let mut opts = ExactnessOptions::new(&problem);
    opts.region = region_of(&args.problem, &problem)?;
    opts.fstar = args.fstar;
    opts.seed = args.problem.seed;
    if let Some(n) = args.samples {
        opts.n_samples = n;
    }
    let report: ExactnessReport = analyze_exactness(&problem, &opts)?;
    emit_json(&args.problem, &report)?;
    if let Some(p) = &args.csv {
        export::write_path_csv_file(&report.solve.path, p)?;
    }
    if let (Some(p), Some(h)) = (&args.h_csv, &report.value_function) {
        export::write_value_function_csv_file(h, p)?;
    }
    let mut t = String::new();
    row(&mut t, "problem", &report.problem);
    row(&mut t, "verdict", report.verdict.as_str());
    row(&mut t, "f*", sig6(report.fstar.value));
    for s in &report.sup {
        row(&mut t, &format!("sup bound on {}", s.region), sig6(s.lower_bound));
    }
    row(&mut t, "lambda* lower bound", sig6(report.lambda_star_lower));
    row(&mut t, "solver", report.solve.status.as_str());
    row(&mut t, "final lambda", sig6(report.solve.lambda_final));
    if let Some(l) = &report.lemma {
        row(&mut t, "lemma bound", l.bound.map_or("unbounded below".to_string(), sig6));
    }
    if let Some(n) = &report.nondegeneracy {
        row(&mut t, "non-degenerate", n.nondegenerate);
        row(&mut t, "strongly non-degenerate", n.strongly);
    }
    if let Some(c) = &report.calmness {
        row(&mut t, "h calm from below", c.calm);
    }
    for r in &report.reasons {
        row(&mut t, "reason", r);
    }
    path_table(&mut t, &report.solve.path);
    let code = match report.verdict {
        Verdict::Exact => EXIT_OK,
        Verdict::NotExact => EXIT_NOT_EXACT,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    Ok((t, code))
}

fn cmd_solve(args: &SolveArgs) -> Result<(String, i32)> {
    let problem = load_problem(&args.problem)?;
    let mut config = SolverConfig {
        lambda0: args.lambda0,
        ladder_factor: args.factor,
        max_rungs: args.max_rungs,
        feas_tol: args.feas_tol,
        region: region_of(&args.problem, &problem)?,
        seed: args.problem.seed,
        ..SolverConfig::default()
    };
    if let Some(b) = args.budget {
        config.inner.max_evals = b;
    }
    let report: SolveReport = solve(&problem, &config)?;
    emit_json(&args.problem, &report)?;
    if let Some(p) = &args.csv {
        export::write_path_csv_file(&report.path, p)?;
    }
    let mut t = String::new();
    row(&mut t, "problem", problem.name());
    row(&mut t, "status", report.status.as_str());
    row(&mut t, "x", fmt_point(report.x.coords()));
    row(&mut t, "f", sig6(report.f_val));
    row(&mut t, "phi", sig6(report.phi_val));
    row(&mut t, "final lambda", sig6(report.lambda_final));
    path_table(&mut t, &report.path);
    Ok((t, if report.status == SolveStatus::Solved { EXIT_OK } else { EXIT_NOT_EXACT }))
}

#[derive(Serialize)]
struct StationaryOutput {
    problem: String,
    lambda: f64,
    tol: f64,
    clusters: Vec<StationaryCluster>,
    unresolved: usize,
    lipschitz_estimate: f64,
    a: f64,
    #[serde(rename = "bound_L_over_a")]
    bound_l_over_a: f64,
    descent_hypothesis: DescentHypothesisReport,
}

fn cmd_stationary(args: &StationaryArgs) -> Result<(String, i32)> {
    let problem = load_problem(&args.problem)?;
    let region = region_of(&args.problem, &problem)?.unwrap_or_else(|| problem.region().clone());
    let seed = args.problem.seed;
    let schedule = schedule_of(&args.schedule, problem.dim(), seed, stationarity::default_schedule(problem.dim()))?;
    let pf = PenaltyFunction::new(problem.clone(), args.lambda)?;
    let rep = find_inf_stationary(&pf, &region, args.seeds, &schedule, args.tol, seed)?;
    let lip = estimate_lipschitz(&problem, &region, args.samples, seed)?;
    let bound = infeasible_stationarity_bound(lip.l, args.a)?;
    let descent = verify_descent_hypothesis(&problem, &region, args.a, args.samples, seed)?;
    let output = StationaryOutput {
        problem: problem.name().to_string(),
        lambda: args.lambda,
        tol: args.tol,
        clusters: rep.clusters,
        unresolved: rep.unresolved,
        lipschitz_estimate: lip.l,
        a: args.a,
        bound_l_over_a: bound,
        descent_hypothesis: descent,
    };
    emit_json(&args.problem, &output)?;
    let mut t = String::new();
    row(&mut t, "problem", &output.problem);
    row(&mut t, "lambda", sig6(output.lambda));
    row(&mut t, "L estimate", sig6(output.lipschitz_estimate));
    row(&mut t, "L/a", sig6(output.bound_l_over_a));
    row(&mut t, "descent violations", output.descent_hypothesis.violations);
    row(&mut t, "unresolved starts", output.unresolved);
    let _ = writeln!(t, "{:<28}  {:>12}  {:>12}  {:>8}  {:>7}", "x", "rate", "phi", "feasible", "members");
    for c in &output.clusters {
        let _ = writeln!(
            t,
            "{:<28}  {:>12}  {:>12}  {:>8}  {:>7}",
            fmt_point(c.x.coords()),
            sig6(c.rate),
            sig6(c.phi),
            c.feasible,
            c.members
        );
    }
    Ok((t, EXIT_OK))
}

fn corpus_list() -> String {
    let mut t = String::new();
    for id in corpus::INSTANCE_IDS {
        let _ = writeln!(t, "{id:<22}{}", corpus::describe(id));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("exactpen").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn region_and_point_parsing() {
        assert_eq!(parse_region("-1:3", 1).unwrap(), Region::interval(-1.0, 3.0).unwrap());
        assert_eq!(parse_region("-3:3", 2).unwrap(), Region::cube(2, -3.0, 3.0).unwrap());
        assert!(parse_region("0:1,0:1,0:1", 2).is_err());
        assert!(parse_region("3:1", 1).is_err());
        assert!(parse_region("a:b", 1).is_err());
        assert_eq!(parse_point("0,-1.5", 2).unwrap().coords(), &[0.0, -1.5]);
        assert!(parse_point("0", 2).is_err());
        assert_eq!(parse_params(&["N=7".into()]).unwrap()["N"], 7.0);
        assert!(parse_params(&["N".into()]).is_err());
    }

    #[test]
    fn local_command() {
        let (code, out, _) = exec(&["local", "--builtin", "example_1d", "--point", "0"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("least parameter"), "{out}");
        let (code, _, err) = exec(&["local", "--builtin", "example_1d", "--point", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("error"));
        let (code, _, _) = exec(&["local", "--builtin", "sqrt_noncalm", "--point", "0"]);
        assert_eq!(code, EXIT_NOT_EXACT);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(exec(&["local", "--point", "0"]).0, EXIT_USAGE);
        assert_eq!(exec(&["local", "--builtin", "nope", "--point", "0"]).0, EXIT_USAGE);
        assert_eq!(exec(&["solve", "--builtin", "example_1d", "--region", "1:2"]).0, EXIT_USAGE);
        assert_eq!(exec(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(exec(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn corpus_listing() {
        let (code, out, _) = exec(&["corpus-list"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().count(), corpus::INSTANCE_IDS.len());
    }
}
