use std::process::{Command, Output};

fn exactpen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exactpen"))
        .args(args)
        .env_remove("EXACTPEN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn local_reports_parameter_two() {
    let o = exactpen(&["local", "--builtin", "example_1d", "--point", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("lambda_bar")).unwrap();
    let v: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!((v - 2.0).abs() < 0.05, "{text}");
}

#[test]
fn local_rejects_infeasible_point() {
    let o = exactpen(&["local", "--builtin", "example_1d", "--point", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("feasible"));
}

#[test]
fn local_convex_at_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("local.json");
    let o = exactpen(&["local", "--builtin", "convex_slater", "--point", "0,0", "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let lp = v["least_local_parameter"].as_f64().unwrap();
    assert!(lp.is_finite() && (lp - 4.0).abs() < 0.1, "{lp}");
}

#[test]
fn global_verdicts_and_exit_codes() {
    let o = exactpen(&["global", "--builtin", "stairs"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("not_exact"));
    let o = exactpen(&["global", "--builtin", "example_1d", "--region", "-3:3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = exactpen(&["global", "--builtin", "convex_slater"]);
    assert_eq!(o.status.code(), Some(0));
    let o = exactpen(&["global", "--builtin", "example_1d", "--region", "3:-3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_outputs_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("path.csv");
    let o = exactpen(&["solve", "--builtin", "example_1d", "--region", "-3:3", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("solved"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("lambda,x1,f,phi,value,status\n"));
    assert!(text.lines().count() >= 3);
    let o = exactpen(&["solve", "--builtin", "stairs", "--region", "-1:500"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("not_exact_suspected"));
    let o = exactpen(&["solve", "--builtin", "example_1d", "--region", "1:2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stationary_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("st.json");
    let o = exactpen(&["stationary", "--builtin", "example_1d", "--lambda", "3", "--region", "-1:3", "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let infeasible: Vec<f64> = v["clusters"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| !c["feasible"].as_bool().unwrap())
        .map(|c| c["x"][0].as_f64().unwrap())
        .collect();
    assert_eq!(infeasible.len(), 1);
    assert!((infeasible[0] - 0.5).abs() < 1e-3);
    assert!(v["bound_L_over_a"].as_f64().unwrap() <= 8.0);
    let o = exactpen(&["stationary", "--builtin", "example_1d", "--lambda", "10", "--region", "-1:3", "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["clusters"].as_array().unwrap().iter().all(|c| c["feasible"].as_bool().unwrap()));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["global", "--builtin", "example_1d", "--region", "-3:3", "--seed", "5", "--json"];
    let oa = exactpen(&[&args[..], &[a.to_str().unwrap()]].concat());
    let ob = exactpen(&[&args[..], &[b.to_str().unwrap()]].concat());
    assert_eq!(oa.stdout, ob.stdout);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: Option<&str>, env: Option<&str>, name: &str| {
        let path = dir.path().join(name);
        let mut c = Command::new(env!("CARGO_BIN_EXE_exactpen"));
        c.args(["local", "--builtin", "example_1d", "--point", "0", "--json", path.to_str().unwrap()]);
        if let Some(s) = seed {
            c.args(["--seed", s]);
        }
        match env {
            Some(e) => c.env("EXACTPEN_SEED", e),
            None => c.env_remove("EXACTPEN_SEED"),
        };
        assert_eq!(c.output().unwrap().status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    let flag = run(Some("9"), None, "flag.json");
    let env = run(None, Some("9"), "env.json");
    let both = run(Some("9"), Some("3"), "both.json");
    let default = run(None, None, "default.json");
    assert_eq!(flag, env);
    assert_eq!(flag, both);
    assert_ne!(flag, default);
}

#[test]
fn nlp_definition_file() {
    let dir = tempfile::tempdir().unwrap();
    let def = dir.path().join("p.json");
    std::fs::write(
        &def,
        r#"{"nlp": {"name": "qp", "objective": "(x1 - 2)^2 + x2^2", "inequalities": ["x1"], "region": {"box": {"lower": [-3, -3], "upper": [3, 3]}}}}"#,
    )
    .unwrap();
    let o = exactpen(&["solve", "--nlp", def.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = exactpen(&["solve", "--nlp", def.to_str().unwrap(), "--builtin", "example_1d"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corpus_list_names_every_instance() {
    let o = exactpen(&["corpus-list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for id in exactpen::corpus::INSTANCE_IDS {
        assert!(text.contains(id));
    }
}
