use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gmidas(args: &[&str]) -> Output {
    gmidas_env(args, &[])
}

fn gmidas_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gmidas"));
    cmd.args(args).env_remove("GMIDAS_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulates `months` of data into `dir` and returns the (daily, monthly) paths.
fn simulate(dir: &Path, months: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (d, m) = (dir.join(format!("daily{seed}.csv")), dir.join(format!("X{seed}.csv")));
    let o = gmidas(&[
        "simulate",
        "--months",
        &months.to_string(),
        "--seed",
        &seed.to_string(),
        "--start",
        "2008-01",
        "--daily-out",
        s(&d),
        "--monthly-out",
        s(&m),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (d, m)
}

#[test]
fn simulate_writes_requested_shape_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let (d, m) = (dir.path().join(format!("d{tag}.csv")), dir.path().join(format!("m{tag}.csv")));
        let o = gmidas(&["simulate", "--months", "500", "--days", "22", "--seed", "3", "--daily-out", s(&d), "--monthly-out", s(&m)]);
        let summary = json(&o);
        (std::fs::read(d).unwrap(), std::fs::read(m).unwrap(), summary)
    };
    let (d1, m1, summary) = run("a");
    let (d2, m2, _) = run("b");
    assert_eq!(d1, d2);
    assert_eq!(m1, m2);
    let rows = String::from_utf8(d1).unwrap().lines().count() - 1;
    assert_eq!(rows, 11000);
    assert_eq!(summary["daily_rows"], 11000);
    assert_eq!(summary["monthly_rows"], 524);
}

#[test]
fn stats_reports_every_column_in_json_and_text() {
    let dir = tempfile::tempdir().unwrap();
    let (d, m) = simulate(dir.path(), 60, 1);
    let base = ["stats", "--daily", d.to_str().unwrap(), "--kind", "log_return", "--regressor", "rv", "--monthly", m.to_str().unwrap()];
    let v = json(&gmidas(&base));
    let vars = v["variables"].as_array().unwrap();
    assert_eq!(vars.len(), 3);
    for var in vars {
        for key in ["name", "mean", "median", "max", "min", "std_dev", "skewness", "kurtosis", "jarque_bera", "adf"] {
            assert!(var.get(key).is_some(), "missing {key} in {var}");
        }
        let p = var["jarque_bera"]["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    let mut text_args = base.to_vec();
    text_args.extend(["--format", "text"]);
    let o = gmidas(&text_args);
    assert_eq!(code(&o), 0);
    let t = stdout(&o);
    for row in ["Mean", "Median", "Max", "Min", "Std", "Skew", "Kurt", "JB", "ADF", "p<0.01"] {
        assert!(t.contains(row), "missing {row}:\n{t}");
    }
}

#[test]
fn empty_or_malformed_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = gmidas(&["stats", "--daily", s(&empty)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("malformed row"), "{}", stderr(&o));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "date,value\n2010-01-04,1.0\n2010-01-05,abc\n").unwrap();
    let o = gmidas(&["stats", "--daily", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert_eq!(code(&gmidas(&["fit"])), 2);
    assert_eq!(code(&gmidas(&["no-such-command"])), 2);
    assert_eq!(code(&gmidas(&[])), 2);
}

#[test]
fn fit_exit_codes_follow_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let (d, _) = simulate(dir.path(), 60, 2);
    let ds = d.to_str().unwrap();
    let v = json(&gmidas(&["fit", "--daily", ds, "--kind", "log_return"]));
    assert_eq!(v["estimates"].as_array().unwrap().len(), 7);
    assert_eq!(v["converged"], true);

    let strict = gmidas(&["fit", "--daily", ds, "--kind", "log_return", "--max-iter", "5"]);
    assert_eq!(code(&strict), 4, "{}", stderr(&strict));
    assert!(stderr(&strict).contains("--allow-nonconverged"));
    let loose = gmidas(&["fit", "--daily", ds, "--kind", "log_return", "--max-iter", "5", "--allow-nonconverged"]);
    assert_eq!(json(&loose)["converged"], false);

    let zeros = dir.path().join("zeros.csv");
    let mut body = String::from("date,value\n");
    for m in 1..=12 {
        for d in 1..=20 {
            body.push_str(&format!("2010-{m:02}-{d:02},0\n"));
        }
    }
    std::fs::write(&zeros, body).unwrap();
    let o = gmidas(&["fit", "--daily", s(&zeros), "--kind", "log_return", "--k", "3"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn flags_override_config_file_and_env_var_supplies_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"subcommand": "weights", "omega2": 5.0, "k": 4}"#).unwrap();
    let from_file = json(&gmidas(&["--config", s(&cfg)]));
    assert_eq!(from_file["weights"].as_array().unwrap().len(), 4);
    let overridden = json(&gmidas(&["--config", s(&cfg), "--k", "6"]));
    assert_eq!(overridden["weights"].as_array().unwrap().len(), 6);
    let from_env = json(&gmidas_env(&[], &[("GMIDAS_CONFIG", &cfg)]));
    assert_eq!(from_env, from_file);
    let positional = json(&gmidas_env(&["weights", "--omega2", "1.0"], &[("GMIDAS_CONFIG", &cfg)]));
    let w = positional["weights"].as_array().unwrap();
    assert_eq!(w.len(), 4);
    assert!(w.iter().all(|x| (x.as_f64().unwrap() - 0.25).abs() < 1e-12));

    std::fs::write(&cfg, r#"{"subcommand": "weights", "omega_two": 5.0}"#).unwrap();
    assert_eq!(code(&gmidas(&["--config", s(&cfg)])), 2);
}

#[test]
fn weights_sum_to_one_and_decline() {
    let v = json(&gmidas(&["weights", "--omega2", "3", "--k", "24"]));
    let w: Vec<f64> = v["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(w.len(), 24);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(w.windows(2).all(|p| p[0] > p[1]));
    let o = gmidas(&["weights", "--omega2", "3", "--format", "text"]);
    assert_eq!(stdout(&o).lines().count(), 25);
    assert_eq!(code(&gmidas(&["weights"])), 2);
    assert_eq!(code(&gmidas(&["weights", "--omega2", "0.5"])), 2);
}

#[test]
fn forecast_then_evaluate_matches_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let (d, m) = simulate(dir.path(), 96, 4);
    let window = ["--daily", d.to_str().unwrap(), "--kind", "log_return", "--regressor", "file", "--monthly", m.to_str().unwrap(), "--preset", "paper-2008-2015"];
    let fit_path = dir.path().join("fit.json");
    let mut args = vec!["fit"];
    args.extend(window);
    args.extend(["--output", s(&fit_path)]);
    assert_eq!(code(&gmidas(&args)), 0);

    let fc_path = dir.path().join("fc.csv");
    let mut args = vec!["forecast"];
    args.extend(window);
    args.extend(["--fit", s(&fit_path), "--output", s(&fc_path)]);
    let o = gmidas(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eval = json(&gmidas(&["evaluate", "--forecast", s(&fc_path)]));

    let mut args = vec!["protocol"];
    args.extend(window);
    let report = json(&gmidas(&args));
    let oos = report["losses"].as_array().unwrap().iter().find(|l| l["sample"] == "out_of_sample").unwrap().clone();
    assert_eq!(eval["rmse"], oos["rmse"]);
    assert_eq!(eval["t"], oos["t"]);
}

#[test]
fn compare_ranks_reports_and_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let (d, m) = simulate(dir.path(), 96, 5);
    let base = ["--daily", d.to_str().unwrap(), "--kind", "log_return", "--preset", "paper-2008-2015"];
    let mut paths = Vec::new();
    for (name, extra) in [("rv", vec!["--regressor", "rv"]), ("x", vec!["--regressor", "file", "--monthly", m.to_str().unwrap()])] {
        let p = dir.path().join(format!("{name}.json"));
        let mut args = vec!["protocol"];
        args.extend(base);
        args.extend(extra);
        args.extend(["--output", s(&p)]);
        assert_eq!(code(&gmidas(&args)), 0);
        paths.push(p);
    }
    let from_reports = json(&gmidas(&["compare", "--report", s(&paths[0]), "--report", s(&paths[1])]));
    assert_eq!(from_reports["rows"].as_array().unwrap().len(), 2);
    assert_eq!(from_reports["best"].as_array().unwrap().len(), 4);

    let mut args = vec!["compare"];
    args.extend(base);
    args.extend(["--candidate", "rv", "--candidate", m.to_str().unwrap()]);
    let from_candidates = json(&gmidas(&args));
    assert_eq!(from_candidates, from_reports);
    assert_eq!(code(&gmidas(&["compare", "--report", s(&paths[0])])), 2);
}

#[test]
fn build_index_writes_series_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    let mut body = String::from("month,US,UK,JP\n");
    for t in 0..36 {
        let f = (t as f64 * 0.7).sin() * 50.0 + 100.0;
        let jp = if t == 0 { "na".to_string() } else { format!("{}", 0.5 * f + (t % 3) as f64) };
        body.push_str(&format!("{}-{:02},{},{},{}\n", 2010 + t / 12, t % 12 + 1, f, 2.0 * f + (t % 5) as f64, jp));
    }
    std::fs::write(&panel, body).unwrap();
    let out = dir.path().join("global.csv");
    let o = gmidas(&["build-index", "--panel", s(&panel), "--output", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 36);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("global.json")).unwrap()).unwrap();
    assert_eq!(side["dropped_months"], 1);
    assert_eq!(side["loadings"].as_array().unwrap().len(), 3);
    let ev = side["explained_variance"].as_f64().unwrap();
    assert!(ev > 0.9 && ev <= 1.0);

    let degenerate = dir.path().join("flat.csv");
    std::fs::write(&degenerate, "month,A,B\n2010-01,1,2\n2010-02,1,3\n2010-03,1,4\n").unwrap();
    assert_eq!(code(&gmidas(&["build-index", "--panel", s(&degenerate)])), 2);
}
