use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pll(args: &[&str]) -> Output {
    pll_env(args, None)
}

fn pll_env(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pll"));
    cmd.args(args).env_remove("PLL_SEED");
    if let Some(s) = seed_env {
        cmd.env("PLL_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).expect("each line is JSON")).collect()
}

/// The output without its echoed config: a leading header line or `# `
/// block, or the `config` member of a single-record JSON output.
fn payload(text: &str) -> String {
    if text.starts_with('{') {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() == 1 {
            let mut record: Value = serde_json::from_str(lines[0]).unwrap();
            record.as_object_mut().unwrap().remove("config");
            return record.to_string();
        }
        lines[1..].join("\n")
    } else {
        text.lines().skip_while(|l| l.starts_with('#')).collect::<Vec<_>>().join("\n")
    }
}

#[test]
fn verify_theorem31_example_accepts() {
    let o = pll(&["verify", "--scenario", "theorem31", "--alpha", "2", "--n", "100000", "--reps", "10000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = json_lines(&o);
    assert_eq!(lines[0]["config"]["verify"]["alpha"], 2.0);
    let reports = &lines[1..lines.len() - 1];
    let names: Vec<&str> = reports.iter().map(|r| r["test_name"].as_str().unwrap()).collect();
    assert_eq!(names, ["poisson-count", "independence", "timechange-spacing"]);
    for r in reports {
        assert_eq!(r["decision"], "accept");
        assert_eq!(r["reps"], 10000);
        assert_eq!(r["seed"], 7);
    }
    assert_eq!(lines.last().unwrap()["summary"]["rejected"], 0);
}

#[test]
fn knn_example_emits_one_record_with_interval() {
    let o = pll(&["knn", "--model", "uniform", "--t", "0.5", "--k", "5", "--n", "100000", "--level", "0.95", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 1);
    let est = &lines[0]["estimate"];
    assert_eq!(est["k"], 5);
    let (lo, hi, v) = (est["ci"]["lower"].as_f64().unwrap(), est["ci"]["upper"].as_f64().unwrap(), est["value"].as_f64().unwrap());
    assert!(lo < v && v < hi);
    assert_eq!(lines[0]["density"], 1.0);
}

#[test]
fn missing_flag_exits_one_and_names_it() {
    let o = pll(&["knn", "--model", "uniform", "--k", "5", "--n", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--t"), "{}", stderr(&o));

    let o = pll(&["copula", "--format", "csv", "--rho", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--n"), "{}", stderr(&o));

    let o = pll(&["verify", "--n", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario"), "{}", stderr(&o));
}

#[test]
fn invalid_values_exit_one_and_name_the_key() {
    for (args, key) in [
        (vec!["knn", "--model", "uniform", "--t", "0.5", "--k", "5", "--n", "100", "--level", "1.5"], "level"),
        (vec!["simulate", "--model", "uniform", "--alpha", "2", "--n", "10"], "alpha"),
        (vec!["simulate", "--model", "power-law", "--q", "2", "--n", "10"], "`q`"),
        (vec!["copula", "--rho", "-1"], "rho"),
        (vec!["knn", "--model", "uniform", "--t", "x"], "--t"),
    ] {
        let o = pll(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).contains(key), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(pll(&["--help"]).status.code(), Some(0));
    assert_eq!(pll(&["verify", "--help"]).status.code(), Some(0));
    assert_eq!(pll(&["--version"]).status.code(), Some(0));
}

#[test]
fn rejection_exits_two_with_reports() {
    // Two draws are far from the Poisson limit.
    let o = pll(&["verify", "--scenario", "theorem31", "--model", "uniform", "--n", "2", "--reps", "5000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let lines = json_lines(&o);
    assert_eq!(lines.last().unwrap()["summary"]["decision"], "reject");
    assert!(lines[1..lines.len() - 1].iter().any(|r| r["decision"] == "reject"));
}

fn round_trip(args: &[&str], dir: &Path, name: &str) {
    let first = dir.join(name);
    let second = dir.join(format!("again-{name}"));
    let mut a: Vec<&str> = args.to_vec();
    let first_s = first.to_str().unwrap();
    a.extend(["--out", first_s]);
    let o = pll(&a);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = pll(&[args[0], "--config", first_s, "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (x, y) = (std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    let data = payload(&String::from_utf8(x.clone()).unwrap());
    assert!(data.len() > 2, "{name} has no data: {data}");
    assert_eq!(x, y, "{name} is not reproduced");
}

#[test]
fn echoed_config_reproduces_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    round_trip(&["simulate", "--model", "uniform", "--q", "0.5", "--n", "5000", "--t-lo", "-4", "--t-hi", "4", "--seed", "3"], d, "sim.csv");
    round_trip(&["compensator", "--model", "power-law", "--alpha", "2", "--n", "1000", "--seed", "2"], d, "comp.csv");
    round_trip(&["compensator", "--model", "uniform", "--q", "0.25,0.75", "--n", "1000", "--grid", "-1,0,1", "--seed", "2"], d, "joint.csv");
    round_trip(&["verify", "--scenario", "corollary32", "--n", "1000", "--reps", "300", "--seed", "5"], d, "verify.jsonl");
    round_trip(&["knn", "--model", "gap", "--g1", "0.3", "--g2", "0.6", "--t", "0.2", "--k", "3", "--n", "1000"], d, "knn.json");
    round_trip(&["gap-test", "--model", "power-law", "--k", "8", "--n", "1000", "--seed", "4"], d, "gap.json");
    round_trip(&["copula", "--rho", "0.4", "--t-grid", "1:1,2:3"], d, "tail.json");
    round_trip(&["copula", "--rho", "0.4", "--format", "csv", "--n", "1000000", "--seed", "8"], d, "extremes.csv");
    round_trip(
        &["simulate", "--model", "piecewise", "--breakpoints", "0,0.5,1", "--weights", "0.5,0.5", "--exponents", "2:1,1:1", "--n", "500", "--q", "0.5", "--t-lo", "-2", "--t-hi", "2"],
        d,
        "piecewise.csv",
    );
}

#[test]
fn flags_override_file_values_and_unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "[knn]\nfamily = \"uniform\"\nt = 0.5\nk = 3\nn = 1000\nseed = 11\n").unwrap();
    let f = file.to_str().unwrap();
    let o = pll(&["knn", "--config", f, "--k", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = &json_lines(&o)[0];
    assert_eq!(rec["estimate"]["k"], 4);
    assert_eq!(rec["config"]["knn"]["seed"], 11);

    std::fs::write(&file, "[knn]\nfamily = \"uniform\"\nbandwidth = 2\n").unwrap();
    let o = pll(&["knn", "--config", f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("knn.bandwidth"), "{}", stderr(&o));

    std::fs::write(&file, "[knnn]\nk = 2\n").unwrap();
    let o = pll(&["knn", "--config", f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("knnn"), "{}", stderr(&o));

    std::fs::write(&file, "[knn]\nk = \"three\"\n").unwrap();
    let o = pll(&["knn", "--config", f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("knn.k"), "{}", stderr(&o));
}

#[test]
fn seed_falls_back_to_environment() {
    let args = ["gap-test", "--model", "power-law", "--k", "5", "--n", "500"];
    let env = json_lines(&pll_env(&args, Some("42")));
    assert_eq!(env[0]["config"]["gap-test"]["seed"], 42);
    let mut flagged = args.to_vec();
    flagged.extend(["--seed", "42"]);
    assert_eq!(stdout(&pll(&flagged)), stdout(&pll_env(&args, Some("42"))));
    let flag_wins = json_lines(&pll_env(&flagged, Some("7")));
    assert_eq!(flag_wins[0]["config"]["gap-test"]["seed"], 42);
    assert_eq!(json_lines(&pll(&args))[0]["config"]["gap-test"]["seed"], 0);
    assert_eq!(pll_env(&args, Some("seven")).status.code(), Some(1));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let base = ["verify", "--scenario", "theorem31", "--alpha", "1.5", "--n", "10000", "--reps", "2000", "--seed", "9"];
    let runs: Vec<Vec<u8>> = ["1", "3", "8"]
        .iter()
        .map(|t| {
            let mut a = base.to_vec();
            a.extend(["--threads", t]);
            let o = pll(&a);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            o.stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert_eq!(pll(&["verify", "--scenario", "theorem31", "--threads", "0"]).status.code(), Some(1));
}

#[test]
fn csv_outputs_have_headers_and_plain_decimals() {
    let o = pll(&["compensator", "--model", "uniform", "--q", "0.5", "--n", "1000", "--grid", "-1,0,1", "--seed", "1"]);
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let body = payload(&text);
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("q,t,value,limit"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][2], 0.0);
    assert!(rows.iter().all(|r| r[3] == r[1].abs()));
}

#[test]
fn joint_windows_that_overlap_report_the_minimal_size() {
    let o = pll(&["compensator", "--model", "uniform", "--q", "0.5,0.51", "--n", "100", "--grid", "0,1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("201"), "{}", stderr(&o));
}
