use std::path::Path;
use std::process::{Command, Output};

use psweight::cli::SimulateConfig;
use psweight::prelude::*;
use psweight::simulation::generate_sample;

fn psweight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psweight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_sample(dir: &Path) -> String {
    let path = dir.join("data.csv");
    let d = generate_sample(&DgpConfig::good_overlap(300, 1), 6, 0).unwrap();
    d.write_csv(
        std::fs::File::create(&path).unwrap(),
        &ColumnMapping::new("A", "Y", &["X1", "X2", "X3", "X4"]),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn base_args(input: &str) -> Vec<String> {
    [
        "analyze",
        "--input",
        input,
        "--treatment-col",
        "A",
        "--outcome-col",
        "Y",
        "--covariate-cols",
        "X1,X2,X3,X4",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run(args: &[String]) -> Output {
    psweight(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).expect("stderr carries a JSON error")
}

#[test]
fn analyze_default_wate_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path());
    let out = dir.path().join("out");
    let mut args = base_args(&input);
    args.extend([
        "--trim-alpha".into(),
        "0.05,0.1".into(),
        "--out".into(),
        out.to_str().unwrap().into(),
    ]);
    let res = run(&args);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let text = std::fs::read_to_string(out.join("wate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "label,Est,Std.Err,Upr,Lwr,estimand,measure,ci_method,error"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let labels: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(
        labels,
        [
            "overall",
            "treated",
            "control",
            "overlap",
            "matching",
            "entropy",
            "trimming (alpha=0.05)",
            "trimming (alpha=0.1)"
        ]
    );
    for r in &rows {
        assert!(!r[1].is_empty());
        assert_eq!(&r[2..5], ["", "", ""], "no bootstrap, no intervals");
    }
}

#[test]
fn analyze_with_bootstrap_fills_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path());
    let mut args = base_args(&input);
    args.extend(
        [
            "--class", "watt", "--boot", "--n-boot", "30", "--seed", "4", "--format", "json",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let res = run(&args);
    assert_eq!(res.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let rows = v[0]["rows"].as_array().unwrap();
    let labels: Vec<&str> = rows.iter().map(|r| r["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["overall", "overlap", "matching", "entropy"]);
    for r in rows {
        let (lo, hi) = (r["Lwr"].as_f64().unwrap(), r["Upr"].as_f64().unwrap());
        assert!(lo <= r["Est"].as_f64().unwrap() && r["Est"].as_f64().unwrap() <= hi);
        assert!(r["Std.Err"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn missing_column_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path());
    let mut args = base_args(&input);
    args[4] = "treat".into();
    let res = run(&args);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(stderr_json(&res)["error"], "missing_column");
}

#[test]
fn invalid_treatment_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "A,Y,x\n1,2,0.1\n0,1,0.2\n2,3,0.3\n0,1,0.5\n").unwrap();
    let res = psweight(&[
        "analyze",
        "--input",
        path.to_str().unwrap(),
        "--treatment-col",
        "A",
        "--outcome-col",
        "Y",
        "--covariate-cols",
        "x",
    ]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr_json(&res);
    assert_eq!(err["error"], "invalid_data");
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("treatment not in {0,1}"));
}

#[test]
fn separation_is_a_computational_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sep.csv");
    std::fs::write(
        &path,
        "A,Y,x\n0,1,-3\n0,2,-2\n0,1,-1\n1,3,1\n1,4,2\n1,5,3\n",
    )
    .unwrap();
    let res = psweight(&[
        "analyze",
        "--input",
        path.to_str().unwrap(),
        "--treatment-col",
        "A",
        "--outcome-col",
        "Y",
        "--covariate-cols",
        "x",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["error"], "separation");
}

#[test]
fn bad_flag_value_is_a_user_error() {
    let res = psweight(&[
        "analyze",
        "--input",
        "x.csv",
        "--treatment-col",
        "A",
        "--outcome-col",
        "Y",
        "--class",
        "wxyz",
    ]);
    assert_eq!(res.status.code(), Some(1));
    let res = psweight(&["--help"]);
    assert_eq!(res.status.code(), Some(0));
}

#[test]
fn diagnose_reports_both_schemes_and_alpha_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path());
    let out = dir.path().join("diag");
    let res = psweight(&[
        "diagnose",
        "--input",
        &input,
        "--treatment-col",
        "A",
        "--outcome-col",
        "Y",
        "--covariate-cols",
        "X1,X2,X3,X4",
        "--class",
        "wate,watt",
        "--schemes",
        "ow,ipw",
        "--alpha-list",
        "0.05,0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let ess = std::fs::read_to_string(out.join("ess.csv")).unwrap();
    let rows: Vec<Vec<&str>> = ess
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let schemes: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(
        schemes,
        [
            ("wate", "ow"),
            ("wate", "ipw"),
            ("watt", "ow"),
            ("watt", "ipw")
        ]
    );
    for r in rows.iter().filter(|r| r[0] == "watt") {
        assert_eq!(
            r[6].parse::<f64>().unwrap(),
            r[4].parse::<f64>().unwrap(),
            "anchored arm ESS equals n_treated"
        );
    }

    let overlap = std::fs::read_to_string(out.join("overlap.csv")).unwrap();
    let header: Vec<&str> = overlap.lines().next().unwrap().split(',').collect();
    assert_eq!(
        header.iter().filter(|h| h.starts_with("extreme_")).count(),
        2
    );
}

#[test]
fn simulate_custom_config_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(
        &cfg,
        "gamma = 1.0\nalpha0 = 0.5\nn = 200\nreplications = 4\nbootstrap = 10\nseed = 3\nsuper_n = 100000\nschemes = [\"wate:ow\", \"watc:ipw\"]\n",
    )
    .unwrap();
    let out = dir.path().join("sim");
    let res = psweight(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(v["metadata"]["overlap"], "custom");
    assert_eq!(v["schemes"].as_array().unwrap().len(), 2);
    for f in ["summary.csv", "replicates.csv", "heatmap.csv"] {
        assert!(out.join(f).exists());
    }
}

#[test]
fn simulate_zero_replications_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(
        &cfg,
        "gamma = 0.5\nalpha0 = 0.407\nn = 2000\nreplications = 0\nschemes = [\"wate:ow\"]\n",
    )
    .unwrap();
    let res = psweight(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(stderr_json(&res)["error"], "config");
}

#[test]
fn full_scale_poor_overlap_config_is_accepted() {
    let text = "gamma = 2.5\nalpha0 = 2.074\nn = 2000\nreplications = 1000\nbootstrap = 200\nseed = 1\nschemes = [\"wate:ipw\", \"wate:ow\", \"wate:mw\", \"wate:ew\"]\n";
    let mc = SimulateConfig::from_toml(text)
        .unwrap()
        .to_monte_carlo()
        .unwrap();
    assert_eq!(
        (
            mc.dgp.gamma,
            mc.dgp.alpha0,
            mc.dgp.n,
            mc.replications,
            mc.bootstrap
        ),
        (2.5, 2.074, 2000, 1000, 200)
    );
    assert_eq!(mc.dgp.overlap_label(), "poor");
    assert!(SimulateConfig::from_toml("gamma = 1\nbogus = 2\n").is_err());
}
