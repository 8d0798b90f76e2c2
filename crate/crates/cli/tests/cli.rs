//! End-to-end checks of the command-line interface: exit codes, JSON
//! contents, config handling and bit-for-bit determinism.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_burster"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("burster-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn geometry_reports_x_eval() {
    let out = bin().arg("geometry").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let x_eval = v["folded_singularity"]["X_eval"].as_f64().unwrap();
    assert!((x_eval - (-3.3248)).abs() < 1e-3, "X_eval = {x_eval}");
    assert_eq!(v["folded_singularity"]["kind"], "FoldedNode");
}

#[test]
fn geometry_honors_config_file() {
    let dir = tmpdir("config");
    let cfg = dir.join("run.json");
    std::fs::write(
        &cfg,
        r#"{"params": {"a0": 1.0, "a1": 0.02, "a2": 0.8, "c": 0.69, "b1": 0.0, "b2": -0.8,
             "lambda1": 1.5, "lambda3": -1.0, "mu1": 4.0, "mu3": -1.0, "eps": 0.05, "delta": 0.01}}"#,
    )
    .unwrap();
    let out = bin().arg("geometry").arg("--config").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["folded_singularity"]["X_eval"].as_f64().unwrap() - (-3.3248)).abs() < 1e-3);
    // Unknown keys are rejected.
    std::fs::write(&cfg, r#"{"paramz": {}}"#).unwrap();
    let out = bin().arg("geometry").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn h5_matches_library() {
    let out = bin()
        .args(["h5", "--eps", "0.05", "--delta", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = burster_core::ParameterSet::reference().with_eps_delta(0.05, 0.1);
    let rep = burster_core::folded::check_h5(&p).unwrap();
    assert_eq!(v["holds"].as_bool().unwrap(), rep.holds);
    assert!((v["lhs"].as_f64().unwrap() - rep.lhs).abs() < 1e-12);
    assert!((v["rhs"].as_f64().unwrap() - rep.rhs).abs() < 1e-12);
}

#[test]
fn unknown_subcommand_exits_2_without_files() {
    let dir = tmpdir("unknown");
    let out = bin()
        .arg("frobnicate")
        .env("BURSTER_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 0, "files written on usage error");
}

#[test]
fn domain_error_exits_1() {
    // Invalid parameter override (eps out of range).
    let out = bin().args(["geometry", "--eps", "2.0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_are_bit_identical_across_runs() {
    let run = |dir: &PathBuf| {
        let out = bin()
            .args(["simulate", "--field", "full4d", "--t-end", "2.0"])
            .env("BURSTER_OUTPUT_DIR", dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.join("trajectory.csv")).unwrap()
    };
    let d1 = tmpdir("det1");
    let d2 = tmpdir("det2");
    let b1 = run(&d1);
    let b2 = run(&d2);
    assert_eq!(b1, b2, "trajectory.csv differs between runs");
    // Manifest carries the config hash.
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert!(m["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn simulate_then_classify_roundtrip() {
    let dir = tmpdir("classify");
    let out = bin()
        .args(["simulate", "--field", "full4d", "--t-end", "20.0"])
        .env("BURSTER_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin()
        .args(["classify", "--input"])
        .arg(dir.join("trajectory.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["p"].as_u64().unwrap() > 0, "no pulses classified: {v}");
}

#[test]
fn reduce_prints_coefficients_and_evaluates() {
    let out = bin()
        .args(["reduce", "--tag", "threescale3d", "--at", "0.1,0.2,-2.0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = v["eval"]["derivative"][2].as_f64().unwrap();
    assert!((d - 0.35).abs() < 1e-12, "X drift {d}");
    assert!((v["coefficients"]["alpha"].as_f64().unwrap() - 2.1213203).abs() < 1e-6);
}

#[test]
fn wiwo_and_sectors_aliases() {
    let out = bin().args(["wiwo", "--x0", "-0.3"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["x_star"].as_f64().unwrap() - 0.3677).abs() < 1e-3);
    let out = bin()
        .args(["folded", "wiwo", "--x0", "-0.3"])
        .output()
        .unwrap();
    let v2: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["x_star"], v2["x_star"]);
    let out = bin()
        .args(["sectors", "--x0", "-0.3", "--eps", "0.01", "--delta", "0.05"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["k"].as_u64().unwrap() >= 4);
}

#[test]
fn periodic_writes_orbit_and_csv() {
    let dir = tmpdir("periodic");
    let out = bin()
        .arg("periodic")
        .env("BURSTER_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let json_part = text.split("wrote one period").next().unwrap();
    let v: serde_json::Value = serde_json::from_str(json_part.trim()).unwrap();
    assert!(v["period"].as_f64().unwrap() > 1.0);
    assert!(v["contraction_ratio"].as_f64().unwrap() < 0.5);
    let csv = std::fs::read_to_string(dir.join("period.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,X,Y"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn canards_pipeline_writes_outputs() {
    let dir = tmpdir("canards");
    let out = bin()
        .args(["canards", "--eps", "0.01", "--delta", "0.08", "--n-mesh", "200"])
        .env("BURSTER_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let list: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("canards.json")).unwrap()).unwrap();
    assert!(list.as_array().unwrap().len() >= 2, "{list}");
    for name in [
        "attracting_trace.csv",
        "repelling_trace.csv",
        "attracting_segments.csv",
        "repelling_segments.csv",
        "canards.csv",
        "manifest.json",
    ] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "canards");
}

#[test]
fn continue_writes_branch() {
    let dir = tmpdir("continue");
    let out = bin()
        .args([
            "continue", "--param", "a2", "--from", "0.795", "--to", "0.797", "--eps", "0.025",
        ])
        .env("BURSTER_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("branch.csv")).unwrap();
    assert!(csv.starts_with("a2,max_y,l2,period,p,s"));
    assert!(csv.lines().count() > 3);
    let br: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("branch.json")).unwrap()).unwrap();
    assert!(br["points"].as_array().unwrap().len() > 2);
    // Residuals recorded below 1e-9 throughout.
    for q in br["points"].as_array().unwrap() {
        assert!(q["residual"].as_f64().unwrap() < 1e-9);
    }
    // Unsupported parameter is a domain error.
    let out = bin()
        .args(["continue", "--param", "c", "--from", "0.6", "--to", "0.7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_grid_produces_ordered_rows() {
    let dir = tmpdir("sweep");
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"sweep": {"param1": "eps", "values1": [0.05, 0.1], "param2": "delta",
            "values2": [0.1], "horizon": 10.0, "workers": 2}}"#,
    )
    .unwrap();
    let out = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&cfg)
        .env("BURSTER_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("eps,delta,p,s"));
    // Grid order is deterministic: first row eps = 0.05.
    let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert_eq!(first, 0.05);
}
