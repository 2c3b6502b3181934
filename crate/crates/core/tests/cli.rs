use std::path::Path;

use reduxim::cli::{run, EXIT_ASSERT, EXIT_CONFIG, EXIT_OK};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("reduxim").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn elitzur_vaidman_json_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ev.json");
    let (code, _, err) =
        invoke(&["run", "elitzur-vaidman", "--trials", "20000", "--seed", "7", "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v = json(&out);
    assert_eq!(v["scenario"], "elitzur-vaidman");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["trials"], 20000);
    assert_eq!(v["config"]["t"], 0.5);
    let r = &v["results"];
    for field in ["p_d1", "p_d2", "p_none", "eta"] {
        assert!(r[field].is_f64(), "{field}");
        assert!(r["stderr"][field].is_f64(), "stderr {field}");
    }
    assert!((r["p_none"].as_f64().unwrap() - 0.5).abs() < 0.02);
    assert!(v.get("duration_s").is_none());
}

#[test]
fn json_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let (code, _, _) = invoke(&["run", "fig1b", "--trials", "5000", "--out", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn timing_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let (code, _, _) = invoke(&["run", "spreading", "--timing", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(json(&out)["duration_s"].is_f64());
}

#[test]
fn spreading_flags() {
    let (code, stdout, _) = invoke(&["run", "spreading", "--l", "0.05", "--dl", "0.01", "--sigma-cy", "1e-8", "--assert"]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("[PASS] sigma_y: 5.0e-4"), "{stdout}");
}

#[test]
fn zero_trials_exits_2() {
    let (code, _, err) = invoke(&["run", "born-screen", "--profile", "0.3,0.7", "--trials", "0"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("trials"), "{err}");
}

#[test]
fn unknown_scenario_lists_ids() {
    let (code, _, err) = invoke(&["run", "bomb-tester"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("elitzur-vaidman") && err.contains("born-screen"), "{err}");
}

#[test]
fn bad_flag_exits_2() {
    let (code, _, _) = invoke(&["run", "fig1a", "--trials", "many"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, _, _) = invoke(&["run", "entangled-delayed-choice", "--order", "sideways"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn failed_assertion_exits_3() {
    // too few trials to hold P(D1) within 0.01
    let (code, stdout, _) = invoke(&["run", "fig1a", "--trials", "10", "--seed", "3", "--assert"]);
    assert_eq!(code, EXIT_ASSERT, "{stdout}");
    assert!(stdout.contains("[FAIL]"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"t": 0.8, "trials": 1000, "seed": 9}"#).unwrap();
    let out = dir.path().join("o.json");
    let (code, _, err) =
        invoke(&["run", "elitzur-vaidman", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v = json(&out);
    assert_eq!(v["config"]["t"], 0.8);
    assert_eq!(v["config"]["trials"], 1000);
    assert_eq!(v["seed"], 11);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"transmission": 0.8}"#).unwrap();
    let (code, _, _) = invoke(&["run", "elitzur-vaidman", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn sweep_t_gives_increasing_eta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let (code, _, err) = invoke(&[
        "sweep", "elitzur-vaidman", "--param", "t", "--grid", "0.5,0.6,0.7,0.8,0.9,0.95", "--trials", "20000", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (header, rows) = read_csv(&out);
    assert_eq!(header[0], "t");
    let eta = header.iter().position(|h| h == "eta").unwrap();
    assert!(header.iter().any(|h| h == "stderr_eta"));
    let etas: Vec<f64> = rows.iter().map(|r| r[eta]).collect();
    assert!(etas.windows(2).all(|w| w[1] > w[0]), "{etas:?}");
}

#[test]
fn sweep_a_gives_sqrt_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let (code, _, err) = invoke(&[
        "sweep", "partial-absorption", "--param", "a", "--grid", "0.25,1.0", "--trials", "5000", "--phi-points", "12",
        "--chopper", "false", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (header, rows) = read_csv(&out);
    let col = header.iter().position(|h| h == "foil0_a_n").unwrap();
    for row in rows {
        assert!((row[col] - row[0].sqrt()).abs() < 0.05, "{row:?}");
    }
}

#[test]
fn sweep_distance_scale_keeps_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let (code, _, _) = invoke(&[
        "sweep", "fig1b", "--param", "distance-scale", "--grid", "1,10,1000", "--trials", "5000", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_csv(&out);
    for name in ["p_first", "p_d2", "p_none"] {
        let c = header.iter().position(|h| h == name).unwrap();
        assert!(rows.iter().all(|r| r[c] == rows[0][c]), "{name}");
    }
}

#[test]
fn non_sweepable_parameter_exits_2() {
    let (code, _, err) = invoke(&["sweep", "fig1a", "--param", "t", "--grid", "0.5"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("not sweepable"), "{err}");
    let (code, _, _) = invoke(&["sweep", "elitzur-vaidman", "--param", "phi", "--grid", "0.5"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn csv_run_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let (code, _, _) = invoke(&["run", "born-screen", "--profile", "0.1,0.2,0.3,0.4", "--trials", "4000", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_csv(&out);
    assert_eq!(header[..2], ["p_x0".to_string(), "stderr_x0".to_string()]);
    assert_eq!(rows.len(), 1);
}
