use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cwss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwss"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bounds_reference_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let o = cwss(&[
        "bounds",
        "--n",
        "1024",
        "--s",
        "140",
        "--k",
        "8",
        "--delta",
        "10",
        "--t",
        "4",
        "--out-dir",
        out_dir,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert!((v["ratio"].as_f64().unwrap() - 0.154).abs() < 1e-3);
    assert_eq!(v["c"].as_f64(), Some(1.0));
}

#[test]
fn bounds_single_period_ignores_delta() {
    let o = cwss(&[
        "bounds", "--n", "256", "--s", "20", "--k", "4", "--delta", "7",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let want = 4.0 * (256.0f64 / 8.0).ln();
    assert!((v["m_tvm"].as_f64().unwrap() - want).abs() < 1e-9);
}

#[test]
fn bounds_rejects_delta_above_s() {
    let o = cwss(&[
        "bounds", "--n", "256", "--s", "5", "--k", "2", "--delta", "6",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delta"));
}

#[test]
fn selftest_passes() {
    let o = cwss(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("PASS").count(), 4, "{text}");
}

fn read_all(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names
        .iter()
        .map(|n| fs::read(dir.join(n)).unwrap())
        .collect()
}

#[test]
fn sense_writes_plot_data_repeatably() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = cwss(&[
            "sense",
            "--n",
            "32",
            "--seed",
            "5",
            "--method",
            "both",
            "--out-dir",
            d.path().to_str().unwrap(),
        ]);
        assert!(
            matches!(o.status.code(), Some(0) | Some(3)),
            "{}",
            stderr(&o)
        );
    }
    let names = ["truth.csv", "lasso.csv", "tvm.csv", "sense.json"];
    assert_eq!(read_all(a.path(), &names), read_all(b.path(), &names));
    let truth = fs::read_to_string(a.path().join("truth.csv")).unwrap();
    assert!(truth.starts_with("bin_hz,value\n"));
    assert_eq!(truth.lines().count(), 65);
}

#[test]
fn montecarlo_report_is_independent_of_workers() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = cfg_dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{"n": 32, "trials": 6, "subsample_rates": [0.5, 0.75], "frames_per_period": 20}"#,
    )
    .unwrap();
    let mut outs = Vec::new();
    for workers in ["1", "8"] {
        let d = tempfile::tempdir().unwrap();
        let o = cwss(&[
            "montecarlo",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--out-dir",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(read_all(d.path(), &["report.json", "montecarlo.csv"]));
        assert!(d.path().join("timing.json").exists());
    }
    assert_eq!(outs[0], outs[1]);
    let csv = String::from_utf8(outs[0][1].clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"n\": 32,\n  \"triels\": 3\n}\n").unwrap();
    let o = cwss(&[
        "montecarlo",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = cwss(&[
        "sense",
        "--method",
        "omp",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = cwss(&[
        "sense",
        "--n",
        "100",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("power of two"));
}
