use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn spinann(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinann"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, v: &Value) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, serde_json::to_vec(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn small_network() -> Value {
    json!({
        "network": { "sizes": [256, 8, 26] },
        "train": { "epochs": 12 },
        "dataset": { "train_per_class": 3, "test_per_class": 2 },
        "variation": { "trials": 4 }
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn unknown_key_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &json!({ "network": { "sizess": [1] } }));
    let o = spinann(&["train", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("network.sizess"));
}

#[test]
fn missing_config_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let o = spinann(&["energy-report", "--config", "absent.json"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_value_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &json!({ "material": { "ms": -1.0 } }));
    let o = spinann(&["energy-report", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn deploy_without_checkpoint_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &small_network());
    let o = spinann(&["deploy", "--config", &cfg, "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint"));
}

#[test]
fn energy_report_values() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &json!({}));
    let o = spinann(&["energy-report", "--config", &cfg, "--out", "o"], d.path());
    assert!(o.status.success());
    let r = read_json(&d.path().join("o/energy_report.json"));
    let total = r["total_fj"].as_f64().unwrap();
    assert!((total - 0.3225).abs() < 1e-9, "{total}");
    let m = read_json(&d.path().join("o/energy-report.manifest.json"));
    assert_eq!(m["command"], "energy-report");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn gen_data_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &small_network());
    for out in ["a", "b"] {
        assert!(spinann(&["gen-data", "--config", &cfg, "--out", out], d.path())
            .status
            .success());
    }
    let list = |p: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(p)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("img_")))
            .collect();
        v.sort();
        v
    };
    let a = list(&d.path().join("a/data/train"));
    let b = list(&d.path().join("b/data/train"));
    assert_eq!(a.len(), 26 * 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    assert_eq!(list(&d.path().join("a/data/test")).len(), 26 * 2);
    let la = std::fs::read(d.path().join("a/data/train/labels.csv")).unwrap();
    assert_eq!(la, std::fs::read(d.path().join("b/data/train/labels.csv")).unwrap());
}

#[test]
fn transfer_and_sweep_headers() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        &json!({
            "transfer": { "points": 11 },
            "sweep": {
                "geometry": { "free_length": 200e-9, "width": 40e-9, "pinned_length": 20e-9, "cell": [5e-9, 5e-9, 1e-9] },
                "j_list": [0.0, 1e12],
                "options": { "duration": 0.1e-9, "transient": 0.02e-9, "run": { "relax_steps": 300 } }
            }
        }),
    );
    let o = spinann(&["transfer-function", "--config", &cfg, "--out", "o"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = std::fs::read_to_string(d.path().join("o/transfer.csv")).unwrap();
    assert_eq!(t.lines().next(), Some("i_in_A,v_g_V,i_out_A"));
    assert_eq!(t.lines().count(), 12);

    let o = spinann(&["dw-sweep", "--config", &cfg, "--out", "o"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = std::fs::read_to_string(d.path().join("o/dw_sweep.csv")).unwrap();
    let lines: Vec<_> = s.lines().collect();
    assert_eq!(lines[0], "j_Apm2,v_mps");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",0"), "{}", lines[1]);
}

#[test]
fn full_flow_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &small_network());
    let run = |args: &[&str]| {
        let mut a = args.to_vec();
        a.extend(["--config", &cfg, "--out", "o"]);
        let o = spinann(&a, d.path());
        assert!(o.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
        o
    };
    run(&["train"]);
    assert!(d.path().join("o/model.json").exists());
    run(&["deploy", "--dump-gamma"]);
    let rep = read_json(&d.path().join("o/deploy_report.json"));
    assert!(rep["max_gamma"].as_f64().unwrap() <= 0.07 + 1e-12);
    let g = std::fs::read_to_string(d.path().join("o/gamma.csv")).unwrap();
    assert_eq!(g.lines().count(), 1 + 8 + 26);
    for f in ["g_pos_0.csv", "g_neg_1.csv", "deployed.json"] {
        assert!(d.path().join("o").join(f).exists(), "{f}");
    }
    run(&["infer"]);
    let p = std::fs::read_to_string(d.path().join("o/predictions.csv")).unwrap();
    assert_eq!(p.lines().count(), 1 + 52);
    let ir = read_json(&d.path().join("o/infer_report.json"));
    assert!(ir["energy"]["per_inference_fj"].as_f64().unwrap() > 0.0);

    run(&["montecarlo", "--seed", "7"]);
    let first = std::fs::read(d.path().join("o/montecarlo.json")).unwrap();
    run(&["montecarlo", "--seed", "7"]);
    let second = std::fs::read(d.path().join("o/montecarlo.json")).unwrap();
    assert_eq!(first, second);
    let mc = read_json(&d.path().join("o/montecarlo.json"));
    assert_eq!(mc["accuracies"].as_array().unwrap().len(), 4);
}
