use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aronsson-lab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_exp_diff_passes_and_embeds_provenance() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(
        d.path(),
        &[
            "verify",
            "--family",
            "exp-diff",
            "--operator",
            "delta-inf",
            "--box",
            "rhombus-inset",
            "0.1",
            "--res",
            "61",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(d.path(), "verify");
    assert_eq!(r["tool"], "aronsson-lab");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["result"]["max_residual"].as_f64().unwrap() <= 1e-10);
    let csv = std::fs::read_to_string(d.path().join("verify.csv")).unwrap();
    assert!(csv.lines().count() > 100);
}

#[test]
fn verify_sum_map_reports_diagonal_worst_point() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(
        d.path(),
        &[
            "verify",
            "--family",
            "exp-sum",
            "--operator",
            "delta-inf",
            "--res",
            "41",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(d.path(), "verify");
    assert!(r["result"]["max_residual"].as_f64().unwrap() > 0.1);
    let w = &r["result"]["worst_point"];
    let (x, y) = (w[0].as_f64().unwrap(), w[1].as_f64().unwrap());
    assert!((x - y).abs() < 0.1, "{x} {y}");
}

#[test]
fn constant_family_has_zero_residuals() {
    let d = tempfile::tempdir().unwrap();
    let fam = r#"{"family":"constant","value":[1,2],"source_dim":2}"#;
    let o = lab(d.path(), &["verify", "--family", fam, "--res", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        report(d.path(), "verify")["result"]["max_residual"].as_f64(),
        Some(0.0)
    );
}

#[test]
fn failed_assertion_exits_one_and_names_it() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(
        d.path(),
        &[
            "verify",
            "--family",
            "exp-sum",
            "--res",
            "21",
            "--max-residual",
            "1e-6",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("max_residual"), "{}", stderr(&o));
    assert_eq!(report(d.path(), "verify")["passed"], false);
}

#[test]
fn config_errors_exit_two_with_position() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    std::fs::write(
        &cfg,
        "{\n  \"family\": {\"family\": \"exp-diff\"},\n  \"res\": \"many\"\n}\n",
    )
    .unwrap();
    let o = lab(d.path(), &["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json:3:"), "{}", stderr(&o));

    let o = lab(d.path(), &["verify", "--family", "no-such-family"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lab(d.path(), &["probe", "--kind", "competitor"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(&cfg, r#"{"samples": 10, "sampels": 3}"#).unwrap();
    let o = lab(d.path(), &["identities", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn flags_override_config_and_change_the_hash() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(&cfg, r#"{"samples": 50, "seed": 1}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(
        lab(d.path(), &["identities", "--config", c]).status.code(),
        Some(0)
    );
    let a = report(d.path(), "identities");
    assert_eq!(a["config"]["samples"], 50);
    assert_eq!(
        lab(d.path(), &["identities", "--config", c, "--samples", "60"])
            .status
            .code(),
        Some(0)
    );
    let b = report(d.path(), "identities");
    assert_eq!(b["config"]["samples"], 60);
    assert_eq!(b["config"]["seed"], 1);
    assert_ne!(a["config_hash"], b["config_hash"]);
}

#[test]
fn flow_example_run() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(
        d.path(),
        &[
            "flow", "--family", "exp-diff", "--xi", "1,0", "--x0", "0.2,0.1", "--t", "1", "--step",
            "1e-3",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("flow.csv")).unwrap();
    assert!(csv.starts_with("# family=exp-diff"));
}

#[test]
fn interface_example_run() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(
        d.path(),
        &[
            "interface",
            "--family",
            "exp-diff",
            "--tol",
            "1e-3",
            "--near-diagonal",
            "1e-3",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(d.path(), "interface");
    assert!(r["result"]["confirmed"].as_u64().unwrap() > 0);
}

#[test]
fn relax_writes_a_fitted_slope() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(
        d.path(),
        &[
            "relax",
            "--p-list",
            "4,8,16",
            "--boundary",
            "saddle",
            "--res",
            "11",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(d.path(), "relax");
    assert!(r["result"]["slope"].as_f64().is_some());
    assert_eq!(r["result"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn lip_probe_with_negative_box() {
    let d = tempfile::tempdir().unwrap();
    let o = lab(
        d.path(),
        &[
            "probe",
            "--kind",
            "lip",
            "--box=0.7,0.85,-0.870796,-0.720796",
            "--pairs",
            "20000",
            "--max-coincidence-gap",
            "0.02",
            "--min-euclidean-excess",
            "0.3",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn am_probe_margin_sign_drives_the_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let base = [
        "probe", "--kind", "am", "--family", "exp-diff", "--x", "0.3,-0.2", "--xi", "0.6,0.8",
    ];
    let ok = lab(
        d.path(),
        &[&base[..], &["--expect-margin", "nonnegative"]].concat(),
    );
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let r = report(d.path(), "probe");
    assert!(r["result"]["energies"]["margin"].as_f64().unwrap() >= 0.0);
    let bad = lab(
        d.path(),
        &[&base[..], &["--expect-margin", "negative"]].concat(),
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn thread_cap_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify", "--family", "exp-diff", "--res", "31"];
    assert_eq!(lab(a.path(), &args).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_aronsson-lab"))
        .env("ARONSSON_LAB_THREADS", "1")
        .args(args)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    for f in ["verify.json", "verify.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
    let o = Command::new(env!("CARGO_BIN_EXE_aronsson-lab"))
        .env("ARONSSON_LAB_THREADS", "zero")
        .args(args)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_and_usage_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let help = Command::new(env!("CARGO_BIN_EXE_aronsson-lab"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(help.status.code(), Some(0));
    let out = String::from_utf8_lossy(&help.stdout);
    for sub in [
        "verify",
        "flow",
        "relax",
        "interface",
        "probe",
        "identities",
    ] {
        assert!(out.contains(sub), "{sub}");
    }
    assert_eq!(
        lab(d.path(), &["verify", "--res", "ten"]).status.code(),
        Some(2)
    );
}
