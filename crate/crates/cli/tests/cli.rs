use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_beachlab"));
    c.env_remove("BEACHLAB_OUT");
    c
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("beachlab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn error_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().rev().find(|l| l.starts_with('{')).expect("error json on stderr");
    serde_json::from_str(line).unwrap()
}

fn quarter_pi_exponents(out: &Path) -> Output {
    run(bin().args(["exponents", "--bc", "dn", "--omega", "0.7853981633974483", "--count", "3", "--out"]).arg(out))
}

#[test]
fn exponents_from_flags_at_quarter_pi() {
    let d = scratch("flags");
    let o = quarter_pi_exponents(&d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("exponents.csv")).unwrap();
    let formula: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(formula.len(), 3);
    for (a, b) in formula.iter().zip([2.0, 6.0, 10.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (scratch("rerun-a"), scratch("rerun-b"));
    assert!(quarter_pi_exponents(&a).status.success());
    assert!(quarter_pi_exponents(&b).status.success());
    for f in ["exponents.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn environment_overrides_out_flag() {
    let (env_dir, flag_dir) = (scratch("env"), scratch("flag"));
    let o = run(bin()
        .env("BEACHLAB_OUT", &env_dir)
        .args(["exponents", "--bc", "nn", "--omega", "1.0", "--count", "2", "--out"])
        .arg(&flag_dir));
    assert!(o.status.success());
    assert!(env_dir.join("exponents.csv").is_file());
    assert!(!flag_dir.exists());
}

#[test]
fn malformed_config_exits_with_config_code() {
    let d = scratch("bad");
    std::fs::create_dir_all(&d).unwrap();
    let cfg = d.join("bad.toml");
    std::fs::write(&cfg, "command = \"dtn\"\nmodes = \"five\"\n").unwrap();
    let o = run(bin().args(["dtn", "--config"]).arg(&cfg).arg("--out").arg(&d));
    assert_eq!(o.status.code(), Some(2));
    let v = error_json(&o);
    assert_eq!(v["error"], "config");
    assert_eq!(v["exit_code"], 2);
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("error.json")).unwrap()).unwrap();
    assert_eq!(written, v);
}

#[test]
fn mismatched_subcommand_is_rejected() {
    let d = scratch("mismatch");
    std::fs::create_dir_all(&d).unwrap();
    let cfg = d.join("e.toml");
    std::fs::write(&cfg, "command = \"exponents\"\nomegas = [1.0]\n").unwrap();
    let o = run(bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&d));
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("not `solve`"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = run(bin().args(["dtn", "--config", "/nonexistent/beachlab.toml", "--out"]).arg(scratch("io")));
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "io");
}

#[test]
fn out_of_range_angle_is_rejected_before_solving() {
    let d = scratch("angle");
    let o = run(bin().args(["exponents", "--omega", "4.0", "--out"]).arg(&d));
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.exists());
}

#[test]
fn failed_check_exits_with_check_code() {
    let d = scratch("tight");
    std::fs::create_dir_all(&d).unwrap();
    let tol = d.join("tol.json");
    std::fs::write(&tol, "{\"exponent_agreement\": 1e-300}").unwrap();
    let o = run(bin()
        .args(["exponents", "--bc", "dn", "--omega", "0.7853981633974483", "--count", "3", "--out"])
        .arg(&d)
        .arg("--tolerance-overrides")
        .arg(&tol));
    assert_eq!(o.status.code(), Some(6));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(bin().args(["dtn", "--bogus"]));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "usage");
}
