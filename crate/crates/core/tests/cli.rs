use std::path::PathBuf;
use std::process::Command;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn wpap(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wpap")).args(args).output().unwrap()
}

#[test]
fn success_writes_manifest() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("weights.toml");
    let o = wpap(&["classify-weight", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["weights.json", "masses.csv", "manifest.json"] {
        assert!(out.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n[horizons]\nfirst = 10.0\nfactor = 2.0\n").unwrap();
    let o = wpap(&["test-pap0", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizons.factor"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wpap(&["test-pap0", "--config", "/nonexistent/x.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn contraction_gate_blocks_until_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strong.toml");
    let base = std::fs::read_to_string(configs().join("affine.toml")).unwrap();
    std::fs::write(&cfg, base.replace("0.05*z", "0.9*z")).unwrap();
    let out = dir.path().join("o");
    let args = ["solve-mild", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(wpap(&args).status.code(), Some(3));
    let mut forced = args.to_vec();
    forced.push("--override-contraction-gate");
    assert_ne!(wpap(&forced).status.code(), Some(3));
}
