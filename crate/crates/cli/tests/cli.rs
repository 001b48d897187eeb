use std::path::PathBuf;
use std::process::{Command, Output};

fn crcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crcap"))
        .args(args)
        .output()
        .expect("spawn crcap")
}

fn config(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    root.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn bounds_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("run");
    let out = crcap(&[
        "bounds",
        "--config",
        &config("threshold.toml"),
        "--output",
        stem.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.starts_with("command,rate,n,state,metric,value\n"));
    assert!(csv.contains(",lower,1.00000000000e0"), "{csv}");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(meta["config_digest"].as_str().unwrap().len(), 64);
    assert_eq!(meta["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn same_config_same_output() {
    let a = crcap(&["sweep", "--config", &config("degraded.toml")]);
    let b = crcap(&["sweep", "--config", &config("degraded.toml")]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config("degraded.toml"))
        .unwrap()
        .replace("rate = 0.3", "rate = 0.3\nsigma2 = 1");
    std::fs::write(&path, text).unwrap();
    let out = crcap(&["bounds", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sigma2"), "{}", stderr(&out));
}

#[test]
fn verify_passes_on_degraded_family() {
    let out = crcap(&["verify", "--config", &config("degraded.toml")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("pass:collapse,1.00000000000e0"));
    for line in text.lines().filter(|l| l.contains(",pass:")) {
        assert!(line.ends_with(",1.00000000000e0"), "{line}");
    }
}

#[test]
fn simulate_one_state_with_fewer_trials() {
    let out = crcap(&[
        "simulate",
        "--config",
        &config("identity_protocol.toml"),
        "--trials",
        "400",
        "--state",
        "flipped",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains(",flipped,error,"));
    assert!(!text.contains(",same,"));
}

#[test]
fn sweep_rejects_unsorted_rates() {
    let out = crcap(&[
        "sweep",
        "--config",
        &config("degraded.toml"),
        "--rates",
        "0.5,0.2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn enumerate_typical_counts() {
    let out = crcap(&[
        "enumerate-typical",
        "--pmf",
        "0.5,0.5",
        "--n",
        "4",
        "--sigma",
        "0.1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains(",4,2/2,class_size,6.00000000000e0"), "{text}");
    assert!(text.contains(",probability,3.75000000000e-1"));
}
