use std::fs;
use std::path::Path;
use std::process::Command;

use mdsa::experiment::read_sequence;

fn mdsa(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_mdsa"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "mdsa {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn encode_and_decode_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    mdsa(&["generate", "--p", "0.2", "--n", "1500", "--seed", "4", "-o", &p(d, "x.mdsq")]);
    let input = p(d, "x.mdsq");
    let x = read_sequence(&d.join("x.mdsq")).unwrap();
    assert_eq!((x.len(), x.alphabet_size()), (1500, 2));

    let code = ["--k", "3", "--k1", "1", "--sweeps", "4", "--seed", "9"];
    let mut args = vec!["encode", "-i", &input];
    let (m1, m2, report) = (p(d, "m1"), p(d, "m2"), p(d, "report.json"));
    args.extend(code);
    args.extend(["--theta", "0.3", "--m1", &m1, "--m2", &m2, "--report", &report]);
    mdsa(&args);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rate_check"]["passed"], true);

    let mut args = vec!["anneal", "-i", &input];
    let out_dir = p(d, "triple");
    args.extend(code);
    args.extend(["--out-dir", &out_dir]);
    mdsa(&args);

    mdsa(&["decode1", "--m1", &m1, "-o", &p(d, "y")]);
    mdsa(&["decode2", "--m2", &m2, "-o", &p(d, "z")]);
    mdsa(&["decode0", "--m1", &m1, "--m2", &m2, "-o", &p(d, "w")]);
    for (decoded, annealed) in [("y", "x1.mdsq"), ("z", "x2.mdsq"), ("w", "x0.mdsq")] {
        assert_eq!(
            fs::read(d.join(decoded)).unwrap(),
            fs::read(d.join("triple").join(annealed)).unwrap(),
            "{decoded}"
        );
    }
    let trace = fs::read_to_string(d.join("triple/trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iteration,hk_y,hk_z,hkk1_w,d_y,d_z,d_w,total");
    assert_eq!(trace.lines().count(), 1 + 5);
    assert!(trace.lines().last().unwrap().starts_with("6000,"));
}

#[test]
fn swapped_messages_fail() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    mdsa(&["generate", "--p", "0.3", "--n", "400", "-o", &p(d, "x.mdsq")]);
    let (m1, m2) = (p(d, "m1"), p(d, "m2"));
    mdsa(&[
        "encode", "-i", &p(d, "x.mdsq"), "--k", "2", "--k1", "0", "--sweeps", "1", "--m1", &m1,
        "--m2", &m2,
    ]);
    let out = Command::new(env!("CARGO_BIN_EXE_mdsa"))
        .args(["decode0", "--m1", &m2, "--m2", &m1, "-o", &p(d, "w")])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fragment mismatch"));
}

#[test]
fn experiment_config_writes_reproducible_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = serde_json::json!({
        "source": {"alphabet": 2, "transition": [[0.8, 0.2], [0.2, 0.8]], "n": 600, "seed": 1},
        "k": 3, "k1": 1,
        "weights": {"gamma1": 1, "gamma2": 1, "gamma0": 1, "alpha1": 1, "alpha2": 1, "alpha0": 1},
        "schedule": {"kind": "power_law", "exponent": 0.1},
        "iterations": 1800,
        "seeds": [3, 1],
        "output": {"records": p(d, "records.csv"), "trace": p(d, "trace.csv")}
    });
    fs::write(d.join("cfg.json"), config.to_string()).unwrap();
    let stdout = mdsa(&["experiment", "-c", &p(d, "cfg.json")]);
    assert!(stdout.contains("median total"));
    let records = fs::read_to_string(d.join("records.csv")).unwrap();
    let header = records.lines().next().unwrap();
    assert_eq!(
        header,
        "seed,hk_y,hk_z,hkk1_w,d_y,d_z,d_w,total,r1,r2,slack,margin_r1,margin_r2,margin_sum,rate_check,roundtrip"
    );
    assert_eq!(records.lines().count(), 3);
    assert!(records.lines().nth(1).unwrap().starts_with("3,"));
    let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "seed,iteration,hk_y,hk_z,hkk1_w,d_y,d_z,d_w,total");
    assert_eq!(trace.lines().count(), 1 + 2 * 4);

    mdsa(&[
        "experiment", "-c", &p(d, "cfg.json"), "--records", &p(d, "again.csv"), "--trace",
        &p(d, "again_trace.csv"),
    ]);
    assert_eq!(records, fs::read_to_string(d.join("again.csv")).unwrap());
    assert_eq!(trace, fs::read_to_string(d.join("again_trace.csv")).unwrap());
}

#[test]
fn sweep_writes_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = serde_json::json!({
        "base": {
            "source": {"alphabet": 2, "transition": [[0.8, 0.2], [0.2, 0.8]], "n": 400, "seed": 2},
            "k": 2, "k1": 0,
            "weights": {"gamma1": 1, "gamma2": 1, "gamma0": 1, "alpha1": 1, "alpha2": 1, "alpha0": 1},
            "schedule": {"kind": "power_law", "exponent": 0.1},
            "iterations": 800,
            "seeds": [1, 2, 3]
        },
        "axes": {"alpha1": [1, 2, 4]},
        "frontier": p(d, "frontier.csv")
    });
    fs::write(d.join("sweep.json"), config.to_string()).unwrap();
    let stdout = mdsa(&["sweep", "-c", &p(d, "sweep.json")]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("alpha1 ")).count(), 2);
    let frontier = fs::read_to_string(d.join("frontier.csv")).unwrap();
    assert_eq!(frontier.lines().count(), 4);
    assert!(frontier.starts_with("point,gamma1,gamma2,gamma0,alpha1,alpha2,alpha0,"));
}

#[test]
fn bad_arguments_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    mdsa(&["generate", "--p", "0.2", "--n", "100", "-o", &p(d, "x.mdsq")]);
    for bad in [
        vec!["encode", "-i", "missing.mdsq", "--m1", "a", "--m2", "b"],
        vec!["anneal", "-i", &p(d, "x.mdsq"), "--weights", "1,1", "--out-dir", &p(d, "o")],
        vec!["anneal", "-i", &p(d, "x.mdsq"), "--schedule", "cosine", "--out-dir", &p(d, "o")],
        vec!["generate", "--n", "10", "-o", &p(d, "y.mdsq")],
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_mdsa")).args(&bad).output().unwrap();
        assert!(!out.status.success(), "{bad:?} should fail");
    }
}
