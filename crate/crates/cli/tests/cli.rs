use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn shearlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shearlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const TINY: &str = r#"
[geometry]
length = 1.0
height = 1.0

[grid]
n1 = 2
n2 = 2
n3 = 12
dt = 0.005
cfl_safety = 0.5

[fluid]
viscosity = 0.1

[ou]
mean_speed = 1.0
reversion_rate = 1.0
noise_amplitude = 0.3

[initial]
kind = "couette"
speed = 1.0

[run]
t_end = 0.3
trajectories = 3
master_seed = 5

[audit]
energy_inequality = true
trace_lemma = true
"#;

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ou_sample_writes_long_format_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paths.csv");
    let run = shearlab(&[
        "ou-sample",
        "--u",
        "1",
        "--theta",
        "2",
        "--sigma",
        "0.5",
        "--t-end",
        "1",
        "--dt",
        "0.1",
        "--paths",
        "3",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(run.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_id,t,x"));
    assert_eq!(lines.count(), 3 * 11);

    let wiener = dir.path().join("w.csv");
    let run = shearlab(&[
        "ou-sample",
        "--u",
        "1",
        "--theta",
        "2",
        "--sigma",
        "0.5",
        "--t-end",
        "1",
        "--dt",
        "0.5",
        "--mode",
        "wiener",
        "--out",
        s(&wiener),
    ]);
    assert!(run.status.success());
    let text = std::fs::read_to_string(&wiener).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",0.0"));
}

#[test]
fn bounds_json_carries_units() {
    let run = shearlab(&[
        "bounds", "--u", "1", "--theta", "1", "--sigma", "1", "--nu", "0.5", "--h", "1", "--json",
    ]);
    assert!(run.status.success());
    let v = json(&run);
    assert_eq!(v["mean_bound"]["value"].as_f64(), Some(124.0));
    assert_eq!(v["mean_bound"]["unit"], "L^2 T^-3");
    assert_eq!(v["second_moment_bound"]["unit"], "L^4 T^-6");
}

#[test]
fn bounds_reject_low_reynolds() {
    let run = shearlab(&[
        "bounds", "--u", "1", "--theta", "1", "--sigma", "1", "--nu", "2",
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("Re > 1"));
}

#[test]
fn simulate_then_verify_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let traj = dir.path().join("traj");
    let run = shearlab(&[
        "simulate",
        "--config",
        s(&cfg),
        "--t-end",
        "0.2",
        "--seed",
        "9",
        "--out",
        s(&traj),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(json(&run)["seed"].as_u64(), Some(9));
    for f in [
        "simulation.json",
        "trajectory.csv",
        "audit.csv",
        "summary.json",
    ] {
        assert!(traj.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(traj.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,x_wall,dissipation,energy,wall_power"));

    let run = shearlab(&["verify", "energy", "--traj", s(&traj)]);
    assert!(run.status.success());
    let v = json(&run);
    assert_eq!(v["ledger"]["passed"], true);
    assert_eq!(v["ledger"]["horizon"].as_f64(), Some(0.2));
}

#[test]
fn ensemble_resumes_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let runs = dir.path().join("runs");
    let first = shearlab(&["ensemble", "--config", s(&cfg), "--out", s(&runs)]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let a = json(&first);
    assert_eq!(a["stats"]["completed"].as_u64(), Some(3));
    assert_eq!(a["hard_failures"].as_array().unwrap().len(), 0);

    let second = shearlab(&["ensemble", "--config", s(&cfg), "--out", s(&runs)]);
    let b = json(&second);
    assert_eq!(b["reused"].as_u64(), Some(3));
    assert_eq!(a["stats"], b["stats"]);

    let check = shearlab(&[
        "verify",
        "ensemble",
        "--runs",
        s(&runs),
        "--config",
        s(&cfg),
    ]);
    assert!(check.status.success());

    std::fs::write(runs.join("traj_0000").join("trajectory.csv"), "t\n0\n").unwrap();
    let check = shearlab(&[
        "verify",
        "ensemble",
        "--runs",
        s(&runs),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(check.status.code(), Some(1));
    assert_eq!(
        json(&check)["corrupted_files"][0],
        "traj_0000/trajectory.csv"
    );
}

#[test]
fn sweep_reports_trends_and_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = shearlab(&["sweep", "--config", s(&cfg), "--sigma", "0,0.25,0.5"]);
    assert!(run.status.success());
    let v = json(&run);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["trends"]["bound_nondecreasing_in_sigma"], true);

    let empty = shearlab(&["sweep", "--config", s(&cfg)]);
    assert_eq!(empty.status.code(), Some(2));
}

#[test]
fn verify_background_and_gibbs() {
    let run = shearlab(&[
        "verify",
        "background",
        "--u",
        "1",
        "--theta",
        "1",
        "--sigma",
        "0.5",
        "--nu",
        "0.1",
        "--samples",
        "2000",
    ]);
    assert!(run.status.success());
    assert_eq!(json(&run)["all_passed"], true);

    let run = shearlab(&[
        "verify",
        "gibbs",
        "--potential",
        "double-well",
        "--sigma",
        "1",
        "--t-end",
        "200",
        "--dt",
        "0.01",
        "--max-ks",
        "0.5",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(json(&run)["label"], "double_well");
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, TINY.replace("[fluid]", "[fluid]\nunknown = 1")).unwrap();
    let run = shearlab(&["ensemble", "--config", s(&path), "--out", s(dir.path())]);
    assert_eq!(run.status.code(), Some(2));
}
