use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn thw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thw"))
        .args(args)
        .current_dir(dir)
        .env_remove("THW_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_then_verify_passes() {
    let dir = TempDir::new().unwrap();
    let o = thw(dir.path(), &["solve", "--name", "w"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["w.dat", "w.json", "w.pohozaev.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let o = thw(dir.path(), &["verify", "--profile", "w", "--out", "."]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let checks: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w.verify.json")).unwrap()).unwrap();
    assert!(checks.as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn solve_is_deterministic() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&thw(dir.path(), &["solve", "--n", "2", "--name", "a"])), 0);
    assert_eq!(code(&thw(dir.path(), &["solve", "--n", "2", "--name", "b"])), 0);
    let a = fs::read(dir.path().join("a.dat")).unwrap();
    let b = fs::read(dir.path().join("b.dat")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn guard_violations_exit_one() {
    let dir = TempDir::new().unwrap();
    let o = thw(dir.path(), &["solve", "--n", "4"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n >= 4"));
    assert_eq!(code(&thw(dir.path(), &["solve", "--omega", "-1.5"])), 1);
    assert_eq!(code(&thw(dir.path(), &["solve", "--method", "bogus"])), 1);
    assert_eq!(code(&thw(dir.path(), &["analyze"])), 1);
    assert_eq!(code(&thw(dir.path(), &["analyze", "--profile", "missing"])), 1);
    assert_eq!(code(&thw(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&thw(dir.path(), &["--help"])), 0);
}

#[test]
fn unstable_verdict_exits_three() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&thw(dir.path(), &["solve", "--n", "3", "--name", "w"])), 0);
    let o = thw(dir.path(), &["analyze", "--profile", "w", "--no-multiplicity"]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w.report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "unstable");
    assert!(report["growth_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn stable_verdict_exits_zero() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&thw(dir.path(), &["solve", "--name", "w"])), 0);
    let o = thw(dir.path(), &["analyze", "--profile", "w"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verdict      stable"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.cfg"), "# run\nomega = 0.25\nname = cfgwave\n").unwrap();
    let o = thw(dir.path(), &["--config", "run.cfg", "solve"]);
    assert_eq!(code(&o), 0);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cfgwave.json")).unwrap()).unwrap();
    assert_eq!(meta["omega"], 0.25);
    let o = thw(dir.path(), &["--config", "run.cfg", "solve", "--omega", "0.75"]);
    assert_eq!(code(&o), 0);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cfgwave.json")).unwrap()).unwrap();
    assert_eq!(meta["omega"], 0.75);
    fs::write(dir.path().join("bad.cfg"), "omgea = 0.25\n").unwrap();
    assert_eq!(code(&thw(dir.path(), &["--config", "bad.cfg", "solve"])), 1);
}

#[test]
fn output_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_thw"))
        .args(["solve", "--name", "w"])
        .current_dir(dir.path())
        .env("THW_OUTPUT_DIR", "results")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("results/w.dat").exists());
}

#[test]
fn evolving_the_wave_conserves_mass_and_energy() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&thw(dir.path(), &["solve", "--name", "w"])), 0);
    let o = thw(dir.path(), &["evolve", "--profile", "w", "--t-end", "0.5", "--dt", "1e-3", "--sample-every", "0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(dir.path().join("w.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("t,mass,energy,virial"));
    assert_eq!(lines.count(), 6);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w.evolve.json")).unwrap()).unwrap();
    assert_eq!(summary["valid"], true);
    assert!(summary["mass_drift"].as_f64().unwrap() < 1e-10);
    assert!(summary["energy_drift"].as_f64().unwrap() < 1e-6);
    assert!(dir.path().join("w.state.dat").exists());
}

#[test]
fn three_dimensional_blowup_is_reported() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&thw(dir.path(), &["solve", "--n", "3", "--name", "w"])), 0);
    let o = thw(dir.path(), &["blowup", "--profile", "w", "--no-confirm", "--t-end", "0.2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w.blowup.json")).unwrap()).unwrap();
    assert_eq!(report["outcome"]["status"], "blow-up");
    assert_eq!(report["b_invariant"], true);
    assert_eq!(report["valid"], true);
}

#[test]
fn blowup_rejects_unsupported_parameters() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&thw(dir.path(), &["solve", "--n", "2", "--mu", "4", "--name", "w"])), 0);
    let o = thw(dir.path(), &["blowup", "--profile", "w"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_resumes_and_sorts() {
    let dir = TempDir::new().unwrap();
    let args = ["sweep", "--omega", "0.2,0.4,0.6", "--task", "solve", "--jobs", "3", "--name", "s"];
    assert_eq!(code(&thw(dir.path(), &args)), 0);
    let first = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(first.lines().count(), 4);
    let indices: Vec<&str> = first.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(indices, ["0", "1", "2"]);

    // A finished point is not recomputed: a doctored marker survives the rerun.
    let marker = dir.path().join("s.points/000001.row");
    let doctored = fs::read_to_string(&marker).unwrap().replace(",ok,", ",ok-kept,");
    fs::write(&marker, &doctored).unwrap();
    fs::remove_file(dir.path().join("s.points/000002.row")).unwrap();
    assert_eq!(code(&thw(dir.path(), &args)), 2);
    let second = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(second.contains("ok-kept"));
    assert_eq!(second.lines().nth(3), first.lines().nth(3));
}

#[test]
fn sweep_rejects_bad_specs() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&thw(dir.path(), &["sweep", "--omega", ""])), 1);
    assert_eq!(code(&thw(dir.path(), &["sweep", "--omega", "0.5,-3"])), 1);
    assert_eq!(code(&thw(dir.path(), &["sweep", "--task", "dance"])), 1);
}
