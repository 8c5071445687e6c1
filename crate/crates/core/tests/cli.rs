use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aan-offload"))
}

fn run(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = bin().args(args).arg("--out").arg(dir).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn generate_writes_identical_files_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let names = ["scenario_seed1.json", "history_seed1.txt", "manifest.json", "dimensions_seed1.json"];
    assert_eq!(run(&["generate", "--seed", "1"], a.path()).0, 0);
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(a.path().join(n)).unwrap()).collect();
    assert_eq!(run(&["generate", "--seed", "1"], a.path()).0, 0);
    for (name, bytes) in names.iter().zip(&first) {
        assert_eq!(&fs::read(a.path().join(name)).unwrap(), bytes, "{name}");
    }
    assert_eq!(run(&["generate", "--seed", "2"], a.path()).0, 0);
    assert_ne!(fs::read(a.path().join("scenario_seed2.json")).unwrap(), first[0]);
    let manifest = fs::read_to_string(a.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("config_sha256"));
}

#[test]
fn malformed_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scenario.radio]\nbandwidth_td_uav_hz = -5.0\n");
    let (code, _, err) = run(&["--config", &cfg, "generate"], dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("bandwidth_td_uav"), "{err}");
    let cfg = write_config(dir.path(), "[scenario]\nbogus = 1\n");
    assert_eq!(run(&["--config", &cfg, "generate"], dir.path()).0, 2);
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["solve", "--method", "dro", "--tds", "6", "--seed", "2"], dir.path());
    assert_eq!(code, 0);
    assert!(out.contains("dro seed 2"));
    assert!(dir.path().join("solve_dro_seed2.json").exists());
    assert_eq!(run(&["solve", "--method", "exhaustive"], dir.path()).0, 2);
    assert_eq!(run(&["solve", "--quota-uav", "3"], dir.path()).0, 3);
    assert_eq!(run(&["solve", "--method", "nope"], dir.path()).0, 2);
}

#[test]
fn mean_point_mass_history_makes_dro_equal_do() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[ambiguity]\ntolerance = 0.0\ntruth = [0.0, 0.0, 1.0, 0.0, 0.0]\n",
    );
    for m in ["dro", "do"] {
        assert_eq!(run(&["--config", &cfg, "solve", "--method", m, "--seed", "3"], dir.path()).0, 0);
    }
    let read = |m: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(dir.path().join(format!("solve_{m}_seed3.json"))).unwrap()).unwrap()
    };
    let (dro, dob) = (read("dro"), read("do"));
    assert_eq!(dro["decision"], dob["decision"]);
    assert_eq!(dro["planned_latency"], dob["planned_latency"]);
}

#[test]
fn evaluate_writes_sixty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["evaluate", "--jobs", "4"], dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("evaluation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
    assert!(csv.starts_with(
        "method,seed,param_name,param_value,realized_latency_s,max_uav_energy_J,hap_energy_J,feasible\n"
    ));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn sweep_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["sweep", "--param", "eps", "--values", "0.1,0.3,0.5", "--tds", "6", "--jobs", "3"];
    let seeds = write_config(a.path(), "[experiment]\nseeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]\n");
    let mut full: Vec<&str> = vec!["--config", &seeds];
    full.extend(args);
    assert_eq!(run(&full, a.path()).0, 0);
    assert_eq!(run(&full, b.path()).0, 0);
    let x = fs::read(a.path().join("sweep.csv")).unwrap();
    assert_eq!(x, fs::read(b.path().join("sweep.csv")).unwrap());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    let aggs = summary["aggregates"].as_array().unwrap();
    for m in ["dro", "do", "ro"] {
        assert_eq!(aggs.iter().filter(|g| g["method"] == m).count(), 3);
    }
}

#[test]
fn infeasible_evaluation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&["evaluate", "--quota-uav", "3", "--seed", "1"], dir.path());
    assert_eq!(code, 3);
    assert!(dir.path().join("evaluation.csv").exists());
}
