//! The `phase-pso` binary end to end: files written, resume, exit codes.

use std::path::Path;
use std::process::{Command, Output};

use phase_pso::cli::{policy_path, policy_sha256, PolicyFile, OUT_DIR_ENV, SWEEP_CSV};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phase-pso"));
    c.env("RUST_LOG", "warn").env_remove(OUT_DIR_ENV);
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: [&str; 8] = ["--iterations", "3", "--swarm-size", "6", "--trials", "40", "--eval-trials", "2000"];

fn tiny_sweep(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["sweep", "--n-min", "2", "--n-max", "4", "--out", out.to_str().unwrap()];
    args.extend(TINY);
    args.extend(extra);
    run(&args)
}

#[test]
fn sweep_writes_policies_and_table_then_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let o = tiny_sweep(dir.path(), &["--exact"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for n in 2..=4 {
        let f = PolicyFile::load(&policy_path(dir.path(), n)).unwrap();
        assert_eq!(f.deltas.len(), n);
        assert!(f.evaluation.exact_sharpness.is_some());
    }
    let table = std::fs::read_to_string(dir.path().join(SWEEP_CSV)).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("N,V_H,S,K,seed,restarts_used"));

    let before = std::fs::read(policy_path(dir.path(), 3)).unwrap();
    let again = tiny_sweep(dir.path(), &["--exact"]);
    assert!(again.status.success());
    assert_eq!(std::fs::read(policy_path(dir.path(), 3)).unwrap(), before);
    assert_eq!(std::fs::read_to_string(dir.path().join(SWEEP_CSV)).unwrap(), table);

    // Persisted levels from other conditions are not silently reused.
    let clash = tiny_sweep(dir.path(), &["--sigma-theta", "0.1"]);
    assert_eq!(clash.status.code(), Some(2));
}

#[test]
fn evaluate_reproduces_the_stored_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    assert!(tiny_sweep(dir.path(), &[]).status.success());
    let path = policy_path(dir.path(), 4);
    let stored = PolicyFile::load(&path).unwrap();
    let o = run(&["evaluate", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains(&format!("{:.8}", stored.evaluation.sharpness)), "{text}");
    assert!(text.contains("V_H·N"));

    let exact = run(&["evaluate", path.to_str().unwrap(), "--exact", "--trials", "100"]);
    assert!(exact.status.success());
    assert!(stdout(&exact).contains("S exact"));

    let refused = run(&["evaluate", path.to_str().unwrap(), "--exact", "--loss", "0.1"]);
    assert_eq!(refused.status.code(), Some(3));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["optimize", "--n", "3"];
    args.extend(TINY);
    let o = bin().args(&args).env(OUT_DIR_ENV, dir.path()).output().unwrap();
    assert!(o.status.success());
    assert!(policy_path(dir.path(), 3).exists());
}

#[test]
fn fit_reports_exponent_and_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("points.csv");
    let mut body = String::from("N,V_H\n");
    for n in 4..=9 {
        body.push_str(&format!("{n},{}\n", 2.0 * (n as f64).powf(-1.5)));
    }
    std::fs::write(&csv, body).unwrap();
    let residuals = dir.path().join("res.csv");
    let o = run(&["fit", csv.to_str().unwrap(), "--out", residuals.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("# alpha = 1.500000"), "{}", stdout(&o));
    assert_eq!(std::fs::read_to_string(residuals).unwrap().lines().count(), 7);
}

#[test]
fn export_tree_and_its_limits() {
    let dir = tempfile::tempdir().unwrap();
    assert!(tiny_sweep(dir.path(), &[]).status.success());
    let path = policy_path(dir.path(), 3);
    let o = run(&["export-tree", path.to_str().unwrap()]);
    assert!(o.status.success());
    let dot = stdout(&o);
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), 14);
    assert_eq!(run(&["export-tree", path.to_str().unwrap(), "--depth", "5"]).status.code(), Some(2));

    // A 17-qubit policy is too deep to draw.
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let deltas = vec![0.5; 17];
    json["n_qubits"] = 17.into();
    json["deltas"] = serde_json::to_value(&deltas).unwrap();
    json["sha256"] = policy_sha256(&deltas).into();
    let big = dir.path().join("big.json");
    std::fs::write(&big, json.to_string()).unwrap();
    assert_eq!(run(&["export-tree", big.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["optimize", "--n", "zero"]).status.code(), Some(2));
    assert_eq!(run(&["optimize", "--n", "3", "--loss", "1.5", "--out", out]).status.code(), Some(2));
    // Above the bootstrap threshold a parent policy is required.
    assert_eq!(run(&["optimize", "--n", "11", "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["evaluate", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(4));

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{\"format_version\": 1").unwrap();
    assert_eq!(run(&["evaluate", garbage.to_str().unwrap()]).status.code(), Some(2));
    let future = dir.path().join("future.json");
    std::fs::write(&future, "{\"format_version\": 99}").unwrap();
    assert_eq!(run(&["evaluate", future.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "n_min = 3\nn_max = 3\ninput = \"product_zero\"\nseed = 42\neval_trials = 500\nout_dir = {:?}\n[pso]\niterations = 2\nswarm_size = 4\ntrials_per_eval = 30\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = PolicyFile::load(&policy_path(&out, 3)).unwrap();
    assert_eq!(f.input, phase_pso::InputStateKind::ProductZero);
    assert_eq!(f.training.master_seed, 42);
    assert_eq!(f.training.pso.swarm_size, 4);
    assert_eq!(f.evaluation.trials, 500);
}

#[test]
fn same_seed_same_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let mut args = vec!["optimize", "--n", "4", "--seed", "9", "--out", dir.path().to_str().unwrap()];
        args.extend(TINY);
        assert!(run(&args).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(policy_path(d.path(), 4)).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn exact_evaluation_is_refused_beyond_twenty_qubits() {
    let dir = tempfile::tempdir().unwrap();
    assert!(tiny_sweep(dir.path(), &[]).status.success());
    let mut json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(policy_path(dir.path(), 2)).unwrap()).unwrap();
    let deltas: Vec<f64> = (0..21).map(|m| 0.5f64.powi(m)).collect();
    json["n_qubits"] = 21.into();
    json["deltas"] = serde_json::to_value(&deltas).unwrap();
    json["sha256"] = policy_sha256(&deltas).into();
    let big = dir.path().join("n21.json");
    std::fs::write(&big, json.to_string()).unwrap();
    let o = run(&["evaluate", big.to_str().unwrap(), "--exact", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
}
