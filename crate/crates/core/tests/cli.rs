//! The `spinsqueeze` binary end to end: tables on disk, exit codes,
//! reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use spinsqueeze::cli::{parse_config, ResultTable, RunConfig};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinsqueeze"))
}

fn run_with(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    bin()
        .arg("run")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap()
}

fn table(dir: &Path, file: &str) -> ResultTable {
    let text = std::fs::read_to_string(dir.join(file)).unwrap();
    ResultTable::from_csv(file, &text).unwrap()
}

#[test]
fn steady_writes_one_row_with_metadata() {
    let dir = TempDir::new().unwrap();
    let out = run_with(dir.path(), "command = \"steady\"\n[model]\nn = 10\nr = 0.5\n", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(dir.path(), "steady_steady.csv");
    assert_eq!(t.rows.len(), 1);
    let v = t.column("inverse_xi_sq").unwrap()[0];
    assert!((v - 2.0216797003265365).abs() < 1e-12, "{v}");
    assert_eq!(t.meta_value("command"), Some("steady"));
    assert!(t.meta_value("spinsqueeze").is_some());
    assert!(dir.path().join("steady_run.json").exists());
}

#[test]
fn metadata_echo_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let out = run_with(dir.path(), "command = \"steady\"\nseed = 9\n[model]\nn = 6\nr = 0.3\n", &[]);
    assert!(out.status.success());
    let t = table(dir.path(), "steady_steady.csv");
    let echoed = RunConfig::from_json(t.meta_value("config").unwrap()).unwrap();
    assert_eq!(echoed.seed, 9);
    assert_eq!(echoed.model.n, 6);
    assert_eq!(echoed.model.r, 0.3);

    let again = TempDir::new().unwrap();
    let mut cfg = echoed.clone();
    cfg.output.dir = again.path().to_string_lossy().into_owned();
    spinsqueeze::cli::run(&cfg).unwrap();
    let second = table(again.path(), "steady_steady.csv");
    assert_eq!(t.rows, second.rows);
}

#[test]
fn subcommand_flags_without_a_file() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["steady", "--n", "4", "--r", "0.2", "--format", "json", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("steady_steady.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert_eq!(v["rows"][0][0].as_f64(), Some(4.0));
}

#[test]
fn q_function_snapshots_are_normalized() {
    let dir = TempDir::new().unwrap();
    let cfg = "command = \"qfunc\"\n[model]\nn = 8\nr = 0.8\n[run]\nsnapshot_times = [0.0, 0.5]\nq_grid = [91, 181]\nplanar_points = 21\n";
    let out = run_with(dir.path(), cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snaps = table(dir.path(), "qfunc_snapshots.csv");
    assert_eq!(snaps.rows.len(), 2);
    for q in snaps.column("q_integral").unwrap() {
        assert!((q - 1.0).abs() < 1e-5, "{q}");
    }
    let q = table(dir.path(), "qfunc_q.csv");
    assert_eq!(q.rows.len(), 2 * 91 * 181);
    assert!(q.column("q").unwrap().iter().all(|&v| v >= 0.0));
}

#[test]
fn disorder_output_is_byte_identical_across_runs() {
    let cfg = "command = \"disorder\"\nseed = 1\n[model]\nn = 3\nr = 0.3\n[placement]\nw_values = [0.1]\nn_configs = 8\n[run]\nt_end = 2.0\nn_times = 11\n";
    // Same output directory each time, since the config echo records it.
    let dir = TempDir::new().unwrap();
    let files = ["disorder_trajectory.csv", "disorder_steady.csv", "disorder_decay.csv"];
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        assert!(run_with(dir.path(), cfg, &["--threads", threads]).status.success());
        runs.push(files.map(|f| std::fs::read(dir.path().join(f)).unwrap()));
    }
    for (f, (x, y)) in files.iter().zip(runs[0].iter().zip(&runs[1])) {
        assert!(x == y, "{f} differs between runs");
    }
    let c = TempDir::new().unwrap();
    assert!(run_with(c.path(), cfg, &["--seed", "2"]).status.success());
    let other = table(c.path(), "disorder_steady.csv");
    let first = ResultTable::from_csv("s", std::str::from_utf8(&runs[0][1]).unwrap()).unwrap();
    assert_ne!(first.column("mean"), other.column("mean"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |cfg: &str| run_with(dir.path(), cfg, &[]).status.code();

    assert_eq!(code("command = \"steady\"\n[model]\nr = -0.1\n"), Some(2));
    assert_eq!(code("command = \"steady\"\n[model]\nbogus = 1\n"), Some(2));
    assert_eq!(code("command = \"disorder\"\n[model]\nn = 12\n"), Some(2));
    assert_eq!(code("command = \"steady\"\n[model\n"), Some(2));
    // A two-point scaling fit is underdetermined.
    assert_eq!(code("command = \"scaling\"\n[run]\nn_values = [4, 6]\n"), Some(3));

    let missing = bin().args(["run", "--config", "/nonexistent/c.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(4));

    let blocker = dir.path().join("not_a_dir");
    std::fs::write(&blocker, "").unwrap();
    let out = bin()
        .args(["steady", "--n", "2", "--out"])
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn negative_r_flag_reports_the_field() {
    let out = bin().args(["steady", "--r", "-0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.r"));
}

#[test]
fn subcommand_and_config_must_agree() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "command = \"evolve\"\n").unwrap();
    let out = bin().arg("steady").arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(parse_config("command = \"evolve\"\n", None).is_ok());
}
