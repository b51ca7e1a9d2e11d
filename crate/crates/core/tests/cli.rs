//! End-to-end checks of the `mwls` binary: exit codes, report contents and
//! determinism.

use std::path::Path;
use std::process::{Command, Output};

use mwls::config::B1_EXAMPLE;

fn mwls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwls"))
        .args(args)
        .env("MWLS_THREADS", "2")
        .output()
        .expect("binary runs")
}

/// The documented example, shrunk so the test stays fast.
fn small_config(dir: &Path, edit: impl Fn(String) -> String) -> String {
    let text = B1_EXAMPLE
        .replace("\nm = 10000", "\nm = 2000")
        .replace("fresh_m = 100000", "fresh_m = 5000");
    let path = dir.join("run.toml");
    std::fs::write(&path, edit(text)).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_reports_with_the_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), |t| t);
    let out = tmp.path().join("out");
    let o = mwls(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["solution.csv", "errors.csv", "bounds.csv"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        // Defaults and overrides are echoed, followed by the seed line.
        assert!(text.contains("# clamp = 12.0\n"), "{name}");
        assert!(text.contains("# seed = 7\n"), "{name}");
        assert!(text.contains("# seeds: cloud = 7, evaluation = 7\n"), "{name}");
    }
    let errors = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(errors.contains("\nindex,t_i,M,K_y,K_z,err_y,err_z,fresh_y,fresh_z,"));
    let rows: Vec<Vec<f64>> = errors
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().flatten().all(|v| v.is_finite() && *v >= 0.0), "{errors}");
    // Fresh norms within √2 times the cloud norms plus the dependence errors.
    assert!(rows.iter().all(|r| r[7] <= 2f64.sqrt() * r[5] + r[14] && r[8] <= 2f64.sqrt() * r[6] + r[15]));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), |t| t);
    let out = tmp.path().join("out");
    let read = || {
        ["solution.csv", "errors.csv", "bounds.csv"].map(|n| std::fs::read(out.join(n)).unwrap())
    };
    assert_eq!(mwls(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let first = read();
    let o = Command::new(env!("CARGO_BIN_EXE_mwls"))
        .args(["--threads", "1", "run", "--config", &cfg, "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, read());
}

#[test]
fn validation_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = small_config(tmp.path(), |t| t.replace("delta = 0.5", "delta = 0.5\nwidth = 3"));
    let o = mwls(&["run", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`basis.width`"), "{}", stderr(&o));

    // Fewer samples than basis functions; the message names the index.
    let tiny = small_config(tmp.path(), |t| t.replace("\nm = 2000", "\nm = 10"));
    let o = mwls(&["run", "--config", &tiny, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("time index 0"), "{}", stderr(&o));

    let o = mwls(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mwls(&["run", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mwls(&["tune", "--n", "10", "--kappa", "0.5", "--l", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(mwls(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // A driver this strong overflows the responses.
    let cfg = small_config(tmp.path(), |t| t.replace("id = \"b1\"", "id = \"b3\"\nalpha = 1e300"));
    let o = mwls(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
}

#[test]
fn bounds_show_the_horizon_singularity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), |t| t);
    let o = mwls(&["bounds", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    // Θ_z √(T - t_i) is flat for the zero driver.
    let scaled: Vec<f64> = rows.iter().map(|r| r[5] * (1.0 - r[1]).sqrt()).collect();
    assert!(scaled.iter().all(|v| (v - scaled[0]).abs() < 1e-12 * scaled[0]), "{scaled:?}");
}

#[test]
fn tune_and_sweep_print_tables() {
    let o = mwls(&["tune", "--n", "10", "--kappa", "0.5", "--regime", "holder"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# regime = holder\n"));
    assert!(text.contains("\nindex,t_i,delta_y,delta_z,M_formula,K_y,K_z,M\n"));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), |t| {
        format!("{t}\n[sweep]\nparameter = \"m\"\nvalues = [500, 2000]\n")
    });
    let out = tmp.path().join("sweep");
    let o = mwls(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("# slope_z = "));
    assert!(out.join("sweep.csv").exists() && out.join("sweep_summary.csv").exists());
}

#[test]
fn bench_runs_every_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), |t| t);
    let out = tmp.path().join("bench");
    let o = mwls(&["bench", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    for id in ["b1", "b2", "b3", "b4"] {
        assert!(text.contains(&format!("\n{id},")), "{text}");
        assert!(out.join(id).join("errors.csv").exists());
    }
    assert!(out.join("bench.csv").exists());
}
