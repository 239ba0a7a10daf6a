use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracell(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fracell"));
    cmd.args(args).arg(format!("--out={}", out.display()));
    match threads {
        Some(t) => cmd.env("FRACELL_THREADS", t),
        None => cmd.env_remove("FRACELL_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn halfline_reports_the_square_root_profile() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracell(&["halfline", "--s=0.25"], dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    let slope = r["results"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 0.5).abs() < 1e-3);
    let csv = std::fs::read_to_string(dir.path().join("halfline.csv")).unwrap();
    assert!(csv.starts_with("x,quadrature,closed_form,ratio\n"));
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn converge_reports_order_and_pass_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracell(&["converge", "--s=0.3", "--nodes=65", "--layers=32"], dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["results"]["observed_order"].as_f64().unwrap() >= 0.8);
    assert_eq!(r["results"]["errors"].as_array().unwrap().len(), 3);
    assert_eq!(r["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn reruns_are_byte_identical_regardless_of_thread_count() {
    let runs: Vec<_> = [Some("1"), Some("4"), None]
        .iter()
        .map(|t| {
            let dir = tempfile::tempdir().unwrap();
            let o = fracell(&["converge", "--rhs=random", "--seed=7", "--nodes=33", "--layers=16"], dir.path(), *t);
            assert!(o.status.success());
            let files: Vec<Vec<u8>> = ["report.json", "convergence.csv"]
                .iter()
                .map(|f| std::fs::read(dir.path().join(f)).unwrap())
                .collect();
            files
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(fracell(&["solve", "--rhs=random", "--seed=3", "--nodes=33"], d.path(), None).status.success());
    }
    for f in ["report.json", "solution.csv", "rhs.csv", "eigenvalues.csv", "grid.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_changes_random_data() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    fracell(&["solve", "--rhs=random", "--seed=1", "--nodes=17"], a.path(), None);
    fracell(&["solve", "--rhs=random", "--seed=2", "--nodes=17"], b.path(), None);
    let ra = report(a.path());
    let rb = report(b.path());
    assert_ne!(ra["config_hash"], rb["config_hash"]);
    assert_ne!(ra["results"]["solution_l2"], rb["results"]["solution_l2"]);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# sample\ns = 0.35\nnodes = 33\nbc = neumann\n").unwrap();
    let out = dir.path().join("out");
    let o = fracell(&["solve", "--config", cfg.to_str().unwrap(), "--nodes=17"], &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["config"]["s"], "0.35");
    assert_eq!(r["config"]["nodes"], "17");
    assert_eq!(r["config"]["bc"], "neumann");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["versions"]["fracell"], env!("CARGO_PKG_VERSION"));
    assert!(r["versions"]["fracell-cli"].is_string());
}

#[test]
fn invalid_configuration_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (arg, key) in [("--sigma=0.2", "sigma"), ("--s=1.5", "s"), ("--nodes=abc", "nodes"), ("--bc=robin", "bc")] {
        let o = fracell(&["solve", arg], dir.path(), None);
        assert_eq!(o.status.code(), Some(2), "{arg}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(&format!("`{key}`")), "{arg}: {err}");
    }
    let o = fracell(&["solve", "--bc=neumann", "--rhs=one", "--nodes=17"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let o = fracell(&["frobnicate"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_assertions_exit_nonzero_with_a_failure_list() {
    let dir = tempfile::tempdir().unwrap();
    // two layers cannot resolve the DtN map to 1e-6
    let o = fracell(&["extension", "--nodes=17", "--layers=4", "--dtn_tol=1e-6"], dir.path(), None);
    assert_eq!(o.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["pass"], Value::Bool(false));
    let failures: Vec<&str> = r["failures"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(failures.contains(&"dtn_relative_error"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dtn_relative_error"));
}

#[test]
fn kernel_and_probe_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracell(&["kernel", "--s=0.5", "--nodes=65"], dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert!(csv.starts_with("i,j,value\n"));

    let dir = tempfile::tempdir().unwrap();
    let o = fracell(&["probe", "--nodes=65537", "--rhs=spike", "--s=0.25", "--alpha=0.2"], dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("profile.csv").exists());
    let r = report(dir.path());
    assert!(r["results"]["fit"]["exponent"].as_f64().unwrap() > 0.5);
}
