//! End-to-end runs of the `graph-rbm` binary on small configurations.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_graph-rbm"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "n = 4\nzeta = 21\nhorizon = 0.2\nout = \"out\"\n";

#[test]
fn solve_writes_probes_and_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve"], SMALL);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let probes = read(&out, "probes.csv");
    assert!(probes.starts_with("t,edge,x,value\n"));
    assert_eq!(probes.lines().count(), 1 + 21 * 10);
    let report = read(&out, "error_report.txt");
    let err: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("error = "))
        .expect("error line")
        .parse()
        .unwrap();
    assert!(err > 0.0 && err < 0.1, "{err}");
    assert!(read(&out, "config.resolved.toml").contains("n = 4"));
    assert!(read(&out, "timing.txt").contains("solver call only"));
}

#[test]
fn zero_mesh_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve"], "n = 0\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n must be positive"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve"], "n = 4\nrealisations = 3\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("realisations"));
}

#[test]
fn dangling_edge_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let graph = "[[vertices]]\nid = 1\nboundary = true\n\n[[vertices]]\nid = 2\nboundary = true\n\n\
                 [[edges]]\nid = 1\ntail = 1\nhead = 2\nlength = 1.0\n\n\
                 [[edges]]\nid = 7\ntail = 2\nhead = 9\nlength = 1.0\n";
    fs::write(dir.path().join("g.toml"), graph).unwrap();
    let o = run(dir.path(), &["solve"], "graph = \"g.toml\"\nn = 4\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("edge 7"), "{}", stderr(&o));
}

#[test]
fn custom_interval_graph_solves() {
    let dir = tempfile::tempdir().unwrap();
    let graph = "[[vertices]]\nid = 1\nboundary = true\n\n[[vertices]]\nid = 2\nboundary = true\n\n\
                 [[edges]]\nid = 1\ntail = 1\nhead = 2\nlength = 1.0\n";
    fs::write(dir.path().join("g.toml"), graph).unwrap();
    let o = run(dir.path(), &["solve"], &format!("graph = \"g.toml\"\n{SMALL}"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(&dir.path().join("out"), "error_report.txt").contains("error = "));
}

#[test]
fn rbm_is_reproducible_and_echoes_delta_adjustment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n = 4\nzeta = 21\nhorizon = 0.2\ndelta = 0.025\nrealizations = 5\n";
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = run(dir.path(), &["rbm", "--seed", "17", "--jobs", jobs, "--out", out.to_str().unwrap()], cfg);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["mean_probes.csv", "realization_errors.csv", "variance.csv", "summary.txt", "bounds.txt", "decomposition.txt"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let errs = read(&a, "realization_errors.csv");
    assert!(errs.starts_with("realization,seed,error\n"));
    assert_eq!(errs.lines().count(), 6);
    assert!(errs.lines().skip(1).all(|l| l.split(',').nth(1) == Some("17")));
    let resolved = read(&a, "config.resolved.toml");
    assert!(resolved.contains("delta adjusted from 2.5e-2"), "{resolved}");
    assert!(resolved.contains("seed = 17"));

    // The echoed config reproduces the run.
    let c = dir.path().join("c");
    let o = Command::new(env!("CARGO_BIN_EXE_graph-rbm"))
        .args(["rbm", "--config", a.join("config.resolved.toml").to_str().unwrap(), "--out", c.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&a, "mean_probes.csv"), read(&c, "mean_probes.csv"));
}

#[test]
fn single_part_law_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}decomposition = \"trivial\"\ndelta = 0.02\nrealizations = 2\n");
    let o = run(dir.path(), &["rbm"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("degenerate law; equals full solve"));
    assert!(read(&dir.path().join("out"), "summary.txt").contains("degenerate law; equals full solve"));
}

#[test]
fn nonoverlapping_preset_flag_selects_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let o = run(dir.path(), &["report", "--preset", "paper_nonoverlap_3", "--out", out.to_str().unwrap()], "n = 6\nzeta = 11\n");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(&out, "config.resolved.toml").contains("paper_nonoverlap_3"));
    let bounds = read(&out, "bounds.txt");
    assert!(bounds.contains("kind = trajectory") && bounds.contains("kind = control"));
    assert!(bounds.contains("shape_power = 7") && bounds.contains("shape_power = 11"));
}

#[test]
fn control_reports_nonconvergence_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["control"], "n = 4\nzeta = 11\nmax_iter = 0\nrealizations = 2\nout = \"out\"\n");
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(read(&dir.path().join("out"), "summary.txt").contains("converged = false"));
}

#[test]
fn control_writes_logs_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["control"], "n = 4\nzeta = 17\nhorizon = 0.5\nrealizations = 3\ntol = 1e-7\nmax_iter = 2000\nout = \"out\"\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(read(&out, "convergence.csv").starts_with("iter,J,grad_norm,step\n"));
    for name in ["state_probes.csv", "control_probes.csv", "rbm_state_probes.csv", "rbm_control_probes.csv"] {
        let text = read(&out, name);
        assert!(text.starts_with("t,edge,x,value\n"), "{name}");
        assert_eq!(text.lines().count(), 1 + 17 * 10, "{name}");
    }
    assert!(read(&out, "config.resolved.toml").contains("delta = "));
}

#[test]
fn sweep_writes_delta_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep"], "meshes = [1, 2]\nrealizations = 2\nzeta = 11\nout = \"out\"\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("out"), "sweep.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("h,delta,err_rbm,err_full,time_rbm_s,time_full_s,speedup,realizations,seed"));
    let deltas: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let expect = [0.5f64.powf(7.0 / (1.0 - 1e-4)), (1.0f64 / 3.0).powf(7.0 / (1.0 - 1e-4))];
    for (d, e) in deltas.iter().zip(expect) {
        assert!((d - e).abs() <= 1e-14 * e, "{d} vs {e}");
    }
    assert!(read(&dir.path().join("out"), "summary.txt").contains("excluded_coarsest"));
}

#[test]
fn sweep_rejects_delta() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep"], "delta = 0.1\n");
    assert_eq!(o.status.code(), Some(2));
}
