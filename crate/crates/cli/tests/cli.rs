use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hls_core::riesz::self_cell_average;
use hls_core::runner::{config_from_summary, summary_value};

fn hls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hls")).args(args).env("HLS_THREADS", "1").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> String {
    fs::read_to_string(dir.join("summary.txt")).unwrap()
}

#[test]
fn one_node_grid_reproduces_the_self_cell_value() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("one.csv");
    fs::write(&grid, "x0,weight\n0.3,1.0\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "job.cfg",
        &format!("manifold=torus1\nalpha=0.5\np=1.5\nresolution=2\nworkflow=solve\ngrid={}\n", grid.display()),
    );
    let out = dir.path().join("run");
    let res = hls(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--deterministic"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = summary(&out);
    let n: f64 = summary_value(&s, "n_estimate").unwrap().parse().unwrap();
    let expect = self_cell_average(1.0, 0.5, 1);
    assert!((n - expect).abs() <= 1e-12 * expect, "{n} vs {expect}");
    assert_eq!(summary_value(&s, "grid_sha256").unwrap().len(), 64);
    assert_eq!(summary_value(&s, "status"), Some("ok"));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "job.cfg",
        "manifold=torus2\nperiods=1,1\nalpha=1\np=1.5\nresolution=10\nworkflow=solve\ninit=random\nseed=11\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let res = hls(&["solve", "--config", &cfg, "--out", d.to_str().unwrap(), "--deterministic"]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["summary.txt", "history.csv", "extremal.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    assert!(summary_value(&summary(&a), "wall_clock_seconds").is_none());
}

#[test]
fn summary_echo_reproduces_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "job.cfg",
        "# baseline on a disc\nmanifold = ball2\nradius = 1\nalpha = 1\np = 1.5\nresolution = 5\nworkflow = baseline\n",
    );
    let out = dir.path().join("run");
    let res = hls(&["baseline", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = summary(&out);
    let rebuilt = config_from_summary(&s).unwrap();
    assert_eq!(summary_value(&s, "config_hash").unwrap(), rebuilt.hash());
    assert!(summary_value(&s, "wall_clock_seconds").is_some());
    assert!(String::from_utf8_lossy(&res.stdout).contains("n_estimate="));
}

#[test]
fn transplant_writes_one_row_per_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "job.cfg",
        "manifold=torus2\nperiods=1,1\nalpha=1\np=1.5\nresolution=16\nworkflow=transplant\n\
         ball_resolution=5\ndelta=0.25\nlambdas=0.4,0.2,0.1\nsolve_manifold=false\n",
    );
    let out = dir.path().join("run");
    let res = hls(&["transplant", "--config", &cfg, "--out", out.to_str().unwrap(), "--deterministic"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("transplant.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("lambda,delta,epsilon"));
    assert_eq!(lines.count(), 3);
    assert_eq!(summary_value(&summary(&out), "rows"), Some("3"));
}

#[test]
fn unconverged_solve_exits_with_failure_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "job.cfg",
        "manifold=sphere2\nalpha=1\np=1.5\nresolution=200\nworkflow=solve\nmax_iter=1\ninit=random\n",
    );
    let out = dir.path().join("run");
    let res = hls(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(summary_value(&summary(&out), "status"), Some("failed"));
}

#[test]
fn bad_configs_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("exponent", "manifold=sphere2\nalpha=1\np=2\nresolution=100\nworkflow=solve\n", "1 < p < n/alpha"),
        ("missing", "manifold=sphere2\nalpha=1\nworkflow=solve\n", "resolution"),
        ("unknown", "manifold=sphere2\nalpha=1\np=1.5\nresolution=100\nworkflow=solve\ncolour=red\n", "colour"),
        ("syntax", "manifold=sphere2\njust words\n", "line 2"),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(dir.path(), name, text);
        let res =
            hls(&["solve", "--config", &cfg, "--out", dir.path().join(name).with_extension("out").to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2), "{name}");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(needle), "{name}: {err}");
    }
    let cfg = write_config(dir.path(), "ok", "manifold=sphere2\nalpha=1\np=1.5\nresolution=100\nworkflow=solve\n");
    let res = hls(&["baseline", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("command line asks for 'baseline'"));
    let res = hls(&["integrate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
}
