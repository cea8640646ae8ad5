use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn phasekit(mode: &str, config: &Path, out: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phasekit"));
    cmd.arg(mode).arg("--config").arg(config).arg("--out").arg(out).args(extra);
    match threads {
        Some(t) => cmd.env("PHASEKIT_THREADS", t),
        None => cmd.env_remove("PHASEKIT_THREADS"),
    };
    cmd.output().unwrap()
}

fn run(mode: &str, text: &str, extra: &[&str]) -> (Output, TempDir) {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), text);
    let out = phasekit(mode, &cfg, &dir.path().join("out"), extra, None);
    (out, dir)
}

fn read(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join("out").join(name)).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FRESNEL: &str = r#"{"mode": "compare", "n_max": 2, "tol": 1e-13,
    "integral": {"phase": "A*(x1-1.5)^2/(2*pi)", "weight": "bump(2*x1-3)", "bounds": [[1, 2]],
                 "sweep": {"param": "A", "values": [100, 1000, 10000]}}}"#;

#[test]
fn minimal_oracle_run_writes_reports() {
    let (o, dir) = run(
        "oracle",
        r#"{"mode": "oracle", "integral": {"phase": "0", "weight": "bump(2*x1-3)", "bounds": [[1, 2]]}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = read(&dir, "report.csv");
    assert!(csv.starts_with("case,re,im,abs,arg,error_estimate,panels\n"), "{csv}");
    // ∫ b(2x - 3) dx over [1, 2] is half the mass of the unit bump
    let re: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((re - 0.5 * 0.443993816168).abs() < 1e-11, "{re}");
    let txt = read(&dir, "report.txt");
    assert!(txt.contains("case  re"), "{txt}");
    assert!(!dir.path().join("out/sweep.csv").exists());
}

#[test]
fn unbound_parameter_is_a_config_error() {
    let (o, _dir) = run(
        "oracle",
        r#"{"mode": "oracle", "integral": {"phase": "lambda9*x1", "weight": "1", "bounds": [[1, 2]]}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda9"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let cfg = r#"{"mode": "oracle", "integral": {"phase": "0", "weight": "1", "bounds": [[1, 2]]}}"#;
    let (o, _d) = run("eval", cfg, &[]);
    assert_eq!(o.status.code(), Some(2), "mode mismatch");
    let (o, _d) = run("plot", cfg, &[]);
    assert_eq!(o.status.code(), Some(2), "unknown mode");
    let (o, _d) = run("oracle", cfg, &["--tol", "-1"]);
    assert_eq!(o.status.code(), Some(2), "bad tolerance");
    let (o, _d) = run("oracle", "{ not json", &[]);
    assert_eq!(o.status.code(), Some(2), "bad document");
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), cfg);
    let o = phasekit("oracle", &path, &dir.path().join("out"), &[], Some("0"));
    assert_eq!(o.status.code(), Some(2), "bad thread count");
}

#[test]
fn fresnel_compare_passes_every_verdict() {
    let (o, dir) = run("compare", FRESNEL, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", read(&dir, "report.txt"));
    let csv = read(&dir, "report.csv");
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "A,kind,R,oracle_re,oracle_im,main_re,main_im,abs_diff,estimate,verdict");
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| r.ends_with(",pass") && r.contains(",Stationary,")));
    let txt = read(&dir, "report.txt");
    assert!(txt.contains("fitted slope of log relative error against log A"), "{txt}");
    let sweep = read(&dir, "sweep.csv");
    assert_eq!(sweep.lines().next(), Some("parameter,abs,arg"));
    assert_eq!(sweep.lines().count(), 4);
}

#[test]
fn nmax_flag_overrides_the_config() {
    let (o, dir) = run("compare", FRESNEL, &["--nmax", "1"]);
    assert!(o.status.code().is_some());
    assert!(read(&dir, "report.txt").contains("n_max = 1"));
}

#[test]
fn linear_phase_is_checked_as_nonstationary() {
    let (o, dir) = run(
        "compare",
        r#"{"mode": "compare", "integral": {"phase": "R*x1/(2*pi)", "weight": "bump(2*x1-3)",
            "bounds": [[1, 2]], "sweep": {"param": "R", "values": [100, 1000, 10000]}}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", read(&dir, "report.txt"));
    let csv = read(&dir, "report.csv");
    for row in csv.lines().skip(1) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[1], "NonStationary");
        // |I| ≤ Z R^{-3} 10³ is the estimate column
        let r: f64 = cells[2].parse().unwrap();
        let est: f64 = cells[8].parse().unwrap();
        assert!((est - 1e3 / r.powi(3)).abs() <= 1e-12 * est);
    }
}

#[test]
fn failing_verdict_exits_1() {
    let (o, dir) = run(
        "inert-check",
        r#"{"mode": "inert-check", "family": {"weight": "bump(2*x1/X - 3)", "params": {"X": {"log": [1, 10]}},
            "support": [["X", "2*X"]], "scale": "1", "ceiling": 1e-3,
            "n_param_samples": 4, "n_point_samples": 16}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(read(&dir, "report.csv").contains(",fail"));
}

#[test]
fn numerical_failure_exits_3() {
    let (o, _d) = run(
        "oracle",
        r#"{"mode": "oracle", "integral": {"phase": "1e9*x1", "weight": "1", "bounds": [[0, 1]]}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("quadrature failure"));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "inert-check", "seed": 3,
            "family": {"weight": "bump(2*x1/X1 - 3)*exp(I*lam*x1)",
                       "params": {"X1": {"log": [1, 10]}, "lam": {"interval": [0, 2]}},
                       "support": [["X1", "2*X1"]], "scale": "1 + lam*X1",
                       "n_param_samples": 16, "n_point_samples": 32,
                       "fourier": {"var": 1, "grid": [0, 0.5, 1, 2, 4, 8], "A": 5}}}"#,
    );
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = phasekit("inert-check", &cfg, &out, &[], Some(threads));
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1), "{}", stderr(&o));
        outputs.push((
            std::fs::read(out.join("report.csv")).unwrap(),
            std::fs::read(out.join("report.txt")).unwrap(),
        ));
    }
    assert!(outputs.iter().all(|o| *o == outputs[0]));
}

#[test]
fn example_ci_without_oracle() {
    let (o, dir) = run(
        "example-ci",
        r#"{"mode": "example-ci", "example": {"P": 1600, "oracle": false}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", read(&dir, "report.txt"));
    let csv = read(&dir, "report.csv");
    assert!(csv.starts_with("step,var,t0,closed_form,rel_diff,verdict\n"));
    assert_eq!(csv.matches(",pass").count(), 4, "{csv}");
}

/// The shipped config: the three-variable oracle at P = 1600 against the
/// pipeline with n_max = 1, within 15 %.
#[test]
fn shipped_example_config_passes() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ci.cfg");
    let dir = TempDir::new().unwrap();
    let o = phasekit("example-ci", &config, &dir.path().join("out"), &[], None);
    let txt = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap_or_default();
    assert_eq!(o.status.code(), Some(0), "{}\n{txt}", stderr(&o));
    assert!(txt.contains("oracle"), "{txt}");
}
