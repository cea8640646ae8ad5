use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use phasekit::config::{parse_config, Mode};
use phasekit::report::Report;
use phasekit::run::run_config;
use phasekit::Error;

const EXIT_VERDICT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Oscillatory integrals by stationary phase, checked against quadrature.
#[derive(Parser, Debug)]
#[command(name = "phasekit", version)]
struct Cli {
    /// oracle, eval, compare, inert-check or example-ci
    mode: String,
    /// JSON run config
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.csv, report.txt and sweep.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Correction terms per stationary-phase step
    #[arg(long = "nmax")]
    n_max: Option<usize>,
    /// Oracle tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Start index of the parameter sampling sequence
    #[arg(long)]
    seed: Option<u64>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("phasekit: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn set_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PHASEKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PHASEKIT_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn write_report(dir: &Path, report: &Report) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), report.csv())?;
    std::fs::write(dir.join("report.txt"), report.text())?;
    if let Some(s) = report.sweep_csv() {
        std::fs::write(dir.join("sweep.csv"), s)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(mode) = Mode::from_name(&cli.mode) else {
        return usage(format!("unknown mode `{}`", cli.mode));
    };
    if let Err(e) = set_threads() {
        return usage(e);
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return usage(format!("cannot read {}: {e}", cli.config.display())),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            for e in &errors {
                eprintln!("{}: {e}", cli.config.display());
            }
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if cfg.mode != mode {
        return usage(format!(
            "the config is for mode {}, not {}",
            cfg.mode.name(),
            mode.name()
        ));
    }
    if let Some(n) = cli.n_max {
        if n > phasekit::expansion::MAX_TERMS {
            return usage(format!("--nmax is at most {}", phasekit::expansion::MAX_TERMS));
        }
        cfg.n_max = n;
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return usage(format!("--tol must be positive, got {t}"));
        }
        cfg.tol = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    let report = match run_config(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("phasekit: {e}");
            let code = match e {
                Error::InvalidInput(_) | Error::UnboundParameter(_) | Error::Schema { .. } | Error::Parse { .. } => {
                    EXIT_USAGE
                }
                _ => EXIT_NUMERICAL,
            };
            return ExitCode::from(code);
        }
    };
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = write_report(&dir, &report) {
        return usage(format!("cannot write reports to {}: {e}", dir.display()));
    }
    print!("{}", report.text());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT)
    }
}
