use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use seqweak_cli::acceptance;
use seqweak_cli::config::{parse_config, Mode};
use seqweak_cli::output::{render_csv, write_output};
use seqweak_cli::sweep::{run_sweep, summarize};
use seqweak_cli::THREADS_ENV;
use seqweak_core::optic::{verify_grid, DEFAULT_GAMMA_GRID_DEG, DEFAULT_PHI_GRID};

const VALIDATION: u8 = 2;
const RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "seqweak", version, about = "Sequential weak measurement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Default,
}

#[derive(Subcommand)]
enum Command {
    /// Run a post-selection sweep described by a config file.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path; the JSON sidecar is written next to it. Defaults to
        /// the config's output_path, or stdout (CSV only) when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check compiled optical modules against their abstract Kraus operators.
    VerifyOptics {
        #[arg(long, value_enum, default_value = "default")]
        grid: GridArg,
    },
    /// Run the acceptance suite.
    Selftest,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(config: PathBuf, mode: Option<ModeArg>, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(VALIDATION);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(VALIDATION);
        }
    };
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Sampled => Mode::Sampled,
        };
        if cfg.mode == Mode::Sampled && (cfg.shots < 10_000 || cfg.resamples < 100) {
            eprintln!("error: sampled mode needs shots >= 10000 and resamples >= 100");
            return ExitCode::from(VALIDATION);
        }
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let table = run_sweep(&cfg);
    let summary = summarize(&table);
    eprintln!("{}", summary.report(cfg.mode));
    match out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from)) {
        Some(path) => match write_output(&table, &cfg, &path) {
            Ok((csv, json)) => eprintln!("wrote {} and {}", csv.display(), json.display()),
            Err(e) => {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(RUNTIME);
            }
        },
        None => print!("{}", render_csv(&table)),
    }
    if summary.failed + summary.diverged == summary.rows {
        eprintln!("error: no row produced a value");
        return ExitCode::from(RUNTIME);
    }
    ExitCode::SUCCESS
}

fn verify_optics() -> ExitCode {
    let gammas: Vec<f64> = DEFAULT_GAMMA_GRID_DEG.iter().map(|g| g.to_radians()).collect();
    let points = match verify_grid(&DEFAULT_PHI_GRID, &gammas) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RUNTIME);
        }
    };
    let mut failed = 0;
    for p in &points {
        println!(
            "phi={:>6.2}° gamma={:>5.1}° {:<9} deviation={:.3e} {}",
            p.phi.to_degrees(),
            p.gamma.to_degrees(),
            format!("{:?}", p.setting),
            p.deviation,
            if p.passed() { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!p.passed());
    }
    println!("{}/{} modules verified", points.len() - failed, points.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(RUNTIME)
    }
}

fn selftest() -> ExitCode {
    let results = acceptance::run_all(|r| println!("{}", r.line()));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{}/{} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(RUNTIME)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(VALIDATION),
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(VALIDATION);
    }
    match cli.command {
        Command::Run { config, mode, seed, out } => run(config, mode, seed, out),
        Command::VerifyOptics { grid: GridArg::Default } => verify_optics(),
        Command::Selftest => selftest(),
    }
}
