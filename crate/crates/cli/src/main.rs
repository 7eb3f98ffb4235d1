use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use impactflow::config::{read_config, RunConfig};
use impactflow::par::{init_threads_from_env, Execution};
use impactflow::{pipeline, report, selftest, Error};

/// Metaorder flow simulator and scaling-law analysis.
///
/// Thread count comes from IMPACTFLOW_THREADS when set.
#[derive(Parser, Debug)]
#[command(name = "impactflow", version)]
struct Cli {
    /// Overrides `model.seed` of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate tapes. Several realizations go into the directory `--out`.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure scaling surfaces and exponents from a tape or a directory of tapes.
    Analyze {
        #[arg(long)]
        tape: PathBuf,
        /// `trade_idx,price` file for a tape without a price column.
        #[arg(long)]
        price: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the closed-form predictions for a config.
    Predict {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare measurements with predictions; exits 4 if a tolerance fails.
    Report {
        #[arg(long)]
        measured: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in worked examples.
    Selftest,
}

fn load(config: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, Error> {
    let mut cfg = match config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.model.seed = s;
    }
    Ok(cfg)
}

fn announce(cfg: &RunConfig) {
    println!("config_hash={} seed={}", cfg.hash(), cfg.model.seed);
}

fn run(cli: Cli) -> Result<u8, Error> {
    let exec = Execution::Parallel;
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load(config.as_deref(), cli.seed)?;
            announce(&cfg);
            for p in pipeline::simulate_to_files(&cfg, &out, exec)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Analyze {
            tape,
            price,
            config,
            out,
        } => {
            let cfg = load(config.as_deref(), cli.seed)?;
            announce(&cfg);
            let samples = pipeline::load_samples(&tape, price.as_deref())?;
            let analysis = pipeline::analyze(&cfg, &samples, exec)?;
            pipeline::write_analysis(&analysis, &out, &pipeline::provenance(&cfg))?;
            println!(
                "wrote {} measurements to {}",
                analysis.measured.len(),
                out.display()
            );
        }
        Command::Predict { config, out } => {
            let cfg = load(config.as_deref(), cli.seed)?;
            announce(&cfg);
            let rows = pipeline::write_predictions(&cfg, &out)?;
            println!("wrote {} predictions to {}", rows.len(), out.display());
        }
        Command::Report {
            measured,
            pred,
            out,
        } => {
            let bundle = pipeline::report_from_files(&measured, &pred)?;
            if let Some(p) = &bundle.measured {
                println!(
                    "config_hash={} seed={}",
                    p.config_hash.as_deref().unwrap_or("-"),
                    p.seed.map_or("-".to_string(), |s| s.to_string())
                );
            }
            report::write_report(&bundle, &out)?;
            for r in &bundle.rows {
                if r.status == report::Status::Fail {
                    println!(
                        "FAIL {} a={:?} n={:?}: measured {:.4} predicted {:.4}",
                        r.statistic,
                        r.a,
                        r.n,
                        r.measured,
                        r.predicted.unwrap_or(f64::NAN)
                    );
                }
            }
            let s = bundle.summary;
            println!(
                "{} checked, {} passed, {} failed, {} unchecked, {} without prediction",
                s.checked, s.passed, s.failed, s.unchecked, s.no_prediction
            );
            if !bundle.passed() {
                return Ok(4);
            }
        }
        Command::Selftest => {
            let checks = selftest::run();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} {}", c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads_from_env();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
