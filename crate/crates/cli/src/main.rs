use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lagshift::config::{ExperimentConfig, Overrides, Solver, FIGURES};
use lagshift::runner;
use lagshift::verify::{self, Suite};

#[derive(Parser, Debug)]
#[command(name = "lagshift", version, about = "Selection-mutation dynamics under shifting fitness optima")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent experiments
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the time step
    #[arg(long)]
    dt: Option<f64>,
    /// Override the number of grid nodes
    #[arg(long)]
    nx: Option<usize>,
    /// Override the snapshot times, e.g. `0,10,20`; an empty string disables snapshots
    #[arg(long, value_name = "T1,T2,...")]
    snapshot_times: Option<String>,
}

impl Common {
    fn overrides(&self) -> Result<Overrides> {
        let snapshot_times = match &self.snapshot_times {
            None => None,
            Some(s) if s.trim().is_empty() => Some(Vec::new()),
            Some(s) => Some(
                s.split(',')
                    .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad snapshot time {t:?}")))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(Overrides {
            dt: self.dt,
            nx: self.nx,
            snapshot_times,
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment config
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate the data behind a figure
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(FIGURES))]
        figure: String,
        #[command(flatten)]
        common: Common,
    },
    /// Principal eigenpair and convergence table for a config
    Eigen {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Persistence verdict from the thresholds alone
    Classify {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(["eigen", "schemes", "theorems"]))]
        suite: String,
        /// Worker threads for the checks
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_path(path)?;
    Ok(cfg.with_overrides(&common.overrides()?)?)
}

fn report(artifacts: &[runner::RunArtifacts]) {
    for a in artifacts {
        println!("{}", a.record.to_json());
        log::info!("{}: {} files in {}", a.record.experiment, a.files.len(), a.dir.display());
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = load(&config, &common)?;
            report(&runner::run_many(&[cfg], &common.out, common.threads)?);
        }
        Command::Reproduce { figure, common } => {
            report(&runner::reproduce(&figure, &common.out, common.threads, &common.overrides()?)?);
        }
        Command::Eigen { config, common } => {
            let mut cfg = load(&config, &common)?;
            cfg.solver = Solver::Eigen;
            cfg.validate()?;
            report(&runner::run_many(&[cfg], &common.out, common.threads)?);
        }
        Command::Classify { config, common } => {
            let cfg = load(&config, &common)?;
            let record = runner::classify_config(&cfg)?;
            runner::write_verdict_log(&common.out, [&record])?;
            println!("{}", record.to_json());
        }
        Command::Verify { suite, threads } => {
            let suite: Suite = suite.parse().map_err(anyhow::Error::msg)?;
            let checks = verify::run_suite(suite, threads);
            print!("{}", verify::render_table(&checks));
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
