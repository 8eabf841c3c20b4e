use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trsvr_cli::commands::{self, VerifyKind};
use trsvr_cli::{CliError, ExperimentConfig};

/// Trust-region optimization with variance-reduced gradients.
#[derive(Parser)]
#[command(name = "trsvr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer and write its metrics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config value, e.g. `--set optimizer.seed=7`.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
        /// CSV path; defaults to `<output.dir>/<output.name>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the variance bound, decrease inequalities or averaged-gradient bound.
    Verify {
        #[arg(value_enum)]
        which: Which,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the analysis constants and the Lyapunov schedule.
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run several configs or optimizers and write plot series.
    Compare {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Comma-separated optimizers applied to a single config.
        #[arg(long)]
        optimizers: Option<String>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Variance,
    Decrease,
    Theorem,
    All,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let outcome = commands::cmd_run(&cfg, out.as_deref())?;
            println!("{}", outcome.summary);
        }
        Command::Verify {
            which,
            config,
            overrides,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let which = match which {
                Which::Variance => VerifyKind::Variance,
                Which::Decrease => VerifyKind::Decrease,
                Which::Theorem => VerifyKind::Theorem,
                Which::All => VerifyKind::All,
            };
            let outcome = commands::cmd_verify(&cfg, which)?;
            print!("{}", outcome.report);
            println!("report={}", outcome.path.display());
            if !outcome.report.passed() {
                return Err(CliError::Verification(format!(
                    "{} check(s) failed",
                    outcome.report.count(trsvr::theory::CheckStatus::Fail)
                )));
            }
        }
        Command::Constants { config, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            print!("{}", commands::cmd_constants(&cfg)?);
        }
        Command::Compare {
            configs,
            optimizers,
            overrides,
        } => {
            let mut cfgs = Vec::new();
            match optimizers {
                Some(list) => {
                    let names: Vec<&str> = list
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .collect();
                    if names.is_empty() {
                        return Err(CliError::Validation(
                            "--optimizers: empty optimizer list".into(),
                        ));
                    }
                    if configs.len() != 1 {
                        return Err(CliError::Validation(
                            "--optimizers takes exactly one --config".into(),
                        ));
                    }
                    for name in names {
                        let mut o = overrides.clone();
                        o.push(format!("optimizer.algorithm=\"{name}\""));
                        cfgs.push(ExperimentConfig::load(&configs[0], &o)?);
                    }
                }
                None => {
                    for path in &configs {
                        cfgs.push(ExperimentConfig::load(path, &overrides)?);
                    }
                }
            }
            let outcome = commands::cmd_compare(&cfgs)?;
            for s in &outcome.series {
                println!("series={}", s.display());
            }
            println!("index={}", outcome.index.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
