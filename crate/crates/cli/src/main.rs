use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pathlift_cli::{config, run, write_outputs, RunConfig, SeedSource, SEED_ENV};

#[derive(Parser)]
#[command(name = "pathlift", version, about = "Run path-space lift and integration-by-parts experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads for path-parallel experiments.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides output.dir; default `pathlift-out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the JSON schema of run configs.
    Schema,
}

const CONFIG_ERROR: u8 = 2;

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(CONFIG_ERROR)
}

fn load(path: &PathBuf, workers: Option<usize>) -> Result<(RunConfig, SeedSource), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut source = SeedSource::Config;
    if let Ok(raw) = std::env::var(SEED_ENV) {
        let seed: u64 = raw.trim().parse().map_err(|_| format!("{SEED_ENV}={raw} is not an unsigned integer"))?;
        match cfg.experiment.seed_mut() {
            Some(s) => {
                *s = seed;
                source = SeedSource::Env;
            }
            None => eprintln!("warning: {SEED_ENV} ignored, {} runs are deterministic", cfg.experiment.kind()),
        }
    }
    if let Some(k) = workers {
        if k == 0 {
            return Err("--workers must be positive".into());
        }
        cfg.experiment.set_workers(k);
    }
    Ok((cfg, source))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Schema => {
            print!("{}", config::schema());
            ExitCode::SUCCESS
        }
        Command::Run { config, workers, out } => {
            let (cfg, source) = match load(&config, workers) {
                Ok(v) => v,
                Err(e) => return config_error(e),
            };
            let dir = out.or_else(|| cfg.output.dir.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("pathlift-out"));
            let result = match run::run(&cfg, source) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            let status = if result.verdict { "PASS" } else { "FAIL" };
            let files = match write_outputs(&result, &cfg.output, &dir) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: writing outputs to {}: {e}", dir.display());
                    return ExitCode::FAILURE;
                }
            };
            let detail = result.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
            eprintln!("{} {status} in {:.1}s{detail} -> {}", result.kind, result.wall_clock_seconds, files[0].display());
            if result.verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
