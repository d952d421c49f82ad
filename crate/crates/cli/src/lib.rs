//! Config-driven runner for the pathlift experiments: JSON in, JSON, CSV and
//! SVG out, with exit status 0 (pass), 1 (experiment failed) or 2 (bad config).

pub mod config;
pub mod plot;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::RunConfig;
pub use run::{RunResult, SeedSource};

/// Environment variable that overrides the seed of any random experiment.
pub const SEED_ENV: &str = "PATHLIFT_SEED";

/// Write the result JSON, the CSV tables and the plots; returns the paths.
pub fn write_outputs(result: &RunResult, output: &config::OutputSpec, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = &output.stem;
    let mut written = Vec::new();
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&json, serde_json::to_string_pretty(result)? + "\n")?;
    written.push(json);
    if output.csv {
        if let Some(table) = &result.table {
            let path = dir.join(format!("{stem}.csv"));
            std::fs::write(&path, table)?;
            written.push(path);
        }
        for (i, s) in result.sweeps.iter().enumerate() {
            let path = dir.join(format!("{stem}-sweep{i}.csv"));
            std::fs::write(&path, run::sweep_csv(s))?;
            written.push(path);
        }
    }
    if output.plots {
        written.extend(plot::emit_plots(result, dir, stem)?);
    }
    Ok(written)
}
