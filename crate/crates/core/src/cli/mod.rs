//! The `brwlab` command line: one TOML (or manifest JSON) file describes an
//! experiment, the result table goes to `--out` or stdout and a JSON run
//! manifest goes next to it.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde::{Deserialize, Serialize};

pub use commands::{execute, CommandOutput};
pub use config::{
    Cap, CommandName, CouplingMode, CouplingSection, DriftSection, ExperimentConfig, Grid, IndexKind,
    PercolationSection, ScanSection, SimulateSection, SpectralSection,
};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_TUNING: i32 = 3;

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::TuningFailed(_) => EXIT_TUNING,
        _ => EXIT_USAGE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "brwlab", version, about = "Branching random walk experiments")]
pub struct Args {
    /// Experiment file (TOML, or a run manifest to reproduce).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: i32,
    pub summary: serde_json::Value,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Path of the manifest written next to `output`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Loads the config, applies overrides, runs it and writes the outputs.
pub fn run_with(args: &Args) -> Result<RunManifest> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::load(&text)?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(o) = &args.out {
        config.output = Some(o.display().to_string());
    }
    let started = now();
    let result = execute(&config);
    let (code, summary, table, failure) = match result {
        Ok(out) => (EXIT_OK, out.summary, Some(out.table), None),
        Err(e) => (exit_code(&e), serde_json::json!({ "error": e.to_string() }), None, Some(e)),
    };
    let manifest = RunManifest {
        tool: "brwlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        started_unix: started,
        finished_unix: now(),
        exit_code: code,
        summary,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    match &config.output {
        Some(path) => {
            let path = Path::new(path);
            if let Some(t) = &table {
                std::fs::write(path, t)?;
            }
            std::fs::write(manifest_path(path), json + "\n")?;
        }
        None => {
            if let Some(t) = &table {
                print!("{t}");
            }
            eprintln!("{json}");
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match run_with(&args) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Sizes the worker pool from `BRWLAB_THREADS`.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("BRWLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("BRWLAB_THREADS must be a positive integer, got {v:?}")))?;
    #[cfg(feature = "parallel")]
    {
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}
