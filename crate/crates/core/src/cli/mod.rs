//! Batch front end: a flat `key = value` config in, CSV and metadata files out.
//!
//! ```text
//! cavmem <config> [--out <prefix>] [--threads N] [--grid-scale k]
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 integration or
//! convergence failure, 4 I/O failure.

mod config;
mod mode_csv;
mod run;

use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{parse_config, Command, ControlSpec, ModeSpec, RunConfig};
pub use mode_csv::{mode_from_samples, parse_mode_csv};
pub use run::{execute, render_meta, run, RunOutcome, Series};

use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cavmem", version, about = "Cavity photon storage and retrieval simulations")]
pub struct Args {
    /// Run configuration file.
    pub config: PathBuf,
    /// Output path prefix; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<String>,
    /// Worker threads for scans.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Multiply every grid's cell count by this factor.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid_scale: u32,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Integration(_) | Error::Convergence { .. } => EXIT_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Reads and parses a config file; relative mode paths resolve against its
/// directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

fn apply_args(args: &Args) -> Result<RunConfig> {
    let mut cfg = load_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    cfg.grid_scale = args.grid_scale as usize;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(cfg)
}

/// Runs the CLI and returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    let outcome = apply_args(&args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok((out, files)) => {
            for f in &files {
                println!("wrote {}", f.display());
            }
            for c in &out.scan.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("cavmem: {e}");
            exit_code(&e)
        }
    }
}
