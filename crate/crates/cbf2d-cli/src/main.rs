//! Batch front end for the solver library: parse a run configuration, execute
//! one of the four workflows, and write deterministic artifacts.
//!
//! ```text
//! cbf2d --config run.ini [--mode MODE] [--out DIR] [--jobs N] [--seed N]
//! ```
//!
//! Verbosity is controlled by the `CBF_LOG` environment variable
//! (e.g. `CBF_LOG=info`).  Exit codes: 0 success, 2 unusable configuration or
//! data, 3 numerical blow-up, 4 non-convergence or failed checks (with
//! reports still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cbf2d::config::{Mode, RunConfig};
use cbf2d::{Error, Result};

mod artifacts;
mod commands;

/// Direct solves, amplitude recovery, estimate verification, and horizon
/// sweeps for a forced incompressible flow with nonlinear damping.
#[derive(Parser, Debug)]
#[command(name = "cbf2d", version, about)]
struct Args {
    /// Path to the INI-style run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Override the configured mode: direct, inverse, verify, or sweep.
    #[arg(long)]
    mode: Option<String>,

    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the worker-pool size (>= 1).
    #[arg(long)]
    jobs: Option<usize>,

    /// Override the random seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CBF_LOG")).init();
    let args = Args::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(commands::exit_code_for(&err))
        }
    }
}

fn cli_err(message: impl Into<String>) -> Error {
    // Line 0 marks diagnostics about flags rather than file contents.
    Error::ConfigParse { line: 0, message: message.into() }
}

fn run(args: Args) -> Result<u8> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        cli_err(format!("cannot read config `{}`: {e}", args.config.display()))
    })?;
    let mut cfg = RunConfig::from_ini(&text)?;

    if let Some(raw) = &args.mode {
        cfg.mode = Some(raw.parse::<Mode>().map_err(cli_err)?);
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(cli_err("--jobs must be at least 1"));
        }
        cfg.jobs = jobs;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mode = cfg.mode.ok_or_else(|| {
        cli_err("mode not specified (set `mode` in [run] or pass --mode)")
    })?;

    std::fs::create_dir_all(&cfg.out)?;
    log::info!("mode {mode}, writing to {}", cfg.out.display());

    // Inverse runs fed by [data] files take their physics directly from the
    // config; every other workflow instantiates the named catalog case.
    if mode == Mode::Inverse && cfg.data.is_some() {
        return commands::cmd_inverse(&cfg, None);
    }
    let case = cfg.resolve_case()?;
    match mode {
        Mode::Direct => commands::cmd_direct(&cfg, &case),
        Mode::Inverse => commands::cmd_inverse(&cfg, Some(&case)),
        Mode::Verify => commands::cmd_verify(&cfg, &case),
        Mode::Sweep => commands::cmd_sweep(&cfg, &case),
    }
}
