//! `kpp-lab` command line: TOML config in, versioned CSV/JSON out.
//!
//! Exit codes: 0 when every assertion held, 1 on an assertion or runtime
//! failure, 2 on a configuration or usage error.

// `!(x > 0.0)` is deliberate: it rejects NaN together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::config::parse_config;
use crate::output::Emitter;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Used when neither `--out`, `KPP_LAB_OUT` nor `output.dir` is given.
pub const DEFAULT_OUT_DIR: &str = "kpp-lab-out";

#[derive(Debug, Parser)]
#[command(
    name = "kpp-lab",
    version,
    about = "Fronts of KPP equations in periodic and close-to-periodic media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dispersion curve, minimal speed and degeneracy fit
    Dispersion(Common),
    /// Pulsating front at `front.c` (default c*)
    Front(Common),
    /// Plain Cauchy run with snapshots and observations
    Simulate(Common),
    /// Convergence to the minimal-speed front in a periodic medium
    Theorem1(Common),
    /// Spreading at c* in a close-to-periodic medium
    Theorem2(Common),
    /// Profile convergence in a close-to-periodic medium
    Theorem3(Common),
    /// Steepness, intersection and comparison checks on random pairs
    Steepness(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// output directory; overrides `output.dir`
    #[arg(long, env = "KPP_LAB_OUT")]
    out: Option<PathBuf>,
    /// worker threads for the run
    #[arg(long)]
    threads: Option<usize>,
    /// treat configuration warnings as errors
    #[arg(long)]
    strict: bool,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Self::Dispersion(c)
            | Self::Front(c)
            | Self::Simulate(c)
            | Self::Theorem1(c)
            | Self::Theorem2(c)
            | Self::Theorem3(c)
            | Self::Steepness(c) => c,
        }
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
        }
    };
    let common = cli.command.common();
    match common.threads {
        Some(0) => {
            eprintln!("config error: --threads must be at least 1");
            EXIT_CONFIG
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => {
                eprintln!("error: thread pool: {e}");
                EXIT_FAIL
            }
        },
        None => execute(&cli.command),
    }
}

fn execute(command: &Command) -> i32 {
    let common = command.common();
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", common.config.display());
            return EXIT_CONFIG;
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            eprint!("{errors}");
            return EXIT_CONFIG;
        }
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    if common.strict && !cfg.warnings.is_empty() {
        eprintln!(
            "config error: --strict turns {} warning(s) into errors",
            cfg.warnings.len()
        );
        return EXIT_CONFIG;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let mut out = match Emitter::new(&dir, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return EXIT_FAIL;
        }
    };
    let result = match command {
        Command::Dispersion(_) => commands::dispersion(&cfg, &mut out),
        Command::Front(_) => commands::front(&cfg, &mut out),
        Command::Simulate(_) => commands::simulate(&cfg, &mut out),
        Command::Theorem1(_) => commands::theorem1(&cfg, &mut out),
        Command::Theorem2(_) => commands::theorem2(&cfg, &mut out),
        Command::Theorem3(_) => commands::theorem3(&cfg, &mut out),
        Command::Steepness(_) => commands::steepness(&cfg, &mut out),
    };
    match result {
        Ok(true) => {
            println!("PASS: {} file(s) in {}", out.written().len(), dir.display());
            EXIT_PASS
        }
        Ok(false) => {
            println!("FAIL: assertions did not hold; see {}", dir.display());
            EXIT_FAIL
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_FAIL
        }
    }
}
