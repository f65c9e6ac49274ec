//! Command-line front end.
//!
//! ```text
//! spinsqueeze <evolve|steady|qfunc|sweep-r|scaling|disorder|run> [--config FILE]
//!     [--out DIR] [--seed S] [--threads T] [--format csv|json] [--n N] [--r R] [--w W]
//! ```
//!
//! `run` takes the command from the config file. Exit codes: 0 success,
//! 2 configuration error, 3 solver error, 4 I/O error.

pub mod config;
pub mod run;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, parse_config_with, Command, ConfigError, Format, Overrides, RunConfig};
pub use run::{execute, run, write_tables, RunError};
pub use table::ResultTable;

#[derive(Parser, Debug)]
#[command(name = "spinsqueeze", version, about = "Spin squeezing of emitters in a waveguide driven by squeezed light")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Time evolution of the squeezing parameter.
    Evolve(CommonArgs),
    /// Steady-state squeezing.
    Steady(CommonArgs),
    /// Husimi Q function snapshots.
    Qfunc(CommonArgs),
    /// Steady squeezing against r.
    SweepR(CommonArgs),
    /// Optimal squeezing against N, with fits.
    Scaling(CommonArgs),
    /// Position-disorder ensembles of the full model.
    Disorder(CommonArgs),
    /// Whatever command the config file names.
    Run(CommonArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[arg(long = "r", allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long = "w", allow_negative_numbers = true)]
    pub w: Option<f64>,
}

impl Sub {
    fn parts(&self) -> (Option<Command>, &CommonArgs) {
        match self {
            Sub::Evolve(a) => (Some(Command::Evolve), a),
            Sub::Steady(a) => (Some(Command::Steady), a),
            Sub::Qfunc(a) => (Some(Command::Qfunc), a),
            Sub::SweepR(a) => (Some(Command::SweepR), a),
            Sub::Scaling(a) => (Some(Command::Scaling), a),
            Sub::Disorder(a) => (Some(Command::Disorder), a),
            Sub::Run(a) => (None, a),
        }
    }
}

/// Reads the config file (if any) and applies command-line overrides.
pub fn load(sub: &Sub) -> Result<RunConfig, RunError> {
    let (command, args) = sub.parts();
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let ov = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        format: args.format,
        n: args.n,
        r: args.r,
        w: args.w,
    };
    Ok(parse_config_with(&text, command, &ov)?)
}

/// Entry point; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (_, args) = cli.command.parts();
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: threads: {e}");
            return 2;
        }
    }
    let outcome = load(&cli.command).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
