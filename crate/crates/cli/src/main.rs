use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fockop::config::RunConfig;
use fockop::run::{run, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    WeightInfo,
    Lattice,
    KernelCheck,
    Toeplitz,
    Transforms,
    EquivBounded,
    EquivCompact,
    EquivSchatten,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::WeightInfo => Command::WeightInfo,
            Sub::Lattice => Command::Lattice,
            Sub::KernelCheck => Command::KernelCheck,
            Sub::Toeplitz => Command::Toeplitz,
            Sub::Transforms => Command::Transforms,
            Sub::EquivBounded => Command::EquivBounded,
            Sub::EquivCompact => Command::EquivCompact,
            Sub::EquivSchatten => Command::EquivSchatten,
        }
    }
}

/// Toeplitz operators with matrix-valued symbols on weighted Fock spaces.
#[derive(Debug, Parser)]
#[command(name = "fockop", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output` from the config.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads, overriding `threads` from the config.
    #[arg(short, long)]
    threads: Option<usize>,
    /// Print only the list of written files.
    #[arg(short, long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match &args.config {
        Some(path) => RunConfig::from_file(path),
        None => Ok(RunConfig::default()),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(dir) = args.output {
        cfg.output = std::env::current_dir().map(|c| c.join(&dir)).unwrap_or(dir);
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    match run(args.command.into(), &cfg) {
        Ok(outcome) => {
            if !args.quiet {
                print!("{}", outcome.summary);
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            match outcome.failed_check {
                Some(check) => {
                    eprintln!("error: check failed: {check}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &fockop::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
