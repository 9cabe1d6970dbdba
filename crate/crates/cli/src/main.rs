use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qgids::{describe, run_to_dir, CliError};

#[derive(Parser)]
#[command(name = "qgids", version, about = "IDS experiments for random quantum graphs on Z^d")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "QGIDS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the config schema of an experiment kind.
    Describe { kind: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("validation error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("could not set up the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Describe { kind } => match describe(&kind) {
            Some(text) => {
                println!("{text}");
                Ok(())
            }
            None => Err(CliError::Validation(format!(
                "unknown experiment kind {kind:?}; known: solve, ids, converge, percolation, ssf-check, ergodic, magnetic, pastur-shubin"
            ))),
        },
        Command::Run { config, out } => std::fs::read_to_string(&config)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", config.display())))
            .and_then(|text| run_to_dir(&text, &out))
            .map(|outputs| {
                for o in outputs {
                    println!("{}", out.join(o.name).display());
                }
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
