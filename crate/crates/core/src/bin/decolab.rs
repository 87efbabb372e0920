use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decolab::cli::{self, CliError, FigureId, FigureOptions, RunOptions, ScanKind};

#[derive(Parser)]
#[command(name = "decolab", version, about = "Engineered decoherence simulator")]
struct Args {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its time series.
    Run {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Write the curves of one figure (fig2a … fig6b) into a directory.
    Figure {
        id: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        realizations: usize,
        /// Seconds; 1.0 for zz figures and 0.5 for xx figures if unset.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// gamma-scan, integer-check or strategy-compare over a config file.
    Scan {
        kind: String,
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("decolab: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("decolab: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { scenario, output, seed, realizations } => {
            let summary = cli::run(&scenario, &output, RunOptions { seed, realizations })?;
            println!("{summary}");
        }
        Command::Figure { id, output, seed, realizations, horizon } => {
            let id: FigureId = id.parse()?;
            let opts = FigureOptions { seed, realizations, horizon };
            for path in cli::reproduce_figure(id, &output, &opts)? {
                println!("{}", path.display());
            }
        }
        Command::Scan { kind, config, output } => {
            let kind: ScanKind = kind.parse()?;
            let csv = cli::scan(kind, &config, &output)?;
            for line in csv.lines().filter(|l| !l.starts_with('#')) {
                println!("{line}");
            }
        }
    }
    Ok(())
}
