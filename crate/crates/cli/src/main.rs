//! `mfspread`: synthetic series, MFDFA analysis and spread decomposition from
//! the command line.

mod commands;
mod fail;
mod input;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, CalibrateArgs, DecomposeArgs, ReportArgs, SurrogateArgs, SynthArgs};
use fail::{CliError, EXIT_VALIDATION};
use output::{DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "mfspread", version, about = "Multifractal spread analysis and decomposition")]
struct Cli {
    /// Root for every file the run writes.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, default_value = DEFAULT_OUTPUT_DIR)]
    output_dir: PathBuf,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a q-Gaussian series.
    Synth(SynthArgs),
    /// Fourier-filtered, phase-randomized or shuffled comparison series.
    Surrogate(SurrogateArgs),
    /// Fluctuation surface, h(q) and singularity spectrum of a series.
    Analyze(AnalyzeArgs),
    /// Regenerate the fat-tail calibration table by Monte Carlo.
    Calibrate(CalibrateArgs),
    /// Split the spread of h(q) into finite-size, fat-tail and nonlinear parts.
    Decompose(DecomposeArgs),
    /// Render a summary of an existing report.json.
    Report(ReportArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::usage("--threads must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::compute(format!("thread pool: {e}")))?;
    let ctx = commands::Context {
        output_dir: cli.output_dir,
        threads,
    };
    match cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Surrogate(a) => commands::surrogate(&ctx, a),
        Command::Analyze(a) => commands::analyze(&ctx, a),
        Command::Calibrate(a) => commands::calibrate(&ctx, a),
        Command::Decompose(a) => commands::decompose(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
