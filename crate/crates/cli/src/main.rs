use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdent_cli::{
    check_table, markov_cmd, markov_table, paper_check, run_config, run_summary_text, CliError,
    Start, Unit,
};

#[derive(Parser)]
#[command(name = "qdent", version, about = "Dynamical entropy of measured quantum walks")]
struct Cli {
    /// Display entropies in bits; files always hold nats.
    #[arg(long, global = true)]
    bits: bool,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory for the CSV and summary (default: beside the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat excess pruned mass as an error.
        #[arg(long)]
        strict: bool,
    },
    /// Recompute the closed-form entropies on the 5-cycle.
    PaperCheck,
    /// Entropy of powers of the unbiased cycle walk.
    Markov {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        power: usize,
        /// `uniform` or `point:K`.
        #[arg(long, default_value = "uniform")]
        start: Start,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let unit = if cli.bits { Unit::Bits } else { Unit::Nats };

    match dispatch(cli.command, unit) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command, unit: Unit) -> Result<u8, CliError> {
    match command {
        Command::Run {
            config,
            out,
            strict,
        } => {
            let record = run_config(&config, out.as_deref(), strict)?;
            print!("{}", run_summary_text(&record, unit));
            Ok(0)
        }
        Command::PaperCheck => {
            let started = std::time::Instant::now();
            let rows = paper_check()?;
            print!("{}", check_table(&rows, unit));
            println!("total time {:.2} s", started.elapsed().as_secs_f64());
            Ok(if rows.iter().all(|r| r.passed()) { 0 } else { 1 })
        }
        Command::Markov {
            n,
            power,
            start,
            n_max,
            tol,
        } => {
            let report = markov_cmd(n, power, start, n_max, tol)?;
            print!("{}", markov_table(&report, unit));
            Ok(0)
        }
    }
}
