//! `nf-array-opt`: batch CRB sweeps and Monte-Carlo validation for
//! movable near-field arrays.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nf_array::bench::{self, RunConfig};
use nf_array::Error;

#[derive(Parser)]
#[command(
    name = "nf-array-opt",
    version,
    about = "Near-field movable-array CRB sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write CSV tables.
    Run {
        /// Flat JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Restrict the run to one case.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        case: Option<u8>,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte-Carlo trials per cell (overrides `trials` and `joint_trials`).
        #[arg(long)]
        trials: Option<usize>,
        /// Monte-Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(
    config: PathBuf,
    case: Option<u8>,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Error> {
    bench::configure_threads_from_env()?;
    let mut cfg: RunConfig = bench::load_config(&config)?;
    if let Some(c) = case {
        cfg.cases = vec![c];
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(t) = trials {
        cfg.trials = t;
        cfg.joint_trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;

    let output = bench::run_case_sweep(&cfg)?;
    let reductions = bench::write_outputs(&cfg, &output, &cfg.out_dir)?;
    for arr in output
        .arrays
        .iter()
        .filter(|a| a.case == 3 && a.trace.is_some())
    {
        let positions: Vec<String> = arr.apv.iter().map(|x| format!("{x:.4}")).collect();
        println!(
            "case 3 {} positions: [{}]",
            arr.scheme,
            positions.join(", ")
        );
    }
    if let Some(red) = reductions {
        print!("{}", bench::format_reductions(&red));
    }
    println!(
        "wrote {} records to {}",
        output.records.len(),
        cfg.out_dir.join("sweep.csv").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            case,
            out,
            trials,
            seed,
        } => run(config, case, out, trials, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            match e {
                Error::Io(_) => ExitCode::from(3),
                Error::ConfigParse { .. } | Error::ConfigValidation { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
