use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};

use peerledger::sim::{load_scenario, run, write_outputs, SimError};

#[derive(Parser)]
#[command(
    name = "peerledger",
    version,
    about = "Peer-to-peer retail electricity market simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios. Exit status: 0 converged, 2 not converged, 1 error.
    Run {
        /// Scenario directories or scenario.toml files.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Output directory; with several scenarios each gets a subdirectory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the refine iteration limit.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Also write plot_initial.csv and plot_final.csv.
        #[arg(long)]
        emit_plot_data: bool,
    },
}

enum Status {
    Converged,
    NotConverged,
}

fn run_one(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    max_iter: Option<usize>,
    plots: bool,
) -> Result<Status, SimError> {
    let mut config = load_scenario(scenario)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(m) = max_iter {
        config.strategy.max_iterations = m;
    }
    let report = run(&config)?;
    write_outputs(&report, out, plots)?;
    let s = &report.summary;
    println!(
        "{}: converged={} offer={:.6} battery_end={:.3}% ev_deadline={:.3}% peak_reduction={:.2}% net_earnings={:.4} trades={} -> {}",
        s.scenario,
        s.converged,
        s.final_offer,
        s.battery_end_soc,
        s.ev_deadline_soc,
        s.totals.peak_reduction_pct,
        s.totals.net_earnings,
        s.trades,
        out.display()
    );
    Ok(if s.converged {
        Status::Converged
    } else {
        Status::NotConverged
    })
}

fn main() -> ExitCode {
    let Command::Run {
        scenarios,
        out,
        seed,
        max_iter,
        emit_plot_data,
    } = Cli::parse().command;

    let dirs: Vec<PathBuf> = if scenarios.len() == 1 {
        vec![out.clone()]
    } else {
        scenarios
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let stem = p
                    .file_stem()
                    .filter(|s| *s != "scenario")
                    .or_else(|| p.parent().and_then(Path::file_name))
                    .map_or_else(|| format!("scenario-{i}"), |s| s.to_string_lossy().into_owned());
                out.join(format!("{i:02}-{stem}"))
            })
            .collect()
    };

    let results: Vec<Result<Status, SimError>> = thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .zip(&dirs)
            .map(|(s, d)| scope.spawn(move || run_one(s, d, seed, max_iter, emit_plot_data)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });

    let (mut failed, mut stalled) = (false, false);
    for (scenario, result) in scenarios.iter().zip(results) {
        match result {
            Ok(Status::Converged) => {}
            Ok(Status::NotConverged) => stalled = true,
            Err(e) => {
                eprintln!("{}: {e}", scenario.display());
                failed = true;
            }
        }
    }
    // errors take precedence over non-convergence
    ExitCode::from(if failed {
        1
    } else if stalled {
        2
    } else {
        0
    })
}
