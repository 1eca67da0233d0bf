//! `irlobs`: run inverse reinforcement learning experiments and inspect the
//! demonstrator's Riccati solution.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use irlobs::experiment::{load_config, run_experiment, write_report, ExperimentConfig, Mode};
use irlobs::numerics::are_residual;
use irlobs::plant::make_demonstrator;

#[derive(Parser)]
#[command(name = "irlobs", version, about = "Output-feedback inverse reinforcement learning for linear agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV series plus summary.json.
    Run {
        /// Configuration file (TOML, or JSON with a .json extension).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report every sample instead of every report interval.
        #[arg(long)]
        full_rate: bool,
    },
    /// Print the Riccati solution, gain and closed-loop eigenvalues.
    Are {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: irlobs::Error| e.to_string())
}

fn run(config: PathBuf, out: PathBuf, mode: Option<Mode>, seed: Option<u64>, full_rate: bool) -> Result<()> {
    let mut cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(m) = mode {
        cfg.run.mode = m;
    }
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if full_rate {
        cfg.run.report_interval = cfg.run.dt;
    }
    let report = run_experiment(&cfg)?;
    let summary = write_report(&report, &out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "steps {}  purges {}  queries {}  final |W~|/|W| {:.3e}  wall {:.1} s",
        summary.steps, summary.purges, summary.queries, summary.final_w_rel_error, summary.wall_clock_s
    );
    println!("wrote {}", out.display());
    if let Some(f) = &report.failure {
        bail!("run stopped early: {f}");
    }
    Ok(())
}

fn are(config: PathBuf) -> Result<()> {
    let cfg: ExperimentConfig = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
    let plant = cfg.build_plant()?;
    let cost = cfg.build_cost(&plant)?;
    let demo = make_demonstrator(plant.clone(), cost.clone())?;
    let residual = are_residual(plant.a_prime(), plant.b_prime(), &cost.q_matrix(), &cost.r_matrix(), demo.riccati_p());
    println!("Riccati solution P:{}", demo.riccati_p());
    println!("gain K (u = -K x):{}", demo.gain());
    println!("residual (Frobenius): {residual:.3e}");
    println!("closed-loop eigenvalues:");
    for e in demo.closed_loop().complex_eigenvalues().iter() {
        println!("  {:+.6} {:+.6}i", e.re, e.im);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, mode, seed, full_rate } => run(config, out, mode, seed, full_rate),
        Command::Are { config } => are(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
