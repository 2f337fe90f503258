//! Thin command-line front end over the `floodda` library.
//!
//! Subcommands map one-to-one onto library entry points: `osse` and
//! `assimilate` run the configured experiment set via
//! [`floodda::experiment::run_experiments`], `synth` emits only the truth
//! run and synthetic observations, and `score` recomputes the score table
//! from previously written outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use floodda::config::parse_config;
use floodda::error::Result;
use floodda::experiment::{rescore_outputs, run_experiments, synthesize};
use floodda::io;

#[derive(Parser)]
#[command(name = "floodda", version, about = "Ensemble flood reanalysis toolkit")]
struct Cli {
    /// Path to the experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Replace the config's master seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Worker threads for the ensemble forecast (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full twin experiment: truth, synthetic observations,
    /// the configured experiment set and revisit sweeps, scoring, outputs.
    Osse,
    /// Run the experiment set against observation files listed in the config.
    Assimilate,
    /// Recompute the score table from outputs already in --out.
    Score,
    /// Generate only the truth run and synthetic observations.
    Synth,
}

fn run(cli: &Cli) -> Result<bool> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| floodda::Error::Config("--config is required".into()))?;
    let mut cfg = parse_config(config_path)?;
    if let Some(s) = cli.seed_override {
        cfg.enkf.seed = Some(s);
        cfg.validate()?;
    }

    match cli.command {
        Command::Osse | Command::Assimilate => {
            let want = if matches!(cli.command, Command::Osse) {
                "osse"
            } else {
                "assimilate"
            };
            if cfg.mode != want {
                return Err(floodda::Error::Config(format!(
                    "config mode is '{}' but the {want} command was requested",
                    cfg.mode
                )));
            }
            let out = run_experiments(&cfg, &cli.out, cli.seed_override)?;
            print!("{}", out.score_table.to_text());
            for (name, err) in &out.failures {
                eprintln!("experiment {name} failed: {err}");
            }
            Ok(out.failures.is_empty())
        }
        Command::Score => {
            let table = rescore_outputs(&cfg, &cli.out)?;
            print!("{}", table.to_text());
            Ok(true)
        }
        Command::Synth => {
            if cfg.mode != "osse" {
                return Err(floodda::Error::Config(
                    "synth requires an osse-mode config".into(),
                ));
            }
            std::fs::create_dir_all(&cli.out)?;
            let scenario = cfg.build()?;
            let seed = cfg.enkf.seed.expect("validated");
            let (truth, obs, _) = synthesize(&cfg, &scenario, seed)?;
            io::write_trajectory_csv(&cli.out.join("truth_trajectory.csv"), &truth.trajectory)?;
            io::write_gauge_obs_csv(&cli.out.join("obs_gauges.csv"), &obs.gauges)?;
            io::write_node_obs_csv(&cli.out.join("obs_nodes.csv"), &obs.nodes)?;
            println!(
                "wrote truth ({} states), {} gauge obs, {} node obs to {}",
                truth.trajectory.len(),
                obs.gauges.len(),
                obs.nodes.len(),
                cli.out.display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("failed to configure {workers} workers: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
