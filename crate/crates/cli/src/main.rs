//! `cqbm`: scenario runner for collisional quantum Brownian motion.
//!
//! ```text
//! cqbm <scenario> <config.toml> [--seed N] [--out-dir DIR]
//! ```
//!
//! Exit status: 0 on success, 2 on configuration or validation errors, 3 when
//! a numerical tolerance is missed (artifacts are still written).

mod config;
mod error;
mod output;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::load;
use error::CliError;
use output::{emit, Artifacts};

#[derive(Debug, Parser)]
#[command(name = "cqbm", version, about = "Collisional quantum Brownian motion scenarios")]
struct Cli {
    #[command(subcommand)]
    scenario: Scenario,
}

#[derive(Debug, Subcommand)]
enum Scenario {
    /// Exact two-body collision: position and momentum marginals.
    Collide(RunArgs),
    /// The reference collision (x = 10, p = −2, m = 1, α = 0.3, ħ = 1, σ = 4).
    Fig1(RunArgs),
    /// Grid oracle against the closed form under refinement.
    OracleVerify(RunArgs),
    /// Collision channel applied to a coherent state.
    ChannelVerify(RunArgs),
    /// Monte Carlo ensemble of Gaussian trajectories.
    Trajectories(RunArgs),
    /// Moment equations, optionally checked against Monte Carlo.
    Moments(RunArgs),
    /// Artifact position diffusion against the coarse-graining time.
    DeltaScan(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir` of the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn out_dir(args: &RunArgs, output: &Option<config::Output>) -> PathBuf {
    args.out_dir.clone().or_else(|| output.as_ref().map(|o| o.dir.clone())).unwrap_or_else(|| PathBuf::from("out"))
}

fn finish<C: Serialize>(
    dir: &Path,
    name: &str,
    seed: Option<u64>,
    config: &C,
    artifacts: Artifacts,
) -> Result<bool, CliError> {
    emit(dir, name, seed, config, &artifacts)?;
    for c in artifacts.checks.iter().filter(|c| !c.pass) {
        eprintln!("tolerance missed: {} achieved {:e}, requested {:e}", c.name, c.achieved, c.requested);
    }
    Ok(artifacts.passed())
}

fn dispatch(scenario: &Scenario) -> Result<bool, CliError> {
    match scenario {
        Scenario::Collide(a) => {
            let c: config::CollideConfig = load(&a.config)?;
            let art = scenarios::collide(&c)?;
            finish(&out_dir(a, &c.output), "collide", None, &c, art)
        }
        Scenario::Fig1(a) => {
            let c = load::<config::Fig1Config>(&a.config)?.resolve();
            let art = scenarios::collide(&c)?;
            finish(&out_dir(a, &c.output), "fig1", None, &c, art)
        }
        Scenario::OracleVerify(a) => {
            let c: config::OracleConfig = load(&a.config)?;
            let art = scenarios::oracle_verify(&c)?;
            finish(&out_dir(a, &c.output), "oracle-verify", None, &c, art)
        }
        Scenario::ChannelVerify(a) => {
            let c: config::ChannelConfig = load(&a.config)?;
            let art = scenarios::channel_verify(&c)?;
            finish(&out_dir(a, &c.output), "channel-verify", None, &c, art)
        }
        Scenario::Trajectories(a) => {
            let mut c: config::TrajectoriesConfig = load(&a.config)?;
            c.seed = a.seed.unwrap_or(c.seed);
            let art = scenarios::trajectories(&c, c.seed)?;
            finish(&out_dir(a, &c.output), "trajectories", Some(c.seed), &c, art)
        }
        Scenario::Moments(a) => {
            let mut c: config::MomentsConfig = load(&a.config)?;
            c.seed = a.seed.unwrap_or(c.seed);
            let art = scenarios::moments(&c, c.seed)?;
            let seed = c.compare.map(|_| c.seed);
            finish(&out_dir(a, &c.output), "moments", seed, &c, art)
        }
        Scenario::DeltaScan(a) => {
            let mut c: config::DeltaScanConfig = load(&a.config)?;
            c.seed = a.seed.unwrap_or(c.seed);
            let art = scenarios::delta_scan(&c, c.seed)?;
            finish(&out_dir(a, &c.output), "delta-scan", Some(c.seed), &c, art)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.scenario) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
