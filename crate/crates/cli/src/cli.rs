//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, Result};
use crate::io::{self, WeightTable};
use crate::run::{self, RunConfig};
use crate::synth::{self, LeaderSpec, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "flock-ioc", version, about = "Recover tracking-cost weights of flock followers from trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a flock whose followers track their leaders optimally.
    Synth(SynthArgs),
    /// Estimate each follower's cost weights, per flight and over all flights.
    Ioc(RunArgs),
    /// Report rank, conditioning and null directions of the estimation problem.
    Diagnose(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Hierarchy file (`leader,follower,delay` lines) or `builtin:table1`.
    #[arg(long, default_value = io::BUILTIN_HIERARCHY)]
    pub hierarchy: String,
    /// Root-leader motion, once per flight: zero, sinusoid[:w], sinusoid-x[:w],
    /// sinusoid-y[:w], sinusoid-z[:w], polyline:t,x,y,z;... or csv:PATH.
    #[arg(long = "leader", default_value = "sinusoid")]
    pub leaders: Vec<LeaderSpec>,
    /// Flight ids, one per leader (default F1, F2, ...).
    #[arg(long, value_delimiter = ',')]
    pub flights: Vec<String>,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.02)]
    pub dt: f64,
    /// JSON object mapping follower ids (or `*`) to 9 weights; all ones if omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Initial offset of each follower from its leader: x,y,z,vx,vy,vz.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub x0_offset: Vec<f64>,
    /// Standard deviation of position noise in meters.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Track CSV (`flight_id,pigeon_id,t,x,y,z` or `...,lat,lon,alt`).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = io::BUILTIN_HIERARCHY)]
    pub hierarchy: String,
    /// Flights to use (default: all in the data).
    #[arg(long, value_delimiter = ',')]
    pub flights: Vec<String>,
    /// One-based index of each known weight.
    #[arg(long, value_delimiter = ',', default_value = "9")]
    pub known_index: Vec<usize>,
    /// Value of each known weight; a single value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "1", allow_hyphen_values = true)]
    pub known_value: Vec<f64>,
    /// Drop the samples where the delayed leader is padded.
    #[arg(long)]
    pub trim_warmup: bool,
    /// Set tiny negative estimates to zero.
    #[arg(long)]
    pub clip: bool,
    /// Odd moving-average window applied to positions (1 = off).
    #[arg(long, default_value_t = 1)]
    pub smooth: usize,
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Resample every track to this period by linear interpolation.
    #[arg(long)]
    pub resample: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write every pair dataset as JSON under `<out>/datasets`.
    #[arg(long)]
    pub emit_datasets: bool,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        if self.emit_datasets && self.out.is_none() {
            return Err(CliError::Usage("--emit-datasets needs --out".into()));
        }
        Ok(RunConfig {
            hierarchy: self.hierarchy.clone(),
            data: self.data.clone(),
            flights: self.flights.clone(),
            known: run::known_from_cli(&self.known_index, &self.known_value)?,
            trim_warmup: self.trim_warmup,
            clip: self.clip,
            smoothing: self.smooth,
            t_start: self.t_start,
            t_end: self.t_end,
            resample: self.resample,
            out: self.out.clone(),
            jobs: self.jobs,
            emit_datasets: self.emit_datasets,
        })
    }
}

impl SynthArgs {
    pub fn to_config(&self) -> Result<SynthConfig> {
        let flights = if self.flights.is_empty() {
            (1..=self.leaders.len()).map(|i| format!("F{i}")).collect()
        } else if self.flights.len() == self.leaders.len() {
            self.flights.clone()
        } else {
            return Err(CliError::Usage(format!(
                "{} flight ids for {} leader specs",
                self.flights.len(),
                self.leaders.len()
            )));
        };
        let x0_offset = match self.x0_offset.len() {
            0 => [0.0; 6],
            6 => {
                let mut o = [0.0; 6];
                o.copy_from_slice(&self.x0_offset);
                o
            }
            n => return Err(CliError::Usage(format!("--x0-offset needs 6 values, got {n}"))),
        };
        let weights = match &self.weights {
            Some(p) => WeightTable::load(p)?,
            None => WeightTable::uniform([1.0; 9]),
        };
        Ok(SynthConfig {
            hierarchy: io::load_hierarchy(&self.hierarchy)?,
            flights: flights.into_iter().zip(self.leaders.iter().cloned()).collect(),
            horizon: self.horizon,
            dt: self.dt,
            weights,
            x0_offset,
            noise: self.noise,
            seed: self.seed,
        })
    }
}

/// Runs one command, printing reports to stdout.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => {
            let (csv, truth) = synth::cmd_synth(&args.to_config()?, &args.out)?;
            println!("wrote {}", csv.display());
            println!("wrote {}", truth.display());
            Ok(())
        }
        Command::Ioc(args) => {
            let outcome = run::cmd_ioc(&args.to_config()?)?;
            print!("{}", outcome.summary());
            finish(outcome.failures.len(), outcome.reports.len() + outcome.failures.len())
        }
        Command::Diagnose(args) => {
            let outcome = run::cmd_diagnose(&args.to_config()?)?;
            print!("{}", outcome.summary());
            finish(outcome.failures.len(), outcome.followers.len() + outcome.failures.len())
        }
    }
}

fn finish(failed: usize, total: usize) -> Result<()> {
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Runs { failed, total })
    }
}
