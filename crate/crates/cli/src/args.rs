//! Command-line syntax.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hfsl_core::gan::NoiseMode;

use crate::manifest::{Algo, OptimizerParams, SweepParam};
use crate::seeds::parse_seeds;

#[derive(Debug, Parser)]
#[command(name = "hfsl", version, about = "Split-learning cost model, optimizers and convergence lab")]
pub struct Cli {
    /// Output directory root.
    #[arg(long, global = true, env = "HFSL_OUT", default_value = "hfsl-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum NoiseModeArg {
    AsWritten,
    Symmetric,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(m: NoiseModeArg) -> Self {
        match m {
            NoiseModeArg::AsWritten => NoiseMode::AsWritten,
            NoiseModeArg::Symmetric => NoiseMode::Symmetric,
        }
    }
}

/// A comma-separated list parsed as one argument.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn seeds(text: &str) -> Result<List<u64>, String> {
    parse_seeds(text).map(List)
}

fn ref_point(text: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected `v1,v2`, got `{text}`"));
    };
    let parse = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    Ok([parse(a)?, parse(b)?])
}

fn values(text: &str) -> Result<List<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad number `{s}`")))
        .collect::<Result<_, _>>()
        .map(List)
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Seeds, e.g. `1,2,5-9`.
    #[arg(long, alias = "seed", value_parser = seeds, default_value = "0")]
    pub seeds: List<u64>,
    /// Generations per run.
    #[arg(long, default_value_t = 5000)]
    pub gens: usize,
    /// Population size (even).
    #[arg(long, default_value_t = 100)]
    pub pop: usize,
    /// Noise that trains the generator after selection.
    #[arg(long, value_enum, default_value = "as-written")]
    pub gan_noise_mode: NoiseModeArg,
}

impl RunArgs {
    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.0.clone()
    }

    pub fn params(&self) -> OptimizerParams {
        OptimizerParams { generations: self.gens, pop_size: self.pop, gan_noise_mode: self.gan_noise_mode.into() }
    }
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Run one optimizer per seed and write its front and trace.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "pred-gan")]
        algo: Algo,
        /// Hypervolume reference point `v1,v2` (seconds, joules).
        #[arg(long, value_parser = ref_point, default_value = "36000,10000")]
        ref_point: [f64; 2],
        /// Also save the trained networks.
        #[arg(long)]
        checkpoint: bool,
    },
    /// Run both optimizers on every seed and tabulate hypervolumes.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Reference point `v1,v2`; omitted means 10% beyond every front found.
        #[arg(long, value_parser = ref_point)]
        ref_point: Option<[f64; 2]>,
    },
    /// Re-optimize with one system budget set to each listed value.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "pred-gan")]
        algo: Algo,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values in Hz.
        #[arg(long, value_parser = values)]
        values: List<f64>,
        #[arg(long, value_parser = ref_point, default_value = "36000,10000")]
        ref_point: [f64; 2],
    },
    /// Delayed versus plain local updates on random quadratic tasks.
    Convergence {
        /// JSON file with optional `task` and `lab` objects.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, alias = "seed", value_parser = seeds, default_value = "0")]
        seeds: List<u64>,
        /// Learning rate in units of 1/L.
        #[arg(long)]
        eta_scale: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Local iterations per round.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Rerun a manifest and check every output against its recorded hash.
    Replay { manifest: PathBuf },
}
