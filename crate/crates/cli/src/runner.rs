//! Optimizer runs behind `optimize`, `compare` and `sweep`.

use std::path::Path;

use hfsl_core::cost::{evaluate, SplitPlan};
use hfsl_core::gan::{run_pred_gan, Checkpoint, PredGanConfig};
use hfsl_core::moea::{run_nsga3, weakly_dominates, write_front_csv, write_trace_csv, Nsga3Config, ParetoFront};
use hfsl_core::{sample_channels, ObjectiveValue, Problem, RunOutput, Scenario};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::manifest::{write_output, Algo, OptimizerParams, OutputFile, SweepParam};

/// One optimizer run on one seed.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub algo: Algo,
    pub seed: u64,
    pub output: RunOutput,
    pub checkpoint: Option<Checkpoint>,
}

impl SeedRun {
    pub fn front_points(&self) -> Vec<ObjectiveValue> {
        self.output.front().iter().map(|i| i.objective).collect()
    }
}

/// Runs `algo` on `scenario` with the scenario's own channel realization.
pub fn run_seed(
    scenario: &Scenario,
    algo: Algo,
    params: &OptimizerParams,
    reference: ObjectiveValue,
    seed: u64,
) -> hfsl_core::Result<SeedRun> {
    let draws = sample_channels(scenario, scenario.system.rng_seed);
    let problem = Problem::new(scenario, &draws);
    let (output, checkpoint) = match algo {
        Algo::Nsga3 => {
            let cfg = Nsga3Config { pop_size: params.pop_size, generations: params.generations, reference, ..Default::default() };
            (run_nsga3(&problem, &cfg, seed)?, None)
        }
        Algo::PredGan => {
            let cfg = PredGanConfig {
                pop_size: params.pop_size,
                generations: params.generations,
                noise_mode: params.gan_noise_mode,
                reference,
                ..Default::default()
            };
            let run = run_pred_gan(&problem, &cfg, seed)?;
            (run.output, Some(Checkpoint::new(run.discriminator, run.generator)))
        }
    };
    Ok(SeedRun { algo, seed, output, checkpoint })
}

/// Runs every `(algo, seed)` combination concurrently, results in input order.
pub fn run_all(
    scenario: &Scenario,
    jobs: &[(Algo, u64)],
    params: &OptimizerParams,
    reference: ObjectiveValue,
) -> hfsl_core::Result<Vec<SeedRun>> {
    jobs.par_iter().map(|&(algo, seed)| run_seed(scenario, algo, params, reference, seed)).collect()
}

pub fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> hfsl_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes `<prefix>.front.csv`, `<prefix>.trace.csv` and, when requested and
/// available, `<prefix>.checkpoint.json`.
pub fn write_run_files(dir: &Path, prefix: &str, run: &SeedRun, checkpoint: bool) -> CliResult<Vec<OutputFile>> {
    let front = run.output.front();
    let mut files = vec![
        write_output(dir, &format!("{prefix}.front.csv"), &csv_bytes(|b| write_front_csv(b, &front))?)?,
        write_output(dir, &format!("{prefix}.trace.csv"), &csv_bytes(|b| write_trace_csv(b, &run.output.trace))?)?,
    ];
    if checkpoint {
        if let Some(c) = &run.checkpoint {
            files.push(write_output(dir, &format!("{prefix}.checkpoint.json"), &csv_bytes(|b| c.write(b))?)?);
        }
    }
    Ok(files)
}

/// Objective point of plain federated learning: nobody splits and the
/// bandwidth is shared equally.
pub fn fl_baseline(scenario: &Scenario) -> hfsl_core::Result<ObjectiveValue> {
    let draws = sample_channels(scenario, scenario.system.rng_seed);
    evaluate(&SplitPlan::no_split(scenario), scenario, &draws)
}

/// Reference point 10% beyond the worst coordinate of any front.
pub fn covering_reference<'a>(fronts: impl IntoIterator<Item = &'a [ObjectiveValue]>) -> ObjectiveValue {
    let mut worst = ObjectiveValue { v1: 0.0, v2: 0.0 };
    for p in fronts.into_iter().flatten() {
        worst.v1 = worst.v1.max(p.v1);
        worst.v2 = worst.v2.max(p.v2);
    }
    ObjectiveValue { v1: 1.1 * worst.v1, v2: 1.1 * worst.v2 }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub algo: Algo,
    pub seed: u64,
    pub final_hypervolume: f64,
    pub front_size: usize,
    /// Some front point is no worse than the FL baseline in both objectives.
    pub dominates_baseline: bool,
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub reference: ObjectiveValue,
    pub baseline: ObjectiveValue,
    pub rows: Vec<CompareRow>,
    pub runs: Vec<SeedRun>,
}

impl CompareReport {
    pub fn median_hypervolume(&self, algo: Algo) -> f64 {
        let hv: Vec<f64> = self.rows.iter().filter(|r| r.algo == algo).map(|r| r.final_hypervolume).collect();
        median(&hv)
    }

    pub fn baseline_dominated_count(&self, algo: Algo) -> usize {
        self.rows.iter().filter(|r| r.algo == algo && r.dominates_baseline).count()
    }
}

pub const ALGOS: [Algo; 2] = [Algo::PredGan, Algo::Nsga3];

/// Runs both optimizers on every seed. With no `reference`, the final
/// hypervolumes use a point covering every front found.
pub fn compare(
    scenario: &Scenario,
    seeds: &[u64],
    params: &OptimizerParams,
    reference: Option<ObjectiveValue>,
) -> hfsl_core::Result<CompareReport> {
    let jobs: Vec<(Algo, u64)> = ALGOS.iter().flat_map(|&a| seeds.iter().map(move |&s| (a, s))).collect();
    let trace_ref = reference.unwrap_or(hfsl_core::moea::STANDARD_REFERENCE);
    let runs = run_all(scenario, &jobs, params, trace_ref)?;
    let fronts: Vec<Vec<ObjectiveValue>> = runs.iter().map(SeedRun::front_points).collect();
    let reference = reference.unwrap_or_else(|| covering_reference(fronts.iter().map(Vec::as_slice)));
    let baseline = fl_baseline(scenario)?;
    let rows = runs
        .iter()
        .zip(&fronts)
        .map(|(run, front)| CompareRow {
            algo: run.algo,
            seed: run.seed,
            final_hypervolume: ParetoFront::from_points(front).hypervolume(reference),
            front_size: front.len(),
            dominates_baseline: front.iter().any(|p| weakly_dominates(p, &baseline)),
        })
        .collect();
    Ok(CompareReport { reference, baseline, rows, runs })
}

/// Scenario with one system budget replaced.
pub fn with_parameter(scenario: &Scenario, parameter: SweepParam, value: f64) -> CliResult<Scenario> {
    let mut s = scenario.clone();
    match parameter {
        SweepParam::BMax => s.system.bandwidth_hz = value,
        SweepParam::FeMax => s.system.server_max_freq_hz = value,
    }
    s.validate().map_err(CliError::Scenario)?;
    Ok(s)
}

/// Mean over front plans and workers of the layers and per-datum training
/// FLOPs placed on the server.
pub fn offload_stats(scenario: &Scenario, run: &SeedRun) -> (f64, f64) {
    let front = run.output.front();
    let (mut layers, mut flops, mut n) = (0.0, 0.0, 0usize);
    for ind in &front {
        for w in &ind.plan.workers {
            if w.merge > w.split {
                layers += (w.merge - w.split) as f64;
                flops += scenario.profile.train_flops(w.split + 1, w.merge);
            }
            n += 1;
        }
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (layers / n as f64, flops / n as f64)
    }
}
