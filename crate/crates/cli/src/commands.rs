//! Subcommand bodies. Each takes a fully resolved [`Command`], writes its
//! files into the output directory and returns the manifests it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use hfsl_core::convergence::{rate_match, run_lab, write_report_csv, LabConfig, LabRun, SyntheticTask, TaskSpec};
use hfsl_core::moea::STANDARD_REFERENCE;
use hfsl_core::ObjectiveValue;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::manifest::{write_output, Algo, Command, Manifest, OptimizerParams, OutputFile, ScenarioSource, SweepParam};
use crate::runner::{self, csv_bytes, write_run_files, SeedRun};

/// Largest relative difference of decay rates accepted as a match.
pub const RATE_TOLERANCE: f64 = 0.10;

fn point(r: [f64; 2]) -> ObjectiveValue {
    ObjectiveValue::new(r[0], r[1])
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Core(e.into())
}

/// Writes rows through a csv writer into memory.
fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wtr.write_record(&r).map_err(csv_err)?;
    }
    wtr.into_inner().map_err(|e| CliError::Io("<csv>".into(), e.into_error()))
}

fn need_scenario(scenario: Option<&ScenarioSource>) -> CliResult<&ScenarioSource> {
    scenario.ok_or_else(|| CliError::Usage("this command needs --scenario".into()))
}

fn check_seeds(seeds: &[u64]) -> CliResult<()> {
    if seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    Ok(())
}

fn check_params(p: &OptimizerParams) -> CliResult<()> {
    if p.pop_size < 2 || p.pop_size % 2 != 0 {
        return Err(CliError::Usage(format!("population size {} must be even and at least 2", p.pop_size)));
    }
    Ok(())
}

fn check_reference(r: [f64; 2]) -> CliResult<()> {
    if !r.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(CliError::Usage(format!("reference point {r:?} must be positive")));
    }
    Ok(())
}

fn ensure_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

/// Runs `command` and writes everything under `out`.
pub fn execute(command: &Command, scenario: Option<&ScenarioSource>, out: &Path) -> CliResult<Vec<Manifest>> {
    match command {
        Command::Optimize { algo, seeds, params, reference, checkpoint } => {
            optimize(need_scenario(scenario)?, *algo, seeds, params, *reference, *checkpoint, out)
        }
        Command::Compare { seeds, params, reference } => {
            compare(need_scenario(scenario)?, seeds, params, *reference, out).map(|(m, _)| vec![m])
        }
        Command::Sweep { algo, parameter, values, seeds, params, reference } => {
            sweep(need_scenario(scenario)?, *algo, *parameter, values, seeds, params, *reference, out).map(|m| vec![m])
        }
        Command::Convergence { seeds, task, lab } => convergence(seeds, task, lab, out).map(|(m, _)| vec![m]),
    }
}

fn optimize(
    src: &ScenarioSource,
    algo: Algo,
    seeds: &[u64],
    params: &OptimizerParams,
    reference: [f64; 2],
    checkpoint: bool,
    out: &Path,
) -> CliResult<Vec<Manifest>> {
    ensure_dir(out)?;
    check_seeds(seeds)?;
    check_params(params)?;
    check_reference(reference)?;
    let jobs: Vec<(Algo, u64)> = seeds.iter().map(|&s| (algo, s)).collect();
    let runs = runner::run_all(&src.scenario, &jobs, params, point(reference))?;
    runs.into_par_iter()
        .map(|run| {
            let stem = format!("{}-seed{}", algo.id(), run.seed);
            let command = Command::Optimize { algo, seeds: vec![run.seed], params: params.clone(), reference, checkpoint };
            let mut m = Manifest::new(command, Some(src), out);
            m.outputs = write_run_files(out, &stem, &run, checkpoint)?;
            m.write(out, &stem)?;
            Ok(m)
        })
        .collect()
}

pub const RUNS_COLUMNS: [&str; 5] = ["algo", "seed", "final_hypervolume", "front_size", "dominates_baseline"];
pub const SUMMARY_COLUMNS: [&str; 8] = [
    "algo",
    "seeds",
    "median_final_hypervolume",
    "baseline_dominated_seeds",
    "reference_v1",
    "reference_v2",
    "baseline_v1",
    "baseline_v2",
];
pub const LONG_TRACE_COLUMNS: [&str; 5] = ["algo", "seed", "generation", "hypervolume", "front_size"];

/// Compares both optimizers; returns the manifest and the in-memory report.
pub fn compare(
    src: &ScenarioSource,
    seeds: &[u64],
    params: &OptimizerParams,
    reference: Option<[f64; 2]>,
    out: &Path,
) -> CliResult<(Manifest, runner::CompareReport)> {
    ensure_dir(out)?;
    check_seeds(seeds)?;
    check_params(params)?;
    if let Some(r) = reference {
        check_reference(r)?;
    }
    let report = runner::compare(&src.scenario, seeds, params, reference.map(point))?;
    let mut files: Vec<OutputFile> = Vec::new();
    for run in &report.runs {
        files.extend(write_run_files(out, &format!("compare.{}.seed{}", run.algo.id(), run.seed), run, false)?);
    }
    let runs = table(
        &RUNS_COLUMNS,
        report.rows.iter().map(|r| {
            vec![
                r.algo.id().into(),
                r.seed.to_string(),
                num(r.final_hypervolume),
                r.front_size.to_string(),
                r.dominates_baseline.to_string(),
            ]
        }),
    )?;
    files.push(write_output(out, "compare.runs.csv", &runs)?);
    let summary = table(
        &SUMMARY_COLUMNS,
        runner::ALGOS.iter().map(|&a| {
            vec![
                a.id().into(),
                seeds.len().to_string(),
                num(report.median_hypervolume(a)),
                report.baseline_dominated_count(a).to_string(),
                num(report.reference.v1),
                num(report.reference.v2),
                num(report.baseline.v1),
                num(report.baseline.v2),
            ]
        }),
    )?;
    files.push(write_output(out, "compare.summary.csv", &summary)?);
    let long = table(
        &LONG_TRACE_COLUMNS,
        report.runs.iter().flat_map(|run: &SeedRun| {
            run.output.trace.iter().map(move |rec| {
                vec![
                    run.algo.id().into(),
                    run.seed.to_string(),
                    rec.generation.to_string(),
                    num(rec.hypervolume),
                    rec.front_size.to_string(),
                ]
            })
        }),
    )?;
    files.push(write_output(out, "compare.traces.csv", &long)?);

    let command = Command::Compare { seeds: seeds.to_vec(), params: params.clone(), reference };
    let mut m = Manifest::new(command, Some(src), out);
    m.outputs = files;
    m.write(out, "compare")?;
    Ok((m, report))
}

pub const OFFLOAD_COLUMNS: [&str; 8] = [
    "parameter",
    "value",
    "algo",
    "seed",
    "front_size",
    "mean_offloaded_layers",
    "mean_offloaded_flops",
    "final_hypervolume",
];

#[allow(clippy::too_many_arguments)]
fn sweep(
    src: &ScenarioSource,
    algo: Algo,
    parameter: SweepParam,
    values: &[f64],
    seeds: &[u64],
    params: &OptimizerParams,
    reference: [f64; 2],
    out: &Path,
) -> CliResult<Manifest> {
    ensure_dir(out)?;
    check_seeds(seeds)?;
    check_params(params)?;
    check_reference(reference)?;
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CliError::Usage("sweep values must be positive and nonempty".into()));
    }
    let scenarios = values
        .iter()
        .map(|&v| runner::with_parameter(&src.scenario, parameter, v))
        .collect::<CliResult<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..values.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, s)| runner::run_seed(&scenarios[i], algo, params, point(reference), s))
        .collect::<hfsl_core::Result<Vec<_>>>()?;

    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (&(i, _), run) in jobs.iter().zip(&runs) {
        files.extend(write_run_files(out, &format!("sweep.v{i}.seed{}", run.seed), run, false)?);
        let (layers, flops) = runner::offload_stats(&scenarios[i], run);
        rows.push(vec![
            parameter.id().into(),
            num(values[i]),
            algo.id().into(),
            run.seed.to_string(),
            run.output.front().len().to_string(),
            num(layers),
            num(flops),
            num(run.output.final_hypervolume(point(reference))),
        ]);
    }
    files.push(write_output(out, "sweep.offload.csv", &table(&OFFLOAD_COLUMNS, rows)?)?);
    let command = Command::Sweep {
        algo,
        parameter,
        values: values.to_vec(),
        seeds: seeds.to_vec(),
        params: params.clone(),
        reference,
    };
    let mut m = Manifest::new(command, Some(src), out);
    m.outputs = files;
    m.write(out, "sweep")?;
    Ok(m)
}

/// Lab results of one seed.
#[derive(Clone, Debug)]
pub struct SeedLab {
    pub seed: u64,
    pub plain: LabRun,
    pub delayed: LabRun,
    /// `(plain slope, delayed slope, relative difference)`, absent when the
    /// runs are too short to fit.
    pub rates: Option<(f64, f64, f64)>,
}

impl SeedLab {
    pub fn lemma_holds(&self) -> bool {
        self.plain.lemma.holds() && self.delayed.lemma.holds()
    }

    pub fn bound_holds(&self) -> bool {
        self.plain.bound_violations().is_empty() && self.delayed.bound_violations().is_empty()
    }

    /// `None` when there is nothing to compare.
    pub fn rates_match(&self) -> Option<bool> {
        self.rates.map(|(_, _, rel)| rel <= RATE_TOLERANCE)
    }

    pub fn passes(&self) -> bool {
        self.lemma_holds() && self.bound_holds() && self.rates_match() != Some(false)
    }
}

pub fn lab_seed(task: &TaskSpec, lab: &LabConfig, seed: u64) -> CliResult<SeedLab> {
    let t = SyntheticTask::random(task, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let plain = run_lab(&t, lab, false, seed)?;
    let delayed = run_lab(&t, lab, true, seed)?;
    let rates = rate_match(&plain.trajectory.gaps, &delayed.trajectory.gaps);
    Ok(SeedLab { seed, plain, delayed, rates })
}

pub const CONVERGENCE_SUMMARY_COLUMNS: [&str; 9] = [
    "seed",
    "lemma_holds",
    "worst_lemma_slack",
    "bound_holds",
    "slope_plain",
    "slope_delayed",
    "rate_relative_difference",
    "rates_match",
    "final_gap_delayed",
];

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Runs the lab on every seed. Files are written before any property
/// failure is reported.
pub fn convergence(seeds: &[u64], task: &TaskSpec, lab: &LabConfig, out: &Path) -> CliResult<(Manifest, Vec<SeedLab>)> {
    ensure_dir(out)?;
    check_seeds(seeds)?;
    if !(lab.eta_scale > 0.0 && lab.eta_scale <= 1.0) {
        return Err(CliError::Usage(format!(
            "learning rate {}/L is outside (0, 1/L]; the convergence bound only covers eta <= 1/L",
            lab.eta_scale
        )));
    }
    if lab.iterations == 0 {
        return Err(CliError::Usage("iterations must be at least 1".into()));
    }
    let labs = seeds.par_iter().map(|&s| lab_seed(task, lab, s)).collect::<CliResult<Vec<_>>>()?;

    let mut files = Vec::new();
    for l in &labs {
        for (name, run) in [("plain", &l.plain), ("delayed", &l.delayed)] {
            let bytes = csv_bytes(|b| write_report_csv(b, run))?;
            files.push(write_output(out, &format!("convergence.seed{}.{name}.csv", l.seed), &bytes)?);
        }
    }
    let rows = labs.iter().map(|l| {
        let worst = l.plain.lemma.worst_slack.min(l.delayed.lemma.worst_slack);
        vec![
            l.seed.to_string(),
            l.lemma_holds().to_string(),
            if worst.is_finite() { num(worst) } else { String::new() },
            l.bound_holds().to_string(),
            opt(l.rates.map(|r| r.0)),
            opt(l.rates.map(|r| r.1)),
            opt(l.rates.map(|r| r.2)),
            l.rates_match().map(|b| b.to_string()).unwrap_or_default(),
            num(*l.delayed.trajectory.gaps.last().expect("round 0 gap")),
        ]
    });
    files.push(write_output(out, "convergence.summary.csv", &table(&CONVERGENCE_SUMMARY_COLUMNS, rows)?)?);

    let command = Command::Convergence { seeds: seeds.to_vec(), task: task.clone(), lab: lab.clone() };
    let mut m = Manifest::new(command, None, out);
    m.outputs = files;
    m.write(out, "convergence")?;
    Ok((m, labs))
}

/// One line per property per seed.
pub fn convergence_lines(labs: &[SeedLab]) -> Vec<String> {
    let mut lines = Vec::new();
    for l in labs {
        lines.push(format!("seed {}: lemma deviation bounds {}", l.seed, verdict(l.lemma_holds())));
        lines.push(format!("seed {}: gap below convergence bound {}", l.seed, verdict(l.bound_holds())));
        match l.rates {
            Some((sp, sd, rel)) => lines.push(format!(
                "seed {}: decay rates plain {sp:.5} delayed {sd:.5} differ by {:.2}% {}",
                l.seed,
                100.0 * rel,
                verdict(rel <= RATE_TOLERANCE)
            )),
            None => lines.push(format!("seed {}: decay rates not enough rounds to fit, skipped", l.seed)),
        }
    }
    lines
}

/// Reruns the command recorded in a manifest into `out` and checks every
/// output against the recorded hash.
pub fn replay(manifest_path: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let recorded = Manifest::read(manifest_path)?;
    let scenario = match &recorded.scenario_path {
        Some(p) => {
            let src = ScenarioSource::load(Path::new(p))?;
            if Some(&src.sha256) != recorded.scenario_sha256.as_ref() {
                return Err(CliError::Usage(format!("scenario {p} changed since the manifest was written")));
            }
            Some(src)
        }
        None => None,
    };
    let produced = execute(&recorded.command, scenario.as_ref(), out)?;
    let mut mismatched = Vec::new();
    let mut checked = Vec::new();
    for want in &recorded.outputs {
        let got = produced.iter().flat_map(|m| &m.outputs).find(|o| o.file == want.file);
        match got {
            Some(o) if o.sha256 == want.sha256 => checked.push(out.join(&want.file)),
            _ => mismatched.push(want.file.clone()),
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Property(format!("outputs differ from the manifest: {}", mismatched.join(", "))));
    }
    Ok(checked)
}

/// Default hypervolume reference for commands that need a fixed one.
pub const DEFAULT_REFERENCE: [f64; 2] = [STANDARD_REFERENCE.v1, STANDARD_REFERENCE.v2];
