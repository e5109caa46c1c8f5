//! Experiment runner library behind the `hfsl` binary.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod runner;
pub mod seeds;

use std::fs;
use std::path::Path;

use hfsl_core::convergence::{LabConfig, TaskSpec};
use serde::Deserialize;

use args::{Cli, Sub};
use error::{CliError, CliResult};
use manifest::{Command, ScenarioSource};

/// Contents of a `convergence --spec` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub task: TaskSpec,
    pub lab: LabConfig,
}

fn read_spec(path: &Path) -> CliResult<ConvergenceSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn print_outputs(out: &Path, manifests: &[manifest::Manifest]) {
    for m in manifests {
        for o in &m.outputs {
            println!("{}", out.join(&o.file).display());
        }
    }
}

/// Runs a parsed command line. Output paths go to stdout.
pub fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out.as_path();
    let (command, scenario) = match cli.command {
        Sub::Optimize { run, algo, ref_point, checkpoint } => (
            Command::Optimize { algo, seeds: run.seed_list(), params: run.params(), reference: ref_point, checkpoint },
            Some(run.scenario),
        ),
        Sub::Compare { run, ref_point } => (
            Command::Compare { seeds: run.seed_list(), params: run.params(), reference: ref_point },
            Some(run.scenario),
        ),
        Sub::Sweep { run, algo, param, values, ref_point } => (
            Command::Sweep {
                algo,
                parameter: param,
                values: values.0,
                seeds: run.seed_list(),
                params: run.params(),
                reference: ref_point,
            },
            Some(run.scenario),
        ),
        Sub::Convergence { spec, seeds, eta_scale, rounds, iterations } => {
            let mut spec = match spec {
                Some(p) => read_spec(&p)?,
                None => ConvergenceSpec::default(),
            };
            if let Some(v) = eta_scale {
                spec.lab.eta_scale = v;
            }
            if let Some(v) = rounds {
                spec.lab.rounds = v;
            }
            if let Some(v) = iterations {
                spec.lab.iterations = v;
            }
            let (m, labs) = commands::convergence(&seeds.0, &spec.task, &spec.lab, out)?;
            print_outputs(out, &[m]);
            let lines = commands::convergence_lines(&labs);
            for l in &lines {
                println!("{l}");
            }
            if labs.iter().all(commands::SeedLab::passes) {
                return Ok(());
            }
            return Err(CliError::Property(format!("{} of {} seeds failed", labs.iter().filter(|l| !l.passes()).count(), labs.len())));
        }
        Sub::Replay { manifest } => {
            let files = commands::replay(&manifest, out)?;
            println!("reproduced {} files in {}", files.len(), out.display());
            return Ok(());
        }
    };
    let src = scenario.map(|p| ScenarioSource::load(&p)).transpose()?;
    let manifests = commands::execute(&command, src.as_ref(), out)?;
    print_outputs(out, &manifests);
    Ok(())
}
