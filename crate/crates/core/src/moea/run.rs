//! Optimizer outputs shared by both algorithms, and their CSV layouts.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cost::ObjectiveValue;
use crate::error::{Error, Result};

use super::hypervolume::ParetoFront;
use super::problem::Individual;

/// Independent random streams derived from one run seed. Keeping the
/// genetic stream separate means a run that never takes the generator
/// branch replays the plain NSGA-III trajectory draw for draw.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Init = 0,
    Genetic = 1,
    Branch = 2,
    Noise = 3,
    Weights = 4,
    Compared = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// How a generation's offspring were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Initial,
    Genetic,
    Generator,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Initial => "initial",
            Branch::Genetic => "genetic",
            Branch::Generator => "generator",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Hypervolume of the parent population's nondominated set.
    pub hypervolume: f64,
    pub front_size: usize,
    /// Dominance pairs mined this generation (generator runs only).
    pub pairs: Option<usize>,
    pub loss_d: Option<f64>,
    pub loss_g: Option<f64>,
    pub branch: Branch,
}

/// Final population and per-generation trace of one optimizer run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub population: Vec<Individual>,
    pub trace: Vec<GenerationRecord>,
}

impl RunOutput {
    pub fn objectives(&self) -> Vec<ObjectiveValue> {
        self.population.iter().map(|i| i.objective).collect()
    }

    /// Nondominated members of the final population sorted by time, one per
    /// distinct objective point.
    pub fn front(&self) -> Vec<&Individual> {
        let front = ParetoFront::from_points(&self.objectives());
        front.indices().map(|i| &self.population[i]).collect()
    }

    pub fn final_hypervolume(&self, reference: ObjectiveValue) -> f64 {
        ParetoFront::from_points(&self.objectives()).hypervolume(reference)
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn flush<W: Write>(wtr: &mut csv::Writer<W>) -> Result<()> {
    wtr.flush().map_err(|source| Error::Io { path: "<csv>".into(), source })
}

/// Front file: `v1_seconds,v2_joules` then `s_k,h_k,fe_k,b_k` per worker.
pub fn write_front_csv<W: Write>(out: W, front: &[&Individual]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let k = front.first().map_or(0, |i| i.plan.workers.len());
    let mut header = vec!["v1_seconds".to_string(), "v2_joules".to_string()];
    for w in 1..=k {
        header.extend([format!("s_{w}"), format!("h_{w}"), format!("fe_{w}"), format!("b_{w}")]);
    }
    wtr.write_record(&header)?;
    for ind in front {
        let mut row = vec![num(ind.objective.v1), num(ind.objective.v2)];
        for w in &ind.plan.workers {
            row.extend([w.split.to_string(), w.merge.to_string(), num(w.server_freq_hz), num(w.bandwidth_hz)]);
        }
        wtr.write_record(&row)?;
    }
    flush(&mut wtr)
}

pub const TRACE_COLUMNS: [&str; 7] = ["generation", "hypervolume", "front_size", "pairs", "loss_d", "loss_g", "branch"];

pub fn write_trace_csv<W: Write>(out: W, trace: &[GenerationRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(TRACE_COLUMNS)?;
    for r in trace {
        wtr.write_record([
            r.generation.to_string(),
            num(r.hypervolume),
            r.front_size.to_string(),
            r.pairs.map(|p| p.to_string()).unwrap_or_default(),
            r.loss_d.map(num).unwrap_or_default(),
            r.loss_g.map(num).unwrap_or_default(),
            r.branch.as_str().to_string(),
        ])?;
    }
    flush(&mut wtr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = stream_rng(7, Stream::Genetic).random();
        let b: u64 = stream_rng(7, Stream::Genetic).random();
        let c: u64 = stream_rng(7, Stream::Branch).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn trace_csv_layout() {
        let trace = vec![GenerationRecord {
            generation: 3,
            hypervolume: 1.5,
            front_size: 4,
            pairs: None,
            loss_d: Some(0.25),
            loss_g: None,
            branch: Branch::Genetic,
        }];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "generation,hypervolume,front_size,pairs,loss_d,loss_g,branch\n3,1.5e0,4,,2.5e-1,,genetic\n");
    }
}
