//! Plain NSGA-III: SBX + polynomial mutation offspring, reference-direction
//! survivor selection.

use rand::Rng;

use crate::cost::ObjectiveValue;
use crate::error::{Error, Result};

use super::hypervolume::{ParetoFront, STANDARD_REFERENCE};
use super::operators::{poly_mutation, sbx_crossover, DISTRIBUTION_INDEX};
use super::problem::{Genotype, Individual, Problem};
use super::run::{stream_rng, Branch, GenerationRecord, RunOutput, Stream};
use super::select::select;

/// Variation operator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneticParams {
    pub eta_crossover: f64,
    pub eta_mutation: f64,
    /// Per-component mutation probability; `None` means `1 / dimension`.
    pub mutation_prob: Option<f64>,
}

impl Default for GeneticParams {
    fn default() -> Self {
        Self { eta_crossover: DISTRIBUTION_INDEX, eta_mutation: DISTRIBUTION_INDEX, mutation_prob: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nsga3Config {
    pub pop_size: usize,
    pub generations: usize,
    pub genetic: GeneticParams,
    /// Reference point of the hypervolume trace.
    pub reference: ObjectiveValue,
}

impl Default for Nsga3Config {
    fn default() -> Self {
        Self { pop_size: 100, generations: 5000, genetic: GeneticParams::default(), reference: STANDARD_REFERENCE }
    }
}

/// `count` offspring from random parent pairs via SBX then mutation.
pub fn genetic_offspring<R: Rng + ?Sized>(
    parents: &[Individual],
    count: usize,
    params: &GeneticParams,
    rng: &mut R,
) -> Vec<Genotype> {
    let dim = parents[0].genotype.len();
    let prob = params.mutation_prob.unwrap_or(1.0 / dim as f64);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = &parents[rng.random_range(0..parents.len())].genotype;
        let b = &parents[rng.random_range(0..parents.len())].genotype;
        let (mut c1, mut c2) = sbx_crossover(a.as_slice(), b.as_slice(), params.eta_crossover, rng);
        poly_mutation(&mut c1, params.eta_mutation, prob, rng);
        poly_mutation(&mut c2, params.eta_mutation, prob, rng);
        for c in [c1, c2] {
            if out.len() < count {
                out.push(Genotype::new(c).expect("operators stay finite"));
            }
        }
    }
    out
}

/// Uniformly random, evaluated population.
pub fn initial_population<R: Rng + ?Sized>(problem: &Problem<'_>, size: usize, rng: &mut R) -> Result<Vec<Individual>> {
    let genotypes = (0..size).map(|_| Genotype::random(problem.dimension(), rng)).collect();
    problem.evaluate_all(genotypes)
}

/// Splits `parents ++ offspring` into survivors and the rejected rest, each
/// in input order.
pub fn survivors(parents: Vec<Individual>, offspring: Vec<Individual>) -> Result<(Vec<Individual>, Vec<Individual>)> {
    let p: Vec<ObjectiveValue> = parents.iter().map(|i| i.objective).collect();
    let q: Vec<ObjectiveValue> = offspring.iter().map(|i| i.objective).collect();
    let keep = select(&p, &q)?;
    let mut mask = vec![false; p.len() + q.len()];
    for i in keep {
        mask[i] = true;
    }
    let (mut kept, mut rejected) = (Vec::with_capacity(p.len()), Vec::with_capacity(q.len()));
    for (ind, keep) in parents.into_iter().chain(offspring).zip(mask) {
        if keep {
            kept.push(ind);
        } else {
            rejected.push(ind);
        }
    }
    Ok((kept, rejected))
}

pub(crate) fn record(population: &[Individual], generation: usize, reference: ObjectiveValue, branch: Branch) -> GenerationRecord {
    let points: Vec<ObjectiveValue> = population.iter().map(|i| i.objective).collect();
    let front = ParetoFront::from_points(&points);
    GenerationRecord {
        generation,
        hypervolume: front.hypervolume(reference),
        front_size: front.len(),
        pairs: None,
        loss_d: None,
        loss_g: None,
        branch,
    }
}

pub(crate) fn check_pop_size(size: usize) -> Result<()> {
    if size < 2 {
        return Err(Error::invalid("pop_size", "must be at least 2"));
    }
    Ok(())
}

/// Runs NSGA-III for `config.generations` generations.
pub fn run_nsga3(problem: &Problem<'_>, config: &Nsga3Config, seed: u64) -> Result<RunOutput> {
    check_pop_size(config.pop_size)?;
    let mut population = initial_population(problem, config.pop_size, &mut stream_rng(seed, Stream::Init))?;
    let mut genetic_rng = stream_rng(seed, Stream::Genetic);
    let mut trace = vec![record(&population, 0, config.reference, Branch::Initial)];
    for generation in 1..=config.generations {
        let offspring = genetic_offspring(&population, config.pop_size, &config.genetic, &mut genetic_rng);
        let offspring = problem.evaluate_all(offspring)?;
        population = survivors(population, offspring)?.0;
        trace.push(record(&population, generation, config.reference, Branch::Genetic));
    }
    Ok(RunOutput { population, trace })
}
