//! The predictive GAN optimization loop.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discriminator::{Discriminator, GenePair, LEARNING_RATE};
use super::generator::Generator;
use super::noise::NoiseModel;
use super::pairs::{find_pairs, DEFAULT_GAMMA, DEFAULT_KAPPA};
use crate::cost::ObjectiveValue;
use crate::error::{Error, Result};
use crate::moea::nsga3::{check_pop_size, genetic_offspring, initial_population, record, survivors};
use crate::moea::run::{stream_rng, Stream};
use crate::moea::{Branch, GeneticParams, Genotype, Individual, Problem, RunOutput, STANDARD_REFERENCE};

/// Which noise trains the generator after selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// New population mean with the previous generation's covariance.
    #[default]
    AsWritten,
    /// New population mean and covariance.
    Symmetric,
}

/// How offspring are produced each generation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchPolicy {
    /// Genetic operators or the generator with equal probability.
    #[default]
    Hybrid,
    GeneticOnly,
    GeneratorOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredGanConfig {
    pub pop_size: usize,
    pub generations: usize,
    /// Discriminator and generator steps per generation.
    pub inner_iters: usize,
    pub gamma: f64,
    pub kappa: usize,
    pub learning_rate: f64,
    pub genetic: GeneticParams,
    pub noise_mode: NoiseMode,
    pub branch_policy: BranchPolicy,
    pub reference: ObjectiveValue,
}

impl Default for PredGanConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            generations: 5000,
            inner_iters: 10,
            gamma: DEFAULT_GAMMA,
            kappa: DEFAULT_KAPPA,
            learning_rate: LEARNING_RATE,
            genetic: GeneticParams::default(),
            noise_mode: NoiseMode::AsWritten,
            branch_policy: BranchPolicy::Hybrid,
            reference: STANDARD_REFERENCE,
        }
    }
}

impl PredGanConfig {
    fn validate(&self) -> Result<()> {
        check_pop_size(self.pop_size)?;
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if self.kappa == 0 {
            return Err(Error::invalid("kappa", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PredGanRun {
    pub output: RunOutput,
    pub discriminator: Discriminator,
    pub generator: Generator,
}

fn fit(population: &[Individual]) -> Result<NoiseModel> {
    let rows: Vec<&[f64]> = population.iter().map(|i| i.genotype.as_slice()).collect();
    NoiseModel::fit(&rows)
}

/// Generator outputs for `count` noise draws.
pub fn gen_offspring<R: Rng + ?Sized>(
    generator: &Generator,
    noise: &NoiseModel,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Genotype>> {
    noise.sample_n(count, rng).iter().map(|z| Genotype::new(generator.generate(z)?)).collect()
}

pub fn run_pred_gan(problem: &Problem<'_>, config: &PredGanConfig, seed: u64) -> Result<PredGanRun> {
    config.validate()?;
    let r = config.pop_size;
    let genes = problem.dimension();

    let mut weights_rng = stream_rng(seed, Stream::Weights);
    let mut disc = Discriminator::new(genes, config.learning_rate, &mut weights_rng);
    let mut gen = Generator::new(genes, config.learning_rate, &mut weights_rng);

    let mut population = initial_population(problem, r, &mut stream_rng(seed, Stream::Init))?;
    let mut noise = fit(&population)?;
    let mut compared = initial_population(problem, r, &mut stream_rng(seed, Stream::Compared))?;

    let mut genetic_rng = stream_rng(seed, Stream::Genetic);
    let mut branch_rng = stream_rng(seed, Stream::Branch);
    let mut noise_rng = stream_rng(seed, Stream::Noise);

    let mut trace = vec![record(&population, 0, config.reference, Branch::Initial)];
    for generation in 1..=config.generations {
        let delta: f64 = branch_rng.random();
        let branch = match config.branch_policy {
            BranchPolicy::Hybrid if delta >= 0.5 => Branch::Genetic,
            BranchPolicy::Hybrid => Branch::Generator,
            BranchPolicy::GeneticOnly => Branch::Genetic,
            BranchPolicy::GeneratorOnly => Branch::Generator,
        };
        let offspring = match branch {
            Branch::Generator => gen_offspring(&gen, &noise, r, &mut noise_rng)?,
            _ => genetic_offspring(&population, r, &config.genetic, &mut genetic_rng),
        };
        let offspring = problem.evaluate_all(offspring)?;
        let (next, rejected) = survivors(population, offspring)?;
        population = next;
        let noise_next = fit(&population)?;

        compared.extend(rejected);
        let dom: Vec<ObjectiveValue> = population.iter().map(|i| i.objective).collect();
        let cmp: Vec<ObjectiveValue> = compared.iter().map(|i| i.objective).collect();
        let z = find_pairs(&dom, &cmp, config.gamma, config.kappa);

        let (mut loss_d, mut loss_g) = (None, None);
        if z.is_empty() {
            log::info!("generation {generation}: no dominance pairs, GAN training skipped");
        } else {
            let pairs: Vec<GenePair<'_>> = z
                .pairs
                .iter()
                .map(|&(i, j)| (population[i].genotype.as_slice(), compared[j].genotype.as_slice()))
                .collect();
            let targets: Vec<&[f64]> = population.iter().map(|i| i.genotype.as_slice()).collect();
            let train_noise = match config.noise_mode {
                NoiseMode::AsWritten => noise.with_mean(noise_next.mean().clone()),
                NoiseMode::Symmetric => noise_next.clone(),
            };
            for _ in 0..config.inner_iters {
                loss_d = disc.train_step(&pairs)?;
                let batch = train_noise.sample_n(r, &mut noise_rng);
                loss_g = gen.train_step(&disc, &batch, &targets)?;
            }
        }
        let mut keep = vec![false; compared.len()];
        for &j in &z.retained {
            keep[j] = true;
        }
        let mut flags = keep.into_iter();
        compared.retain(|_| flags.next().unwrap());
        noise = noise_next;

        let mut rec = record(&population, generation, config.reference, branch);
        rec.pairs = Some(z.len());
        rec.loss_d = loss_d;
        rec.loss_g = loss_g;
        trace.push(rec);
    }
    Ok(PredGanRun { output: RunOutput { population, trace }, discriminator: disc, generator: gen })
}

/// Magic string of the weight checkpoint format.
pub const CHECKPOINT_FORMAT: &str = "hfsl-gan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON text checkpoint of both networks, including optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub discriminator: Discriminator,
    pub generator: Generator,
}

impl Checkpoint {
    pub fn new(discriminator: Discriminator, generator: Generator) -> Self {
        Self { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, discriminator, generator }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let c: Self = serde_json::from_reader(input)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::invalid("checkpoint", format!("unsupported format {} v{}", c.format, c.version)));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::{run_nsga3, Nsga3Config};
    use crate::scenario::{dbm_to_watts, sample_channels, synth_profile, ProfileSpec, Scenario, SystemConfig, WorkerConfig};

    fn scenario() -> Scenario {
        let sys = SystemConfig {
            bandwidth_hz: 3e6,
            server_max_freq_hz: 6e9,
            server_flops_per_cycle: 2.0,
            server_power_w: 0.5,
            noise_psd_w_per_hz: dbm_to_watts(-140.0),
            carrier_ghz: 2.6,
            rounds: 2,
            rng_seed: 0,
        };
        let w = WorkerConfig {
            data_size: 320,
            batch_size: 16,
            epochs: 1,
            max_freq_hz: 1e9,
            flops_per_cycle: 1.0,
            capacitance: 2e-28,
            power_w: 0.05,
            distance_m: 20.0,
        };
        let profile = synth_profile(
            &ProfileSpec::MobilenetLike { num_layers: 6, fwd_flops: 1e7, param_bits: 1e7, input_bits: 1e5 },
            0,
        )
        .unwrap();
        Scenario::new(sys, vec![w; 3], profile).unwrap()
    }

    fn small(policy: BranchPolicy, gens: usize) -> PredGanConfig {
        PredGanConfig { pop_size: 8, generations: gens, branch_policy: policy, ..Default::default() }
    }

    #[test]
    fn genetic_only_replays_nsga3() {
        let s = scenario();
        let d = sample_channels(&s, 1);
        let p = Problem::new(&s, &d);
        let gan = run_pred_gan(&p, &small(BranchPolicy::GeneticOnly, 6), 11).unwrap();
        let nsga = run_nsga3(&p, &Nsga3Config { pop_size: 8, generations: 6, ..Default::default() }, 11).unwrap();
        assert_eq!(gan.output.population, nsga.population);
        let hv = |t: &[crate::moea::GenerationRecord]| t.iter().map(|r| r.hypervolume.to_bits()).collect::<Vec<_>>();
        assert_eq!(hv(&gan.output.trace), hv(&nsga.trace));
    }

    #[test]
    fn same_seed_same_trace() {
        let s = scenario();
        let d = sample_channels(&s, 1);
        let p = Problem::new(&s, &d);
        let a = run_pred_gan(&p, &small(BranchPolicy::Hybrid, 5), 3).unwrap();
        let b = run_pred_gan(&p, &small(BranchPolicy::Hybrid, 5), 3).unwrap();
        assert_eq!(a.output.trace, b.output.trace);
        assert_eq!(a.output.population, b.output.population);
        assert_eq!(a.discriminator, b.discriminator);
    }

    #[test]
    fn generator_only_produces_valid_population() {
        let s = scenario();
        let d = sample_channels(&s, 1);
        let p = Problem::new(&s, &d);
        let run = run_pred_gan(&p, &small(BranchPolicy::GeneratorOnly, 4), 5).unwrap();
        assert_eq!(run.output.population.len(), 8);
        assert!(run.output.trace[1..].iter().all(|r| r.branch == Branch::Generator && r.pairs.is_some()));
        for ind in &run.output.population {
            ind.plan.check_feasible(&s).unwrap();
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = stream_rng(0, Stream::Weights);
        let c = Checkpoint::new(Discriminator::new(4, 1e-3, &mut rng), Generator::new(4, 1e-3, &mut rng));
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(Checkpoint::read(buf.as_slice()).unwrap(), c);
        let bad = String::from_utf8(buf).unwrap().replace(CHECKPOINT_FORMAT, "other");
        assert!(Checkpoint::read(bad.as_bytes()).is_err());
    }
}
