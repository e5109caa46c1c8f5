//! Box-constrained encoding of split plans and the evaluated individual.

use rand::Rng;
use serde::Serialize;

use crate::cost::{evaluate, ObjectiveValue, SplitPlan, WorkerPlan};
use crate::error::{Error, Result};
use crate::scenario::{ChannelDraws, Scenario};

/// Floor added to every bandwidth and server-frequency share before
/// normalizing, so no allocation reaches zero.
pub const SHARE_FLOOR: f64 = 1e-3;

/// Genes per worker: split raw, merge raw, server share, bandwidth share.
pub const GENES_PER_WORKER: usize = 4;

/// Point of `[0, 1]^(4K)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Genotype(Vec<f64>);

impl Genotype {
    /// Clamps every component into `[0, 1]`; non-finite input is rejected.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("genotype[{i}]"), "must be finite"));
        }
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self(values))
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| rng.random::<f64>()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

fn layer_index(x: f64, num_layers: usize) -> usize {
    let top = num_layers - 1;
    let raw = 1 + (x * top as f64).floor() as usize;
    raw.clamp(1, top)
}

/// Maps a genotype onto a feasible plan. Split points are floored onto
/// `1..L`, swapped when out of order, and both budgets are spent in full in
/// proportion to the floored shares.
pub fn decode(genotype: &Genotype, scenario: &Scenario) -> SplitPlan {
    let k = scenario.num_workers();
    let l = scenario.num_layers();
    let x = genotype.as_slice();
    assert_eq!(x.len(), GENES_PER_WORKER * k, "genotype length does not match 4K");

    let mut workers: Vec<WorkerPlan> = x
        .chunks_exact(GENES_PER_WORKER)
        .map(|g| {
            let (mut s, mut h) = (layer_index(g[0], l), layer_index(g[1], l));
            if s > h {
                std::mem::swap(&mut s, &mut h);
            }
            WorkerPlan { split: s, merge: h, server_freq_hz: 0.0, bandwidth_hz: 0.0 }
        })
        .collect();

    let bw_total: f64 = x.chunks_exact(GENES_PER_WORKER).map(|g| SHARE_FLOOR + g[3]).sum();
    let fe_total: f64 = x
        .chunks_exact(GENES_PER_WORKER)
        .zip(&workers)
        .filter(|(_, w)| w.is_split())
        .map(|(g, _)| SHARE_FLOOR + g[2])
        .sum();
    for (w, g) in workers.iter_mut().zip(x.chunks_exact(GENES_PER_WORKER)) {
        w.bandwidth_hz = scenario.system.bandwidth_hz * (SHARE_FLOOR + g[3]) / bw_total;
        if w.is_split() {
            w.server_freq_hz = scenario.system.server_max_freq_hz * (SHARE_FLOOR + g[2]) / fe_total;
        }
    }
    SplitPlan { workers }
}

/// A genotype with its decoded plan and objective value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Individual {
    pub genotype: Genotype,
    pub plan: SplitPlan,
    pub objective: ObjectiveValue,
}

/// The optimization problem: a scenario and the channel realization every
/// candidate is evaluated on.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub scenario: &'a Scenario,
    pub draws: &'a ChannelDraws,
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a Scenario, draws: &'a ChannelDraws) -> Self {
        Self { scenario, draws }
    }

    /// Genotype length, `4K`.
    pub fn dimension(&self) -> usize {
        GENES_PER_WORKER * self.scenario.num_workers()
    }

    pub fn evaluate(&self, genotype: Genotype) -> Result<Individual> {
        if genotype.len() != self.dimension() {
            return Err(Error::Dimension { expected: self.dimension(), actual: genotype.len() });
        }
        let plan = decode(&genotype, self.scenario);
        let objective = evaluate(&plan, self.scenario, self.draws)?;
        Ok(Individual { genotype, plan, objective })
    }

    /// Evaluates a batch concurrently; output order follows input order.
    pub fn evaluate_all(&self, genotypes: Vec<Genotype>) -> Result<Vec<Individual>> {
        use rayon::prelude::*;
        genotypes.into_par_iter().map(|g| self.evaluate(g)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{dbm_to_watts, synth_profile, ProfileSpec, SystemConfig, WorkerConfig};

    pub(crate) fn scenario(k: usize, layers: usize) -> Scenario {
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
            &ProfileSpec::MobilenetLike { num_layers: layers, fwd_flops: 1e7, param_bits: 1e7, input_bits: 1e5 },
            0,
        )
        .unwrap();
        Scenario::new(sys, vec![w; k], profile).unwrap()
    }

    #[test]
    fn equal_bandwidth_shares_split_evenly() {
        let s = scenario(4, 6);
        let g = Genotype::new(vec![0.3; 16]).unwrap();
        let plan = decode(&g, &s);
        for w in &plan.workers {
            assert!((w.bandwidth_hz - 3e6 / 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn split_index_bounds() {
        let s = scenario(1, 6);
        let plan = decode(&Genotype::new(vec![0.0, 0.0, 0.5, 0.5]).unwrap(), &s);
        assert_eq!((plan.workers[0].split, plan.workers[0].merge), (1, 1));
        let plan = decode(&Genotype::new(vec![1.0, 1.0, 0.5, 0.5]).unwrap(), &s);
        assert_eq!((plan.workers[0].split, plan.workers[0].merge), (5, 5));
    }

    #[test]
    fn out_of_order_split_points_are_swapped() {
        let s = scenario(1, 6);
        let grid: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        for &a in &grid {
            for &b in &grid {
                let plan = decode(&Genotype::new(vec![a, b, 0.5, 0.5]).unwrap(), &s);
                let w = plan.workers[0];
                assert!(1 <= w.split && w.split <= w.merge && w.merge < 6, "{a} {b} -> {w:?}");
                let lo = layer_index(a.min(b), 6);
                let hi = layer_index(a.max(b), 6);
                assert_eq!((w.split, w.merge), (lo, hi));
            }
        }
    }

    #[test]
    fn server_budget_goes_only_to_split_workers() {
        let s = scenario(3, 6);
        // worker 0 split, 1 unsplit, 2 split
        let g = Genotype::new(vec![0.0, 0.9, 0.2, 0.1, 0.5, 0.5, 0.9, 0.1, 0.1, 0.7, 0.6, 0.9]).unwrap();
        let plan = decode(&g, &s);
        assert!(plan.workers[0].is_split() && !plan.workers[1].is_split() && plan.workers[2].is_split());
        assert_eq!(plan.workers[1].server_freq_hz, 0.0);
        let fe: f64 = plan.workers.iter().map(|w| w.server_freq_hz).sum();
        assert!((fe / 6e9 - 1.0).abs() < 1e-12);
        plan.check_feasible(&s).unwrap();
    }

    #[test]
    fn genotype_rejects_nan_and_clamps() {
        assert!(Genotype::new(vec![f64::NAN]).is_err());
        assert_eq!(Genotype::new(vec![-1.0, 2.0]).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn problem_checks_dimension() {
        let s = scenario(2, 5);
        let d = crate::scenario::sample_channels(&s, 0);
        let p = Problem::new(&s, &d);
        assert_eq!(p.dimension(), 8);
        assert!(p.evaluate(Genotype::new(vec![0.5; 4]).unwrap()).is_err());
        let ind = p.evaluate(Genotype::new(vec![0.5; 8]).unwrap()).unwrap();
        assert!(ind.objective.v1 > 0.0 && ind.objective.v2 > 0.0);
    }
}
