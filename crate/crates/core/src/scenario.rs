//! Experiment configuration: workers, server and radio parameters, the layer
//! profile of the trained network, and seeded channel realizations.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost figures of a single network layer, all per datum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// Forward-pass FLOPs.
    pub cf: f64,
    /// Backward-pass FLOPs.
    pub cb: f64,
    /// Bits of the forward output feature.
    pub of: f64,
    /// Bits of the gradient this layer emits during backpropagation.
    pub ob: f64,
    /// Bits of the layer's parameters.
    pub g: f64,
}

/// Ordered per-layer costs. Layer indices in the public API are 1-based to
/// match the split decision convention `1 <= S <= H < L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    layers: Vec<Layer>,
}

impl LayerProfile {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 3 {
            return Err(Error::SplitInfeasible(format!(
                "profile has {} layers, at least 3 are needed for 1 <= S <= H < L",
                layers.len()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            let field = |name: &str| format!("profile.layers[{i}].{name}");
            for (name, v) in [("cf", l.cf), ("cb", l.cb), ("of", l.of), ("ob", l.ob), ("g", l.g)] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(field(name), "must be finite and nonnegative"));
                }
            }
            if l.cf + l.cb <= 0.0 {
                return Err(Error::invalid(field("cf+cb"), "must be positive"));
            }
        }
        Ok(Self { layers })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer `l` (1-based).
    pub fn layer(&self, l: usize) -> &Layer {
        &self.layers[l - 1]
    }

    fn sum(&self, from: usize, to: usize, f: impl Fn(&Layer) -> f64) -> f64 {
        if from > to {
            return 0.0;
        }
        self.layers[from - 1..to].iter().map(f).sum()
    }

    /// Forward FLOPs of layers `from..=to` (1-based, empty when `from > to`).
    pub fn fwd_flops(&self, from: usize, to: usize) -> f64 {
        self.sum(from, to, |l| l.cf)
    }

    pub fn bwd_flops(&self, from: usize, to: usize) -> f64 {
        self.sum(from, to, |l| l.cb)
    }

    /// Forward plus backward FLOPs of layers `from..=to`.
    pub fn train_flops(&self, from: usize, to: usize) -> f64 {
        self.sum(from, to, |l| l.cf + l.cb)
    }

    pub fn param_bits(&self, from: usize, to: usize) -> f64 {
        self.sum(from, to, |l| l.g)
    }

    pub fn total_train_flops(&self) -> f64 {
        self.train_flops(1, self.num_layers())
    }

    pub fn total_param_bits(&self) -> f64 {
        self.param_bits(1, self.num_layers())
    }
}

/// Generator parameters for synthetic layer profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Every layer identical.
    Uniform {
        num_layers: usize,
        cf: f64,
        cb: f64,
        of: f64,
        ob: f64,
        g: f64,
    },
    /// Convolution-like shape: forward FLOPs peak mid-network, activations
    /// shrink with depth and parameters concentrate in the last layers.
    /// Backward FLOPs are twice the forward FLOPs.
    MobilenetLike {
        num_layers: usize,
        /// Total forward FLOPs per datum.
        fwd_flops: f64,
        /// Total parameter bits.
        param_bits: f64,
        /// Bits of one input datum.
        input_bits: f64,
    },
}

impl ProfileSpec {
    /// Preset sized after MobileNetV3-Large on 32x32x3 inputs with 32-bit
    /// floats.
    pub fn mobilenet_large() -> Self {
        ProfileSpec::MobilenetLike {
            num_layers: 20,
            fwd_flops: 1.2e7,
            param_bits: 5.4e6 * 32.0,
            input_bits: 32.0 * 32.0 * 3.0 * 32.0,
        }
    }
}

/// Builds a deterministic synthetic profile from `spec` and `seed`.
pub fn synth_profile(spec: &ProfileSpec, seed: u64) -> Result<LayerProfile> {
    match *spec {
        ProfileSpec::Uniform { num_layers, cf, cb, of, ob, g } => {
            if num_layers < 3 {
                return Err(Error::SplitInfeasible(format!("{num_layers} layers requested")));
            }
            LayerProfile::new(vec![Layer { cf, cb, of, ob, g }; num_layers])
        }
        ProfileSpec::MobilenetLike { num_layers, fwd_flops, param_bits, input_bits } => {
            if num_layers < 3 {
                return Err(Error::SplitInfeasible(format!("{num_layers} layers requested")));
            }
            for (name, v) in [
                ("fwd_flops", fwd_flops),
                ("param_bits", param_bits),
                ("input_bits", input_bits),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(format!("profile.generator.{name}"), "must be positive"));
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut jitter = || 0.85 + 0.3 * rng.random::<f64>();
            let n = num_layers as f64;

            let mut flop_w = Vec::with_capacity(num_layers);
            let mut param_w = Vec::with_capacity(num_layers);
            let mut out_bits = Vec::with_capacity(num_layers);
            for l in 0..num_layers {
                let x = (l as f64 + 0.5) / n;
                flop_w.push((PI * x).sin().powf(1.5) * jitter() + 0.05);
                param_w.push((3.0 * x).exp() * jitter());
                let depth = l as f64 / (n - 1.0);
                out_bits.push(input_bits * 1.3 * 0.08f64.powf(depth) * jitter());
            }
            let flop_total: f64 = flop_w.iter().sum();
            let param_total: f64 = param_w.iter().sum();

            let layers = (0..num_layers)
                .map(|l| {
                    let cf = fwd_flops * flop_w[l] / flop_total;
                    Layer {
                        cf,
                        cb: 2.0 * cf,
                        of: out_bits[l],
                        ob: if l == 0 { input_bits } else { out_bits[l - 1] },
                        g: param_bits * param_w[l] / param_total,
                    }
                })
                .collect();
            LayerProfile::new(layers)
        }
    }
}

/// One participating device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerConfig {
    /// Number of local training samples.
    pub data_size: u64,
    pub batch_size: u64,
    /// Local epochs per global round.
    pub epochs: u64,
    /// Maximum CPU frequency, cycles/s.
    pub max_freq_hz: f64,
    pub flops_per_cycle: f64,
    /// Effective switched capacitance of the chip.
    pub capacitance: f64,
    /// Uplink transmit power, W.
    pub power_w: f64,
    pub distance_m: f64,
}

impl WorkerConfig {
    /// Local iterations per round, `ceil(e*D/b)` rounded up to the next even
    /// number (the pipelined schedule runs minibatches in pairs).
    pub fn local_iterations(&self) -> u64 {
        let n = (self.epochs * self.data_size).div_ceil(self.batch_size);
        n + n % 2
    }

    /// Forward plus backward FLOPs of one full local round without splitting.
    pub fn full_round_flops(&self, profile: &LayerProfile) -> f64 {
        (self.epochs * self.data_size) as f64 * profile.total_train_flops()
    }

    fn validate(&self, k: usize) -> Result<()> {
        let field = |name: &str| format!("workers[{k}].{name}");
        for (name, v) in [
            ("data_size", self.data_size),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ] {
            if v == 0 {
                return Err(Error::invalid(field(name), "must be positive"));
            }
        }
        for (name, v) in [
            ("max_freq_hz", self.max_freq_hz),
            ("flops_per_cycle", self.flops_per_cycle),
            ("capacitance", self.capacitance),
            ("power_w", self.power_w),
            ("distance_m", self.distance_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field(name), "must be finite and positive"));
            }
        }
        Ok(())
    }
}

/// Server, radio and schedule parameters shared by all workers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemConfig {
    /// Total uplink/downlink bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Server CPU frequency budget, cycles/s.
    pub server_max_freq_hz: f64,
    pub server_flops_per_cycle: f64,
    /// Server (downlink) transmit power, W.
    pub server_power_w: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd_w_per_hz: f64,
    pub carrier_ghz: f64,
    /// Global rounds.
    pub rounds: usize,
    pub rng_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    bandwidth_hz: f64,
    server_max_freq_hz: f64,
    server_flops_per_cycle: f64,
    server_power_w: f64,
    noise_psd_dbm_per_hz: f64,
    carrier_ghz: f64,
    rounds: usize,
    rng_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum ProfileSource {
    Table { layers: Vec<Layer> },
    Generated { generator: ProfileSpec, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    system: SystemFile,
    workers: Vec<WorkerConfig>,
    profile: ProfileSource,
}

/// Converts a power spectral density from dBm/Hz to W/Hz.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// A validated experiment. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub workers: Vec<WorkerConfig>,
    pub profile: LayerProfile,
}

impl Scenario {
    pub fn new(system: SystemConfig, workers: Vec<WorkerConfig>, profile: LayerProfile) -> Result<Self> {
        let s = Self { system, workers, profile };
        s.validate()?;
        Ok(s)
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn num_layers(&self) -> usize {
        self.profile.num_layers()
    }

    pub fn validate(&self) -> Result<()> {
        let sys = &self.system;
        if self.workers.is_empty() {
            return Err(Error::invalid("workers", "at least one worker is required"));
        }
        for (name, v) in [
            ("system.bandwidth_hz", sys.bandwidth_hz),
            ("system.server_max_freq_hz", sys.server_max_freq_hz),
            ("system.server_flops_per_cycle", sys.server_flops_per_cycle),
            ("system.server_power_w", sys.server_power_w),
            ("system.noise_psd", sys.noise_psd_w_per_hz),
            ("system.carrier_ghz", sys.carrier_ghz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be finite and positive"));
            }
        }
        if sys.rounds == 0 {
            return Err(Error::invalid("system.rounds", "must be at least 1"));
        }
        for (k, w) in self.workers.iter().enumerate() {
            w.validate(k)?;
        }
        if self.profile.num_layers() < 3 {
            return Err(Error::SplitInfeasible("profile needs at least 3 layers".into()));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        let profile = match file.profile {
            ProfileSource::Table { layers } => LayerProfile::new(layers)?,
            ProfileSource::Generated { generator, seed } => synth_profile(&generator, seed)?,
        };
        let s = file.system;
        let system = SystemConfig {
            bandwidth_hz: s.bandwidth_hz,
            server_max_freq_hz: s.server_max_freq_hz,
            server_flops_per_cycle: s.server_flops_per_cycle,
            server_power_w: s.server_power_w,
            noise_psd_w_per_hz: dbm_to_watts(s.noise_psd_dbm_per_hz),
            carrier_ghz: s.carrier_ghz,
            rounds: s.rounds,
            rng_seed: s.rng_seed,
        };
        Scenario::new(system, file.workers, profile)
    }

    /// Serializes to the same schema [`load_scenario`] reads, with the
    /// profile written out as an explicit table.
    pub fn to_json_string(&self) -> String {
        let s = &self.system;
        let file = ScenarioFile {
            system: SystemFile {
                bandwidth_hz: s.bandwidth_hz,
                server_max_freq_hz: s.server_max_freq_hz,
                server_flops_per_cycle: s.server_flops_per_cycle,
                server_power_w: s.server_power_w,
                noise_psd_dbm_per_hz: 10.0 * s.noise_psd_w_per_hz.log10() + 30.0,
                carrier_ghz: s.carrier_ghz,
                rounds: s.rounds,
                rng_seed: s.rng_seed,
            },
            workers: self.workers.clone(),
            profile: ProfileSource::Table {
                layers: self.profile.layers.clone(),
            },
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json_str(&text)
}

/// Path loss in dB for a carrier in GHz and a distance in meters.
pub fn path_loss_db(carrier_ghz: f64, distance_m: f64) -> f64 {
    32.4 + 20.0 * carrier_ghz.log10() + 20.0 * distance_m.log10()
}

/// Mean channel amplitude gain `10^(-PL/20)`.
pub fn mean_gain(carrier_ghz: f64, distance_m: f64) -> f64 {
    10f64.powf(-path_loss_db(carrier_ghz, distance_m) / 20.0)
}

/// Channel amplitude gains, one per (worker, round).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraws {
    rounds: usize,
    gains: Vec<f64>,
}

impl ChannelDraws {
    /// Builds draws from explicit per-worker rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rounds = rows.first().map_or(0, Vec::len);
        let mut gains = Vec::with_capacity(rows.len() * rounds);
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != rounds {
                return Err(Error::Dimension { expected: rounds, actual: row.len() });
            }
            if let Some(g) = row.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
                return Err(Error::invalid(format!("gains[{k}]"), format!("gain {g} is not positive")));
            }
            gains.extend(row);
        }
        Ok(Self { rounds, gains })
    }

    /// Every worker sees gain `g` in every round.
    pub fn constant(workers: usize, rounds: usize, g: f64) -> Self {
        Self { rounds, gains: vec![g; workers * rounds] }
    }

    pub fn num_workers(&self) -> usize {
        if self.rounds == 0 {
            0
        } else {
            self.gains.len() / self.rounds
        }
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds
    }

    pub fn gain(&self, worker: usize, round: usize) -> f64 {
        self.gains[worker * self.rounds + round]
    }

    pub fn worker_row(&self, worker: usize) -> &[f64] {
        &self.gains[worker * self.rounds..(worker + 1) * self.rounds]
    }
}

/// Draws i.i.d. Rayleigh amplitudes for every (worker, round) with mean
/// `10^(-PL(d_k)/20)`.
pub fn sample_channels(scenario: &Scenario, seed: u64) -> ChannelDraws {
    let rounds = scenario.system.rounds;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gains = Vec::with_capacity(scenario.num_workers() * rounds);
    for w in &scenario.workers {
        let scale = mean_gain(scenario.system.carrier_ghz, w.distance_m) / (PI / 2.0).sqrt();
        for _ in 0..rounds {
            let u: f64 = rng.sample(Open01);
            gains.push(scale * (-2.0 * u.ln()).sqrt());
        }
    }
    ChannelDraws { rounds, gains }
}
