//! Per-round time and energy of hybrid federated split learning, and the two
//! objectives (total training time, total worker energy) of a plan.
//!
//! A split worker runs its layers `1..=S` (part a) and `H+1..=L` (part c)
//! locally and offloads `S+1..=H` (part b) to the edge server. Minibatches are
//! pipelined in pairs, giving four repeating stages whose local CPU frequency
//! is lowered whenever the communication path is the bottleneck. Workers with
//! `S == H` train the whole model locally and slow their CPU down to finish
//! exactly when the slowest worker does.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{ChannelDraws, Scenario, WorkerConfig};

/// Decision for one worker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorkerPlan {
    /// Last layer of part a (1-based).
    pub split: usize,
    /// Last layer of part b; equal to `split` when the model is not split.
    pub merge: usize,
    /// Server frequency reserved for this worker, cycles/s. Ignored unless split.
    pub server_freq_hz: f64,
    pub bandwidth_hz: f64,
}

impl WorkerPlan {
    pub fn is_split(&self) -> bool {
        self.split < self.merge
    }
}

/// Per-worker split points and resource shares.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitPlan {
    pub workers: Vec<WorkerPlan>,
}

impl SplitPlan {
    /// Plain federated learning: nobody splits, bandwidth divided equally.
    pub fn no_split(scenario: &Scenario) -> Self {
        let k = scenario.num_workers();
        let share = scenario.system.bandwidth_hz / k as f64;
        Self {
            workers: vec![
                WorkerPlan { split: 1, merge: 1, server_freq_hz: 0.0, bandwidth_hz: share };
                k
            ],
        }
    }

    /// Checks split indices and budget constraints against `scenario`.
    pub fn check_feasible(&self, scenario: &Scenario) -> Result<()> {
        const SLACK: f64 = 1e-9;
        let l = scenario.num_layers();
        if self.workers.len() != scenario.num_workers() {
            return Err(Error::Dimension { expected: scenario.num_workers(), actual: self.workers.len() });
        }
        let mut bw = 0.0;
        let mut fe = 0.0;
        for (k, w) in self.workers.iter().enumerate() {
            if !(1 <= w.split && w.split <= w.merge && w.merge < l) {
                return Err(Error::Infeasible(format!(
                    "worker {k}: split decision (S={}, H={}) violates 1 <= S <= H < L={l}",
                    w.split, w.merge
                )));
            }
            if !(w.bandwidth_hz.is_finite() && w.bandwidth_hz > 0.0) {
                return Err(Error::Infeasible(format!("worker {k}: bandwidth must be positive")));
            }
            bw += w.bandwidth_hz;
            if w.is_split() {
                if !(w.server_freq_hz.is_finite() && w.server_freq_hz > 0.0) {
                    return Err(Error::Infeasible(format!(
                        "worker {k}: split worker needs a positive server frequency"
                    )));
                }
                fe += w.server_freq_hz;
            }
        }
        if bw > scenario.system.bandwidth_hz * (1.0 + SLACK) {
            return Err(Error::Infeasible(format!(
                "bandwidth budget: total {bw} Hz exceeds {} Hz",
                scenario.system.bandwidth_hz
            )));
        }
        if fe > scenario.system.server_max_freq_hz * (1.0 + SLACK) {
            return Err(Error::Infeasible(format!(
                "server frequency budget: total {fe} cycles/s exceeds {}",
                scenario.system.server_max_freq_hz
            )));
        }
        Ok(())
    }
}

/// Total time (seconds) and total worker energy (joules) over all rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub v1: f64,
    pub v2: f64,
}

impl ObjectiveValue {
    pub fn new(v1: f64, v2: f64) -> Self {
        Self { v1, v2 }
    }
}

/// Seconds needed to push `bits` through a link of the given bandwidth,
/// transmit power, amplitude gain and noise density (Shannon rate, log base 2).
pub fn tx_time(bits: f64, bandwidth_hz: f64, power_w: f64, gain: f64, noise_psd: f64) -> Result<f64> {
    if !(bits >= 0.0) {
        return Err(Error::Precondition(format!("payload {bits} bits is negative")));
    }
    for (name, v) in [("bandwidth", bandwidth_hz), ("power", power_w), ("gain", gain), ("noise", noise_psd)] {
        if !(v > 0.0) {
            return Err(Error::Precondition(format!("{name} must be positive, got {v}")));
        }
    }
    if bits == 0.0 {
        return Ok(0.0);
    }
    let snr = power_w * gain * gain / (bandwidth_hz * noise_psd);
    Ok(bits / (bandwidth_hz * (1.0 + snr).log2()))
}

/// Seconds the server needs for `flops` at `freq_hz` cycles/s and
/// `flops_per_cycle`.
pub fn server_compute_time(flops: f64, freq_hz: f64, flops_per_cycle: f64) -> Result<f64> {
    if !(freq_hz > 0.0 && flops_per_cycle > 0.0) {
        return Err(Error::Precondition(format!(
            "server rate must be positive, got {freq_hz} cycles/s x {flops_per_cycle} FLOPs/cycle"
        )));
    }
    Ok(flops / (freq_hz * flops_per_cycle))
}

/// Durations and local frequencies of the four pipeline stages of a split
/// worker in one round, plus the transfer and server terms they are built from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StageSchedule {
    pub durations: [f64; 4],
    pub freqs: [f64; 4],
    pub t_up_fwd: f64,
    pub t_down_fwd: f64,
    pub t_up_bwd: f64,
    pub t_down_bwd: f64,
    pub t_server_fwd: f64,
    pub t_server_bwd: f64,
}

struct Radio {
    up: Link,
    down: Link,
}

#[derive(Clone, Copy)]
struct Link {
    bandwidth: f64,
    power: f64,
    gain: f64,
    noise: f64,
}

impl Link {
    fn time(&self, bits: f64) -> Result<f64> {
        tx_time(bits, self.bandwidth, self.power, self.gain, self.noise)
    }
}

impl Radio {
    fn new(scenario: &Scenario, worker: &WorkerConfig, plan: &WorkerPlan, gain: f64) -> Self {
        let base = Link {
            bandwidth: plan.bandwidth_hz,
            power: worker.power_w,
            gain,
            noise: scenario.system.noise_psd_w_per_hz,
        };
        Radio {
            up: base,
            down: Link { power: scenario.system.server_power_w, ..base },
        }
    }
}

/// Stage duration and frequency: the stage lasts as long as the slower of the
/// communication path and local compute at full speed, and the CPU is slowed
/// so the local work exactly fills it.
fn fill_stage(comm: f64, local_flops: f64, worker: &WorkerConfig) -> (f64, f64) {
    let at_max = local_flops / (worker.max_freq_hz * worker.flops_per_cycle);
    if at_max >= comm {
        (at_max, worker.max_freq_hz)
    } else {
        let f = local_flops / (comm * worker.flops_per_cycle);
        (comm, f.min(worker.max_freq_hz))
    }
}

/// Stage schedule of split worker `k` under amplitude gain `gain`.
pub fn stage_schedule(scenario: &Scenario, k: usize, plan: &WorkerPlan, gain: f64) -> Result<StageSchedule> {
    if !plan.is_split() {
        return Err(Error::Precondition(format!("worker {k} is not split (S=H={})", plan.split)));
    }
    let worker = &scenario.workers[k];
    let profile = &scenario.profile;
    let l = profile.num_layers();
    let (s, h) = (plan.split, plan.merge);
    let b = worker.batch_size as f64;
    let radio = Radio::new(scenario, worker, plan, gain);
    let sys = &scenario.system;

    let t_up_fwd = radio.up.time(b * profile.layer(s).of)?;
    let t_down_fwd = radio.down.time(b * profile.layer(h).of)?;
    let t_up_bwd = radio.up.time(b * profile.layer(h + 1).ob)?;
    let t_down_bwd = radio.down.time(b * profile.layer(s + 1).ob)?;
    let t_server_fwd =
        server_compute_time(b * profile.fwd_flops(s + 1, h), plan.server_freq_hz, sys.server_flops_per_cycle)?;
    let t_server_bwd =
        server_compute_time(b * profile.bwd_flops(s + 1, h), plan.server_freq_hz, sys.server_flops_per_cycle)?;

    let fwd_path = t_up_fwd + t_server_fwd + t_down_fwd;
    let bwd_path = t_up_bwd + t_server_bwd + t_down_bwd;
    let part_a = b * profile.train_flops(1, s);
    let part_c = b * profile.train_flops(h + 1, l);

    let stages = [
        fill_stage(fwd_path, part_c, worker),
        fill_stage(bwd_path, part_c, worker),
        fill_stage(bwd_path, part_a, worker),
        fill_stage(fwd_path, part_a, worker),
    ];
    Ok(StageSchedule {
        durations: stages.map(|(t, _)| t),
        freqs: stages.map(|(_, f)| f),
        t_up_fwd,
        t_down_fwd,
        t_up_bwd,
        t_down_bwd,
        t_server_fwd,
        t_server_bwd,
    })
}

/// Parameter download and upload times of one worker. Split workers move
/// parts a and c; unsplit workers move the whole model.
pub fn param_transfer_times(scenario: &Scenario, k: usize, plan: &WorkerPlan, gain: f64) -> Result<(f64, f64)> {
    let profile = &scenario.profile;
    let bits = if plan.is_split() {
        profile.param_bits(1, plan.split) + profile.param_bits(plan.merge + 1, profile.num_layers())
    } else {
        profile.total_param_bits()
    };
    let radio = Radio::new(scenario, &scenario.workers[k], plan, gain);
    Ok((radio.down.time(bits)?, radio.up.time(bits)?))
}

/// Round time and energy of a split worker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitCost {
    pub schedule: StageSchedule,
    pub t_par_down: f64,
    pub t_par_up: f64,
    pub time: f64,
    pub energy: f64,
}

/// Time and energy of a split worker over one round with `iterations` local
/// iterations (stages 1-4 repeat `iterations / 2` times).
pub fn split_cost_from_parts(
    worker: &WorkerConfig,
    schedule: StageSchedule,
    t_par_down: f64,
    t_par_up: f64,
    iterations: u64,
) -> Result<SplitCost> {
    if iterations % 2 != 0 {
        return Err(Error::Precondition(format!("iteration count {iterations} is odd")));
    }
    let half = (iterations / 2) as f64;
    let stage_time: f64 = schedule.durations.iter().sum();
    let cpu_energy: f64 = schedule
        .durations
        .iter()
        .zip(schedule.freqs)
        .map(|(t, f)| worker.capacitance * f.powi(3) * t)
        .sum();
    let upload_energy = 2.0 * worker.power_w * (schedule.t_up_fwd + schedule.t_up_bwd);
    Ok(SplitCost {
        schedule,
        t_par_down,
        t_par_up,
        time: half * stage_time + t_par_down + t_par_up,
        energy: half * (cpu_energy + upload_energy) + worker.power_w * t_par_up,
    })
}

/// Round time and energy of split worker `k`.
pub fn split_round_cost(scenario: &Scenario, k: usize, plan: &WorkerPlan, gain: f64) -> Result<SplitCost> {
    let schedule = stage_schedule(scenario, k, plan, gain)?;
    let (down, up) = param_transfer_times(scenario, k, plan, gain)?;
    let worker = &scenario.workers[k];
    split_cost_from_parts(worker, schedule, down, up, worker.local_iterations())
}

/// Frequency and energy of an unsplit worker that stretches its local update
/// to finish at `t_max`.
pub fn nonsplit_cost(
    worker: &WorkerConfig,
    round_flops: f64,
    t_max: f64,
    t_par_down: f64,
    t_par_up: f64,
) -> Result<(f64, f64)> {
    let budget = t_max - t_par_down - t_par_up;
    if !(budget > 0.0) {
        return Err(Error::Precondition(format!(
            "round time {t_max} s leaves no compute time after {t_par_down} s + {t_par_up} s of transfers"
        )));
    }
    // Rounding in `t_max - down - up` can push the ratio a few ulps past f_max.
    let f = (round_flops / (budget * worker.flops_per_cycle)).min(worker.max_freq_hz);
    Ok((f, worker.capacitance * f.powi(3) * budget + worker.power_w * t_par_up))
}

/// Everything computed for one worker in one round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkerRound {
    pub split: Option<SplitCost>,
    pub t_par_down: f64,
    pub t_par_up: f64,
    /// Split round time, or full-speed local time plus transfers when unsplit.
    pub time: f64,
    /// Adapted frequency of an unsplit worker.
    pub freq_nsp: Option<f64>,
    pub energy: f64,
}

/// All workers' costs for one round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundBreakdown {
    pub workers: Vec<WorkerRound>,
    pub t_max: f64,
    pub e_sum: f64,
}

/// Round time: the slowest worker, unsplit workers counted at full speed.
pub fn round_time(times: &[f64]) -> f64 {
    times.iter().copied().fold(0.0, f64::max)
}

/// Sum of worker energies for the round.
pub fn round_energy(workers: &[WorkerRound]) -> f64 {
    workers.iter().map(|w| w.energy).sum()
}

/// Costs of round `t` for every worker.
pub fn evaluate_round(scenario: &Scenario, plan: &SplitPlan, draws: &ChannelDraws, t: usize) -> Result<RoundBreakdown> {
    let mut workers = Vec::with_capacity(plan.workers.len());
    for (k, wp) in plan.workers.iter().enumerate() {
        let gain = draws.gain(k, t);
        let worker = &scenario.workers[k];
        let round = if wp.is_split() {
            let c = split_round_cost(scenario, k, wp, gain)?;
            WorkerRound {
                split: Some(c),
                t_par_down: c.t_par_down,
                t_par_up: c.t_par_up,
                time: c.time,
                freq_nsp: None,
                energy: c.energy,
            }
        } else {
            let (down, up) = param_transfer_times(scenario, k, wp, gain)?;
            let local = worker.full_round_flops(&scenario.profile) / (worker.max_freq_hz * worker.flops_per_cycle);
            WorkerRound {
                split: None,
                t_par_down: down,
                t_par_up: up,
                time: local + down + up,
                freq_nsp: None,
                energy: 0.0,
            }
        };
        workers.push(round);
    }

    let t_max = round_time(&workers.iter().map(|w| w.time).collect::<Vec<_>>());
    for (k, w) in workers.iter_mut().enumerate() {
        if w.split.is_none() {
            let worker = &scenario.workers[k];
            let (f, e) = nonsplit_cost(worker, worker.full_round_flops(&scenario.profile), t_max, w.t_par_down, w.t_par_up)?;
            w.freq_nsp = Some(f);
            w.energy = e;
        }
    }
    let e_sum = round_energy(&workers);
    Ok(RoundBreakdown { workers, t_max, e_sum })
}

fn check_draws(scenario: &Scenario, draws: &ChannelDraws) -> Result<()> {
    if draws.num_workers() != scenario.num_workers() {
        return Err(Error::Dimension { expected: scenario.num_workers(), actual: draws.num_workers() });
    }
    if draws.num_rounds() < scenario.system.rounds {
        return Err(Error::Dimension { expected: scenario.system.rounds, actual: draws.num_rounds() });
    }
    Ok(())
}

/// Total time and worker energy of `plan` over all rounds of the scenario.
pub fn evaluate(plan: &SplitPlan, scenario: &Scenario, draws: &ChannelDraws) -> Result<ObjectiveValue> {
    plan.check_feasible(scenario)?;
    check_draws(scenario, draws)?;
    let mut total = ObjectiveValue::new(0.0, 0.0);
    for t in 0..scenario.system.rounds {
        let r = evaluate_round(scenario, plan, draws, t)?;
        total.v1 += r.t_max;
        total.v2 += r.e_sum;
    }
    Ok(total)
}

/// Per-round breakdowns of `plan` over all rounds.
pub fn breakdown(plan: &SplitPlan, scenario: &Scenario, draws: &ChannelDraws) -> Result<Vec<RoundBreakdown>> {
    plan.check_feasible(scenario)?;
    check_draws(scenario, draws)?;
    (0..scenario.system.rounds).map(|t| evaluate_round(scenario, plan, draws, t)).collect()
}

/// Column order of [`write_breakdown_csv`].
pub const BREAKDOWN_COLUMNS: [&str; 27] = [
    "round", "worker", "split", "s", "h", "t1", "t2", "t3", "t4", "f1", "f2", "f3", "f4", "t_uf", "t_df",
    "t_ub", "t_db", "t_ef", "t_eb", "t_par_d", "t_par_u", "t_worker", "f_nsp", "energy", "t_max", "e_sum",
    "bandwidth_hz",
];

/// One row per (round, worker); fields that do not apply to a worker's branch
/// are left empty.
pub fn write_breakdown_csv<W: Write>(out: W, plan: &SplitPlan, rounds: &[RoundBreakdown]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(BREAKDOWN_COLUMNS)?;
    let num = |v: f64| format!("{v:e}");
    for (t, r) in rounds.iter().enumerate() {
        for (k, w) in r.workers.iter().enumerate() {
            let wp = &plan.workers[k];
            let mut row = vec![
                t.to_string(),
                k.to_string(),
                u8::from(wp.is_split()).to_string(),
                wp.split.to_string(),
                wp.merge.to_string(),
            ];
            match &w.split {
                Some(c) => {
                    let s = &c.schedule;
                    row.extend(s.durations.iter().chain(&s.freqs).map(|v| num(*v)));
                    row.extend(
                        [s.t_up_fwd, s.t_down_fwd, s.t_up_bwd, s.t_down_bwd, s.t_server_fwd, s.t_server_bwd]
                            .map(num),
                    );
                }
                None => row.extend(std::iter::repeat_n(String::new(), 14)),
            }
            row.push(num(w.t_par_down));
            row.push(num(w.t_par_up));
            row.push(num(w.time));
            row.push(w.freq_nsp.map(num).unwrap_or_default());
            row.push(num(w.energy));
            row.push(num(r.t_max));
            row.push(num(r.e_sum));
            row.push(num(wp.bandwidth_hz));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush().map_err(|e| Error::Io { path: "<breakdown>".into(), source: e })?;
    Ok(())
}
