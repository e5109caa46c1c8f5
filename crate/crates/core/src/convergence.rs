//! Delayed-gradient local SGD on synthetic quadratic tasks, with empirical
//! checks of the deviation lemma and the round-level convergence bound.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inflation applied to the largest observed gradient norm to get `G`.
pub const GRADIENT_BOUND_INFLATION: f64 = 1.05;

/// Weighted sum of per-worker quadratics `½ (w − c_k)ᵀ A_k (w − c_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTask {
    weights: Vec<f64>,
    hessians: Vec<DMatrix<f64>>,
    centers: Vec<DVector<f64>>,
    smoothness: f64,
    strong_convexity: f64,
    optimum: DVector<f64>,
    optimal_loss: f64,
}

impl SyntheticTask {
    /// `weights` must be positive and sum to one within 1e-12; every Hessian
    /// must be symmetric positive definite.
    pub fn new(weights: Vec<f64>, hessians: Vec<DMatrix<f64>>, centers: Vec<DVector<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || hessians.len() != k || centers.len() != k {
            return Err(Error::invalid("task", "needs one weight, Hessian and center per worker"));
        }
        check_weights(&weights)?;
        let dim = centers[0].len();
        let mut smoothness: f64 = 0.0;
        for (i, (a, c)) in hessians.iter().zip(&centers).enumerate() {
            if a.nrows() != dim || a.ncols() != dim || c.len() != dim {
                return Err(Error::Dimension { expected: dim, actual: c.len().max(a.nrows()) });
            }
            if (a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
                return Err(Error::invalid(format!("hessians[{i}]"), "must be symmetric"));
            }
            let eig = SymmetricEigen::new(a.clone()).eigenvalues;
            if eig.min() <= 0.0 {
                return Err(Error::invalid(format!("hessians[{i}]"), "must be positive definite"));
            }
            smoothness = smoothness.max(eig.max());
        }
        let h: DMatrix<f64> = hessians.iter().zip(&weights).map(|(a, p)| a * *p).fold(DMatrix::zeros(dim, dim), |s, a| s + a);
        let rhs: DVector<f64> =
            hessians.iter().zip(&centers).zip(&weights).map(|((a, c), p)| a * c * *p).fold(DVector::zeros(dim), |s, v| s + v);
        let strong_convexity = SymmetricEigen::new(h.clone()).eigenvalues.min();
        let optimum = h.cholesky().expect("weighted sum of PD matrices is PD").solve(&rhs);
        let mut task =
            Self { weights, hessians, centers, smoothness, strong_convexity, optimum, optimal_loss: 0.0 };
        task.optimal_loss = task.loss(&task.optimum.clone());
        Ok(task)
    }

    /// Random task per `spec`: a shared eigenbasis, geometric base spectrum
    /// from `min_eig` to `max_eig` jittered per worker, and centers scattered
    /// around a common point.
    pub fn random(spec: &TaskSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = spec.dim;
        let gauss = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gauss.qr().q();
        let base: Vec<f64> = (0..d)
            .map(|i| {
                let x = if d == 1 { 0.0 } else { i as f64 / (d - 1) as f64 };
                spec.min_eig * (spec.max_eig / spec.min_eig).powf(x)
            })
            .collect();
        let common = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut hessians = Vec::with_capacity(spec.workers);
        let mut centers = Vec::with_capacity(spec.workers);
        for _ in 0..spec.workers {
            let eig = DVector::from_iterator(d, base.iter().map(|b| b * (1.0 + spec.eig_jitter * rng.random_range(-1.0..=1.0))));
            let a = &q * DMatrix::from_diagonal(&eig) * q.transpose();
            hessians.push((&a + a.transpose()) * 0.5);
            centers.push(&common + DVector::from_fn(d, |_, _| spec.center_spread * rng.sample::<f64, _>(StandardNormal)));
        }
        let sizes = spec.worker_data_sizes();
        let total: f64 = sizes.iter().map(|&s| s as f64).sum();
        let weights = sizes.iter().map(|&s| s as f64 / total).collect();
        Self::new(weights, hessians, centers)
    }

    pub fn num_workers(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.optimum.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest eigenvalue over all local Hessians.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Smallest eigenvalue of the global Hessian.
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    pub fn local_loss(&self, k: usize, w: &DVector<f64>) -> f64 {
        let d = w - &self.centers[k];
        0.5 * d.dot(&(&self.hessians[k] * &d))
    }

    pub fn local_grad(&self, k: usize, w: &DVector<f64>) -> DVector<f64> {
        &self.hessians[k] * (w - &self.centers[k])
    }

    pub fn loss(&self, w: &DVector<f64>) -> f64 {
        (0..self.num_workers()).map(|k| self.weights[k] * self.local_loss(k, w)).sum()
    }

    pub fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        (0..self.num_workers()).fold(DVector::zeros(self.dim()), |s, k| s + self.local_grad(k, w) * self.weights[k])
    }

    /// `F(w) − F(w*)`, never negative.
    pub fn gap(&self, w: &DVector<f64>) -> f64 {
        (self.loss(w) - self.optimal_loss).max(0.0)
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("weights", "must be positive"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("weights", format!("must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Parameters of a random quadratic task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub workers: usize,
    pub dim: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Relative per-worker perturbation of each eigenvalue.
    pub eig_jitter: f64,
    /// Standard deviation of worker centers around the common point.
    pub center_spread: f64,
    /// Per-worker sample counts; empty cycles through 2400, 3200, 4000.
    pub data_sizes: Vec<u64>,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self { workers: 4, dim: 4, min_eig: 0.05, max_eig: 1.0, eig_jitter: 0.1, center_spread: 0.05, data_sizes: Vec::new() }
    }
}

impl TaskSpec {
    fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.dim == 0 {
            return Err(Error::invalid("task", "workers and dim must be at least 1"));
        }
        if !(self.min_eig > 0.0 && self.max_eig >= self.min_eig) {
            return Err(Error::invalid("min_eig", "need 0 < min_eig <= max_eig"));
        }
        if !(0.0..1.0).contains(&self.eig_jitter) {
            return Err(Error::invalid("eig_jitter", "must lie in [0, 1)"));
        }
        if !(self.center_spread >= 0.0) {
            return Err(Error::invalid("center_spread", "must be nonnegative"));
        }
        if !self.data_sizes.is_empty() && (self.data_sizes.len() != self.workers || self.data_sizes.contains(&0)) {
            return Err(Error::invalid("data_sizes", "need one positive size per worker"));
        }
        Ok(())
    }

    fn worker_data_sizes(&self) -> Vec<u64> {
        if self.data_sizes.is_empty() {
            (0..self.workers).map(|k| [2400, 3200, 4000][k % 3]).collect()
        } else {
            self.data_sizes.clone()
        }
    }
}

/// Parameters of one worker inside a round. A plain worker uses only
/// `current`; a delayed worker steps with the gradient at `lagged`, the
/// iterate from two steps back.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerState {
    pub current: DVector<f64>,
    pub lagged: DVector<f64>,
}

impl WorkerState {
    pub fn start(w: &DVector<f64>) -> Self {
        Self { current: w.clone(), lagged: w.clone() }
    }
}

/// One local update of worker `k`; returns the norm of the gradient used.
pub fn local_step(task: &SyntheticTask, k: usize, state: &mut WorkerState, eta: f64, delayed: bool) -> f64 {
    let at = if delayed { &state.lagged } else { &state.current };
    let g = task.local_grad(k, at);
    let next = &state.current - &g * eta;
    state.lagged = std::mem::replace(&mut state.current, next);
    g.norm()
}

/// `Σ weights_k · params_k`, with the weights checked to sum to one.
pub fn aggregate(weights: &[f64], params: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_weights(weights)?;
    if weights.len() != params.len() || params.is_empty() {
        return Err(Error::Dimension { expected: weights.len(), actual: params.len() });
    }
    Ok(params.iter().zip(weights).fold(DVector::zeros(params[0].len()), |s, (p, w)| s + p * *w))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    /// Learning rate as a fraction of `1/L`.
    pub eta_scale: f64,
    /// Local iterations per round, shared by all workers.
    pub iterations: usize,
    pub rounds: usize,
    /// Distance of the starting point from the optimum.
    pub init_distance: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self { eta_scale: 0.5, iterations: 4, rounds: 60, init_distance: 10.0 }
    }
}

/// Squared deviations observed at one (round, worker, iteration).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviation {
    pub round: usize,
    pub worker: usize,
    pub n: usize,
    pub delayed: bool,
    /// `‖w̄ⁿ − xⁿ_k‖²` with `x` the worker's current iterate.
    pub current: f64,
    /// `‖w̄ⁿ − ŵⁿ⁻¹_k‖²`, delayed workers only.
    pub lagged: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub eta: f64,
    pub iterations: Vec<usize>,
    pub delayed: Vec<bool>,
    /// Global models `W_0 ..= W_τ`.
    pub globals: Vec<DVector<f64>>,
    /// `F(W_t) − F(w*)` for `t = 0 ..= τ`.
    pub gaps: Vec<f64>,
    pub deviations: Vec<Deviation>,
    /// Largest gradient norm evaluated anywhere on the trajectory.
    pub max_grad_norm: f64,
}

impl Trajectory {
    pub fn gradient_bound(&self) -> f64 {
        GRADIENT_BOUND_INFLATION * self.max_grad_norm
    }

    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }
}

/// Runs `rounds` global rounds from `w0`. Worker `k` takes `iterations[k]`
/// local steps, delayed when `delayed[k]`; iterates past a worker's own
/// count stay frozen at its last value.
pub fn trajectory(
    task: &SyntheticTask,
    w0: &DVector<f64>,
    eta: f64,
    iterations: &[usize],
    delayed: &[bool],
    rounds: usize,
) -> Result<Trajectory> {
    let k = task.num_workers();
    if iterations.len() != k || delayed.len() != k {
        return Err(Error::Dimension { expected: k, actual: iterations.len().min(delayed.len()) });
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    let n_max = iterations.iter().copied().max().unwrap_or(0);
    let mut globals = vec![w0.clone()];
    let mut gaps = vec![task.gap(w0)];
    let mut deviations = Vec::new();
    let mut max_grad: f64 = 0.0;
    for round in 1..=rounds {
        let w = globals.last().unwrap().clone();
        let mut states: Vec<WorkerState> = (0..k).map(|_| WorkerState::start(&w)).collect();
        for n in 0..=n_max {
            if n > 0 {
                for (j, s) in states.iter_mut().enumerate() {
                    if n <= iterations[j] {
                        max_grad = max_grad.max(local_step(task, j, s, eta, delayed[j]));
                    }
                }
            }
            // Offsets from W keep n = 0 exactly zero.
            let offsets: Vec<DVector<f64>> = states.iter().map(|s| &s.current - &w).collect();
            let mean = offsets.iter().zip(task.weights()).fold(DVector::zeros(w.len()), |s, (o, p)| s + o * *p);
            for (j, s) in states.iter().enumerate() {
                // A frozen delayed worker's lagged iterate is its final one.
                let lag = if n > iterations[j] { &s.current } else { &s.lagged };
                deviations.push(Deviation {
                    round,
                    worker: j,
                    n,
                    delayed: delayed[j],
                    current: (&mean - &offsets[j]).norm_squared(),
                    lagged: delayed[j].then(|| (&mean - (lag - &w)).norm_squared()),
                });
            }
        }
        let finals: Vec<DVector<f64>> = states.into_iter().map(|s| s.current).collect();
        let next = aggregate(task.weights(), &finals)?;
        gaps.push(task.gap(&next));
        globals.push(next);
    }
    Ok(Trajectory {
        eta,
        iterations: iterations.to_vec(),
        delayed: delayed.to_vec(),
        globals,
        gaps,
        deviations,
        max_grad_norm: max_grad,
    })
}

/// Outcome of the deviation-lemma check.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    /// Smallest `bound − observed` over all checks with `n ≥ 1`.
    pub worst_slack: f64,
    /// Smallest slack per round, indexed from round 1.
    pub round_slack: Vec<f64>,
    /// `(round, worker, n)` of every violated inequality.
    pub violations: Vec<(usize, usize, usize)>,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `‖w̄ⁿ − xⁿ_k‖² ≤ 4η²n²G²` for every worker and, for delayed
/// workers, `‖w̄ⁿ − ŵⁿ⁻¹_k‖² ≤ 2η²(n² + (n−1)²)G²`, with `G` from
/// [`Trajectory::gradient_bound`].
pub fn check_lemma1(traj: &Trajectory) -> LemmaReport {
    let g2 = traj.gradient_bound().powi(2);
    let e2 = traj.eta * traj.eta;
    let rounds = traj.gaps.len() - 1;
    let mut report = LemmaReport { worst_slack: f64::INFINITY, round_slack: vec![f64::INFINITY; rounds], violations: Vec::new() };
    for d in &traj.deviations {
        let n = d.n as f64;
        let mut checks = vec![(d.current, 4.0 * e2 * n * n * g2)];
        if let Some(lag) = d.lagged {
            let m = (n - 1.0).max(0.0);
            checks.push((lag, 2.0 * e2 * (n * n + m * m) * g2));
        }
        for (lhs, rhs) in checks {
            let slack = rhs - lhs;
            if slack < 0.0 {
                report.violations.push((d.round, d.worker, d.n));
            }
            if d.n > 0 {
                report.worst_slack = report.worst_slack.min(slack);
                let r = &mut report.round_slack[d.round - 1];
                *r = r.min(slack);
            }
        }
    }
    report
}

/// `ρ = 1 − μη`, requiring `0 < η ≤ 1/L`.
pub fn contraction(task: &SyntheticTask, eta: f64) -> Result<f64> {
    let l = task.smoothness();
    if !(eta > 0.0) || eta > 1.0 / l * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("learning rate {eta} exceeds 1/L = {}", 1.0 / l)));
    }
    Ok(1.0 - task.strong_convexity() * eta)
}

/// Per-iteration bias term `α(n)` for split indicators `no_split` (`I_k`).
pub fn alpha(task: &SyntheticTask, eta: f64, g: f64, no_split: &[bool], n: usize) -> f64 {
    let n = n as f64;
    let a = (n - 1.0).powi(2);
    let b = (n - 2.0).powi(2);
    let sum: f64 = task
        .weights()
        .iter()
        .zip(no_split)
        .map(|(p, &i)| p * if i { 2.0 * a } else { a + b })
        .sum();
    eta.powi(3) * g * g * task.smoothness().powi(2) * sum
}

/// Accumulated bias after `t` rounds of `n_max` iterations.
pub fn alpha_hat(task: &SyntheticTask, eta: f64, g: f64, no_split: &[bool], n_max: usize, t: usize) -> Result<f64> {
    let rho = contraction(task, eta)?;
    let per_round: f64 = (0..n_max).map(|n| rho.powi(n as i32) * alpha(task, eta, g, no_split, n_max - n)).sum();
    Ok((0..t).map(|s| rho.powf((n_max * s) as f64) * per_round).sum())
}

/// The bound `ρ^{N t} gap_0 + α̂(t)` for `t = 0 ..= rounds`.
pub fn theorem1_bound(
    task: &SyntheticTask,
    eta: f64,
    g: f64,
    no_split: &[bool],
    n_max: usize,
    gap0: f64,
    rounds: usize,
) -> Result<Vec<f64>> {
    let rho = contraction(task, eta)?;
    let per_round: f64 = (0..n_max).map(|n| rho.powi(n as i32) * alpha(task, eta, g, no_split, n_max - n)).sum();
    let mut out = Vec::with_capacity(rounds + 1);
    let mut acc = 0.0;
    for t in 0..=rounds {
        let decay = rho.powf((n_max * t) as f64);
        out.push(decay * gap0 + acc);
        acc += decay * per_round;
    }
    Ok(out)
}

/// `(ε − α̂) / gap_0`, capped at 1 when the target is already met.
pub fn phi_for_target(epsilon: f64, alpha_hat: f64, gap0: f64) -> Result<f64> {
    if epsilon <= alpha_hat {
        return Err(Error::BelowBiasFloor { epsilon, alpha: alpha_hat });
    }
    if !(gap0 > 0.0) {
        return Ok(1.0);
    }
    Ok(((epsilon - alpha_hat) / gap0).min(1.0))
}

/// Smallest round count with `ρ^{N τ} ≤ φ`.
pub fn rounds_to_epsilon(rho: f64, phi: f64, n_max: usize) -> Result<usize> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", "must lie in (0, 1)"));
    }
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::invalid("phi", "must lie in (0, 1]"));
    }
    if n_max == 0 {
        return Err(Error::invalid("n_max", "must be at least 1"));
    }
    Ok((phi.ln() / rho.ln() / n_max as f64).ceil().max(0.0) as usize)
}

/// Least-squares slope of `ln gap_t` against `t` over rounds `t ≥ 1` whose
/// gap is at least `floor`. `None` with fewer than three such rounds.
pub fn decay_slope(gaps: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .skip(1)
        .take_while(|(_, g)| **g >= floor && **g > 0.0)
        .map(|(t, g)| (t as f64, g.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Fitting windows end this factor above the larger final gap.
pub const FLOOR_MARGIN: f64 = 100.0;

/// Decay slopes of two runs on a common window and their relative gap
/// `|a − b| / |a|`.
pub fn rate_match(a: &[f64], b: &[f64]) -> Option<(f64, f64, f64)> {
    let floor = FLOOR_MARGIN * a.last()?.max(*b.last()?);
    let sa = decay_slope(a, floor)?;
    let sb = decay_slope(b, floor)?;
    Some((sa, sb, (sa - sb).abs() / sa.abs()))
}

/// Everything one configuration of the lab produces.
#[derive(Clone, Debug)]
pub struct LabRun {
    pub trajectory: Trajectory,
    pub bound: Vec<f64>,
    pub lemma: LemmaReport,
}

impl LabRun {
    /// Rounds where the measured gap exceeds the bound.
    pub fn bound_violations(&self) -> Vec<usize> {
        let tol = |b: f64| 1e-12 * b.abs().max(1e-300);
        (0..self.bound.len()).filter(|&t| self.trajectory.gaps[t] > self.bound[t] + tol(self.bound[t])).collect()
    }

    pub fn passes(&self) -> bool {
        self.lemma.holds() && self.bound_violations().is_empty()
    }
}

/// Runs `task` under `config` with every worker delayed or every worker
/// plain, starting `init_distance` away from the optimum along a direction
/// drawn from `seed`.
pub fn run_lab(task: &SyntheticTask, config: &LabConfig, all_delayed: bool, seed: u64) -> Result<LabRun> {
    if !(config.eta_scale > 0.0) || config.eta_scale > 1.0 {
        return Err(Error::Precondition(format!(
            "learning rate {}/L exceeds 1/L; the bound needs eta <= 1/L",
            config.eta_scale
        )));
    }
    if config.iterations == 0 {
        return Err(Error::invalid("iterations", "must be at least 1"));
    }
    let eta = config.eta_scale / task.smoothness();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = DVector::from_fn(task.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let w0 = task.optimum() + dir.normalize() * config.init_distance;
    let k = task.num_workers();
    let traj = trajectory(task, &w0, eta, &vec![config.iterations; k], &vec![all_delayed; k], config.rounds)?;
    let no_split = vec![!all_delayed; k];
    let bound = theorem1_bound(task, eta, traj.gradient_bound(), &no_split, config.iterations, traj.gaps[0], config.rounds)?;
    let lemma = check_lemma1(&traj);
    Ok(LabRun { trajectory: traj, bound, lemma })
}

pub const REPORT_COLUMNS: [&str; 4] = ["round", "gap", "bound", "lemma_slack"];

/// One row per round: gap, bound, and the smallest lemma slack of that
/// round (empty for round 0).
pub fn write_report_csv<W: Write>(out: W, run: &LabRun) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(REPORT_COLUMNS)?;
    for t in 0..run.trajectory.gaps.len() {
        let slack = if t == 0 { String::new() } else { format!("{:e}", run.lemma.round_slack[t - 1]) };
        wtr.write_record([t.to_string(), format!("{:e}", run.trajectory.gaps[t]), format!("{:e}", run.bound[t]), slack])?;
    }
    wtr.flush().map_err(|source| Error::Io { path: "<csv>".into(), source })
}
