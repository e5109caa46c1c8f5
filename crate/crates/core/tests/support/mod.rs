//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the code under test except to
//! read plain data fields.

#![allow(dead_code)]

use hfsl_core::cost::{SplitPlan, WorkerPlan};
use hfsl_core::gan::pairs::DominancePairs;
use hfsl_core::gan::{Discriminator, Generator};
use hfsl_core::scenario::{Layer, LayerProfile, SystemConfig, WorkerConfig};
use hfsl_core::{ChannelDraws, ObjectiveValue, Scenario};
use rand::Rng;

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// ---------------------------------------------------------------------------
// Cost model

fn layer(cf: f64, cb: f64, of: f64, ob: f64, g: f64) -> Layer {
    Layer { cf, cb, of, ob, g }
}

fn system(bandwidth_hz: f64, server_max_freq_hz: f64, rounds: usize) -> SystemConfig {
    SystemConfig {
        bandwidth_hz,
        server_max_freq_hz,
        server_flops_per_cycle: 2.0,
        server_power_w: 0.5,
        noise_psd_w_per_hz: 1e-17,
        carrier_ghz: 2.6,
        rounds,
        rng_seed: 0,
    }
}

fn worker(data_size: u64, batch_size: u64, max_freq_hz: f64, power_w: f64) -> WorkerConfig {
    WorkerConfig {
        data_size,
        batch_size,
        epochs: 1,
        max_freq_hz,
        flops_per_cycle: 1.0,
        capacitance: 2e-28,
        power_w,
        distance_m: 10.0,
    }
}

fn wp(split: usize, merge: usize, server_freq_hz: f64, bandwidth_hz: f64) -> WorkerPlan {
    WorkerPlan { split, merge, server_freq_hz, bandwidth_hz }
}

/// A small scenario with a hand-written plan and hand-chosen gains.
pub struct Scripted {
    pub name: &'static str,
    pub scenario: Scenario,
    pub plan: SplitPlan,
    pub draws: ChannelDraws,
}

/// Five scripted cases covering split and unsplit workers, compute-bound and
/// link-bound stages, one and two rounds.
pub fn scripted_cases() -> Vec<Scripted> {
    let four = LayerProfile::new(vec![
        layer(2e6, 4e6, 8e4, 8e4, 1e5),
        layer(5e6, 1e7, 4e4, 4e4, 3e5),
        layer(8e6, 1.6e7, 2e4, 2e4, 6e5),
        layer(1e6, 2e6, 1e2, 2e4, 2e4),
    ])
    .unwrap();
    let six = LayerProfile::new(vec![
        layer(3e6, 6e6, 1e5, 1e5, 5e4),
        layer(3e6, 6e6, 6e4, 9e4, 8e4),
        layer(9e6, 1.5e7, 6e4, 6e4, 2e5),
        layer(9e6, 1.5e7, 3e4, 6e4, 4e5),
        layer(4e6, 7e6, 1e4, 3e4, 8e5),
        layer(5e5, 1e6, 1e2, 1e4, 1e4),
    ])
    .unwrap();

    vec![
        Scripted {
            name: "one split worker, one round",
            scenario: Scenario::new(system(1e6, 4e9, 1), vec![worker(320, 16, 1e9, 0.05)], four.clone()).unwrap(),
            plan: SplitPlan { workers: vec![wp(1, 3, 4e9, 1e6)] },
            draws: ChannelDraws::from_rows(vec![vec![3e-4]]).unwrap(),
        },
        Scripted {
            name: "split and unsplit worker, two rounds",
            scenario: Scenario::new(
                system(2e6, 6e9, 2),
                vec![worker(640, 32, 8e8, 0.05), worker(480, 16, 1.2e9, 0.1)],
                four.clone(),
            )
            .unwrap(),
            plan: SplitPlan { workers: vec![wp(2, 3, 5e9, 1.2e6), wp(2, 2, 0.0, 8e5)] },
            draws: ChannelDraws::from_rows(vec![vec![2e-4, 5e-4], vec![4e-4, 1e-4]]).unwrap(),
        },
        Scripted {
            name: "three unsplit workers, two rounds",
            scenario: Scenario::new(
                system(3e6, 6e9, 2),
                vec![worker(320, 16, 8e8, 0.05), worker(640, 16, 1e9, 0.05), worker(960, 32, 1.2e9, 0.05)],
                six.clone(),
            )
            .unwrap(),
            plan: SplitPlan { workers: vec![wp(1, 1, 0.0, 1e6), wp(3, 3, 0.0, 1.5e6), wp(5, 5, 0.0, 5e5)] },
            draws: ChannelDraws::from_rows(vec![vec![3e-4, 2e-4], vec![1e-4, 6e-4], vec![5e-4, 5e-4]]).unwrap(),
        },
        Scripted {
            name: "three split workers, slow CPUs",
            scenario: Scenario::new(
                system(3e6, 6e9, 2),
                vec![worker(320, 16, 1e8, 0.05), worker(640, 32, 2e8, 0.08), worker(192, 16, 1.5e8, 0.05)],
                six.clone(),
            )
            .unwrap(),
            plan: SplitPlan { workers: vec![wp(1, 4, 2e9, 1e6), wp(2, 5, 3e9, 1e6), wp(3, 4, 1e9, 1e6)] },
            draws: ChannelDraws::from_rows(vec![vec![4e-4, 3e-4], vec![2e-4, 2e-4], vec![6e-4, 1e-4]]).unwrap(),
        },
        Scripted {
            name: "narrow links, mixed",
            scenario: Scenario::new(
                system(1e5, 2e9, 1),
                vec![worker(320, 16, 1e9, 0.05), worker(320, 16, 1e9, 0.05)],
                six,
            )
            .unwrap(),
            plan: SplitPlan { workers: vec![wp(2, 4, 1.5e9, 3e4), wp(1, 1, 0.0, 7e4)] },
            draws: ChannelDraws::from_rows(vec![vec![1e-4], vec![2e-4]]).unwrap(),
        },
    ]
}

/// `(V1, V2)` recomputed line by line from the model's formulas.
pub fn oracle_objective(s: &Scenario, plan: &SplitPlan, draws: &ChannelDraws) -> (f64, f64) {
    let layers = s.profile.layers();
    let l_total = layers.len();
    let n0 = s.system.noise_psd_w_per_hz;
    let p0 = s.system.server_power_w;
    let ne = s.system.server_flops_per_cycle;
    let mut v1 = 0.0;
    let mut v2 = 0.0;

    for t in 0..s.system.rounds {
        let k_total = s.workers.len();
        let mut time = vec![0.0; k_total];
        let mut energy = vec![0.0; k_total];
        let mut par_down = vec![0.0; k_total];
        let mut par_up = vec![0.0; k_total];
        let mut split = vec![false; k_total];

        for k in 0..k_total {
            let w = &s.workers[k];
            let p = &plan.workers[k];
            let g = draws.gain(k, t);
            let bk = p.bandwidth_hz;
            let up_rate = bk * (1.0 + w.power_w * g * g / (bk * n0)).log2();
            let down_rate = bk * (1.0 + p0 * g * g / (bk * n0)).log2();
            let b = w.batch_size as f64;
            let (sk, hk) = (p.split, p.merge);

            if sk < hk {
                split[k] = true;
                // Layers are 1-based in the formulas; layers[i - 1] is layer i.
                let t_uf = b * layers[sk - 1].of / up_rate;
                let t_df = b * layers[hk - 1].of / down_rate;
                let t_ub = b * layers[hk].ob / up_rate;
                let t_db = b * layers[sk].ob / down_rate;
                let mut cf_b = 0.0;
                let mut cb_b = 0.0;
                for i in sk + 1..=hk {
                    cf_b += layers[i - 1].cf;
                    cb_b += layers[i - 1].cb;
                }
                let t_ef = b * cf_b / (p.server_freq_hz * ne);
                let t_eb = b * cb_b / (p.server_freq_hz * ne);
                let mut part_a = 0.0;
                for i in 1..=sk {
                    part_a += b * (layers[i - 1].cf + layers[i - 1].cb);
                }
                let mut part_c = 0.0;
                for i in hk + 1..=l_total {
                    part_c += b * (layers[i - 1].cf + layers[i - 1].cb);
                }
                let fmax = w.max_freq_hz;
                let nk = w.flops_per_cycle;
                let fwd = t_uf + t_ef + t_df;
                let bwd = t_ub + t_eb + t_db;
                let t1 = fwd.max(part_c / (fmax * nk));
                let t2 = bwd.max(part_c / (fmax * nk));
                let t3 = bwd.max(part_a / (fmax * nk));
                let t4 = fwd.max(part_a / (fmax * nk));
                let f1 = part_c / (t1 * nk);
                let f2 = part_c / (t2 * nk);
                let f3 = part_a / (t3 * nk);
                let f4 = part_a / (t4 * nk);

                let mut bits = 0.0;
                for i in 1..=sk {
                    bits += layers[i - 1].g;
                }
                for i in hk + 1..=l_total {
                    bits += layers[i - 1].g;
                }
                par_down[k] = bits / down_rate;
                par_up[k] = bits / up_rate;

                let ed = w.epochs * w.data_size;
                assert_eq!(ed % w.batch_size, 0, "scripted case must have whole batches");
                let n_iter = ed / w.batch_size;
                assert_eq!(n_iter % 2, 0, "scripted case must have an even iteration count");
                let half = (n_iter / 2) as f64;
                let eps = w.capacitance;
                time[k] = half * (t1 + t2 + t3 + t4) + par_down[k] + par_up[k];
                energy[k] = half
                    * (eps * f1.powi(3) * t1
                        + eps * f2.powi(3) * t2
                        + eps * f3.powi(3) * t3
                        + eps * f4.powi(3) * t4
                        + 2.0 * w.power_w * (t_uf + t_ub))
                    + w.power_w * par_up[k];
            } else {
                let mut bits = 0.0;
                for l in layers {
                    bits += l.g;
                }
                par_down[k] = bits / down_rate;
                par_up[k] = bits / up_rate;
                let mut flops = 0.0;
                for l in layers {
                    flops += l.cf + l.cb;
                }
                let local = (w.epochs * w.data_size) as f64 * flops / (w.max_freq_hz * w.flops_per_cycle);
                time[k] = local + par_down[k] + par_up[k];
            }
        }

        let mut t_max: f64 = 0.0;
        for k in 0..k_total {
            t_max = t_max.max(time[k]);
        }
        let mut e_sum = 0.0;
        for k in 0..k_total {
            if split[k] {
                e_sum += energy[k];
            } else {
                let w = &s.workers[k];
                let mut flops = 0.0;
                for l in layers {
                    flops += l.cf + l.cb;
                }
                let budget = t_max - par_down[k] - par_up[k];
                let f = (w.epochs * w.data_size) as f64 * flops / (budget * w.flops_per_cycle);
                e_sum += w.capacitance * f.powi(3) * budget + w.power_w * par_up[k];
            }
        }
        v1 += t_max;
        v2 += e_sum;
    }
    (v1, v2)
}

/// A random valid scenario with `1..=max_workers` workers and `3..=12` layers.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, max_workers: usize, max_rounds: usize) -> Scenario {
    let num_layers = rng.random_range(3..=12);
    let layers = (0..num_layers)
        .map(|_| Layer {
            cf: rng.random_range(1e5..1e8),
            cb: rng.random_range(1e5..2e8),
            of: rng.random_range(1e2..1e6),
            ob: rng.random_range(1e2..1e6),
            g: rng.random_range(1e3..1e7),
        })
        .collect();
    let profile = LayerProfile::new(layers).unwrap();
    let k = rng.random_range(1..=max_workers);
    let workers = (0..k)
        .map(|_| {
            let batch = [8, 16, 32][rng.random_range(0..3)];
            WorkerConfig {
                data_size: rng.random_range(16..2000),
                batch_size: batch,
                epochs: rng.random_range(1..=3),
                max_freq_hz: rng.random_range(1e8..2e9),
                flops_per_cycle: [1.0, 2.0][rng.random_range(0..2)],
                capacitance: rng.random_range(1e-28..5e-28),
                power_w: rng.random_range(0.01..0.5),
                distance_m: rng.random_range(2.0..100.0),
            }
        })
        .collect();
    let sys = SystemConfig {
        bandwidth_hz: rng.random_range(1e5..2e7),
        server_max_freq_hz: rng.random_range(1e9..1e10),
        server_flops_per_cycle: rng.random_range(1.0..4.0),
        server_power_w: rng.random_range(0.1..2.0),
        noise_psd_w_per_hz: 10f64.powf(rng.random_range(-20.0..-16.0)),
        carrier_ghz: 2.6,
        rounds: rng.random_range(1..=max_rounds),
        rng_seed: rng.random(),
    };
    Scenario::new(sys, workers, profile).unwrap()
}

/// Random gains in `[1e-5, 1e-3)`.
pub fn random_draws<R: Rng + ?Sized>(rng: &mut R, s: &Scenario) -> ChannelDraws {
    let rows = (0..s.num_workers())
        .map(|_| (0..s.system.rounds).map(|_| rng.random_range(1e-5..1e-3)).collect())
        .collect();
    ChannelDraws::from_rows(rows).unwrap()
}

/// A random plan satisfying every constraint, drawn directly rather than
/// through genotype decoding.
pub fn random_plan<R: Rng + ?Sized>(rng: &mut R, s: &Scenario) -> SplitPlan {
    let l = s.num_layers();
    let k = s.num_workers();
    let mut workers: Vec<WorkerPlan> = (0..k)
        .map(|_| {
            let a = rng.random_range(1..l);
            let b = if rng.random_bool(0.3) { a } else { rng.random_range(1..l) };
            WorkerPlan { split: a.min(b), merge: a.max(b), server_freq_hz: 0.0, bandwidth_hz: 0.0 }
        })
        .collect();
    let bw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let fe: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let bw_sum: f64 = bw.iter().sum();
    let fe_sum: f64 = workers.iter().zip(&fe).filter(|(w, _)| w.split < w.merge).map(|(_, f)| f).sum();
    let bw_use = rng.random_range(0.5..1.0);
    let fe_use = rng.random_range(0.5..1.0);
    for (i, w) in workers.iter_mut().enumerate() {
        w.bandwidth_hz = s.system.bandwidth_hz * bw_use * bw[i] / bw_sum;
        if w.split < w.merge {
            w.server_freq_hz = s.system.server_max_freq_hz * fe_use * fe[i] / fe_sum;
        }
    }
    SplitPlan { workers }
}

// ---------------------------------------------------------------------------
// Dominance, sorting, hypervolume

/// `a` is no worse in both objectives and better in one.
pub fn dominates(a: &ObjectiveValue, b: &ObjectiveValue) -> bool {
    a.v1 <= b.v1 && a.v2 <= b.v2 && (a.v1 < b.v1 || a.v2 < b.v2)
}

/// Non-domination levels by repeated pairwise scans. Levels list indices in
/// ascending order.
pub fn brute_sort(points: &[ObjectiveValue]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut levels = Vec::new();
    while !remaining.is_empty() {
        let level: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        remaining.retain(|i| !level.contains(i));
        levels.push(level);
    }
    levels
}

/// Hypervolume by midpoint sampling on an `n x n` grid over the reference box.
pub fn raster_hypervolume(points: &[ObjectiveValue], reference: ObjectiveValue, n: usize) -> f64 {
    let lo1 = points.iter().map(|p| p.v1).fold(reference.v1, f64::min);
    let lo2 = points.iter().map(|p| p.v2).fold(reference.v2, f64::min);
    let (w1, w2) = ((reference.v1 - lo1) / n as f64, (reference.v2 - lo2) / n as f64);
    let mut hits = 0usize;
    for i in 0..n {
        let x = lo1 + (i as f64 + 0.5) * w1;
        // Points dominating column x; the covered height is set by the lowest.
        let floor = points.iter().filter(|p| p.v1 <= x).map(|p| p.v2).fold(f64::INFINITY, f64::min);
        for j in 0..n {
            let y = lo2 + (j as f64 + 0.5) * w2;
            if floor <= y {
                hits += 1;
            }
        }
    }
    hits as f64 * w1 * w2
}

/// Random nondominated front of `n` points inside `(0, 1)^2`.
pub fn random_front<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<ObjectiveValue> {
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut ys: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(|a, b| b.total_cmp(a));
    xs.into_iter().zip(ys).map(|(v1, v2)| ObjectiveValue { v1, v2 }).collect()
}

/// Random points on a coarse grid so ties and duplicates occur.
pub fn random_points<R: Rng + ?Sized>(rng: &mut R, n: usize, grid: u32) -> Vec<ObjectiveValue> {
    (0..n)
        .map(|_| ObjectiveValue { v1: rng.random_range(0..grid) as f64, v2: rng.random_range(0..grid) as f64 })
        .collect()
}

// ---------------------------------------------------------------------------
// Dominance pairs

/// Pairs by exhaustive search: for each dominating point, every strictly
/// dominated compared point within `gamma`, ranked by distance to the line
/// from the ideal point through the dominating point, first `kappa` kept.
pub fn brute_pairs(dom: &[ObjectiveValue], cmp: &[ObjectiveValue], gamma: f64, kappa: usize) -> DominancePairs {
    let mut ideal = (f64::INFINITY, f64::INFINITY);
    for p in dom {
        ideal.0 = ideal.0.min(p.v1);
        ideal.1 = ideal.1.min(p.v2);
    }
    let mut out = DominancePairs::default();
    for (i, p) in dom.iter().enumerate() {
        let mut cands = Vec::new();
        for (j, q) in cmp.iter().enumerate() {
            let d = ((p.v1 - q.v1).powi(2) + (p.v2 - q.v2).powi(2)).sqrt();
            if dominates(p, q) && d <= gamma {
                let (ux, uy) = (p.v1 - ideal.0, p.v2 - ideal.1);
                let len = (ux * ux + uy * uy).sqrt();
                let dist = if len == 0.0 {
                    ((q.v1 - ideal.0).powi(2) + (q.v2 - ideal.1).powi(2)).sqrt()
                } else {
                    // |cross product| / |direction|
                    (ux * (q.v2 - ideal.1) - uy * (q.v1 - ideal.0)).abs() / len
                };
                cands.push((dist, j));
            }
        }
        cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in cands.iter().take(kappa) {
            out.pairs.push((i, j));
            if !out.retained.contains(&j) {
                out.retained.push(j);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Finite differences

pub const FD_STEP: f64 = 1e-5;

pub fn grad_err(analytic: f64, numeric: f64) -> f64 {
    rel_err(analytic, numeric)
}

/// Random `(layer, index)` coordinates of a network with the given
/// per-layer parameter counts.
pub fn random_coords<R: Rng + ?Sized>(rng: &mut R, sizes: &[usize], count: usize) -> Vec<(usize, usize)> {
    (0..count)
        .map(|_| {
            let l = rng.random_range(0..sizes.len());
            (l, rng.random_range(0..sizes[l]))
        })
        .collect()
}

/// Largest gradient error of the discriminator loss over `coords`.
pub fn check_discriminator(disc: &Discriminator, pairs: &[(&[f64], &[f64])], coords: &[(usize, usize)]) -> f64 {
    let (_, grads) = disc.loss_and_grad(pairs).unwrap();
    let mut worst: f64 = 0.0;
    for &(l, i) in coords {
        let mut plus = disc.clone();
        plus.net.layers[l].params[i] += FD_STEP;
        let mut minus = disc.clone();
        minus.net.layers[l].params[i] -= FD_STEP;
        let numeric = (plus.loss(pairs).unwrap() - minus.loss(pairs).unwrap()) / (2.0 * FD_STEP);
        worst = worst.max(grad_err(grads[l][i], numeric));
    }
    worst
}

/// Largest gradient error of the generator loss over `coords`.
pub fn check_generator(
    gen: &Generator,
    disc: &Discriminator,
    noise: &[Vec<f64>],
    targets: &[&[f64]],
    coords: &[(usize, usize)],
) -> f64 {
    let (_, grads) = gen.loss_and_grad(disc, noise, targets).unwrap();
    let mut worst: f64 = 0.0;
    for &(l, i) in coords {
        let mut plus = gen.clone();
        plus.net.layers[l].params[i] += FD_STEP;
        let mut minus = gen.clone();
        minus.net.layers[l].params[i] -= FD_STEP;
        let numeric =
            (plus.loss(disc, noise, targets).unwrap() - minus.loss(disc, noise, targets).unwrap()) / (2.0 * FD_STEP);
        worst = worst.max(grad_err(grads[l][i], numeric));
    }
    worst
}
