//! Real-coded genetic operators on the unit box.

use rand::Rng;

/// Default distribution index of both operators.
pub const DISTRIBUTION_INDEX: f64 = 20.0;

/// Simulated binary crossover applied to every component; children are
/// clamped to `[0, 1]`.
pub fn sbx_crossover<R: Rng + ?Sized>(a: &[f64], b: &[f64], eta: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), b.len(), "parents differ in length");
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for i in 0..a.len() {
        let (x, y) = (a[i], b[i]);
        if (x - y).abs() < 1e-14 {
            continue;
        }
        let u: f64 = rng.random();
        let beta = if u <= 0.5 {
            (2.0 * u).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
        };
        let mid = 0.5 * (x + y);
        let half = 0.5 * beta * (y - x).abs();
        let (lo, hi) = ((mid - half).clamp(0.0, 1.0), (mid + half).clamp(0.0, 1.0));
        if x < y {
            (c1[i], c2[i]) = (lo, hi);
        } else {
            (c1[i], c2[i]) = (hi, lo);
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation: each component mutates with probability
/// `prob`. A component on a bound can only move inward.
pub fn poly_mutation<R: Rng + ?Sized>(x: &mut [f64], eta: f64, prob: f64, rng: &mut R) {
    let mpow = 1.0 / (eta + 1.0);
    for v in x.iter_mut() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let y = *v;
        let u: f64 = rng.random();
        let dq = if u < 0.5 {
            let xy = 1.0 - y;
            let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
            val.powf(mpow) - 1.0
        } else {
            let xy = y;
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
            1.0 - val.powf(mpow)
        };
        *v = (y + dq).clamp(0.0, 1.0);
    }
}
