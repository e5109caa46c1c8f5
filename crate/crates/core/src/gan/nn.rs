//! Small fully connected networks with hand-written backpropagation and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Logistic => logistic(x),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Logistic => y * (1.0 - y),
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Affine map followed by an activation. Parameters are stored flat: the
/// `outputs x inputs` weight matrix row by row, then the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut params: Vec<f64> = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        params.resize(inputs * outputs + outputs, 0.0);
        Self { inputs, outputs, activation, params }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.params.split_at(self.inputs * self.outputs);
        w.chunks_exact(self.inputs)
            .zip(b)
            .map(|(row, bias)| self.activation.apply(row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias))
            .collect()
    }

    /// Backpropagates `grad_out` (w.r.t. this layer's output `y`, given input
    /// `x`). Accumulates parameter gradients into `grad` when provided and
    /// returns the gradient w.r.t. `x`.
    fn backward(&self, x: &[f64], y: &[f64], grad_out: &[f64], grad: Option<&mut [f64]>) -> Vec<f64> {
        let n_w = self.inputs * self.outputs;
        let delta: Vec<f64> = grad_out
            .iter()
            .zip(y)
            .map(|(g, y)| g * self.activation.derivative_from_output(*y))
            .collect();
        if let Some(grad) = grad {
            let (gw, gb) = grad.split_at_mut(n_w);
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (gwi, xi) in gw[o * self.inputs..(o + 1) * self.inputs].iter_mut().zip(x) {
                    *gwi += d * xi;
                }
                gb[o] += d;
            }
        }
        let w = &self.params[..n_w];
        let mut grad_in = vec![0.0; self.inputs];
        for (o, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            for (gi, wi) in grad_in.iter_mut().zip(&w[o * self.inputs..(o + 1) * self.inputs]) {
                *gi += d * wi;
            }
        }
        grad_in
    }
}

/// Stack of dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer gradients, shaped like [`Dense::params`].
pub type Gradients = Vec<Vec<f64>>;

impl Mlp {
    /// `widths[0]` inputs, then one layer per following width. Hidden layers
    /// use `hidden`; the last layer uses `output`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| Dense::new(widths[i], widths[i + 1], if i + 1 == n { output } else { hidden }, rng))
            .collect();
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |h, l| l.forward(&h))
    }

    /// Activations of every layer, input first.
    pub fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let next = l.forward(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    /// Backpropagates from the output gradient through a recorded trace,
    /// accumulating into `grads` when given. Returns the input gradient.
    pub fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], mut grads: Option<&mut Gradients>) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let slot = grads.as_mut().map(|gs| gs[i].as_mut_slice());
            g = l.backward(&acts[i], &acts[i + 1], &g, slot);
        }
        g
    }

    pub fn zero_grads(&self) -> Gradients {
        self.layers.iter().map(|l| vec![0.0; l.params.len()]).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }
}

/// Adam optimizer state for one [`Mlp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: net.zero_grads(), v: net.zero_grads() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, layer) in net.layers.iter_mut().enumerate() {
            for (j, p) in layer.params.iter_mut().enumerate() {
                let g = grads[i][j];
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stable_scalar_functions() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Dense::new(10, 6, Activation::Tanh, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(d.params[..60].iter().all(|w| w.abs() <= limit));
        assert!(d.params[60..].iter().all(|b| *b == 0.0));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[4, 5, 3], Activation::Tanh, Activation::Logistic, &mut rng);
        let x = [0.1, -0.4, 0.7, 0.2];
        let acts = net.forward_trace(&x);
        let g = net.backward(&acts, &[1.0, 1.0, 1.0], None);
        for i in 0..4 {
            let h = 1e-6;
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (net.forward(&xp).iter().sum::<f64>() - net.forward(&xm).iter().sum::<f64>()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn adam_moves_against_the_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[2, 1], Activation::Identity, Activation::Identity, &mut rng);
        let before = net.layers[0].params.clone();
        let mut adam = Adam::new(&net, 0.1);
        adam.update(&mut net, &vec![vec![1.0, -1.0, 0.0]]);
        // First Adam step has magnitude lr per coordinate with nonzero gradient.
        assert!((net.layers[0].params[0] - (before[0] - 0.1)).abs() < 1e-6);
        assert!((net.layers[0].params[1] - (before[1] + 0.1)).abs() < 1e-6);
        assert_eq!(net.layers[0].params[2], before[2]);
        assert_eq!(adam.steps(), 1);
    }
}
