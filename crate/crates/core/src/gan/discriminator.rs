//! Pairwise dominance discriminator: given `a ‖ b`, the probability that `a`
//! strictly dominates `b`. Input order matters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{logistic, softplus, Activation, Adam, Gradients, Mlp};
use crate::error::{Error, Result};

/// Learning rate of both networks.
pub const LEARNING_RATE: f64 = 4e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub net: Mlp,
    pub adam: Adam,
    genes: usize,
}

/// Ordered (dominating, dominated) genotype pair.
pub type GenePair<'a> = (&'a [f64], &'a [f64]);

impl Discriminator {
    /// Two `genes`-wide input slots, a tanh hidden layer of `2 * genes`
    /// units and a single logistic output.
    pub fn new<R: Rng + ?Sized>(genes: usize, lr: f64, rng: &mut R) -> Self {
        let net = Mlp::new(&[2 * genes, 2 * genes, 1], Activation::Tanh, Activation::Identity, rng);
        let adam = Adam::new(&net, lr);
        Self { net, adam, genes }
    }

    pub fn genes(&self) -> usize {
        self.genes
    }

    fn join(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        for v in [a, b] {
            if v.len() != self.genes {
                return Err(Error::Dimension { expected: self.genes, actual: v.len() });
            }
        }
        Ok([a, b].concat())
    }

    /// Pre-logistic output for `a ‖ b`.
    pub fn logit(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.net.forward(&self.join(a, b)?)[0])
    }

    /// Probability that `a` dominates `b`.
    pub fn prob(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.logit(a, b).map(logistic)
    }

    /// Mean over pairs of `-ln D(a‖b) - ln(1 - D(b‖a))`.
    pub fn loss(&self, pairs: &[GenePair<'_>]) -> Result<f64> {
        let mut total = 0.0;
        for (a, b) in pairs {
            total += softplus(-self.logit(a, b)?) + softplus(self.logit(b, a)?);
        }
        Ok(total / pairs.len() as f64)
    }

    pub fn loss_and_grad(&self, pairs: &[GenePair<'_>]) -> Result<(f64, Gradients)> {
        let mut grads = self.net.zero_grads();
        let scale = 1.0 / pairs.len() as f64;
        let mut total = 0.0;
        for (a, b) in pairs {
            // Forward order is labelled 1, reversed order 0.
            for (x, label) in [(self.join(a, b)?, 1.0), (self.join(b, a)?, 0.0)] {
                let acts = self.net.forward_trace(&x);
                let z = acts.last().unwrap()[0];
                total += if label == 1.0 { softplus(-z) } else { softplus(z) };
                let dz = (logistic(z) - label) * scale;
                self.net.backward(&acts, &[dz], Some(&mut grads));
            }
        }
        Ok((total * scale, grads))
    }

    /// One Adam step on the pair loss; returns the loss before the step, or
    /// `None` (and leaves the weights untouched) when `pairs` is empty.
    pub fn train_step(&mut self, pairs: &[GenePair<'_>]) -> Result<Option<f64>> {
        if pairs.is_empty() {
            log::debug!("no dominance pairs, discriminator step skipped");
            return Ok(None);
        }
        let (loss, grads) = self.loss_and_grad(pairs)?;
        self.adam.update(&mut self.net, &grads);
        Ok(Some(loss))
    }

    /// Gradient of `-ln D(y ‖ target)` w.r.t. `y`, plus that loss term.
    pub(crate) fn first_slot_grad(&self, y: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        let acts = self.net.forward_trace(&self.join(y, target)?);
        let z = acts.last().unwrap()[0];
        let grad_in = self.net.backward(&acts, &[logistic(z) - 1.0], None);
        Ok((softplus(-z), grad_in[..self.genes].to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_head(d: &mut Discriminator) {
        for p in &mut d.net.layers.last_mut().unwrap().params {
            *p = 0.0;
        }
    }

    #[test]
    fn zero_head_outputs_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = Discriminator::new(4, LEARNING_RATE, &mut rng);
        zero_head(&mut d);
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.9, 0.8, 0.7, 0.6];
        assert_eq!(d.prob(&a, &b).unwrap(), 0.5);
        let loss = d.loss(&[(&a, &b)]).unwrap();
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn input_order_matters_and_output_is_reproducible() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.9, 0.8, 0.7, 0.6];
        let d1 = Discriminator::new(4, LEARNING_RATE, &mut ChaCha8Rng::seed_from_u64(3));
        let d2 = Discriminator::new(4, LEARNING_RATE, &mut ChaCha8Rng::seed_from_u64(3));
        let p = d1.prob(&a, &b).unwrap();
        assert_eq!(p.to_bits(), d2.prob(&a, &b).unwrap().to_bits());
        assert_ne!(p, d1.prob(&b, &a).unwrap());
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let d = Discriminator::new(4, LEARNING_RATE, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(matches!(d.prob(&[0.0; 3], &[0.0; 4]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn empty_pair_set_is_a_no_op() {
        let mut d = Discriminator::new(4, LEARNING_RATE, &mut ChaCha8Rng::seed_from_u64(3));
        let before = d.clone();
        assert_eq!(d.train_step(&[]).unwrap(), None);
        assert_eq!(d, before);
    }

    #[test]
    fn training_separates_a_pair() {
        let mut d = Discriminator::new(4, 1e-2, &mut ChaCha8Rng::seed_from_u64(4));
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.9, 0.8, 0.7, 0.6];
        let first = d.loss(&[(&a, &b)]).unwrap();
        for _ in 0..300 {
            d.train_step(&[(&a, &b)]).unwrap();
        }
        let last = d.loss(&[(&a, &b)]).unwrap();
        assert!(last < 0.05 * first, "{first} -> {last}");
        assert!(d.prob(&a, &b).unwrap() > 0.95);
        assert!(d.prob(&b, &a).unwrap() < 0.05);
    }
}
