//! Noise-to-genotype generator trained against a frozen discriminator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discriminator::Discriminator;
use super::nn::{Activation, Adam, Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub net: Mlp,
    pub adam: Adam,
}

impl Generator {
    /// `genes` inputs, two tanh hidden layers of `genes` units and a logistic
    /// output of `genes` components, so every output lies in `(0, 1)`.
    pub fn new<R: Rng + ?Sized>(genes: usize, lr: f64, rng: &mut R) -> Self {
        let net = Mlp::new(&[genes; 4], Activation::Tanh, Activation::Logistic, rng);
        let adam = Adam::new(&net, lr);
        Self { net, adam }
    }

    pub fn genes(&self) -> usize {
        self.net.input_width()
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.genes() {
            return Err(Error::Dimension { expected: self.genes(), actual: z.len() });
        }
        Ok(())
    }

    pub fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(self.net.forward(z))
    }

    /// Mean over `i` of `-ln D(G(z_i) ‖ targets_i)`. `noise` and `targets`
    /// must have the same length.
    pub fn loss(&self, disc: &Discriminator, noise: &[Vec<f64>], targets: &[&[f64]]) -> Result<f64> {
        Self::check_batch(noise, targets)?;
        let mut total = 0.0;
        for (z, t) in noise.iter().zip(targets) {
            let y = self.generate(z)?;
            total += super::nn::softplus(-disc.logit(&y, t)?);
        }
        Ok(total / noise.len() as f64)
    }

    /// Loss and generator-parameter gradients; the discriminator is only read.
    pub fn loss_and_grad(&self, disc: &Discriminator, noise: &[Vec<f64>], targets: &[&[f64]]) -> Result<(f64, Gradients)> {
        Self::check_batch(noise, targets)?;
        let scale = 1.0 / noise.len() as f64;
        let mut grads = self.net.zero_grads();
        let mut total = 0.0;
        for (z, t) in noise.iter().zip(targets) {
            self.check(z)?;
            let acts = self.net.forward_trace(z);
            let (l, dy) = disc.first_slot_grad(acts.last().unwrap(), t)?;
            total += l;
            let dy: Vec<f64> = dy.iter().map(|g| g * scale).collect();
            self.net.backward(&acts, &dy, Some(&mut grads));
        }
        Ok((total * scale, grads))
    }

    /// One Adam step; returns the loss before the step, or `None` for an
    /// empty batch.
    pub fn train_step(&mut self, disc: &Discriminator, noise: &[Vec<f64>], targets: &[&[f64]]) -> Result<Option<f64>> {
        if noise.is_empty() {
            return Ok(None);
        }
        let (loss, grads) = self.loss_and_grad(disc, noise, targets)?;
        self.adam.update(&mut self.net, &grads);
        Ok(Some(loss))
    }

    fn check_batch(noise: &[Vec<f64>], targets: &[&[f64]]) -> Result<()> {
        if noise.len() != targets.len() {
            return Err(Error::Dimension { expected: targets.len(), actual: noise.len() });
        }
        if noise.is_empty() {
            return Err(Error::Precondition("generator batch is empty".into()));
        }
        Ok(())
    }
}
