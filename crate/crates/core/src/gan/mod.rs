//! Predictive GAN: dominance-pair discriminator, noise-driven generator and
//! the hybrid optimization loop.

pub mod algo;
pub mod discriminator;
pub mod generator;
pub mod nn;
pub mod noise;
pub mod pairs;

pub use algo::{gen_offspring, run_pred_gan, BranchPolicy, Checkpoint, NoiseMode, PredGanConfig, PredGanRun};
pub use discriminator::{Discriminator, LEARNING_RATE};
pub use generator::Generator;
pub use noise::NoiseModel;
pub use pairs::{find_pairs, DominancePairs, DEFAULT_GAMMA, DEFAULT_KAPPA};
