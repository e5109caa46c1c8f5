//! Time and energy model of hybrid federated split learning, plus the
//! optimizers that search its split and resource-allocation space.
//!
//! * [`scenario`] loads configurations and samples channel gains.
//! * [`cost`] evaluates a plan into total time and worker energy.
//! * [`moea`] holds the NSGA-III machinery and hypervolume.
//! * [`gan`] is the predictive GAN optimizer built on top of it.
//! * [`convergence`] checks the delayed-gradient analysis on quadratics.

pub mod convergence;
pub mod cost;
pub mod error;
pub mod gan;
pub mod moea;
pub mod scenario;

pub use cost::{evaluate, ObjectiveValue, RoundBreakdown, SplitPlan, WorkerPlan};
pub use error::{Error, Result};
pub use moea::{Genotype, Individual, ParetoFront, Problem, RunOutput};
pub use scenario::{load_scenario, sample_channels, ChannelDraws, LayerProfile, Scenario, SystemConfig, WorkerConfig};
