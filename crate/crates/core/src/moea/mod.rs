//! Two-objective evolutionary machinery.

pub mod dominance;
pub mod hypervolume;
pub mod nsga3;
pub mod operators;
pub mod problem;
pub mod run;
pub mod select;
pub mod sort;

pub use dominance::{dominates, strictly_dominates, weakly_dominates, Dominance};
pub use hypervolume::{hypervolume, ParetoFront, STANDARD_REFERENCE};
pub use nsga3::{genetic_offspring, run_nsga3, survivors, GeneticParams, Nsga3Config};
pub use operators::{poly_mutation, sbx_crossover};
pub use problem::{decode, Genotype, Individual, Problem};
pub use run::{write_front_csv, write_trace_csv, Branch, GenerationRecord, RunOutput};
pub use select::{environmental_selection, select};
pub use sort::nondominated_sort;
