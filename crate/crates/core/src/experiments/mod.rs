pub mod bas;
pub mod prior;
pub mod toy;

pub use bas::{generate_bas, run_bas_experiment, AccuracyReport, BasConfig, BasDataset, BasResult};
pub use prior::{discretized_gaussian, run_prior_experiment, ConditionalMode, FitConfig, PriorConfig, PriorExperimentSpec, PriorRestart, PriorResult};
pub use toy::{run_thm3_toy, ChainFit, ToyConfig, ToyReport};
