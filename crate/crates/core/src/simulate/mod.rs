//! Synthetic survival data from known hazards, an additive comparator model,
//! and a replicate harness scoring estimators by mean squared error.

pub mod agecohort;
pub mod design;
pub mod harness;
pub mod sampler;

pub use agecohort::{fit_age_cohort, AgeCohortFit, Constraint};
pub use design::{Design, DesignHazard, PiecewiseDesign, PiecewiseHazard, SmoothDesign, SmoothHazard, TrueHazard};
pub use harness::{mse, run_replicate, run_replicates, truth_grid, HarnessConfig, Method, Report};
pub use sampler::{default_estimation_grid, observed_fraction, replicate_rng, sample_dataset, Censoring, SimConfig};
