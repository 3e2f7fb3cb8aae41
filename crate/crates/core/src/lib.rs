//! Hazard segmentation on the Lexis diagram.
//!
//! Survival records are tabulated into events and person-time on a
//! cohort × age grid, a piecewise-constant log-hazard is fitted under a
//! weighted difference penalty, and an adaptive ridge drives most neighbour
//! differences to zero so that the grid splits into a small number of
//! constant-hazard areas.

pub mod aridge;
pub mod banded;
pub mod bench;
pub mod error;
pub mod grid;
pub mod lexis;
pub mod likelihood;
pub mod select;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use grid::Grid;
pub use lexis::{ExhaustiveStats, GridSpec, IndividualRecord};
pub use likelihood::{EstimateStatus, LogHazardGrid, PenaltyWeights};
