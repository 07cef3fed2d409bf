//! Online mirror descent for prediction with expert advice over structured
//! loss spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`experts`]: simplex points, loss sequences, regret accounting.
//! - [`atomic_norms`]: gauges, support functions, Minkowski-sum gauges.
//! - [`regularizers`]: mirror maps with their regret certificates.
//! - [`lowrank_geometry`]: minimum-volume enclosing ellipsoids and the
//!   low-rank quadratic regularizer.
//! - [`omd`]: the mirror-descent learner and the Hedge baseline.
//! - [`loss_spaces`]: samplers, membership tests, bound catalog and the
//!   hypercube adversary.
//! - [`harness`]: configuration, experiment orchestration and reports.

pub mod atomic_norms;
pub mod error;
pub mod experts;
pub mod harness;
pub mod linalg;
pub mod loss_spaces;
pub mod lowrank_geometry;
pub mod omd;
pub mod regularizers;

pub use error::{Error, Result};
pub use experts::{
    best_expert, regret_of, validate_simplex, LossSequence, LossVector, RegretReport, SimplexPoint,
};
