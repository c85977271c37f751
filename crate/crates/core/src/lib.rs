//! Streaming convex matrix factorization with representative regions.
//!
//! The central object is a dictionary whose every column is an explicit
//! convex combination of a constant-size set of retained data samples, so a
//! basis element can always be read as a weighted average of real data. The
//! dictionary is learned online: each arriving sample is sparse-coded, folded
//! into running sufficient statistics, and offered as a replacement for one
//! slot of one representative set; the best replacement (or no replacement)
//! wins a constrained quadratic refit.
//!
//! The crate also ships the comparison baselines (unconstrained online
//! matrix factorization and a batch convex variant), a truncated Gaussian
//! mixture generator, evaluation metrics, and the `cvxmf` CLI that drives
//! all of it.

pub mod baselines;
pub mod config;
pub mod data;
pub mod dictionary;
pub mod error;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod online;
pub mod report;
pub mod solvers;
pub mod stats;

pub use config::{LassoSettings, ModelConfig, QpSettings, Variant};
pub use dictionary::{Dictionary, RepresentativeSet};
pub use error::{Error, Result};
pub use model::Model;
pub use report::{MetricsReport, StepReport, TraceRecord};
pub use stats::{update_stats, SufficientStats};
