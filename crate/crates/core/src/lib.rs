//! Minimax lower bounds and simulation tools for transfer learning in linear
//! regression and one-hidden-layer ReLU networks.
//!
//! The crate covers:
//!
//! - [`model`]: the three transfer models, data generation and synthetic task pairs
//! - [`kernels`]: closed-form ReLU second moments under Gaussian inputs
//! - [`metrics`]: transfer distance, effective dimension, transfer coefficients and KL divergence
//! - [`bounds`]: the three-regime minimax lower bound
//! - [`estimators`]: weighted empirical risk minimization and target-risk evaluation
//! - [`harness`]: seeded sweeps and series output

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod verify;

pub use bounds::{minimax_floor, BoundInput, BoundReport, Regime};
pub use error::{Error, Result};
pub use estimators::{closed_form_risk, fit_weighted_erm, mc_risk, select_lambda, ErmConfig, FitResult, GdConfig, SourceWeighting};
pub use metrics::{effective_dimension, transfer_coefficients, transfer_distance};
pub use model::{Dataset, Domain, ModelKind, ModelSpec, TaskPair, TaskParams};
pub use numerics::SymMatrix;
