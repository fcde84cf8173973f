//! Weighted Diophantine approximation workbench.
//!
//! Exact weighted quasi-norm comparisons, Dirichlet and best-approximation
//! searches, exponent estimators and singularity certificates, the diagonal
//! flow side of the correspondence, and integer-structure analytics.

pub mod approx;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod norm;
pub mod real;
pub(crate) mod scan;
pub mod structure;
pub mod target;
pub mod weight;

pub use approx::{
    best_sequence, dirichlet_solve, min_error, Approximant, BestSequence, CertificateReport,
    EstimatorConfig,
};
pub use dynamics::{delta, delta_w, tau_hat_estimate, FlowConfig, FlowPoint, RateTrace, SubmoduleBasis};
pub use error::{Error, Result};
pub use norm::{quasi_norm, quasi_norm_leq, QuasiNormValue};
pub use real::{CfRule, ComputableReal, RatInterval, RealExpr};
pub use target::{Coord, TargetVector, DEFAULT_PRECISION};
pub use weight::{weight_restriction, Weight, WeightSet};
