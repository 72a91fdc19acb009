//! Local bipartite ranking: mass-constrained classification risk, ranking
//! criteria focused on the top of the list, their empirical estimators,
//! empirical risk minimization over scoring families, synthetic models with
//! exact population values, and Monte Carlo studies of the estimators.
//!
//! The empirical estimators are generic over [`Scalar`], so the same code
//! runs in `f32`, `f64` or exact rational arithmetic. The crate root fixes
//! the usual choices as aliases.

pub mod classify;
pub mod data;
pub mod edf;
pub mod erm;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod rankcrit;
pub mod rate;
pub mod rng;
pub mod scalar;

pub use data::{ClassCounts, Dataset, Label};
pub use edf::EmpiricalDistribution;
pub use error::{Error, Result};
pub use model::{BelowFill, MonotoneMap, PiecewiseLinear, Plateau, ScoringModel};
pub use oracle::SyntheticModel;
pub use rankcrit::{CriterionReport, RankStats, RocPoint};
pub use rate::{Rate, TopRate};
pub use rng::SeedSpec;
pub use scalar::Scalar;

/// Floating-point scalar used by the oracle, ERM and the studies.
pub type Real = f64;
/// Exact scalar for finite-sample identities.
pub type Exact = num_rational::Ratio<i128>;
pub type Report = CriterionReport<Real>;
pub type ExactReport = CriterionReport<Exact>;
pub type Risk = classify::MassConstrainedRisk<Real>;
