//! Two-time-scale stochastic approximation toolkit.
//!
//! Runs coupled iterations
//!
//! ```text
//! x_{k+1} = x_k + alpha_k (f(x_k, y_k) - x_k + M_{k+1})
//! y_{k+1} = y_k + beta_k  (g(x_k, y_k) - y_k + M'_{k+1})
//! ```
//!
//! for contractive operator pairs `(f, g)` under diminishing step-size
//! schedules, instruments the averaged-noise sequence `U_k` and auxiliary
//! iterates `z_k = y_k - U_k`, and provides ensemble statistics, empirical
//! rate fitting, and brute-force oracles for the supporting inequalities.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod problem;
pub mod problems;
pub mod schedule;

pub use error::TtsaError;
pub use problem::{DerivedConstants, NoiseKind, NoiseModel, Problem, ValidationReport};
pub use schedule::{BoundConstants, OffsetMode, Regime, Schedule, ScheduleBuilder};

/// Dense column vector used for all iterates.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used by the built-in affine problems.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Shared operator closure `(x, y) -> v`.
pub type Operator = std::sync::Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
/// Shared map `y -> x*(y)` for problems with an analytic fast fixed point.
pub type FastFixedPointMap = std::sync::Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
