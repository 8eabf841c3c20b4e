//! Trust-region stochastic optimization with variance-reduced gradients for
//! finite-sum objectives `f(x) = (1/N) Σ f_i(x)`.
//!
//! The crate is organized bottom-up:
//!
//! - [`problem`]: the [`FiniteSum`] abstraction, iterate state and seeded
//!   random streams.
//! - [`problems`]: least-squares, logistic and robust nonconvex objectives,
//!   LIBSVM ingestion and synthetic data.
//! - [`estimators`]: full, mini-batch and variance-reduced gradient oracles.
//! - [`trust_region`]: quadratic models, Cauchy and Steihaug-CG steps,
//!   radius policies.
//! - [`drivers`]: the two-loop trust-region method and SGD/SVRG/deterministic
//!   baselines.
//! - [`theory`]: convergence constants, the Lyapunov schedule and empirical
//!   verifiers of the decrease and variance inequalities.
//!
//! Sums over components use a fixed blocked reduction (see [`exec`]); with
//! the `parallel` feature the blocks run on rayon and results stay bitwise
//! identical to the sequential path.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drivers;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod linalg;
pub mod problem;
pub mod problems;
pub mod theory;
pub mod trust_region;

pub use error::{Error, Result};
pub use exec::Exec;
pub use problem::{
    evaluate_objective, full_gradient, ClosedFormConstants, EstimateKind, FiniteSum,
    GradientEstimate, IterateState, RandomSource,
};
