//! Low-rank matrix recovery on the fixed-rank manifold.
//!
//! Solvers for `min ½‖A(X) − y‖²` subject to `rank(X) = r`, covering hard
//! thresholding, projected gradient, Nesterov momentum in Euclidean and
//! Riemannian form, and adaptive restart. The [`analysis`] module predicts
//! the local linear rate of each method from the spectrum of the projected
//! measurement matrix.

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod operators;
pub mod oracle;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SvdTriple};
pub use manifold::{FixedRankPoint, TangentVector};
pub use operators::{ProblemInstance, SensingOperator};
