//! Supervised learning of sparsifying analysis operators.
//!
//! The lower-level problem is the analysis-form generalized LASSO
//! `min_x ½‖x − y‖² + β‖Wx‖₁`, solved by ADMM. Once its sign pattern is
//! known the minimizer has the closed form `P_N(W₀)(y − β W±ᵀ s)`, which
//! gives exact gradients of the reconstruction error with respect to `W`.
//! [`train::blorc_train`] uses those gradients for minibatch gradient
//! descent over training pairs.

pub mod baselines;
pub mod closedform;
pub mod data;
pub mod defaults;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod gradient;
pub mod io;
pub mod linalg;
pub mod seeds;
pub mod train;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
