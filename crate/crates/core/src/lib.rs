//! Numerical laboratory for dying ReLUs under target normalization and
//! momentum.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] and [`householder`]: standard-normal functions and the
//!   rotation that aligns a weight vector with the last axis.
//! * [`affine`]: momentum gradient descent on an affine regressor as a
//!   linear autonomous system (companion matrix, eigenvalue regimes,
//!   exact trajectories).
//! * [`relu_field`]: closed-form expected gradients of a single ReLU unit
//!   under standard-normal inputs, plus dead/linear cone classification.
//! * [`mc`]: Monte-Carlo and finite-difference oracles for the analytic
//!   formulas.
//! * [`basin`]: basin-of-attraction sweeps over `(w_L, b)` initializations.
//! * [`nn`]: a small MLP trainer with SGD/Adam, target normalization and a
//!   dead-unit census.

pub mod affine;
pub mod basin;
mod error;
pub mod householder;
pub mod mc;
pub mod nn;
pub mod output;
pub mod relu_field;
pub mod rng;
pub mod special;
mod types;

pub use error::{Error, Result};
pub use householder::OrthogonalMap;
pub use types::{ParamPoint, TargetSpec, Vector};
