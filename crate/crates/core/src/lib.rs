//! Compensated matrix uncertainty selector and companions for sparse
//! regression when the design matrix is observed with noise.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod lp;
pub mod matrix;
pub mod missing;
pub mod model;
pub mod re;
pub mod rng;
pub mod sensitivity;
pub mod sim;
pub mod thresholds;

pub use error::{MuselError, Result};
pub use matrix::DenseMatrix;
pub use model::{Domain, GramMatrix};
