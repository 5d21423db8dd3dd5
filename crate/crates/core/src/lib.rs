//! E-variables for hypotheses generated by finitely many (or a parametric
//! family of) constraint functions, discretized to finite grids and checked
//! with adversarial linear programs.

pub mod error;
pub mod lp;
pub mod measure;
pub mod finite;
pub mod adversary;
pub mod subpsi;
pub mod symmetry;
pub mod reduction;
pub mod cli;

pub use error::{Error, Result};
pub use measure::{DEFAULT_TOL, VALUE_CAP};
