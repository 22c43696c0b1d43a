//! Multilevel Picard estimation and explicit-weight network constructions
//! for parabolic Hamilton–Jacobi–Bellman equations with control-affine
//! dynamics and quadratic control cost on a box.

pub mod cli;
pub mod error;
pub mod hamnet;
pub mod mlp;
pub mod netcalc;
pub mod norms;
pub mod oracle;
pub mod problem;
pub mod rng;

pub use error::{Error, Result};
