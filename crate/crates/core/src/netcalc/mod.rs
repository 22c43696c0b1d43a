//! Explicit-weight neural networks with ReLU, ReCU and linear layers, and the
//! construction calculus built on them.

mod blocks;
pub mod io;
mod net;
mod ops;
mod sparse;

pub use blocks::{clamp_net, clip_net, matvec_net, prod_depth, prod_net, sq_depth_for, sq_net};
pub use net::{Activation, Layer, NeuralNet, RECU_ENVELOPE};
pub use ops::{
    add, affine_postcompose, affine_precompose, common_supersequence, compose, embed, fan_out, identity_net,
    linear_combination, parallelize, selection, weighted_sum,
};
pub use sparse::{SparseBuilder, SparseMatrix};
