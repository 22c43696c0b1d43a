//! Multilevel Picard estimation of (V(t, x), ∇ₓV(t, x)), the index-tree
//! machinery and its keyed randomness, and the rewriting of one sampled
//! estimator as a single network.

mod estimator;
mod freeze;
mod index;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::netcalc::NeuralNet;
use crate::problem::{ControlProblem, TruncationLevel};

pub use estimator::mlp_estimate;
pub use freeze::freeze_to_net;
pub use index::{count_indices, IndexPath};
pub use sampling::{gaussian_maxnorm_check, path_stream, sample_gaussian, sample_tau, MaxNormReport, TailCheck};

/// How the Hamiltonian and terminal cost are evaluated inside the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianMode {
    /// The closed-form truncated Hamiltonian H_R and the exact Ψ.
    #[serde(rename = "exact_hr")]
    ExactTruncated,
    /// Realizations of the Hamiltonian network and the Ψ network.
    Network,
}

/// MLP hyperparameters: `levels` is N, `branching` is M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub levels: usize,
    pub branching: usize,
    pub alpha_time: f64,
    pub seed: u64,
    pub h_mode: HamiltonianMode,
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.branching == 0 {
            return Err(Error::InvalidParameter("branching M must be at least 1".into()));
        }
        if !(self.alpha_time > 0.0 && self.alpha_time <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha_time must lie in (0, 1], got {}", self.alpha_time)));
        }
        let m = self.branching as u128;
        if m.checked_pow(self.levels as u32).is_none_or(|v| v > 1 << 40) {
            return Err(Error::InvalidParameter("M^N is too large".into()));
        }
        Ok(())
    }
}

/// Run metadata attached to an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpMeta {
    pub levels: usize,
    pub branching: usize,
    pub alpha_time: f64,
    pub seed: u64,
    /// Number of Gaussian vectors drawn.
    pub gaussian_draws: u64,
    /// Number of time samples drawn.
    pub tau_draws: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpEstimate {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub meta: MlpMeta,
}

/// Hamiltonian and Ψ networks used in network mode.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    /// Input (t, x, p) ∈ R^{1+2d}, scalar output.
    pub hamiltonian: NeuralNet,
    /// Input x ∈ R^d, scalar output.
    pub psi: NeuralNet,
}

/// Everything the recursion needs besides the hyperparameters.
#[derive(Clone, Debug)]
pub struct MlpContext<'a> {
    pub prob: &'a ControlProblem,
    pub truncation: TruncationLevel,
    pub networks: Option<NetworkModel>,
}

impl<'a> MlpContext<'a> {
    pub fn exact(prob: &'a ControlProblem, truncation: TruncationLevel) -> Self {
        Self { prob, truncation, networks: None }
    }

    pub fn with_networks(prob: &'a ControlProblem, truncation: TruncationLevel, model: NetworkModel) -> Result<Self> {
        let d = prob.d;
        check_len("Hamiltonian network input", 1 + 2 * d, model.hamiltonian.input_dim())?;
        check_len("Hamiltonian network output", 1, model.hamiltonian.output_dim())?;
        check_len("psi network input", d, model.psi.input_dim())?;
        check_len("psi network output", 1, model.psi.output_dim())?;
        Ok(Self { prob, truncation, networks: Some(model) })
    }
}
