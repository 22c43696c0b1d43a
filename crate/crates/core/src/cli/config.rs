use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{HamiltonianMode, MlpParams};
use crate::problem::ControlProblem;
use crate::rng;

/// Experiment description read from TOML. Paths are relative to the config
/// file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Problem file; `hamiltonian-check` and `blocks-check` can run without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Evaluation time for `solve`, `freeze` and `convergence`.
    #[serde(default)]
    pub t: f64,
    /// Explicit evaluation points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Uniform sampling box Q; used when `points` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<SamplingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp: Option<MlpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamnet: Option<HamnetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_check: Option<HamiltonianCheckSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks_check: Option<BlocksCheckSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub count: usize,
}

impl SamplingBox {
    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(Error::Config("domain lo and hi must be non-empty and of equal length".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::Config("domain must be bounded with lo < hi in every coordinate".into()));
        }
        if self.count == 0 {
            return Err(Error::Config("domain count must be positive".into()));
        }
        Ok(())
    }

    /// `count` uniform points, reproducible from the seed.
    pub fn sample(&self, seed: u64) -> Vec<Vec<f64>> {
        let mut s = rng::stream(seed, rng::DOMAIN_POINTS, 0);
        (0..self.count)
            .map(|_| self.lo.iter().zip(&self.hi).map(|(a, b)| rng::uniform_in(&mut s, *a, *b)).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSection {
    pub levels: usize,
    pub branching: usize,
    #[serde(default = "default_alpha")]
    pub alpha_time: f64,
    #[serde(default = "default_h_mode")]
    pub h_mode: HamiltonianMode,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_h_mode() -> HamiltonianMode {
    HamiltonianMode::ExactTruncated
}

impl MlpSection {
    pub fn params(&self, seed: u64) -> MlpParams {
        MlpParams {
            levels: self.levels,
            branching: self.branching,
            alpha_time: self.alpha_time,
            seed,
            h_mode: self.h_mode,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    None,
    ColeHopf,
    Heat,
    #[serde(rename = "fd_1d")]
    Fd1d,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub kind: OracleKind,
    #[serde(default = "default_mc_samples")]
    pub samples: usize,
    #[serde(default = "default_fd_nx")]
    pub fd_nx: usize,
    /// Optional pass threshold on the relative L²(Q) error in `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rel_error: Option<f64>,
}

fn default_mc_samples() -> usize {
    100_000
}

fn default_fd_nx() -> usize {
    2001
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamnetSection {
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianCheckSection {
    #[serde(default = "default_ham_samples")]
    pub samples: usize,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_ham_tol")]
    pub tol: f64,
    #[serde(default = "default_radius")]
    pub x_radius: f64,
    #[serde(default = "default_p_radius")]
    pub p_radius: f64,
    /// Also run every built-in family.
    #[serde(default)]
    pub builtins: bool,
    /// Harness self-test: multiply γ in the closed form only. Rows must FAIL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupt_gamma: Option<f64>,
}

fn default_ham_samples() -> usize {
    200
}

fn default_grid_n() -> usize {
    10_000
}

fn default_ham_tol() -> f64 {
    1e-4
}

fn default_radius() -> f64 {
    2.0
}

fn default_p_radius() -> f64 {
    5.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksCheckSection {
    #[serde(default = "default_sq_points")]
    pub sq_points: usize,
    #[serde(default = "default_sq_depths")]
    pub sq_depths: Vec<usize>,
    #[serde(default = "default_prod_range")]
    pub prod_range: f64,
    #[serde(default = "default_prod_delta")]
    pub prod_delta: f64,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_matvec_dims")]
    pub matvec_dims: Vec<[usize; 2]>,
    /// Points for the Hamiltonian-network suite when a problem is given.
    #[serde(default = "default_hamnet_samples")]
    pub hamnet_samples: usize,
}

fn default_hamnet_samples() -> usize {
    10_000
}

fn default_sq_points() -> usize {
    100_000
}

fn default_sq_depths() -> Vec<usize> {
    (1..=8).collect()
}

fn default_prod_range() -> f64 {
    4.0
}

fn default_prod_delta() -> f64 {
    1e-3
}

fn default_pairs() -> usize {
    10_000
}

fn default_matvec_dims() -> Vec<[usize; 2]> {
    vec![[2, 2], [3, 5]]
}

impl Default for BlocksCheckSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl Default for HamiltonianCheckSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    /// Built-in family evaluated at each dimension (`p1` or `cole_hopf`).
    pub family: String,
    pub dims: Vec<usize>,
    #[serde(default = "default_scaling_points")]
    pub points: usize,
    /// Extra δ values swept at the smallest dimension.
    #[serde(default)]
    pub delta_sweep: Vec<f64>,
    #[serde(default = "default_max_slope")]
    pub max_slope: f64,
}

fn default_scaling_points() -> usize {
    10
}

fn default_max_slope() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub levels: Vec<usize>,
    /// Fixed branching; `None` ties it to the level as ⌊N^exponent⌋.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branching: Option<usize>,
    #[serde(default = "default_tie")]
    pub tie_exponent: f64,
    pub seeds: usize,
}

fn default_tie() -> f64 {
    1.0
}

impl ConvergenceSection {
    pub fn branching_for(&self, n: usize) -> usize {
        self.branching.unwrap_or_else(|| ((n as f64).powf(self.tie_exponent).floor() as usize).max(1))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.problem {
            let path = self.base_dir.join(p);
            if !path.is_file() {
                return Err(Error::Config(format!("problem file {} does not exist", path.display())));
            }
        }
        if let Some(q) = &self.domain {
            q.validate()?;
        }
        if !self.t.is_finite() {
            return Err(Error::Config("t must be finite".into()));
        }
        Ok(())
    }

    pub fn load_problem(&self) -> Result<ControlProblem> {
        let p = self.problem.as_ref().ok_or_else(|| Error::Config("this command needs a problem file".into()))?;
        ControlProblem::from_file(&self.base_dir.join(p))
    }

    pub fn mlp_section(&self) -> Result<&MlpSection> {
        self.mlp.as_ref().ok_or_else(|| Error::Config("missing [mlp] section".into()))
    }

    /// Explicit points, or uniform samples from the domain box.
    pub fn evaluation_points(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        let pts = match (&self.points, &self.domain) {
            (Some(p), _) => p.clone(),
            (None, Some(q)) => q.sample(self.seed),
            (None, None) => return Err(Error::Config("give `points` or a `[domain]` box".into())),
        };
        if let Some(bad) = pts.iter().find(|p| p.len() != d) {
            return Err(Error::Config(format!("point of length {} in a d = {d} problem", bad.len())));
        }
        Ok(pts)
    }
}
