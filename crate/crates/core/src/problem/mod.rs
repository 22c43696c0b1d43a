//! HJB problem instances with control-affine dynamics and quadratic control
//! cost on a box, and exact evaluation of the pointwise optimal control, the
//! Hamiltonian, its truncation, and the a-priori gradient bound.

mod bounds;
pub mod families;
mod maps;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

pub use bounds::{gradient_bound_from, BoundConstants, LipschitzEstimate};
pub use maps::{bspline, bspline_deriv, MapSpec, PsiSpec, BSPLINE_KNOTS, BSPLINE_SUP_DERIV, BSPLINE_WEIGHTS};

/// One HJB instance: dynamics f₁ + f₂u, running cost L̄ + γ‖u‖², controls in
/// the box [a, b], terminal cost Ψ at time t_f.
///
/// The serialized field names form the problem-file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlProblem {
    #[serde(default = "default_family")]
    pub family: String,
    pub d: usize,
    pub dbar: usize,
    pub gamma: f64,
    #[serde(rename = "a")]
    pub box_lo: Vec<f64>,
    #[serde(rename = "b")]
    pub box_hi: Vec<f64>,
    pub t_f: f64,
    #[serde(rename = "q", default = "default_q")]
    pub growth_q: f64,
    pub psi: PsiSpec,
    pub f1: MapSpec,
    pub f2: MapSpec,
    pub lbar: MapSpec,
    #[serde(rename = "R_override", default, skip_serializing_if = "Option::is_none")]
    pub r_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_constants: Option<BoundConstants>,
}

fn default_family() -> String {
    "custom".into()
}

fn default_q() -> f64 {
    1.0
}

/// Componentwise clipping radius R for the costate argument.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_finite() && r > 0.0 {
            Ok(Self(r))
        } else {
            Err(Error::InvalidParameter(format!("truncation level must be positive and finite, got {r}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TruncationLevel {
    type Error = Error;
    fn try_from(r: f64) -> Result<Self> {
        Self::new(r)
    }
}

impl From<TruncationLevel> for f64 {
    fn from(r: TruncationLevel) -> f64 {
        r.0
    }
}

/// χ_R applied componentwise.
pub fn clip(p: &[f64], r: TruncationLevel) -> Result<Vec<f64>> {
    check_finite("clip argument", p)?;
    Ok(p.iter().map(|&v| clip_scalar(v, r.0)).collect())
}

#[inline]
fn clip_scalar(v: f64, r: f64) -> f64 {
    v.max(-r).min(r)
}

impl ControlProblem {
    /// Parses a problem file and validates it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let prob: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        prob.validate()?;
        Ok(prob)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read problem file {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.d == 0 || self.dbar == 0 {
            return bad("d and dbar must be positive".into());
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.t_f.is_finite() && self.t_f > 0.0) {
            return bad(format!("t_f must be positive, got {}", self.t_f));
        }
        if !(self.growth_q >= 1.0 && self.growth_q.is_finite()) {
            return bad(format!("q must be at least 1, got {}", self.growth_q));
        }
        check_len("box a", self.dbar, self.box_lo.len())?;
        check_len("box b", self.dbar, self.box_hi.len())?;
        for (i, (a, b)) in self.box_lo.iter().zip(&self.box_hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return bad(format!("box coordinate {i}: need finite a < b, got [{a}, {b}]"));
            }
        }
        self.f1.validate("f1", self.d, self.d, false)?;
        self.f2.validate("f2", self.d * self.dbar, self.d, true)?;
        self.lbar.validate("lbar", 1, self.d, false)?;
        self.psi.validate(self.d)?;
        if let Some(r) = self.r_override {
            TruncationLevel::new(r)?;
        }
        if let Some(c) = &self.bound_constants {
            c.validate()?;
        }
        Ok(())
    }

    fn check_point(&self, t: f64, x: &[f64], p: &[f64]) -> Result<()> {
        check_len("state x", self.d, x.len())?;
        check_len("costate p", self.d, p.len())?;
        check_finite("time t", &[t])?;
        check_finite("state x", x)?;
        check_finite("costate p", p)?;
        if t < 0.0 || t > self.t_f {
            return Err(Error::InvalidParameter(format!("time {t} outside [0, {}]", self.t_f)));
        }
        Ok(())
    }

    #[inline]
    pub fn f1_entry(&self, k: usize, t: f64, x: &[f64]) -> f64 {
        self.f1.entry(k, 1, t, x)
    }

    /// Entry (i, j) of f₂(t, x).
    #[inline]
    pub fn f2_entry(&self, i: usize, j: usize, t: f64, x: &[f64]) -> f64 {
        self.f2.entry(i * self.dbar + j, self.dbar, t, x)
    }

    #[inline]
    pub fn lbar_value(&self, t: f64, x: &[f64]) -> f64 {
        self.lbar.entry(0, 1, t, x)
    }

    pub fn f1_value(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.f1.eval(self.d, 1, t, x)
    }

    /// f₂(t, x) as a row-major `d × dbar` vector.
    pub fn f2_value(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.f2.eval(self.d * self.dbar, self.dbar, t, x)
    }

    pub fn psi_value(&self, x: &[f64]) -> f64 {
        self.psi.eval(x)
    }

    pub fn psi_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.psi.gradient(x)
    }

    /// s = f₂(t, x)ᵀ p.
    fn control_slope(&self, t: f64, x: &[f64], p: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.dbar];
        match &self.f2 {
            MapSpec::Zero => {}
            MapSpec::Identity => {
                for (j, sj) in s.iter_mut().enumerate().take(self.d) {
                    *sj = p[j];
                }
            }
            f2 => {
                for (i, pi) in p.iter().enumerate() {
                    for (j, sj) in s.iter_mut().enumerate() {
                        *sj += f2.entry(i * self.dbar + j, self.dbar, t, x) * pi;
                    }
                }
            }
        }
        s
    }

    fn drift_term(&self, t: f64, x: &[f64], p: &[f64]) -> f64 {
        match &self.f1 {
            MapSpec::Zero => 0.0,
            f1 => p.iter().enumerate().map(|(k, pk)| pk * f1.entry(k, 1, t, x)).sum(),
        }
    }

    fn optimal_control_unchecked(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .enumerate()
            .map(|(j, sj)| (-sj / (2.0 * self.gamma)).max(self.box_lo[j]).min(self.box_hi[j]))
            .collect()
    }

    /// ū_i = min{max{−(f₂ᵀp)_i / (2γ), a_i}, b_i}.
    pub fn optimal_control(&self, t: f64, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(t, x, p)?;
        Ok(self.optimal_control_unchecked(&self.control_slope(t, x, p)))
    }

    /// H = pᵀf(t, x, ū) + L̄(t, x) + γ‖ū‖² without argument checks.
    pub(crate) fn hamiltonian_unchecked(&self, t: f64, x: &[f64], p: &[f64]) -> f64 {
        let s = self.control_slope(t, x, p);
        let u = self.optimal_control_unchecked(&s);
        let mut h = self.drift_term(t, x, p);
        for (sj, uj) in s.iter().zip(&u) {
            h += sj * uj + self.gamma * uj * uj;
        }
        h + self.lbar_value(t, x)
    }

    pub fn hamiltonian(&self, t: f64, x: &[f64], p: &[f64]) -> Result<f64> {
        self.check_point(t, x, p)?;
        Ok(self.hamiltonian_unchecked(t, x, p))
    }

    pub(crate) fn truncated_hamiltonian_unchecked(&self, r: TruncationLevel, t: f64, x: &[f64], p: &[f64]) -> f64 {
        let q: Vec<f64> = p.iter().map(|&v| clip_scalar(v, r.0)).collect();
        self.hamiltonian_unchecked(t, x, &q)
    }

    /// H_R(t, x, p) = H(t, x, χ_R(p)).
    pub fn truncated_hamiltonian(&self, r: TruncationLevel, t: f64, x: &[f64], p: &[f64]) -> Result<f64> {
        self.check_point(t, x, p)?;
        Ok(self.truncated_hamiltonian_unchecked(r, t, x, p))
    }

    /// Minimum of pᵀf + L over the tensor grid with `grid_n` points per control
    /// coordinate, computed one coordinate at a time.
    pub fn brute_force_hamiltonian(&self, t: f64, x: &[f64], p: &[f64], grid_n: usize) -> Result<f64> {
        self.check_point(t, x, p)?;
        if grid_n < 2 {
            return Err(Error::InvalidParameter(format!("grid_n must be at least 2, got {grid_n}")));
        }
        let s = self.control_slope(t, x, p);
        let mut total = self.drift_term(t, x, p) + self.lbar_value(t, x);
        for (j, sj) in s.iter().enumerate() {
            let (a, b) = (self.box_lo[j], self.box_hi[j]);
            let step = (b - a) / (grid_n - 1) as f64;
            let mut best = f64::INFINITY;
            for k in 0..grid_n {
                let v = if k == grid_n - 1 { b } else { a + k as f64 * step };
                best = best.min(sj * v + self.gamma * v * v);
            }
            total += best;
        }
        Ok(total)
    }

    /// Bound constants: the explicit record if present, otherwise those derived
    /// exactly from the component maps when every supremum is finite.
    pub fn bound_constants(&self) -> Option<BoundConstants> {
        self.bound_constants.clone().or_else(|| BoundConstants::derive(self))
    }

    /// The default truncation level: `R_override` if set, otherwise the
    /// a-priori gradient bound.
    pub fn truncation_level(&self) -> Result<TruncationLevel> {
        match self.r_override {
            Some(r) => TruncationLevel::new(r),
            None => self.gradient_bound(),
        }
    }

    /// Sup over time of the x-independent f₂ entries, entrywise max |f₂_ij|.
    pub fn sup_f2_entry(&self) -> Option<f64> {
        self.f2.sup_of(self.d * self.dbar, self.dbar, self.t_f, crate::norms::linf)
    }

    pub fn sup_f1_entry(&self) -> Option<f64> {
        self.f1.sup_of(self.d, 1, self.t_f, crate::norms::linf)
    }

    /// max(|a_i|, |b_i|) per control coordinate.
    pub fn box_radius(&self) -> Vec<f64> {
        self.box_lo.iter().zip(&self.box_hi).map(|(a, b)| a.abs().max(b.abs())).collect()
    }

    /// Whether the control set contains the origin.
    pub fn box_contains_zero(&self) -> bool {
        self.box_lo.iter().zip(&self.box_hi).all(|(a, b)| *a <= 0.0 && 0.0 <= *b)
    }
}
