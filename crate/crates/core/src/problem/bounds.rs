//! A-priori bounds on |V| and ‖∇V‖₂ and Lipschitz constants of H_R.

use serde::{Deserialize, Serialize};

use super::{ControlProblem, TruncationLevel};
use crate::error::{Error, Result};
use crate::norms;

/// Suprema and Lipschitz constants entering the a-priori bounds. Suprema
/// are over t ∈ [0, t_f] and x ∈ R^d; matrix norms are entrywise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    /// sup |Ψ|
    pub sup_psi: f64,
    /// sup ‖∇Ψ‖₂
    pub sup_grad_psi: f64,
    /// sup |L̄|
    pub sup_lbar: f64,
    /// sup ‖∇ₓL̄‖₂
    pub sup_grad_lbar: f64,
    /// sup ‖f₁‖₂
    pub sup_f1: f64,
    /// sup ‖f₂‖₂
    pub sup_f2: f64,
    /// sup ‖f₁‖₁
    pub sup_f1_l1: f64,
    /// sup Σᵢⱼ |f₂ᵢⱼ|
    pub sup_f2_l1: f64,
    /// ‖·‖₂-Lipschitz constant of f₁ in x
    pub lip_f1: f64,
    /// ‖·‖₂-Lipschitz constant of f₂ in x
    pub lip_f2: f64,
}

/// Lipschitz constants of H_R: `cx` with respect to ‖Δx‖₁, `cp` with
/// respect to ‖Δp‖_∞.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub cx: f64,
    pub cp: f64,
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sup_psi,
            self.sup_grad_psi,
            self.sup_lbar,
            self.sup_grad_lbar,
            self.sup_f1,
            self.sup_f2,
            self.sup_f1_l1,
            self.sup_f2_l1,
            self.lip_f1,
            self.lip_f2,
        ];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("bound constants must be finite and non-negative".into()))
        }
    }

    /// Exact constants for component maps that are bounded: x-independent
    /// f₁, f₂ (affine in t, so suprema sit at the time endpoints), bounded
    /// L̄ and Ψ. Returns `None` when any supremum is infinite.
    pub fn derive(prob: &ControlProblem) -> Option<Self> {
        let (d, dbar, tf) = (prob.d, prob.dbar, prob.t_f);
        let f1 = |f: fn(&[f64]) -> f64| prob.f1.sup_of(d, 1, tf, f);
        let f2 = |f: fn(&[f64]) -> f64| prob.f2.sup_of(d * dbar, dbar, tf, f);
        Some(Self {
            sup_psi: prob.psi.sup_abs()?,
            sup_grad_psi: prob.psi.sup_grad_l2(d),
            sup_lbar: prob.lbar.sup_of(1, 1, tf, norms::linf)?,
            sup_grad_lbar: prob.lbar.grad_x_norm(d),
            sup_f1: f1(norms::l2)?,
            sup_f2: f2(norms::l2)?,
            sup_f1_l1: f1(norms::l1)?,
            sup_f2_l1: f2(norms::l1)?,
            lip_f1: prob.f1.lipschitz_x(d, d),
            lip_f2: prob.f2.lipschitz_x(d * dbar, d),
        })
    }
}

/// Evaluates the two-stage gradient bound: first the |V| bound with
/// c₀ = sup‖f₁‖₂, then the ‖∇V‖₂ bound with
/// c₁ = ¼ + sup‖f₁‖₂ + sup‖f₂‖₂·max(‖a‖_∞, ‖b‖_∞) + C₁.
///
/// The box may be degenerate here (a = b is allowed).
pub fn gradient_bound_from(c: &BoundConstants, gamma: f64, a: &[f64], b: &[f64], t_f: f64) -> f64 {
    let box_sq = norms::l2(a).powi(2).max(norms::l2(b).powi(2));
    let box_inf = norms::linf(a).max(norms::linf(b));
    let c0 = c.sup_f1;
    let v_bound = (c0 * t_f).exp() * (c.sup_psi + t_f * (c.sup_lbar + gamma * box_sq));
    let c1 = 0.25 + c.sup_f1 + c.sup_f2 * box_inf + c.lip_f1;
    (c1 * t_f).exp()
        * (c.sup_grad_psi
            + t_f * v_bound * (c.sup_f2 + c.lip_f2)
            + t_f * (c.sup_lbar + c.sup_grad_lbar + gamma * box_sq * box_inf))
}

impl ControlProblem {
    fn require_constants(&self) -> Result<BoundConstants> {
        self.bound_constants().ok_or_else(|| {
            Error::ConstantsRequired(format!(
                "family `{}` has unbounded component maps; supply bound_constants",
                self.family
            ))
        })
    }

    /// The a-priori bound on sup ‖∇V‖₂, used as the default truncation level.
    pub fn gradient_bound(&self) -> Result<TruncationLevel> {
        let c = self.require_constants()?;
        TruncationLevel::new(gradient_bound_from(&c, self.gamma, &self.box_lo, &self.box_hi, self.t_f))
    }

    /// Upper bounds on the Lipschitz constants of H_R, with ‖p‖₂ ≤ √d·R.
    pub fn hamiltonian_lipschitz_estimate(&self, r: TruncationLevel) -> Result<LipschitzEstimate> {
        let c = self.require_constants()?;
        let m = self.box_radius();
        let m_inf = norms::linf(&m);
        let m_2 = norms::l2(&m);
        let cp = if c.sup_f2_l1 == 0.0 {
            c.sup_f1_l1
        } else {
            c.sup_f1_l1 + c.sup_f2_l1 * m_inf * (2.0 + 1.0 / (2.0 * self.gamma))
        };
        let p = (self.d as f64).sqrt() * r.value();
        let g2 = 2.0 * self.gamma;
        let cx = p * (c.lip_f1 + c.lip_f2 * (m_2 + c.sup_f2 * p / g2)) + c.sup_grad_lbar + c.lip_f2 * p / g2 * m_2;
        Ok(LipschitzEstimate { cx, cp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_constants() -> BoundConstants {
        BoundConstants {
            sup_psi: 0.0,
            sup_grad_psi: 0.0,
            sup_lbar: 0.0,
            sup_grad_lbar: 0.0,
            sup_f1: 0.0,
            sup_f2: 0.0,
            sup_f1_l1: 0.0,
            sup_f2_l1: 0.0,
            lip_f1: 0.0,
            lip_f2: 0.0,
        }
    }

    #[test]
    fn quarter_exponent_case() {
        let c = BoundConstants { sup_grad_psi: 1.0, ..zero_constants() };
        let r = gradient_bound_from(&c, 0.5, &[0.0], &[0.0], 1.0);
        assert!((r - 0.25f64.exp()).abs() < 1e-15);
        assert!((r - 1.2840).abs() < 1e-4);
    }

    #[test]
    fn short_horizon_limit() {
        let c = BoundConstants { sup_grad_psi: 0.7, sup_psi: 3.0, sup_f1: 2.0, sup_f2: 1.0, ..zero_constants() };
        let r = gradient_bound_from(&c, 0.5, &[-1.0], &[1.0], 1e-12);
        assert!((r - 0.7).abs() < 1e-9);
    }
}
