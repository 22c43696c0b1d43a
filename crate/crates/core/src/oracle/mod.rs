//! Independent reference solutions: Cole–Hopf and heat-semigroup Monte
//! Carlo, a one-dimensional finite-difference HJB solver, and the check that
//! decides when the unconstrained Cole–Hopf Hamiltonian is the true one.

mod fd;
mod mc;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::problem::{ControlProblem, MapSpec, TruncationLevel};

pub use fd::{fd_solve_1d, FdField, FdGrid, FdSolution};
pub use mc::{cole_hopf_value, heat_value};

/// Why an oracle does not apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum InvalidReason {
    /// The clamp can activate: the needed radius exceeds the box on one side.
    ClampMayActivate { coordinate: usize, needed: f64, lo: f64, hi: f64 },
    /// The control gain is unbounded (depends on the state).
    UnboundedGain,
    /// A bound evaluated to a non-finite number.
    NonFiniteBound,
    /// The problem is outside the oracle's family.
    IneligibleFamily { detail: String },
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::ClampMayActivate { coordinate, needed, lo, hi } => write!(
                f,
                "clamp_may_activate: coordinate {coordinate} needs radius {needed} but the box is [{lo}, {hi}]"
            ),
            InvalidReason::UnboundedGain => write!(f, "unbounded_gain: f2 depends on the state"),
            InvalidReason::NonFiniteBound => write!(f, "non_finite_bound"),
            InvalidReason::IneligibleFamily { detail } => write!(f, "ineligible_family: {detail}"),
        }
    }
}

/// Reference value and gradient with an error bar: the Monte Carlo standard
/// error, or the grid-error estimate for finite differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub oracle: String,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub stderr: f64,
    pub grad_stderr: Vec<f64>,
    pub samples: usize,
    pub valid: bool,
    pub reason: Option<InvalidReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityCheck {
    pub pass: bool,
    pub reason: Option<InvalidReason>,
}

/// PASS iff for every control coordinate i the box contains
/// [−rᵢ, rᵢ] with rᵢ = R·sup Σₖ|f₂ₖᵢ|/(2γ), so −(f₂ᵀχ_R(p))ᵢ/(2γ) never
/// reaches the box boundary. A vanishing gain always passes.
pub fn oracle_validity_check(prob: &ControlProblem, r: TruncationLevel) -> ValidityCheck {
    let fail = |reason| ValidityCheck { pass: false, reason: Some(reason) };
    if prob.f2.is_zero() {
        return ValidityCheck { pass: true, reason: None };
    }
    let (d, dbar) = (prob.d, prob.dbar);
    let Some([v0, v1]) = prob.f2.endpoint_values(d * dbar, dbar, prob.t_f) else {
        return fail(InvalidReason::UnboundedGain);
    };
    for i in 0..dbar {
        let col = |v: &[f64]| (0..d).map(|k| v[k * dbar + i].abs()).sum::<f64>();
        let needed = r.value() * col(&v0).max(col(&v1)) / (2.0 * prob.gamma);
        if !needed.is_finite() {
            return fail(InvalidReason::NonFiniteBound);
        }
        let (lo, hi) = (prob.box_lo[i], prob.box_hi[i]);
        if !(lo <= -needed && needed <= hi) {
            return fail(InvalidReason::ClampMayActivate { coordinate: i, needed, lo, hi });
        }
    }
    ValidityCheck { pass: true, reason: None }
}

fn f2_is_identity(prob: &ControlProblem) -> bool {
    if prob.d != prob.dbar {
        return false;
    }
    match &prob.f2 {
        MapSpec::Identity => true,
        MapSpec::Constant { value } => value
            .iter()
            .enumerate()
            .all(|(k, v)| *v == if k / prob.dbar == k % prob.dbar { 1.0 } else { 0.0 }),
        _ => false,
    }
}

/// Eligibility for the Cole–Hopf oracle: f₁ ≡ 0, f₂ ≡ I, L̄ ≡ 0.
pub fn cole_hopf_eligibility(prob: &ControlProblem) -> Option<InvalidReason> {
    let detail = if !prob.f1.is_zero() {
        "f1 must vanish"
    } else if !prob.lbar.is_zero() {
        "lbar must vanish"
    } else if !f2_is_identity(prob) {
        "f2 must be the identity"
    } else {
        return None;
    };
    Some(InvalidReason::IneligibleFamily { detail: detail.into() })
}

/// Eligibility for the heat oracle: H ≡ 0, i.e. f₁ ≡ 0, f₂ ≡ 0, L̄ ≡ 0 and
/// 0 in the box.
pub fn heat_eligibility(prob: &ControlProblem) -> Option<InvalidReason> {
    let detail = if !prob.f1.is_zero() {
        "f1 must vanish"
    } else if !prob.f2.is_zero() {
        "f2 must vanish"
    } else if !prob.lbar.is_zero() {
        "lbar must vanish"
    } else if !prob.box_contains_zero() {
        "the control box must contain 0"
    } else {
        return None;
    };
    Some(InvalidReason::IneligibleFamily { detail: detail.into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::families;

    #[test]
    fn validity_examples() {
        let r = TruncationLevel::new(1.0).unwrap();
        let mut p = families::cole_hopf(2, 1.0);
        assert!(oracle_validity_check(&p, r).pass);
        p.box_lo = vec![-0.1; 2];
        p.box_hi = vec![0.1; 2];
        let c = oracle_validity_check(&p, r);
        assert!(!c.pass);
        assert!(matches!(c.reason, Some(InvalidReason::ClampMayActivate { coordinate: 0, .. })));
        let h = families::heat(vec![1.0, 2.0]);
        assert!(oracle_validity_check(&h, r).pass);
    }

    #[test]
    fn eligibility() {
        assert!(cole_hopf_eligibility(&families::cole_hopf(3, 1.0)).is_none());
        assert!(cole_hopf_eligibility(&families::drift()).is_some());
        assert!(heat_eligibility(&families::heat(vec![1.0])).is_none());
        assert!(heat_eligibility(&families::p1(2, crate::problem::PsiSpec::Bspline { c: 1.0 })).is_some());
    }
}
