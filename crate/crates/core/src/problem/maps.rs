//! Component maps f₁, f₂, L̄ and the terminal cost Ψ.
//!
//! Every component map takes `(t, x)` and produces a flat vector: `d` entries
//! for f₁, `d·dbar` row-major entries for f₂, one entry for L̄. The `affine`
//! kind stores a `rows × (1 + d)` weight matrix whose first column multiplies
//! `t`, so every map has an exact single-layer network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms;

/// A map `(t, x) ↦ R^rows` of one of the supported exact forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum MapSpec {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// Only meaningful for f₂: ones on the diagonal of the `d × dbar` matrix.
    Identity,
    Affine {
        weight: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
}

impl MapSpec {
    /// Checks the parameters against the expected output shape.
    pub fn validate(&self, name: &str, rows: usize, d: usize, allow_identity: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{name}: {msg}")));
        match self {
            MapSpec::Zero => Ok(()),
            MapSpec::Identity if allow_identity => Ok(()),
            MapSpec::Identity => bad("identity kind is only available for f2".into()),
            MapSpec::Constant { value } => {
                if value.len() != rows {
                    return bad(format!("constant has {} entries, expected {rows}", value.len()));
                }
                if !value.iter().all(|v| v.is_finite()) {
                    return bad("constant has non-finite entries".into());
                }
                Ok(())
            }
            MapSpec::Affine { weight, bias } => {
                if weight.len() != rows || bias.len() != rows {
                    return bad(format!("affine map needs {rows} weight rows and bias entries"));
                }
                if weight.iter().any(|r| r.len() != d + 1) {
                    return bad(format!("affine weight rows must have {} columns (t first)", d + 1));
                }
                let finite = weight.iter().flatten().chain(bias).all(|v| v.is_finite());
                if !finite {
                    return bad("affine map has non-finite entries".into());
                }
                Ok(())
            }
        }
    }

    /// Evaluates entry `k` of the map at `(t, x)`. `cols` is the row length used
    /// to place identity ones (dbar for f₂, unused otherwise).
    #[inline]
    pub fn entry(&self, k: usize, cols: usize, t: f64, x: &[f64]) -> f64 {
        match self {
            MapSpec::Zero => 0.0,
            MapSpec::Constant { value } => value[k],
            MapSpec::Identity => {
                if k / cols == k % cols {
                    1.0
                } else {
                    0.0
                }
            }
            MapSpec::Affine { weight, bias } => {
                let w = &weight[k];
                let mut acc = w[0] * t;
                for (wi, xi) in w[1..].iter().zip(x) {
                    acc += wi * xi;
                }
                acc + bias[k]
            }
        }
    }

    pub fn eval(&self, rows: usize, cols: usize, t: f64, x: &[f64]) -> Vec<f64> {
        (0..rows).map(|k| self.entry(k, cols, t, x)).collect()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            MapSpec::Zero => true,
            MapSpec::Constant { value } => value.iter().all(|v| *v == 0.0),
            MapSpec::Identity => false,
            MapSpec::Affine { weight, bias } => {
                weight.iter().flatten().all(|v| *v == 0.0) && bias.iter().all(|v| *v == 0.0)
            }
        }
    }

    /// True when the map does not depend on `x`.
    pub fn x_independent(&self) -> bool {
        match self {
            MapSpec::Affine { weight, .. } => weight.iter().all(|r| r[1..].iter().all(|v| *v == 0.0)),
            _ => true,
        }
    }

    /// The dense `rows × (1 + d)` weight and bias of the map as an affine
    /// function of `(t, x)`.
    pub fn affine_form(&self, rows: usize, cols: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
        let mut w = vec![0.0; rows * (d + 1)];
        let mut b = vec![0.0; rows];
        match self {
            MapSpec::Zero => {}
            MapSpec::Constant { value } => b.copy_from_slice(value),
            MapSpec::Identity => {
                for (k, bk) in b.iter_mut().enumerate() {
                    if k / cols == k % cols {
                        *bk = 1.0;
                    }
                }
            }
            MapSpec::Affine { weight, bias } => {
                for (k, row) in weight.iter().enumerate() {
                    w[k * (d + 1)..(k + 1) * (d + 1)].copy_from_slice(row);
                }
                b.copy_from_slice(bias);
            }
        }
        (w, b)
    }

    /// Values at the time endpoints for x-independent maps. Affine maps are
    /// affine in `t`, so entrywise suprema over `[0, t_f]` are attained at
    /// the endpoints. `None` if the map depends on `x`.
    pub fn endpoint_values(&self, rows: usize, cols: usize, t_f: f64) -> Option<[Vec<f64>; 2]> {
        if !self.x_independent() {
            return None;
        }
        let x0 = vec![0.0; self.x_len().unwrap_or(0)];
        Some([self.eval(rows, cols, 0.0, &x0), self.eval(rows, cols, t_f, &x0)])
    }

    fn x_len(&self) -> Option<usize> {
        match self {
            MapSpec::Affine { weight, .. } => weight.first().map(|r| r.len() - 1),
            _ => None,
        }
    }

    /// Sup over `t ∈ [0, t_f]` and all `x` of a convex function of the map
    /// value, or `None` when the map depends on `x` and the function is not
    /// bounded.
    pub fn sup_of(&self, rows: usize, cols: usize, t_f: f64, f: impl Fn(&[f64]) -> f64) -> Option<f64> {
        let [v0, v1] = self.endpoint_values(rows, cols, t_f)?;
        Some(f(&v0).max(f(&v1)))
    }

    /// Frobenius norm of the x-part of the weight: the ‖·‖₂-Lipschitz
    /// constant in `x`.
    pub fn lipschitz_x(&self, rows: usize, d: usize) -> f64 {
        let (w, _) = self.affine_form(rows, 1, d);
        w.chunks(d + 1).map(|r| r[1..].iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the x-gradient for a scalar affine map.
    pub fn grad_x_norm(&self, d: usize) -> f64 {
        self.lipschitz_x(1, d)
    }
}

/// Terminal cost Ψ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PsiSpec {
    /// Ψ(x) = gᵀx.
    Linear { g: Vec<f64> },
    /// Ψ(x) = (c/d)·Σᵢ B(xᵢ) with B the centered cubic B-spline.
    Bspline { c: f64 },
    /// Ψ(x) = value.
    Constant { value: f64 },
}

impl PsiSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            PsiSpec::Linear { g } => {
                if g.len() != d {
                    return Err(Error::InvalidParameter(format!(
                        "psi: linear coefficient has {} entries, expected {d}",
                        g.len()
                    )));
                }
                if !g.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidParameter("psi: non-finite coefficient".into()));
                }
            }
            PsiSpec::Bspline { c } | PsiSpec::Constant { value: c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidParameter("psi: non-finite parameter".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PsiSpec::Linear { g } => norms::dot(g, x),
            PsiSpec::Bspline { c } => {
                let s: f64 = x.iter().map(|&xi| bspline(xi)).sum();
                c / x.len() as f64 * s
            }
            PsiSpec::Constant { value } => *value,
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            PsiSpec::Linear { g } => g.clone(),
            PsiSpec::Bspline { c } => {
                let scale = c / x.len() as f64;
                x.iter().map(|&xi| scale * bspline_deriv(xi)).collect()
            }
            PsiSpec::Constant { .. } => vec![0.0; x.len()],
        }
    }

    /// sup |Ψ|, or `None` if unbounded.
    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            PsiSpec::Linear { g } => g.iter().all(|v| *v == 0.0).then_some(0.0),
            PsiSpec::Bspline { c } => Some(c.abs() * 2.0 / 3.0),
            PsiSpec::Constant { value } => Some(value.abs()),
        }
    }

    /// sup ‖∇Ψ‖₂.
    pub fn sup_grad_l2(&self, d: usize) -> f64 {
        match self {
            PsiSpec::Linear { g } => norms::l2(g),
            PsiSpec::Bspline { c } => c.abs() * BSPLINE_SUP_DERIV / (d as f64).sqrt(),
            PsiSpec::Constant { .. } => 0.0,
        }
    }

    /// sup ‖∇Ψ‖_∞.
    pub fn sup_grad_linf(&self, d: usize) -> f64 {
        match self {
            PsiSpec::Linear { g } => norms::linf(g),
            PsiSpec::Bspline { c } => c.abs() * BSPLINE_SUP_DERIV / d as f64,
            PsiSpec::Constant { .. } => 0.0,
        }
    }

    /// ‖·‖₁-Lipschitz constant of Ψ (sup ‖∇Ψ‖_∞).
    pub fn lipschitz_l1(&self, d: usize) -> f64 {
        self.sup_grad_linf(d)
    }
}

/// Centered cubic B-spline supported on [−2, 2] with B(0) = 2/3:
/// B(x) = (1/6)·Σ_{k=0}^{4} (−1)^k C(4,k) (x + 2 − k)₊³.
pub fn bspline(x: f64) -> f64 {
    let a = x.abs();
    if a >= 2.0 {
        0.0
    } else if a >= 1.0 {
        let u = 2.0 - a;
        u * u * u / 6.0
    } else {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    }
}

pub fn bspline_deriv(x: f64) -> f64 {
    let a = x.abs();
    let s = x.signum();
    if a >= 2.0 {
        0.0
    } else if a >= 1.0 {
        let u = 2.0 - a;
        -s * u * u / 2.0
    } else {
        s * (-2.0 * a + 1.5 * a * a)
    }
}

/// sup |B'|, attained at |x| = 2/3 where B'' changes sign.
pub const BSPLINE_SUP_DERIV: f64 = 2.0 / 3.0;

/// Coefficients of the truncated-power form of B: B(x) = Σ_k w_k (x − s_k)₊³.
pub const BSPLINE_KNOTS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
pub const BSPLINE_WEIGHTS: [f64; 5] = [1.0 / 6.0, -4.0 / 6.0, 1.0, -4.0 / 6.0, 1.0 / 6.0];

#[cfg(test)]
mod tests {
    use super::*;

    fn truncated_power_form(x: f64) -> f64 {
        BSPLINE_KNOTS
            .iter()
            .zip(BSPLINE_WEIGHTS)
            .map(|(s, w)| w * (x - s).max(0.0).powi(3))
            .sum()
    }

    #[test]
    fn bspline_matches_truncated_powers() {
        for k in -300..=300 {
            let x = k as f64 / 100.0;
            assert!((bspline(x) - truncated_power_form(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn bspline_derivative_matches_finite_differences() {
        let h = 1e-6;
        for k in -250..=250 {
            let x = k as f64 / 100.0 + 0.003;
            let fd = (bspline(x + h) - bspline(x - h)) / (2.0 * h);
            assert!((bspline_deriv(x) - fd).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn bspline_sup_values() {
        assert!((bspline(0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((bspline_deriv(2.0 / 3.0).abs() - BSPLINE_SUP_DERIV).abs() < 1e-15);
        let grid_max = (0..=6000)
            .map(|k| bspline_deriv(-2.0 + k as f64 / 1500.0).abs())
            .fold(0.0, f64::max);
        assert!((grid_max - BSPLINE_SUP_DERIV).abs() < 1e-9);
    }

    #[test]
    fn affine_entry_uses_time_column() {
        let m = MapSpec::Affine { weight: vec![vec![2.0, 1.0, -1.0]], bias: vec![0.5] };
        assert_eq!(m.entry(0, 1, 3.0, &[1.0, 4.0]), 6.0 + 1.0 - 4.0 + 0.5);
    }

    #[test]
    fn identity_places_ones_on_diagonal() {
        let m = MapSpec::Identity;
        assert_eq!(m.eval(6, 2, 0.0, &[0.0; 3]), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
