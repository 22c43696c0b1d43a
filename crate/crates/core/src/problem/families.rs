//! Built-in problem families. Every component map is constant or affine, so
//! exact networks exist for all of them.

use super::{ControlProblem, MapSpec, PsiSpec, BSPLINE_SUP_DERIV};
use crate::error::{Error, Result};

/// Drift-free problem with identity control gain: f₁ = 0, f₂ = I, γ = ½,
/// L̄ = 0, controls in [−1, 1]^d.
pub fn p1(d: usize, psi: PsiSpec) -> ControlProblem {
    ControlProblem {
        family: "p1".into(),
        d,
        dbar: d,
        gamma: 0.5,
        box_lo: vec![-1.0; d],
        box_hi: vec![1.0; d],
        t_f: 1.0,
        growth_q: 1.0,
        psi,
        f1: MapSpec::Zero,
        f2: MapSpec::Identity,
        lbar: MapSpec::Zero,
        r_override: None,
        bound_constants: None,
    }
}

/// H ≡ 0: no drift, no control gain, no running cost, 0 in the box, linear
/// terminal cost. The truncation level is the exact gradient sup, max(‖g‖_∞, 1).
pub fn heat(g: Vec<f64>) -> ControlProblem {
    let d = g.len();
    let r = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    ControlProblem {
        family: "heat".into(),
        d,
        dbar: 1,
        gamma: 0.5,
        box_lo: vec![-1.0],
        box_hi: vec![1.0],
        t_f: 1.0,
        growth_q: 1.0,
        psi: PsiSpec::Linear { g },
        f1: MapSpec::Zero,
        f2: MapSpec::Zero,
        lbar: MapSpec::Zero,
        r_override: Some(r),
        bound_constants: None,
    }
}

/// Cole–Hopf eligible instance: f₁ = 0, f₂ = I, γ = ½, L̄ = 0, box
/// [−4, 4]^d, Ψ = (c/d)·ΣB(xᵢ). The value function is a weighted average of
/// shifts of Ψ, so |∂ᵢV| ≤ sup|∂ᵢΨ| = 2|c|/(3d), which is the truncation level.
pub fn cole_hopf(d: usize, c: f64) -> ControlProblem {
    let mut p = p1(d, PsiSpec::Bspline { c });
    p.family = "cole_hopf".into();
    p.box_lo = vec![-4.0; d];
    p.box_hi = vec![4.0; d];
    p.r_override = Some(c.abs() * BSPLINE_SUP_DERIV / d as f64);
    p
}

/// Constant drift and a dense constant gain with fewer controls than states,
/// constant running cost, asymmetric box.
pub fn drift() -> ControlProblem {
    ControlProblem {
        family: "drift".into(),
        d: 3,
        dbar: 2,
        gamma: 0.7,
        box_lo: vec![-0.5, -1.5],
        box_hi: vec![1.0, 0.25],
        t_f: 1.0,
        growth_q: 1.0,
        psi: PsiSpec::Bspline { c: 1.0 },
        f1: MapSpec::Constant { value: vec![0.3, -0.2, 0.1] },
        f2: MapSpec::Constant { value: vec![1.0, 0.5, -0.3, 0.8, 0.2, -1.1] },
        lbar: MapSpec::Constant { value: vec![0.4] },
        r_override: None,
        bound_constants: None,
    }
}

/// Time-dependent drift and gain, running cost affine in the state, more
/// controls than states.
pub fn timevar() -> ControlProblem {
    ControlProblem {
        family: "timevar".into(),
        d: 2,
        dbar: 3,
        gamma: 0.3,
        box_lo: vec![-1.0, -0.5, -2.0],
        box_hi: vec![1.0, 1.5, 0.5],
        t_f: 0.8,
        growth_q: 1.0,
        psi: PsiSpec::Linear { g: vec![0.6, -0.4] },
        f1: MapSpec::Affine {
            weight: vec![vec![1.0, 0.0, 0.0], vec![-0.5, 0.0, 0.0]],
            bias: vec![0.2, 0.1],
        },
        f2: MapSpec::Affine {
            weight: vec![
                vec![0.5, 0.0, 0.0],
                vec![0.0, 0.0, 0.0],
                vec![-0.2, 0.0, 0.0],
                vec![0.0, 0.0, 0.0],
                vec![0.3, 0.0, 0.0],
                vec![0.1, 0.0, 0.0],
            ],
            bias: vec![1.0, 0.4, 0.0, -0.6, 0.9, 0.2],
        },
        lbar: MapSpec::Affine { weight: vec![vec![0.5, 0.3, -0.2]], bias: vec![0.1] },
        r_override: Some(1.5),
        bound_constants: None,
    }
}

/// One representative of each built-in family at small dimension.
pub fn all_builtin() -> Vec<ControlProblem> {
    vec![
        p1(2, PsiSpec::Bspline { c: 1.0 }),
        heat(vec![1.0, -0.5, 0.25]),
        cole_hopf(3, 2.0),
        drift(),
        timevar(),
    ]
}

/// Family constructor by name at dimension `d`, used by dimension sweeps.
pub fn by_name(name: &str, d: usize) -> Result<ControlProblem> {
    match name {
        "p1" => Ok(p1(d, PsiSpec::Bspline { c: 1.0 })),
        "heat" => {
            let mut g = vec![0.0; d];
            g[0] = 1.0;
            Ok(heat(g))
        }
        "cole_hopf" => Ok(cole_hopf(d, 1.0)),
        other => Err(Error::Config(format!("family `{other}` has no dimension-parameterized constructor"))),
    }
}
