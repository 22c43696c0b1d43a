//! Network realizations of the truncated Hamiltonian H_R and of the feedback
//! policy, built from exact component networks with the netcalc calculus.

mod lipschitz;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::netcalc::{
    affine_postcompose, clamp_net, clip_net, compose, fan_out, linear_combination, matvec_net, parallelize,
    selection, sq_net, Activation, Layer, NeuralNet, SparseMatrix,
};
use crate::problem::{ControlProblem, MapSpec, PsiSpec, TruncationLevel, BSPLINE_KNOTS, BSPLINE_WEIGHTS};

pub use lipschitz::{validate_net_lipschitz, LipschitzProbe, LipschitzReport};

/// Certified approximation tolerances of the component networks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproxTolerances {
    pub f1: f64,
    pub f2: f64,
    pub lbar: f64,
    pub psi: f64,
}

/// Lipschitz constants of the component networks in x, measured as
/// sup |Δ output entry| / ‖Δx‖₁.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentLipschitz {
    pub f1_x: f64,
    pub f2_x: f64,
    pub lbar_x: f64,
    pub psi_x: f64,
}

/// Networks for f₁, f₂ (row-major), L̄ on inputs (t, x) and Ψ on x, with
/// their tolerances, Lipschitz constants and entrywise output ranges.
#[derive(Clone, Debug)]
pub struct ProblemNets {
    pub net_f1: NeuralNet,
    pub net_f2: NeuralNet,
    pub net_lbar: NeuralNet,
    pub net_psi: NeuralNet,
    pub deltas: ApproxTolerances,
    pub lipschitz: ComponentLipschitz,
    /// sup |f₁ entry| over the time horizon, if bounded.
    pub sup_f1: Option<f64>,
    /// sup |f₂ entry| over the time horizon, if bounded.
    pub sup_f2: Option<f64>,
}

fn map_net(map: &MapSpec, rows: usize, cols: usize, d: usize) -> NeuralNet {
    let (w, b) = map.affine_form(rows, cols, d);
    NeuralNet::affine(SparseMatrix::from_dense(rows, d + 1, &w), b)
}

fn max_x_weight(map: &MapSpec, rows: usize, cols: usize, d: usize) -> f64 {
    let (w, _) = map.affine_form(rows, cols, d);
    w.chunks(d + 1).flat_map(|r| r[1..].iter()).fold(0.0, |m, v| m.max(v.abs()))
}

/// Ψ as a network: exact for linear and constant Ψ; for the B-spline family a
/// single ReCU layer of truncated powers (x_i − s_k)₊³ over the five knots.
pub fn psi_net(psi: &PsiSpec, d: usize) -> NeuralNet {
    match psi {
        PsiSpec::Linear { g } => NeuralNet::affine(SparseMatrix::from_dense(1, d, g), vec![0.0]),
        PsiSpec::Constant { value } => NeuralNet::constant(d, vec![*value]),
        PsiSpec::Bspline { c } => {
            let k = BSPLINE_KNOTS.len();
            let mut hidden = Vec::with_capacity(k * d);
            let mut bias = Vec::with_capacity(k * d);
            let mut out = Vec::with_capacity(k * d);
            for i in 0..d {
                for (j, (s, w)) in BSPLINE_KNOTS.iter().zip(BSPLINE_WEIGHTS).enumerate() {
                    hidden.push((i * k + j, i, 1.0));
                    bias.push(-s);
                    out.push((0, i * k + j, c / d as f64 * w));
                }
            }
            NeuralNet::from_layers(vec![
                Layer::new(SparseMatrix::from_triplets(k * d, d, &hidden), bias, Activation::Recu),
                Layer::new(SparseMatrix::from_triplets(1, k * d, &out), vec![0.0], Activation::Linear),
            ])
        }
    }
}

impl ProblemNets {
    /// Exact single-layer networks for the built-in component maps.
    pub fn exact(prob: &ControlProblem) -> Result<Self> {
        prob.validate()?;
        let (d, dbar) = (prob.d, prob.dbar);
        Ok(Self {
            net_f1: map_net(&prob.f1, d, 1, d),
            net_f2: map_net(&prob.f2, d * dbar, dbar, d),
            net_lbar: map_net(&prob.lbar, 1, 1, d),
            net_psi: psi_net(&prob.psi, d),
            deltas: ApproxTolerances::default(),
            lipschitz: ComponentLipschitz {
                f1_x: max_x_weight(&prob.f1, d, 1, d),
                f2_x: max_x_weight(&prob.f2, d * dbar, dbar, d),
                lbar_x: max_x_weight(&prob.lbar, 1, 1, d),
                psi_x: prob.psi.lipschitz_l1(d),
            },
            sup_f1: prob.sup_f1_entry(),
            sup_f2: prob.sup_f2_entry(),
        })
    }

    fn check_shapes(&self, prob: &ControlProblem) -> Result<()> {
        let (d, dbar) = (prob.d, prob.dbar);
        check_len("f1 network input", d + 1, self.net_f1.input_dim())?;
        check_len("f1 network output", d, self.net_f1.output_dim())?;
        check_len("f2 network input", d + 1, self.net_f2.input_dim())?;
        check_len("f2 network output", d * dbar, self.net_f2.output_dim())?;
        check_len("lbar network input", d + 1, self.net_lbar.input_dim())?;
        check_len("lbar network output", 1, self.net_lbar.output_dim())?;
        check_len("psi network input", d, self.net_psi.input_dim())?;
        check_len("psi network output", 1, self.net_psi.output_dim())?;
        let t = &self.deltas;
        if [t.f1, t.f2, t.lbar, t.psi].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidParameter("component tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// Bounds on the Lipschitz constants of a constructed network: `cx` per
/// ‖Δx‖₁, `cp` per ‖Δp‖_∞.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetLipschitzBound {
    pub cx: f64,
    pub cp: f64,
}

/// Construction record of a Hamiltonian network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianNetMeta {
    pub delta: f64,
    pub truncation: f64,
    /// Range bound of the products f₂ᵀ·χ_R(p).
    pub range_inner: f64,
    /// Range bound of the products f₂·ũ.
    pub range_outer: f64,
    /// Range bound of the contraction χ_R(p)·w.
    pub range_contraction: f64,
    /// Tolerance of every product network.
    pub prod_delta: f64,
    /// Depth of the square networks in the quadratic control cost.
    pub sq_depth: usize,
    pub lipschitz: NetLipschitzBound,
}

/// The Hamiltonian network on inputs (t, x, p) with its construction record.
#[derive(Clone, Debug)]
pub struct HamiltonianNet {
    pub net: NeuralNet,
    pub meta: HamiltonianNetMeta,
}

fn sel(n: usize, range: std::ops::Range<usize>) -> NeuralNet {
    let idx: Vec<usize> = range.collect();
    NeuralNet::affine(selection(n, &idx), vec![0.0; idx.len()])
}

/// Permutes row-major d×dbar entries into row-major dbar×d (the transpose).
fn transpose_map(d: usize, dbar: usize) -> SparseMatrix {
    let t: Vec<(usize, usize, f64)> =
        (0..d).flat_map(|i| (0..dbar).map(move |j| (j * d + i, i * dbar + j, 1.0))).collect();
    SparseMatrix::from_triplets(d * dbar, d * dbar, &t)
}

fn require(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::ConstantsRequired(format!("{what} is unbounded; the product range needs a finite bound")))
}

/// Builds the network on (t, x, p) ∈ R^{1+2d} realizing
/// χ_R(p)ᵀ(f₁ + ×̃(f₂, ũ)) + L̄ + γ Σᵢ mᵢ² s(|ũᵢ|/mᵢ) with
/// ũ = clamp(−×̃(f₂ᵀ, χ_R(p))/(2γ), a, b) and mᵢ = max(|aᵢ|, |bᵢ|).
///
/// The tolerance is split between the product networks and the square
/// networks so that, for exact component networks, the realization differs
/// from H_R by at most `delta` at every input.
pub fn build_hamiltonian_net(
    pnets: &ProblemNets,
    prob: &ControlProblem,
    r: TruncationLevel,
    delta: f64,
) -> Result<HamiltonianNet> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    pnets.check_shapes(prob)?;
    let (d, dbar, gamma) = (prob.d, prob.dbar, prob.gamma);
    let (df, dbf) = (d as f64, dbar as f64);
    let rv = r.value();
    let sup_f2 = require(pnets.sup_f2, "f2")?;
    let sup_f1 = require(pnets.sup_f1, "f1")?;
    let m = prob.box_radius();
    let m_max = m.iter().fold(0.0f64, |a, v| a.max(*v));
    let m_sum: f64 = m.iter().sum();

    let f2_abs_sum = rv * df * dbf * sup_f2;
    let k_prod = df * (1.0 + rv * dbf) + f2_abs_sum * df / (2.0 * gamma) + df * m_sum;
    let prod_delta = (delta / (2.0 * k_prod)).min(0.5);
    let k_sq: f64 = gamma * m.iter().map(|v| v * v).sum::<f64>();
    let mut sq_depth = 1;
    while k_sq * 0.25f64.powi(sq_depth as i32 + 1) > delta / 2.0 {
        sq_depth += 1;
    }

    let range_inner = rv.max(sup_f2);
    let range_outer = sup_f2.max(m_max);
    let range_contraction = rv.max(sup_f1 + dbf * (sup_f2 * m_max + prod_delta));

    let t = d + 1;
    let n_in = t + d;

    // (t, x, p) ↦ (t, x, χ_R(p))
    let stage_a = fan_out(&[&sel(n_in, 0..t), &compose(&clip_net(rv, d)?, &sel(n_in, t..n_in))?])?;

    // (tx, q) ↦ (tx, q, s) with s ≈ f₂ᵀ q
    let n_b = t + d;
    let f2_t = affine_postcompose(&pnets.net_f2, &transpose_map(d, dbar), &vec![0.0; d * dbar])?;
    let inner_args = fan_out(&[&compose(&f2_t, &sel(n_b, 0..t))?, &sel(n_b, t..n_b)])?;
    let inner = compose(&matvec_net(dbar, d, range_inner, prod_delta)?, &inner_args)?;
    let stage_b = fan_out(&[&sel(n_b, 0..n_b), &inner])?;

    // (tx, q, s) ↦ (tx, q, ũ)
    let n_c = n_b + dbar;
    let scale = SparseMatrix::diagonal(&vec![-1.0 / (2.0 * gamma); dbar]);
    let scaled_s = affine_postcompose(&sel(n_c, n_b..n_c), &scale, &vec![0.0; dbar])?;
    let u_net = compose(&clamp_net(&prob.box_lo, &prob.box_hi)?, &scaled_s)?;
    let stage_c = fan_out(&[&sel(n_c, 0..n_b), &u_net])?;

    // (tx, q, ũ) ↦ (tx, q, ũ, w) with w ≈ f₁ + f₂ũ
    let n_d = n_b + dbar;
    let outer_args = fan_out(&[&compose(&pnets.net_f2, &sel(n_d, 0..t))?, &sel(n_d, n_b..n_d)])?;
    let outer = compose(&matvec_net(d, dbar, range_outer, prod_delta)?, &outer_args)?;
    let f1 = compose(&pnets.net_f1, &sel(n_d, 0..t))?;
    let eye_d = SparseMatrix::identity(d);
    let w = linear_combination(&[(&f1, eye_d.clone()), (&outer, eye_d)], &vec![0.0; d])?;
    let stage_d = fan_out(&[&sel(n_d, 0..n_d), &w])?;

    // (tx, q, ũ, w) ↦ qᵀw + L̄ + γ Σ mᵢ² s(|ũᵢ|/mᵢ)
    let n_e = n_d + d;
    let mut qw_idx: Vec<usize> = (t..n_b).collect();
    qw_idx.extend(n_d..n_e);
    let qw = NeuralNet::affine(selection(n_e, &qw_idx), vec![0.0; 2 * d]);
    let contraction = compose(&matvec_net(1, d, range_contraction, prod_delta)?, &qw)?;
    let lbar = compose(&pnets.net_lbar, &sel(n_e, 0..t))?;
    let cost = compose(&control_cost_net(&m, gamma, sq_depth)?, &sel(n_e, n_b..n_d))?;
    let one = SparseMatrix::identity(1);
    let stage_e = linear_combination(&[(&contraction, one.clone()), (&lbar, one.clone()), (&cost, one)], &[0.0])?;

    let net = compose(&stage_e, &compose(&stage_d, &compose(&stage_c, &compose(&stage_b, &stage_a)?)?)?)?;

    let l = pnets.lipschitz;
    let g2 = 2.0 * gamma;
    let (mi, mo, m1) = (range_inner, range_outer, range_contraction);
    let cp = 4.0 * m1 * df * (1.0 + 16.0 * mo * mi * df * dbf / g2) + 4.0 * mi * df * m_sum;
    let cx = 4.0 * m1 * df * (l.f1_x + 4.0 * mo * dbf * l.f2_x * (1.0 + 4.0 * mi * df / g2))
        + l.lbar_x
        + 4.0 * mi * df * l.f2_x * m_sum;

    Ok(HamiltonianNet {
        net,
        meta: HamiltonianNetMeta {
            delta,
            truncation: rv,
            range_inner,
            range_outer,
            range_contraction,
            prod_delta,
            sq_depth,
            lipschitz: NetLipschitzBound { cx, cp },
        },
    })
}

/// u ↦ γ Σᵢ mᵢ² s(|uᵢ|/mᵢ) for u in the box.
fn control_cost_net(m: &[f64], gamma: f64, depth: usize) -> Result<NeuralNet> {
    let n = m.len();
    let mut enc = Vec::with_capacity(2 * n);
    let mut dec = Vec::with_capacity(2 * n);
    for (i, mi) in m.iter().enumerate() {
        enc.push((2 * i, i, 1.0));
        enc.push((2 * i + 1, i, -1.0));
        dec.push((i, 2 * i, 1.0 / mi));
        dec.push((i, 2 * i + 1, 1.0 / mi));
    }
    let abs = NeuralNet::from_layers(vec![
        Layer::new(SparseMatrix::from_triplets(2 * n, n, &enc), vec![0.0; 2 * n], Activation::Relu),
        Layer::new(SparseMatrix::from_triplets(n, 2 * n, &dec), vec![0.0; n], Activation::Linear),
    ]);
    let sq = sq_net(depth)?;
    let squares = parallelize(&vec![&sq; n])?;
    let weights: Vec<f64> = m.iter().map(|mi| gamma * mi * mi).collect();
    affine_postcompose(&compose(&squares, &abs)?, &SparseMatrix::from_dense(1, n, &weights), &[0.0])
}

/// Policy network x ↦ clamp(−×̃(f₂(0, x)ᵀ, g(x))/(2γ), a, b) for a gradient
/// surrogate g. Products use the range max(R, sup|f₂|) with the problem's
/// truncation level R and a tolerance giving at most `eps0` error per
/// control coordinate before clamping.
pub fn build_policy_net(pnets: &ProblemNets, prob: &ControlProblem, grad_net: &NeuralNet, eps0: f64) -> Result<NeuralNet> {
    pnets.check_shapes(prob)?;
    let (d, dbar, gamma) = (prob.d, prob.dbar, prob.gamma);
    check_len("gradient network input", d, grad_net.input_dim())?;
    check_len("gradient network output", d, grad_net.output_dim())?;
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps0 must be positive, got {eps0}")));
    }
    let r = prob.truncation_level()?.value();
    let sup_f2 = require(pnets.sup_f2, "f2")?;
    let range = r.max(sup_f2);
    let prod_delta = (eps0 * 2.0 * gamma / d as f64).min(0.5);

    let mut lift = Vec::with_capacity(d);
    for i in 0..d {
        lift.push((i + 1, i, 1.0));
    }
    let at_zero = NeuralNet::affine(SparseMatrix::from_triplets(d + 1, d, &lift), vec![0.0; d + 1]);
    let f2_t = affine_postcompose(&pnets.net_f2, &transpose_map(d, dbar), &vec![0.0; d * dbar])?;
    let args = fan_out(&[&compose(&f2_t, &at_zero)?, grad_net])?;
    let s = compose(&matvec_net(dbar, d, range, prod_delta)?, &args)?;
    let scaled = affine_postcompose(&s, &SparseMatrix::diagonal(&vec![-1.0 / (2.0 * gamma); dbar]), &vec![0.0; dbar])?;
    compose(&clamp_net(&prob.box_lo, &prob.box_hi)?, &scaled)
}
