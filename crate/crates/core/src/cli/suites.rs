//! Verification suites shared by the CLI and the acceptance tests. Each
//! check produces one row with a measured value, its bound and a status.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{BlocksCheckSection, HamiltonianCheckSection};
use crate::error::Result;
use crate::hamnet::{build_hamiltonian_net, ProblemNets};
use crate::netcalc::{clamp_net, clip_net, matvec_net, prod_net, sq_net};
use crate::norms;
use crate::problem::{clip, ControlProblem};
use crate::rng::{self, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        })
    }
}

/// Direction of the comparison between `value` and `bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub suite: String,
    pub case: String,
    pub metric: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub status: Status,
}

impl SuiteRow {
    pub fn new(suite: &str, case: impl Into<String>, metric: &str, value: f64, relation: Relation, bound: f64) -> Self {
        let ok = match relation {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
        };
        SuiteRow {
            suite: suite.into(),
            case: case.into(),
            metric: metric.into(),
            value,
            relation,
            bound,
            status: if ok { Status::Pass } else { Status::Fail },
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

fn uniform_vec(s: &mut Stream, n: usize, radius: f64) -> Vec<f64> {
    (0..n).map(|_| rng::uniform_in(s, -radius, radius)).collect()
}

/// Closed-form Hamiltonian against the per-coordinate grid search, one
/// summary row per problem. With `corrupt_gamma` the closed form uses a
/// scaled γ; those rows are expected to fail.
pub fn hamiltonian_suite(problems: &[(String, ControlProblem)], cfg: &HamiltonianCheckSection, seed: u64) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for (k, (name, prob)) in problems.iter().enumerate() {
        let mut closed = prob.clone();
        if let Some(f) = cfg.corrupt_gamma {
            closed.gamma *= f;
        }
        let mut s = rng::stream(seed, rng::DOMAIN_CHECKS, k as u64);
        let mut worst = 0.0f64;
        for _ in 0..cfg.samples {
            let t = rng::uniform_in(&mut s, 0.0, prob.t_f);
            let x = uniform_vec(&mut s, prob.d, cfg.x_radius);
            let p = uniform_vec(&mut s, prob.d, cfg.p_radius);
            let h = closed.hamiltonian(t, &x, &p)?;
            let b = prob.brute_force_hamiltonian(t, &x, &p, cfg.grid_n)?;
            worst = worst.max((h - b).abs());
        }
        rows.push(SuiteRow::new("hamiltonian", name.clone(), "max_abs_err", worst, Relation::AtMost, cfg.tol));
    }
    Ok(rows)
}

/// Square, product, matrix–vector, clip and clamp building blocks.
pub fn blocks_suite(cfg: &BlocksCheckSection, seed: u64) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    let mut s = rng::stream(seed, rng::DOMAIN_CHECKS, 100);

    let xs: Vec<f64> = (0..cfg.sq_points).map(|_| rng::uniform_in(&mut s, 0.0, 1.0)).collect();
    for &m in &cfg.sq_depths {
        let net = sq_net(m)?;
        let bound = 0.25f64.powi(m as i32 + 1);
        let mut worst = 0.0f64;
        for &x in &xs {
            worst = worst.max((net.realize_scalar(&[x])? - x * x).abs());
        }
        let case = format!("m={m}");
        rows.push(SuiteRow::new("sq_net", case.clone(), "max_err", worst, Relation::AtMost, bound));
        let mid = 0.5f64.powi(m as i32 + 1);
        let at_mid = (net.realize_scalar(&[mid])? - mid * mid).abs();
        rows.push(SuiteRow::new("sq_net", case, "midpoint_err", at_mid, Relation::AtLeast, 0.9 * bound));
    }

    let (range, delta) = (cfg.prod_range, cfg.prod_delta);
    let prod = prod_net(range, delta)?;
    let case = format!("M={range},delta={delta}");
    let (mut err, mut axis, mut lip) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..cfg.pairs {
        let x = rng::uniform_in(&mut s, -range, range);
        let y = rng::uniform_in(&mut s, -range, range);
        let f = prod.realize_scalar(&[x, y])?;
        err = err.max((f - x * y).abs());
        axis = axis.max(prod.realize_scalar(&[x, 0.0])?.abs()).max(prod.realize_scalar(&[0.0, y])?.abs());
        let (x2, y2) = if k % 2 == 0 {
            (rng::uniform_in(&mut s, -range, range), rng::uniform_in(&mut s, -range, range))
        } else {
            let h = 1e-3 * range;
            ((x + rng::uniform_in(&mut s, -h, h)).clamp(-range, range), (y + rng::uniform_in(&mut s, -h, h)).clamp(-range, range))
        };
        let gap = (x - x2).abs() + (y - y2).abs();
        if gap > 0.0 {
            lip = lip.max((f - prod.realize_scalar(&[x2, y2])?).abs() / gap);
        }
    }
    rows.push(SuiteRow::new("prod_net", case.clone(), "max_err", err, Relation::AtMost, delta));
    rows.push(SuiteRow::new("prod_net", case.clone(), "axis_err", axis, Relation::AtMost, delta));
    rows.push(SuiteRow::new("prod_net", case, "lipschitz_ratio", lip, Relation::AtMost, 4.0 * range));

    for &[m, n] in &cfg.matvec_dims {
        let net = matvec_net(m, n, range, delta)?;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let z = uniform_vec(&mut s, m * n + n, range);
            let exact: Vec<f64> = (0..m).map(|i| norms::dot(&z[i * n..(i + 1) * n], &z[m * n..])).collect();
            let got = net.realize(&z)?;
            let diff: Vec<f64> = got.iter().zip(&exact).map(|(a, b)| a - b).collect();
            worst = worst.max(norms::l2(&diff));
        }
        let bound = delta * (m as f64).sqrt() * n as f64;
        rows.push(SuiteRow::new("matvec_net", format!("m={m},n={n}"), "max_l2_err", worst, Relation::AtMost, bound));
        let mut zero = vec![0.0; m * n];
        zero.extend(uniform_vec(&mut s, n, range));
        let at_zero = norms::linf(&net.realize(&zero)?);
        rows.push(SuiteRow::new("matvec_net", format!("m={m},n={n}"), "zero_matrix_out", at_zero, Relation::AtMost, 1e-12));
    }

    let (lo, hi) = ([-1.0, 0.5, -3.0], [2.0, 0.75, -2.5]);
    let clamp = clamp_net(&lo, &hi)?;
    let clipn = clip_net(2.0, 3)?;
    let (mut clamp_err, mut clip_err) = (0.0f64, 0.0f64);
    for _ in 0..cfg.pairs {
        let y = uniform_vec(&mut s, 3, 6.0);
        let got = clamp.realize(&y)?;
        for i in 0..3 {
            clamp_err = clamp_err.max((got[i] - y[i].clamp(lo[i], hi[i])).abs());
        }
        let got = clipn.realize(&y)?;
        for i in 0..3 {
            clip_err = clip_err.max((got[i] - y[i].clamp(-2.0, 2.0)).abs());
        }
    }
    rows.push(SuiteRow::new("clamp_net", "3 coordinates", "max_err", clamp_err, Relation::AtMost, 1e-12));
    rows.push(SuiteRow::new("clip_net", "R=2", "max_err", clip_err, Relation::AtMost, 1e-12));
    Ok(rows)
}

/// Direction uniform on the sphere, radius uniform in [0, r].
fn ball_point(s: &mut Stream, n: usize, r: f64) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| rng::standard_normal(s)).collect();
    let norm = norms::l2(&g).max(f64::MIN_POSITIVE);
    let rad = rng::uniform_in(s, 0.0, r);
    g.iter().map(|v| v * rad / norm).collect()
}

/// Hamiltonian-network error against H_R in the envelope δ(1 + ‖x‖₂^q)
/// on points with ‖x‖₂ ≤ `x_radius`, ‖p‖₂ ≤ 2R, and exact invariance
/// under clipping of p.
pub fn hamnet_suite(name: &str, prob: &ControlProblem, deltas: &[f64], samples: usize, x_radius: f64, seed: u64) -> Result<Vec<SuiteRow>> {
    let r = prob.truncation_level()?;
    let pnets = ProblemNets::exact(prob)?;
    let d = prob.d;
    let mut rows = Vec::new();
    for (k, &delta) in deltas.iter().enumerate() {
        let net = build_hamiltonian_net(&pnets, prob, r, delta)?.net;
        let mut s = rng::stream(seed, rng::DOMAIN_CHECKS, 200 + k as u64);
        let mut worst = 0.0f64;
        let mut clip_gap = 0.0f64;
        let mut z = Vec::with_capacity(1 + 2 * d);
        for _ in 0..samples {
            let t = rng::uniform_in(&mut s, 0.0, prob.t_f);
            let x = ball_point(&mut s, d, x_radius);
            let p = ball_point(&mut s, d, 2.0 * r.value());
            z.clear();
            z.push(t);
            z.extend_from_slice(&x);
            z.extend_from_slice(&p);
            let got = net.realize_scalar(&z)?;
            let exact = prob.truncated_hamiltonian(r, t, &x, &p)?;
            let envelope = 1.0 + norms::l2(&x).powf(prob.growth_q);
            worst = worst.max((got - exact).abs() / envelope);

            let far: Vec<f64> = uniform_vec(&mut s, d, 4.0 * r.value());
            z.truncate(1 + d);
            z.extend_from_slice(&far);
            let a = net.realize_scalar(&z)?;
            z.truncate(1 + d);
            z.extend_from_slice(&clip(&far, r)?);
            clip_gap = clip_gap.max((a - net.realize_scalar(&z)?).abs());
        }
        let case = format!("{name},delta={delta}");
        rows.push(SuiteRow::new("hamnet", case.clone(), "max_scaled_err", worst, Relation::AtMost, delta));
        rows.push(SuiteRow::new("hamnet", case, "clip_invariance_gap", clip_gap, Relation::AtMost, 0.0));
    }
    Ok(rows)
}
