use std::time::Instant;

use rayon::prelude::*;

use super::sampling::{path_stream, sample_gaussian, sample_tau};
use super::{HamiltonianMode, IndexPath, MlpContext, MlpEstimate, MlpMeta, MlpParams, NetworkModel};
use crate::error::{check_finite, check_len, Error, Result};

#[derive(Clone, Debug)]
pub(super) struct Node {
    pub value: f64,
    pub grad: Vec<f64>,
    pub gaussian_draws: u64,
    pub tau_draws: u64,
}

impl Node {
    fn zero(d: usize) -> Self {
        Self { value: 0.0, grad: vec![0.0; d], gaussian_draws: 0, tau_draws: 0 }
    }
}

/// Randomness of one level-difference node (θ, l, i).
pub(super) struct LevelDraw {
    pub z: Vec<f64>,
    pub tau: f64,
}

pub(super) fn level_draw(seed: u64, path: &IndexPath, d: usize, alpha: f64) -> LevelDraw {
    let mut s = path_stream(seed, path);
    let z = sample_gaussian(&mut s, d);
    let tau = sample_tau(&mut s, alpha);
    LevelDraw { z, tau }
}

pub(super) fn terminal_draw(seed: u64, path: &IndexPath, d: usize) -> Vec<f64> {
    sample_gaussian(&mut path_stream(seed, path), d)
}

struct Recursion<'a> {
    ctx: &'a MlpContext<'a>,
    params: &'a MlpParams,
    model: Option<&'a NetworkModel>,
}

impl Recursion<'_> {
    fn psi(&self, x: &[f64]) -> Result<f64> {
        match self.model {
            Some(m) => m.psi.realize_scalar(x),
            None => Ok(self.ctx.prob.psi_value(x)),
        }
    }

    fn hamiltonian(&self, t: f64, x: &[f64], p: &[f64]) -> Result<f64> {
        match self.model {
            Some(m) => {
                let mut z = Vec::with_capacity(1 + 2 * x.len());
                z.push(t);
                z.extend_from_slice(x);
                z.extend_from_slice(p);
                m.hamiltonian.realize_scalar(&z)
            }
            None => Ok(self.ctx.prob.truncated_hamiltonian_unchecked(self.ctx.truncation, t, x, p)),
        }
    }

    fn level(&self, n: usize, path: &IndexPath, t: f64, x: &[f64]) -> Result<Node> {
        let d = x.len();
        if n == 0 {
            return Ok(Node::zero(d));
        }
        let m = self.params.branching;
        let seed = self.params.seed;
        let dt = self.ctx.prob.t_f - t;
        let s = dt.sqrt();

        let psi_x = self.psi(x)?;
        let count = m.pow(n as u32);
        let mut sum_v = 0.0;
        let mut sum_g = vec![0.0; d];
        let mut y = vec![0.0; d];
        for i in 1..=count {
            let child = path.child(0, -(i as i64));
            let z = terminal_draw(seed, &child, d);
            for k in 0..d {
                y[k] = x[k] + s * z[k];
            }
            let diff = self.psi(&y)? - psi_x;
            if !diff.is_finite() {
                return Err(Error::NonFiniteAt { path: child.to_string() });
            }
            sum_v += diff;
            for k in 0..d {
                sum_g[k] += diff * z[k] / s;
            }
        }
        let cf = count as f64;
        let mut out = Node {
            value: psi_x + sum_v / cf,
            grad: sum_g.iter().map(|g| g / cf).collect(),
            gaussian_draws: count as u64,
            tau_draws: 0,
        };

        let jobs: Vec<(usize, usize)> = (0..n).flat_map(|l| (1..=m.pow((n - l) as u32)).map(move |i| (l, i))).collect();
        let parts: Vec<Result<Node>> = if n >= 2 {
            jobs.par_iter().map(|&(l, i)| self.level_term(n, l, i, path, t, x)).collect()
        } else {
            jobs.iter().map(|&(l, i)| self.level_term(n, l, i, path, t, x)).collect()
        };
        for part in parts {
            let part = part?;
            out.value += part.value;
            for (g, p) in out.grad.iter_mut().zip(&part.grad) {
                *g += p;
            }
            out.gaussian_draws += part.gaussian_draws;
            out.tau_draws += part.tau_draws;
        }
        Ok(out)
    }

    fn level_term(&self, n: usize, l: usize, i: usize, path: &IndexPath, t: f64, x: &[f64]) -> Result<Node> {
        let d = x.len();
        let alpha = self.params.alpha_time;
        let child = path.child(l as i64, i as i64);
        let draw = level_draw(self.params.seed, &child, d, alpha);
        let dt = self.ctx.prob.t_f - t;
        let dtau = dt * draw.tau;
        let sq = dtau.sqrt();
        let t2 = t + dtau;
        let x2: Vec<f64> = x.iter().zip(&draw.z).map(|(xi, zi)| xi + sq * zi).collect();
        let weight = dt * draw.tau.powf(1.0 - alpha) / (alpha * self.params.branching.pow((n - l) as u32) as f64);

        let upper = self.level(l, &child, t2, &x2)?;
        let mut h = self.hamiltonian(t2, &x2, &upper.grad)?;
        let mut gaussian_draws = 1 + upper.gaussian_draws;
        let mut tau_draws = 1 + upper.tau_draws;
        if l >= 1 {
            let lower = self.level(l - 1, &path.child(-(l as i64), i as i64), t2, &x2)?;
            h -= self.hamiltonian(t2, &x2, &lower.grad)?;
            gaussian_draws += lower.gaussian_draws;
            tau_draws += lower.tau_draws;
        }
        let value = weight * h;
        let grad: Vec<f64> = draw.z.iter().map(|z| value * z / sq).collect();
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteAt { path: child.to_string() });
        }
        Ok(Node { value, grad, gaussian_draws, tau_draws })
    }
}

/// One MLP estimate of (V(t, x), ∇ₓV(t, x)) with N = `params.levels` and
/// M = `params.branching`. The result depends only on the seed and inputs,
/// not on how sibling subtrees are scheduled across threads.
pub fn mlp_estimate(ctx: &MlpContext<'_>, params: &MlpParams, t: f64, x: &[f64]) -> Result<MlpEstimate> {
    params.validate()?;
    let prob = ctx.prob;
    check_len("state x", prob.d, x.len())?;
    check_finite("state x", x)?;
    check_finite("time t", &[t])?;
    if !(t >= 0.0 && t < prob.t_f) {
        return Err(Error::InvalidParameter(format!("time {t} must lie in [0, {})", prob.t_f)));
    }
    let model = match params.h_mode {
        HamiltonianMode::ExactTruncated => None,
        HamiltonianMode::Network => Some(ctx.networks.as_ref().ok_or_else(|| {
            Error::InvalidParameter("network mode needs Hamiltonian and psi networks in the context".into())
        })?),
    };
    let start = Instant::now();
    let rec = Recursion { ctx, params, model };
    let node = rec.level(params.levels, &IndexPath::root(), t, x)?;
    Ok(MlpEstimate {
        value: node.value,
        gradient: node.grad,
        meta: MlpMeta {
            levels: params.levels,
            branching: params.branching,
            alpha_time: params.alpha_time,
            seed: params.seed,
            gaussian_draws: node.gaussian_draws,
            tau_draws: node.tau_draws,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}
