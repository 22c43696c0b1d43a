use rayon::prelude::*;

use super::{cole_hopf_eligibility, heat_eligibility, oracle_validity_check, OracleResult};
use crate::error::{check_finite, check_len, Error, Result};
use crate::problem::ControlProblem;
use crate::rng;

/// Number of batches for batch-means standard errors.
fn batch_count(samples: usize) -> usize {
    (samples / 100).clamp(2, 1000)
}

fn batch_sizes(samples: usize) -> Vec<usize> {
    let b = batch_count(samples);
    (0..b).map(|k| samples / b + usize::from(k < samples % b)).collect()
}

fn check_query(prob: &ControlProblem, t: f64, x: &[f64], samples: usize) -> Result<()> {
    check_len("state x", prob.d, x.len())?;
    check_finite("state x", x)?;
    if !(t >= 0.0 && t <= prob.t_f) {
        return Err(Error::InvalidParameter(format!("time {t} outside [0, {}]", prob.t_f)));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo oracles need at least two samples".into()));
    }
    Ok(())
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn exact_terminal(prob: &ControlProblem, x: &[f64], oracle: &str) -> OracleResult {
    OracleResult {
        oracle: oracle.into(),
        value: prob.psi_value(x),
        gradient: prob.psi_gradient(x),
        stderr: 0.0,
        grad_stderr: vec![0.0; x.len()],
        samples: 0,
        valid: true,
        reason: None,
    }
}

/// Per-batch sums of one exponentially weighted Monte Carlo batch, kept
/// relative to the batch's largest exponent.
struct WeightedBatch {
    shift: f64,
    weight: f64,
    grad: Vec<f64>,
    count: usize,
}

/// V(t, x) = −2γ log E[exp(−Ψ(x + W)/(2γ))] with W ~ N(0, (t_f − t)I) and
/// ∇V = E[e^{−Ψ/2γ}∇Ψ(x + W)] / E[e^{−Ψ/2γ}], both from the same draws.
pub fn cole_hopf_value(prob: &ControlProblem, t: f64, x: &[f64], mc_samples: usize, seed: u64) -> Result<OracleResult> {
    check_query(prob, t, x, mc_samples)?;
    if let Some(reason) = cole_hopf_eligibility(prob) {
        return Err(Error::OracleNotApplicable(reason.to_string()));
    }
    let check = oracle_validity_check(prob, prob.truncation_level()?);
    if let Some(reason) = check.reason {
        return Err(Error::OracleNotApplicable(reason.to_string()));
    }
    if t == prob.t_f {
        return Ok(exact_terminal(prob, x, "cole_hopf"));
    }
    let d = prob.d;
    let g2 = 2.0 * prob.gamma;
    let s = (prob.t_f - t).sqrt();
    let sizes = batch_sizes(mc_samples);
    let batches: Vec<WeightedBatch> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &count)| {
            let mut r = rng::stream(seed, rng::DOMAIN_ORACLE, b as u64);
            let mut acc = WeightedBatch { shift: f64::NEG_INFINITY, weight: 0.0, grad: vec![0.0; d], count };
            let mut y = vec![0.0; d];
            for _ in 0..count {
                for (yk, xk) in y.iter_mut().zip(x) {
                    *yk = xk + s * rng::standard_normal(&mut r);
                }
                let e = -prob.psi_value(&y) / g2;
                if e > acc.shift {
                    let scale = (acc.shift - e).exp();
                    acc.weight *= scale;
                    acc.grad.iter_mut().for_each(|g| *g *= scale);
                    acc.shift = e;
                }
                let w = (e - acc.shift).exp();
                acc.weight += w;
                for (g, dpsi) in acc.grad.iter_mut().zip(prob.psi_gradient(&y)) {
                    *g += w * dpsi;
                }
            }
            acc
        })
        .collect();

    let shift = batches.iter().fold(f64::NEG_INFINITY, |m, b| m.max(b.shift));
    let mut weight = 0.0;
    let mut grad = vec![0.0; d];
    let mut batch_values = Vec::with_capacity(batches.len());
    let mut batch_grads = vec![Vec::with_capacity(batches.len()); d];
    for b in &batches {
        let scale = (b.shift - shift).exp();
        weight += b.weight * scale;
        for (g, bg) in grad.iter_mut().zip(&b.grad) {
            *g += bg * scale;
        }
        batch_values.push(-g2 * (b.shift + (b.weight / b.count as f64).ln()));
        for (k, bg) in b.grad.iter().enumerate() {
            batch_grads[k].push(bg / b.weight);
        }
    }
    let value = -g2 * (shift + (weight / mc_samples as f64).ln());
    let gradient: Vec<f64> = grad.iter().map(|g| g / weight).collect();
    let (_, stderr) = mean_and_stderr(&batch_values);
    let grad_stderr = batch_grads.iter().map(|v| mean_and_stderr(v).1).collect();
    Ok(OracleResult {
        oracle: "cole_hopf".into(),
        value,
        gradient,
        stderr,
        grad_stderr,
        samples: mc_samples,
        valid: true,
        reason: None,
    })
}

/// E[Ψ(x + W)] and E[(Ψ(x + W) − Ψ(x))·W]/(t_f − t) for problems with
/// H ≡ 0. Subtracting Ψ(x) leaves the gradient weight unbiased since E[W] = 0.
pub fn heat_value(prob: &ControlProblem, t: f64, x: &[f64], mc_samples: usize, seed: u64) -> Result<OracleResult> {
    check_query(prob, t, x, mc_samples)?;
    if let Some(reason) = heat_eligibility(prob) {
        return Err(Error::OracleNotApplicable(reason.to_string()));
    }
    if t == prob.t_f {
        return Ok(exact_terminal(prob, x, "heat"));
    }
    let d = prob.d;
    let dt = prob.t_f - t;
    let s = dt.sqrt();
    let psi_x = prob.psi_value(x);
    let sizes = batch_sizes(mc_samples);
    let batches: Vec<(f64, Vec<f64>)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &count)| {
            let mut r = rng::stream(seed, rng::DOMAIN_ORACLE, b as u64);
            let mut v = 0.0;
            let mut g = vec![0.0; d];
            let mut w = vec![0.0; d];
            let mut y = vec![0.0; d];
            for _ in 0..count {
                for k in 0..d {
                    w[k] = s * rng::standard_normal(&mut r);
                    y[k] = x[k] + w[k];
                }
                let psi = prob.psi_value(&y);
                v += psi;
                for k in 0..d {
                    g[k] += (psi - psi_x) * w[k] / dt;
                }
            }
            let c = count as f64;
            (v / c, g.into_iter().map(|gk| gk / c).collect())
        })
        .collect();
    let total: usize = sizes.iter().sum();
    let value = batches.iter().zip(&sizes).map(|(b, n)| b.0 * *n as f64).sum::<f64>() / total as f64;
    let gradient: Vec<f64> = (0..d)
        .map(|k| batches.iter().zip(&sizes).map(|(b, n)| b.1[k] * *n as f64).sum::<f64>() / total as f64)
        .collect();
    let vals: Vec<f64> = batches.iter().map(|b| b.0).collect();
    let stderr = mean_and_stderr(&vals).1;
    let grad_stderr = (0..d).map(|k| mean_and_stderr(&batches.iter().map(|b| b.1[k]).collect::<Vec<_>>()).1).collect();
    Ok(OracleResult {
        oracle: "heat".into(),
        value,
        gradient,
        stderr,
        grad_stderr,
        samples: mc_samples,
        valid: true,
        reason: None,
    })
}
