use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::IndexPath;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// The random stream attached to index node θ.
pub fn path_stream(seed: u64, path: &IndexPath) -> Stream {
    rng::stream(seed, rng::DOMAIN_MLP, path.hash64())
}

/// τ = U^{1/α} with U uniform on (0, 1), so P(τ ≤ b) = b^α.
pub fn sample_tau(stream: &mut Stream, alpha_time: f64) -> f64 {
    let u = rng::uniform_open(stream);
    let tau = if alpha_time == 1.0 { u } else { u.powf(1.0 / alpha_time) };
    tau.max(f64::MIN_POSITIVE)
}

pub fn sample_gaussian(stream: &mut Stream, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng::standard_normal(stream)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub alpha: f64,
    pub threshold: f64,
    pub frequency: f64,
    pub bound: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// Empirical check of E‖Z‖_∞ ≤ σ√(2 log 2n) and
/// P(‖Z‖_∞ ≥ E‖Z‖_∞ + α) ≤ e^{−α²/(2σ²)} for Z ~ N(0, σ²I_n).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxNormReport {
    pub n: usize,
    pub sigma: f64,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub mean_bound: f64,
    pub tails: Vec<TailCheck>,
    pub pass: bool,
}

const CHUNK: usize = 4096;

pub fn gaussian_maxnorm_check(n: usize, sigma: f64, samples: usize, seed: u64) -> Result<MaxNormReport> {
    if n == 0 || samples < 2 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter("max-norm check needs n ≥ 1, σ > 0 and at least two samples".into()));
    }
    let norms: Vec<f64> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::stream(seed, rng::DOMAIN_MAXNORM, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            (0..count)
                .map(|_| (0..n).map(|_| (sigma * rng::standard_normal(&mut r)).abs()).fold(0.0, f64::max))
                .collect::<Vec<_>>()
        })
        .collect();
    let ns = samples as f64;
    let mean = norms.iter().sum::<f64>() / ns;
    let var = norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ns - 1.0);
    let stderr = (var / ns).sqrt();
    let mean_bound = sigma * (2.0 * (2.0 * n as f64).ln()).sqrt();
    let tails: Vec<TailCheck> = [sigma, 2.0 * sigma]
        .iter()
        .map(|&alpha| {
            let threshold = mean + alpha;
            let frequency = norms.iter().filter(|v| **v >= threshold).count() as f64 / ns;
            let bound = (-alpha * alpha / (2.0 * sigma * sigma)).exp();
            let stderr = (frequency * (1.0 - frequency) / ns).sqrt();
            TailCheck { alpha, threshold, frequency, bound, stderr, pass: frequency <= bound + 3.0 * stderr }
        })
        .collect();
    let pass = mean <= mean_bound + 3.0 * stderr && tails.iter().all(|t| t.pass);
    Ok(MaxNormReport { n, sigma, samples, mean, stderr, mean_bound, tails, pass })
}
