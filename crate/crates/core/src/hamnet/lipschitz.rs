use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcalc::NeuralNet;
use crate::norms;
use crate::rng;

/// Sampling set-up for empirical Lipschitz ratios. Coordinates outside the
/// x and p blocks are held at `base`.
#[derive(Clone, Debug)]
pub struct LipschitzProbe {
    pub base: Vec<f64>,
    pub x_coords: Range<usize>,
    pub p_coords: Range<usize>,
    pub x_radius: f64,
    pub p_radius: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Largest observed ratios: |Δ output|_∞ / ‖Δx‖₁ and |Δ output|_∞ / ‖Δp‖_∞.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub max_ratio_x: f64,
    pub max_ratio_p: f64,
    pub cx_bound: f64,
    pub cp_bound: f64,
    pub pass: bool,
}

const CHUNK: usize = 256;

/// Samples `probe.samples` pairs per block, half of them far apart and half
/// as small perturbations, and compares the largest ratios with the bounds.
pub fn validate_net_lipschitz(net: &NeuralNet, cx_bound: f64, cp_bound: f64, probe: &LipschitzProbe) -> Result<LipschitzReport> {
    let n = net.input_dim();
    if probe.base.len() != n || probe.x_coords.end > n || probe.p_coords.end > n {
        return Err(Error::InvalidParameter("probe layout does not match the network input".into()));
    }
    let chunks = probe.samples.div_ceil(CHUNK);
    let ratios: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let mut r = rng::stream(probe.seed, rng::DOMAIN_LIPSCHITZ, c as u64);
            let count = CHUNK.min(probe.samples - c * CHUNK);
            let (mut rx, mut rp) = (0.0f64, 0.0f64);
            for k in 0..count {
                let local = k % 2 == 1;
                let mut z = probe.base.clone();
                for i in probe.x_coords.clone() {
                    z[i] = rng::uniform_in(&mut r, -probe.x_radius, probe.x_radius);
                }
                for i in probe.p_coords.clone() {
                    z[i] = rng::uniform_in(&mut r, -probe.p_radius, probe.p_radius);
                }
                let fz = net.realize(&z)?;
                for (block, radius, is_x) in
                    [(probe.x_coords.clone(), probe.x_radius, true), (probe.p_coords.clone(), probe.p_radius, false)]
                {
                    if block.is_empty() {
                        continue;
                    }
                    let mut z2 = z.clone();
                    for i in block.clone() {
                        z2[i] = if local {
                            z[i] + rng::uniform_in(&mut r, -1e-3, 1e-3) * radius
                        } else {
                            rng::uniform_in(&mut r, -radius, radius)
                        };
                    }
                    let delta: Vec<f64> = block.clone().map(|i| z2[i] - z[i]).collect();
                    let dn = if is_x { norms::l1(&delta) } else { norms::linf(&delta) };
                    if dn == 0.0 {
                        continue;
                    }
                    let fz2 = net.realize(&z2)?;
                    let df: Vec<f64> = fz.iter().zip(&fz2).map(|(a, b)| a - b).collect();
                    let ratio = norms::linf(&df) / dn;
                    if is_x {
                        rx = rx.max(ratio);
                    } else {
                        rp = rp.max(ratio);
                    }
                }
            }
            Ok((rx, rp))
        })
        .collect::<Result<_>>()?;
    let max_ratio_x = ratios.iter().fold(0.0f64, |m, r| m.max(r.0));
    let max_ratio_p = ratios.iter().fold(0.0f64, |m, r| m.max(r.1));
    Ok(LipschitzReport {
        max_ratio_x,
        max_ratio_p,
        cx_bound,
        cp_bound,
        pass: max_ratio_x <= cx_bound && max_ratio_p <= cp_bound,
    })
}
