//! Building-block networks: clamp, clip, square, product, matrix–vector.

use super::net::{Activation, Layer, NeuralNet};
use super::ops::{affine_postcompose, affine_precompose, compose, parallelize};
use super::sparse::SparseMatrix;
use crate::error::{check_len, Error, Result};

/// Componentwise y ↦ min{max{y, lo}, hi} as b − σ(c − σ(y − a)).
///
/// The inner constant c is fl(b − a) stepped down until fl(b − c) ≥ a, so
/// every output lies in [a, b] despite rounding.
pub fn clamp_net(lo: &[f64], hi: &[f64]) -> Result<NeuralNet> {
    check_len("clamp bounds", lo.len(), hi.len())?;
    for (i, (a, b)) in lo.iter().zip(hi).enumerate() {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParameter(format!("clamp coordinate {i}: need finite a < b")));
        }
    }
    let n = lo.len();
    let inner: Vec<f64> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| {
            let mut c = b - a;
            while b - c < a {
                c = c.next_down();
            }
            c
        })
        .collect();
    let eye = SparseMatrix::identity(n);
    let neg = SparseMatrix::diagonal(&vec![-1.0; n]);
    Ok(NeuralNet::from_layers(vec![
        Layer::new(eye, lo.iter().map(|a| -a).collect(), Activation::Relu),
        Layer::new(neg.clone(), inner, Activation::Relu),
        Layer::new(neg, hi.to_vec(), Activation::Linear),
    ]))
}

/// χ_R on R^n.
pub fn clip_net(r: f64, n: usize) -> Result<NeuralNet> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("clip radius must be positive, got {r}")));
    }
    clamp_net(&vec![-r; n], &vec![r; n])
}

/// Piecewise-linear interpolant of x² on the grid {k·2^{−m}} over [0, 1],
/// f_m(x) = x − Σ_{s≤m} g_s(x)/4^s with g the tent map; one hidden layer of
/// three ReLU neurons per refinement level.
pub fn sq_net(m: usize) -> Result<NeuralNet> {
    if m < 1 {
        return Err(Error::InvalidParameter("square network needs depth m ≥ 1".into()));
    }
    let mut layers = Vec::with_capacity(m + 1);
    layers.push(Layer::new(
        SparseMatrix::from_dense(3, 1, &[1.0, 1.0, 1.0]),
        vec![0.0, -0.5, 0.0],
        Activation::Relu,
    ));
    // previous hidden state (σ(g), σ(g − ½), f); next tent g' = 2σ(g) − 4σ(g − ½)
    let mut scale = 0.25;
    for _ in 1..m {
        let w = [2.0, -4.0, 0.0, 2.0, -4.0, 0.0, -2.0 * scale, 4.0 * scale, 1.0];
        layers.push(Layer::new(SparseMatrix::from_dense(3, 3, &w), vec![0.0, -0.5, 0.0], Activation::Relu));
        scale *= 0.25;
    }
    layers.push(Layer::new(
        SparseMatrix::from_dense(1, 3, &[-2.0 * scale, 4.0 * scale, 1.0]),
        vec![0.0],
        Activation::Linear,
    ));
    Ok(NeuralNet::from_layers(layers))
}

/// Refinement depth for a square-network error ε: max(1, ⌈(log₂(1/ε) − 2)/2⌉).
pub fn sq_depth_for(eps: f64) -> usize {
    let m = ((1.0 / eps).log2() - 2.0) / 2.0;
    (m.ceil().max(1.0)) as usize
}

/// Square-network depth used by `prod_net(M, δ)`: the smallest m ≥ 1 with
/// M²·2^{−2m} ≤ δ.
pub fn prod_depth(range: f64, delta: f64) -> usize {
    let mut m = 1;
    while range * range * 0.25f64.powi(m as i32) > delta {
        m += 1;
    }
    m
}

fn check_prod_args(range: f64, delta: f64) -> Result<()> {
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::InvalidParameter(format!("product range must be positive, got {range}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("product tolerance must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// ×̃(x, y) = 2M²[s(|x+y|/2M) − s(|x|/2M) − s(|y|/2M)] after clamping both
/// inputs to [−M, M], with s the square network of depth `prod_depth(M, δ)`.
pub fn prod_net(range: f64, delta: f64) -> Result<NeuralNet> {
    check_prod_args(range, delta)?;
    let m = prod_depth(range, delta);
    let pre = clamp_net(&[-range, -range], &[range, range])?;
    let abs_hidden = SparseMatrix::from_dense(6, 2, &[1.0, 1.0, -1.0, -1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    let s = 1.0 / (2.0 * range);
    let abs_out = SparseMatrix::from_dense(3, 6, &[
        s, s, 0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, s, s, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, s, s,
    ]);
    let abs = NeuralNet::from_layers(vec![
        Layer::new(abs_hidden, vec![0.0; 6], Activation::Relu),
        Layer::new(abs_out, vec![0.0; 3], Activation::Linear),
    ]);
    let sq = sq_net(m)?;
    let squares = parallelize(&[&sq, &sq, &sq])?;
    let net = compose(&squares, &compose(&abs, &pre)?)?;
    let k = 2.0 * range * range;
    affine_postcompose(&net, &SparseMatrix::from_dense(1, 3, &[k, -k, -k]), &[0.0])
}

/// Inputs (A row-major m×n, b ∈ R^n), output ≈ A b with each of the m·n
/// products computed by `prod_net(M, δ)`.
pub fn matvec_net(m: usize, n: usize, range: f64, delta: f64) -> Result<NeuralNet> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("matrix–vector network needs m, n ≥ 1".into()));
    }
    let prod = prod_net(range, delta)?;
    let copies = vec![&prod; m * n];
    let all = parallelize(&copies)?;
    let mut sel = Vec::with_capacity(2 * m * n);
    let mut sum = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let k = i * n + j;
            sel.push((2 * k, k, 1.0));
            sel.push((2 * k + 1, m * n + j, 1.0));
            sum.push((i, k, 1.0));
        }
    }
    let sel = SparseMatrix::from_triplets(2 * m * n, m * n + n, &sel);
    let net = affine_precompose(&all, &sel, &vec![0.0; 2 * m * n])?;
    affine_postcompose(&net, &SparseMatrix::from_triplets(m, m * n, &sum), &vec![0.0; m])
}
