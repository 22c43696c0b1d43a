//! Composition, parallelization and affine lifts of networks.
//!
//! Parallel blocks are aligned layer by layer: the hidden activation
//! sequences are merged into a shortest common supersequence and each net is
//! embedded into it, filling unmatched positions with identity carriers of the
//! matching activation (ReLU: x = σ₁(x) − σ₁(−x); ReCU: 24x = (x+2)³ − 2x³ + (x−2)³).

use super::net::{Activation, Layer, NeuralNet};
use super::sparse::SparseMatrix;
use crate::error::{check_len, Error, Result};

/// realize(compose(f, g), x) = realize(f, realize(g, x)). The output layer of
/// `g` is merged into the first layer of `f`.
pub fn compose(f: &NeuralNet, g: &NeuralNet) -> Result<NeuralNet> {
    check_len("compose inner output", f.input_dim(), g.output_dim())?;
    let mut layers: Vec<Layer> = g.layers()[..g.depth() - 1].to_vec();
    let last = &g.layers()[g.depth() - 1];
    let first = &f.layers()[0];
    layers.push(merge(first, &last.weights, &last.bias));
    layers.extend_from_slice(&f.layers()[1..]);
    Ok(NeuralNet::from_layers(layers))
}

/// Layer `l` applied to the affine value `A h + c`.
fn merge(l: &Layer, a: &SparseMatrix, c: &[f64]) -> Layer {
    let weights = l.weights.mul(a);
    let mut bias = l.weights.matvec(c);
    for (bi, lb) in bias.iter_mut().zip(&l.bias) {
        *bi += lb;
    }
    Layer::new(weights, bias, l.act)
}

/// realize(·, x) = realize(net, A x + b).
pub fn affine_precompose(net: &NeuralNet, a: &SparseMatrix, b: &[f64]) -> Result<NeuralNet> {
    check_len("precompose map rows", net.input_dim(), a.rows())?;
    check_len("precompose offset", a.rows(), b.len())?;
    let mut layers = net.layers().to_vec();
    layers[0] = merge(&layers[0], a, b);
    Ok(NeuralNet::from_layers(layers))
}

/// realize(·, x) = A realize(net, x) + b.
pub fn affine_postcompose(net: &NeuralNet, a: &SparseMatrix, b: &[f64]) -> Result<NeuralNet> {
    check_len("postcompose map columns", net.output_dim(), a.cols())?;
    check_len("postcompose offset", a.rows(), b.len())?;
    let mut layers = net.layers().to_vec();
    let last = layers.pop().expect("nonempty");
    let weights = a.mul(&last.weights);
    let mut bias = a.matvec(&last.bias);
    for (bi, v) in bias.iter_mut().zip(b) {
        *bi += v;
    }
    layers.push(Layer::new(weights, bias, Activation::Linear));
    Ok(NeuralNet::from_layers(layers))
}

/// Encoder (weights, bias) and decoder weights of the identity carrier for
/// `n` values through one layer of activation `act`.
fn carrier(act: Activation, n: usize) -> (SparseMatrix, Vec<f64>, SparseMatrix) {
    let (enc_w, enc_b, dec): (&[f64], &[f64], &[f64]) = match act {
        Activation::Linear => (&[1.0], &[0.0], &[1.0]),
        Activation::Relu => (&[1.0, -1.0], &[0.0, 0.0], &[1.0, -1.0]),
        Activation::Recu => (
            &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
            &[2.0, -2.0, 0.0, 0.0, -2.0, 2.0],
            &[1.0 / 24.0, -1.0 / 24.0, -2.0 / 24.0, 2.0 / 24.0, 1.0 / 24.0, -1.0 / 24.0],
        ),
    };
    let k = enc_w.len();
    let mut e = Vec::with_capacity(k * n);
    let mut d = Vec::with_capacity(k * n);
    for i in 0..n {
        for j in 0..k {
            e.push((i * k + j, i, enc_w[j]));
            d.push((i, i * k + j, dec[j]));
        }
    }
    let bias = (0..n).flat_map(|_| enc_b.iter().copied()).collect();
    (SparseMatrix::from_triplets(k * n, n, &e), bias, SparseMatrix::from_triplets(n, k * n, &d))
}

/// A network realizing the identity on R^n through one hidden layer of `act`.
pub fn identity_net(act: Activation, n: usize) -> NeuralNet {
    if act == Activation::Linear {
        return NeuralNet::identity(n);
    }
    let (e, b, d) = carrier(act, n);
    NeuralNet::from_layers(vec![Layer::new(e, b, act), Layer::new(d, vec![0.0; n], Activation::Linear)])
}

/// Shortest common supersequence of two activation sequences.
pub fn common_supersequence(a: &[Activation], b: &[Activation]) -> Vec<Activation> {
    let (n, m) = (a.len(), b.len());
    // lcs[i][j] = LCS length of a[i..], b[j..]
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if a[i] == b[j] { lcs[i + 1][j + 1] + 1 } else { lcs[i + 1][j].max(lcs[i][j + 1]) };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(n + m - lcs[0][0]);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push(a[i]);
            i += 1;
            j += 1;
        } else if lcs[i + 1][j] >= lcs[i][j + 1] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Re-expresses `net` with hidden activation sequence `target`, which must
/// contain the net's own hidden sequence as a subsequence. Hidden layers are
/// matched leftmost; once all are placed the output layer is folded in and
/// the (narrower) output is carried through the remaining positions.
pub fn embed(net: &NeuralNet, target: &[Activation]) -> Result<NeuralNet> {
    let layers = net.layers();
    let hidden = &layers[..layers.len() - 1];
    let output = &layers[layers.len() - 1];
    let mut pending_w = SparseMatrix::identity(net.input_dim());
    let mut pending_b = vec![0.0; net.input_dim()];
    let mut folded = false;
    let mut k = 0;
    let mut out = Vec::with_capacity(target.len() + 1);
    for &act in target {
        if k < hidden.len() && hidden[k].act == act {
            out.push(merge(&hidden[k], &pending_w, &pending_b));
            let n = hidden[k].output_dim();
            pending_w = SparseMatrix::identity(n);
            pending_b = vec![0.0; n];
            k += 1;
            continue;
        }
        if k == hidden.len() && !folded {
            let l = merge(output, &pending_w, &pending_b);
            pending_w = l.weights;
            pending_b = l.bias;
            folded = true;
        }
        let (e, eb, d) = carrier(act, pending_w.rows());
        out.push(merge(&Layer::new(e, eb, act), &pending_w, &pending_b));
        pending_w = d;
        pending_b = vec![0.0; pending_w.rows()];
    }
    if k != hidden.len() {
        return Err(Error::InvalidParameter("target activation sequence does not contain the network's".into()));
    }
    if folded {
        out.push(Layer::new(pending_w, pending_b, Activation::Linear));
    } else {
        out.push(merge(output, &pending_w, &pending_b));
    }
    Ok(NeuralNet::from_layers(out))
}

/// Block-diagonal stacking: inputs and outputs are concatenated in order.
pub fn parallelize(nets: &[&NeuralNet]) -> Result<NeuralNet> {
    match nets {
        [] => Err(Error::InvalidParameter("parallelize needs at least one network".into())),
        [one] => Ok((*one).clone()),
        _ => {
            let target = nets
                .iter()
                .skip(1)
                .fold(nets[0].hidden_activations(), |acc, n| common_supersequence(&acc, &n.hidden_activations()));
            let embedded: Vec<NeuralNet> = nets.iter().map(|n| embed(n, &target)).collect::<Result<_>>()?;
            let depth = target.len() + 1;
            let mut layers = Vec::with_capacity(depth);
            for k in 0..depth {
                let blocks: Vec<&SparseMatrix> = embedded.iter().map(|n| &n.layers()[k].weights).collect();
                let bias: Vec<f64> = embedded.iter().flat_map(|n| n.layers()[k].bias.iter().copied()).collect();
                let act = target.get(k).copied().unwrap_or(Activation::Linear);
                layers.push(Layer::new(SparseMatrix::block_diag(&blocks), bias, act));
            }
            Ok(NeuralNet::from_layers(layers))
        }
    }
}

/// Shared-input parallelization: x ↦ (net₁(x), …, net_k(x)).
pub fn fan_out(nets: &[&NeuralNet]) -> Result<NeuralNet> {
    let n = nets.first().map(|f| f.input_dim()).unwrap_or(0);
    for f in nets {
        check_len("fan-out input", n, f.input_dim())?;
    }
    let par = parallelize(nets)?;
    let eye = SparseMatrix::identity(n);
    let dup = SparseMatrix::vstack(&vec![&eye; nets.len()]);
    affine_precompose(&par, &dup, &vec![0.0; dup.rows()])
}

/// x ↦ Σₖ Cₖ netₖ(x) + c over nets sharing one input.
pub fn linear_combination(terms: &[(&NeuralNet, SparseMatrix)], offset: &[f64]) -> Result<NeuralNet> {
    let Some(first) = terms.first() else {
        return Err(Error::InvalidParameter("linear combination needs at least one term".into()));
    };
    let out = first.1.rows();
    for (net, c) in terms {
        check_len("combination coefficient rows", out, c.rows())?;
        check_len("combination coefficient columns", net.output_dim(), c.cols())?;
    }
    check_len("combination offset", out, offset.len())?;
    let nets: Vec<&NeuralNet> = terms.iter().map(|t| t.0).collect();
    let coeffs: Vec<&SparseMatrix> = terms.iter().map(|t| &t.1).collect();
    let shared = fan_out(&nets)?;
    affine_postcompose(&shared, &SparseMatrix::hstack(&coeffs), offset)
}

/// x ↦ Σₖ wₖ netₖ(x) for nets with equal input and output dimensions.
pub fn weighted_sum(nets: &[&NeuralNet], weights: &[f64]) -> Result<NeuralNet> {
    check_len("weights", nets.len(), weights.len())?;
    let m = nets.first().map(|n| n.output_dim()).unwrap_or(0);
    let terms: Vec<(&NeuralNet, SparseMatrix)> =
        nets.iter().zip(weights).map(|(n, w)| (*n, SparseMatrix::diagonal(&vec![*w; m]))).collect();
    linear_combination(&terms, &vec![0.0; m])
}

/// x ↦ w_f f(x) + w_g g(x).
pub fn add(f: &NeuralNet, g: &NeuralNet, wf: f64, wg: f64) -> Result<NeuralNet> {
    check_len("add output", f.output_dim(), g.output_dim())?;
    weighted_sum(&[f, g], &[wf, wg])
}

/// The linear selection x ↦ (x_{i₁}, …, x_{i_k}).
pub fn selection(n: usize, indices: &[usize]) -> SparseMatrix {
    let t: Vec<(usize, usize, f64)> = indices.iter().enumerate().map(|(r, &c)| (r, c, 1.0)).collect();
    SparseMatrix::from_triplets(indices.len(), n, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Activation::*;

    #[test]
    fn supersequence_examples() {
        assert_eq!(common_supersequence(&[Relu, Relu], &[Relu]), vec![Relu, Relu]);
        assert_eq!(common_supersequence(&[Recu], &[Relu, Relu]).len(), 3);
        let s = common_supersequence(&[Recu, Relu, Relu], &[Relu, Recu]);
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn carriers_are_identities() {
        for act in [Relu, Recu, Linear] {
            let net = identity_net(act, 3);
            let x = [1.25, -0.5, 3.0];
            let y = net.realize(&x).unwrap();
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-13, "{act:?}");
            }
        }
    }

    #[test]
    fn embed_into_longer_sequence() {
        let net = identity_net(Relu, 2);
        let e = embed(&net, &[Recu, Relu, Relu]).unwrap();
        assert_eq!(e.depth(), 4);
        let y = e.realize(&[0.3, -1.7]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-13 && (y[1] + 1.7).abs() < 1e-13);
        assert!(embed(&net, &[Recu]).is_err());
    }
}
