use super::estimator::{level_draw, terminal_draw};
use super::{HamiltonianMode, IndexPath, MlpContext, MlpParams, NetworkModel};
use crate::error::{check_finite, Error, Result};
use crate::netcalc::{affine_postcompose, affine_precompose, compose, fan_out, linear_combination, NeuralNet, SparseMatrix};

struct Freezer<'a> {
    model: &'a NetworkModel,
    params: &'a MlpParams,
    t_f: f64,
    d: usize,
}

/// The column vector c·(1, z/σ) ∈ R^{1+d}.
fn channel_weights(c: f64, z: &[f64], sigma: f64) -> SparseMatrix {
    let mut col = Vec::with_capacity(1 + z.len());
    col.push(c);
    col.extend(z.iter().map(|zi| c * zi / sigma));
    SparseMatrix::from_dense(1 + z.len(), 1, &col)
}

impl Freezer<'_> {
    fn shifted(&self, net: &NeuralNet, shift: Vec<f64>) -> Result<NeuralNet> {
        affine_precompose(net, &SparseMatrix::identity(self.d), &shift)
    }

    /// y ↦ φ_H(t, y, ∇-channels of `inner`(y)).
    fn hamiltonian_at(&self, t: f64, inner: &NeuralNet) -> Result<NeuralNet> {
        let d = self.d;
        let lift_rows: Vec<(usize, usize, f64)> = (0..d).map(|i| (i + 1, i, 1.0)).collect();
        let mut lift_bias = vec![0.0; d + 1];
        lift_bias[0] = t;
        let lift = NeuralNet::affine(SparseMatrix::from_triplets(d + 1, d, &lift_rows), lift_bias);
        let grad_rows: Vec<(usize, usize, f64)> = (0..d).map(|i| (i, i + 1, 1.0)).collect();
        let grad = affine_postcompose(inner, &SparseMatrix::from_triplets(d, d + 1, &grad_rows), &vec![0.0; d])?;
        compose(&self.model.hamiltonian, &fan_out(&[&lift, &grad])?)
    }

    fn level(&self, n: usize, path: &IndexPath, t: f64) -> Result<NeuralNet> {
        let d = self.d;
        if n == 0 {
            return Ok(NeuralNet::zero(d, 1 + d));
        }
        let m = self.params.branching;
        let alpha = self.params.alpha_time;
        let dt = self.t_f - t;
        let s = dt.sqrt();
        let mut terms: Vec<(NeuralNet, SparseMatrix)> = Vec::new();

        let count = m.pow(n as u32);
        let cf = count as f64;
        let mut z_sum = vec![0.0; d];
        for i in 1..=count {
            let z = terminal_draw(self.params.seed, &path.child(0, -(i as i64)), d);
            for (acc, zi) in z_sum.iter_mut().zip(&z) {
                *acc += zi / s;
            }
            let shift: Vec<f64> = z.iter().map(|zi| s * zi).collect();
            terms.push((self.shifted(&self.model.psi, shift)?, channel_weights(1.0 / cf, &z, s)));
        }
        let mut base = vec![0.0];
        base.extend(z_sum.iter().map(|v| -v / cf));
        terms.push((self.model.psi.clone(), SparseMatrix::from_dense(1 + d, 1, &base)));

        for l in 0..n {
            for i in 1..=m.pow((n - l) as u32) {
                let child = path.child(l as i64, i as i64);
                let draw = level_draw(self.params.seed, &child, d, alpha);
                let dtau = dt * draw.tau;
                let sq = dtau.sqrt();
                let t2 = t + dtau;
                let weight = dt * draw.tau.powf(1.0 - alpha) / (alpha * m.pow((n - l) as u32) as f64);
                let shift: Vec<f64> = draw.z.iter().map(|zi| sq * zi).collect();
                let upper = self.hamiltonian_at(t2, &self.level(l, &child, t2)?)?;
                terms.push((self.shifted(&upper, shift.clone())?, channel_weights(weight, &draw.z, sq)));
                if l >= 1 {
                    let lower_inner = self.level(l - 1, &path.child(-(l as i64), i as i64), t2)?;
                    let lower = self.hamiltonian_at(t2, &lower_inner)?;
                    terms.push((self.shifted(&lower, shift)?, channel_weights(-weight, &draw.z, sq)));
                }
            }
        }
        let refs: Vec<(&NeuralNet, SparseMatrix)> = terms.iter().map(|(n, c)| (n, c.clone())).collect();
        linear_combination(&refs, &vec![0.0; 1 + d])
    }
}

/// Rewrites the estimator x ↦ mlp_estimate(t, x) under the fixed randomness
/// of `params.seed` as one network R^d → R^{1+d}: channel 0 is the value,
/// channels 1..=d the gradient. Built from affine precomposition (the
/// shifts x + σZ), composition and weighted sums over the index tree.
pub fn freeze_to_net(ctx: &MlpContext<'_>, params: &MlpParams, t: f64) -> Result<NeuralNet> {
    params.validate()?;
    if params.h_mode != HamiltonianMode::Network {
        return Err(Error::InvalidParameter("freezing requires network mode; the closed-form Hamiltonian is not a network".into()));
    }
    let model = ctx
        .networks
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("network mode needs Hamiltonian and psi networks in the context".into()))?;
    check_finite("time t", &[t])?;
    if !(t >= 0.0 && t < ctx.prob.t_f) {
        return Err(Error::InvalidParameter(format!("time {t} must lie in [0, {})", ctx.prob.t_f)));
    }
    let f = Freezer { model, params, t_f: ctx.prob.t_f, d: ctx.prob.d };
    f.level(params.levels, &IndexPath::root(), t)
}
