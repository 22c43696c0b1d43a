use serde::{Deserialize, Serialize};

use super::OracleResult;
use crate::error::{Error, Result};
use crate::problem::{ControlProblem, TruncationLevel};

/// Stability budget for the explicit Hamiltonian term: Δt·max|∂ₚH_R|/Δx.
const EXPLICIT_BUDGET: f64 = 0.25;

/// Simpson nodes on [−QUAD_HALF_WIDTH, QUAD_HALF_WIDTH] for the Gaussian
/// boundary integral.
const QUAD_NODES: usize = 2001;
const QUAD_HALF_WIDTH: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    /// Spatial nodes including both boundary nodes; must be odd.
    pub nx: usize,
    /// Time steps; `None` picks the smallest even count meeting the budget
    /// and Δt ≤ Δx.
    pub nt: Option<usize>,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl FdGrid {
    /// Default grid (nx = 2001) around [lo, hi] with a 4√t_f + 1 margin.
    pub fn around(prob: &ControlProblem, lo: f64, hi: f64) -> Self {
        let margin = 4.0 * prob.t_f.sqrt() + 1.0;
        FdGrid { nx: 2001, nt: None, x_lo: lo - margin, x_hi: hi + margin }
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 5 || self.nx.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("nx must be odd and at least 5, got {}", self.nx)));
        }
        if !(self.x_lo.is_finite() && self.x_hi.is_finite() && self.x_lo < self.x_hi) {
            return Err(Error::InvalidParameter("x range must be finite and non-empty".into()));
        }
        if let Some(nt) = self.nt {
            if nt < 2 || nt % 2 == 1 {
                return Err(Error::InvalidParameter(format!("nt must be even and at least 2, got {nt}")));
            }
        }
        Ok(())
    }
}

/// V on a space-time grid; `levels[n]` holds V(t_f − nΔt, ·).
#[derive(Clone, Debug)]
pub struct FdField {
    pub x_lo: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_f: f64,
    pub levels: Vec<Vec<f64>>,
}

impl FdField {
    fn nx(&self) -> usize {
        self.levels[0].len()
    }

    fn node_gradient(level: &[f64], j: usize, dx: f64) -> f64 {
        let n = level.len();
        if j == 0 {
            (level[1] - level[0]) / dx
        } else if j == n - 1 {
            (level[n - 1] - level[n - 2]) / dx
        } else {
            (level[j + 1] - level[j - 1]) / (2.0 * dx)
        }
    }

    fn interp_level(&self, n: usize, x: f64) -> (f64, f64) {
        let s = ((x - self.x_lo) / self.dx).clamp(0.0, (self.nx() - 1) as f64);
        let j = (s.floor() as usize).min(self.nx() - 2);
        let w = s - j as f64;
        let lv = &self.levels[n];
        let v = (1.0 - w) * lv[j] + w * lv[j + 1];
        let g0 = Self::node_gradient(lv, j, self.dx);
        let g1 = Self::node_gradient(lv, j + 1, self.dx);
        (v, (1.0 - w) * g0 + w * g1)
    }

    /// Bilinear interpolation of V and of the central-difference gradient.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64) {
        let nt = self.levels.len() - 1;
        let s = ((self.t_f - t) / self.dt).clamp(0.0, nt as f64);
        let n = (s.floor() as usize).min(nt.saturating_sub(1));
        if nt == 0 {
            return self.interp_level(0, x);
        }
        let w = s - n as f64;
        let (v0, g0) = self.interp_level(n, x);
        let (v1, g1) = self.interp_level(n + 1, x);
        ((1.0 - w) * v0 + w * v1, (1.0 - w) * g0 + w * g1)
    }
}

/// Fine solve plus the half-resolution solve used for the grid-error estimate.
#[derive(Clone, Debug)]
pub struct FdSolution {
    pub fine: FdField,
    pub coarse: FdField,
    /// Δt·max|∂ₚH_R|/Δx on the fine grid.
    pub explicit_budget: f64,
    pub warnings: Vec<String>,
    safe_lo: f64,
    safe_hi: f64,
}

impl FdSolution {
    pub fn nt(&self) -> usize {
        self.fine.levels.len() - 1
    }

    /// The interval on which queries are answered.
    pub fn safe_interval(&self) -> (f64, f64) {
        (self.safe_lo, self.safe_hi)
    }

    /// V and ∂ₓV at (t, x) with the Richardson error estimate
    /// |V_h − V_{2h}|/3 as the error bar.
    pub fn query(&self, t: f64, x: f64) -> Result<OracleResult> {
        if !(x >= self.safe_lo && x <= self.safe_hi) {
            return Err(Error::OutOfDomain(format!(
                "query x = {x} outside the safe interior [{}, {}]",
                self.safe_lo, self.safe_hi
            )));
        }
        if !(t >= 0.0 && t <= self.fine.t_f) {
            return Err(Error::OutOfDomain(format!("query t = {t} outside [0, {}]", self.fine.t_f)));
        }
        let (v, g) = self.fine.eval(t, x);
        let (vc, gc) = self.coarse.eval(t, x);
        Ok(OracleResult {
            oracle: "fd_1d".into(),
            value: v,
            gradient: vec![g],
            stderr: (v - vc).abs() / 3.0,
            grad_stderr: vec![(g - gc).abs() / 3.0],
            samples: 0,
            valid: true,
            reason: None,
        })
    }
}

/// E[Ψ(x + √τ Z)] by composite Simpson quadrature in z.
fn heat_boundary(prob: &ControlProblem, tau: f64, x: f64) -> f64 {
    if tau == 0.0 {
        return prob.psi_value(&[x]);
    }
    let s = tau.sqrt();
    let h = 2.0 * QUAD_HALF_WIDTH / (QUAD_NODES - 1) as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = 0.0;
    for k in 0..QUAD_NODES {
        let z = -QUAD_HALF_WIDTH + k as f64 * h;
        let w = if k == 0 || k == QUAD_NODES - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * norm * (-0.5 * z * z).exp() * prob.psi_value(&[x + s * z]);
    }
    acc * h / 3.0
}

/// max |∂ₚH_R| = sup|f₁| + sup|f₂|·max|ū| for d = d̄ = 1.
fn hamiltonian_p_slope(prob: &ControlProblem, r: f64) -> Result<f64> {
    let f1 = prob.sup_f1_entry().ok_or_else(|| Error::ConstantsRequired("the finite-difference oracle needs state-independent f1 and f2".into()))?;
    let f2 = prob.sup_f2_entry().ok_or_else(|| Error::ConstantsRequired("the finite-difference oracle needs state-independent f1 and f2".into()))?;
    let c = r * f2 / (2.0 * prob.gamma);
    let (a, b) = (prob.box_lo[0], prob.box_hi[0]);
    let u = (-c).clamp(a, b).abs().max(c.clamp(a, b).abs());
    Ok(f1 + f2 * u)
}

fn thomas(lower: f64, diag: f64, upper: f64, rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    scratch[0] = upper / diag;
    rhs[0] /= diag;
    for i in 1..n {
        let m = diag - lower * scratch[i - 1];
        scratch[i] = upper / m;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

fn solve(prob: &ControlProblem, r: TruncationLevel, nx: usize, nt: usize, x_lo: f64, x_hi: f64) -> FdField {
    let dx = (x_hi - x_lo) / (nx - 1) as f64;
    let dt = prob.t_f / nt as f64;
    let xs: Vec<f64> = (0..nx).map(|j| x_lo + j as f64 * dx).collect();
    let ham = |n: usize, v: &[f64]| -> Vec<f64> {
        let t = prob.t_f - n as f64 * dt;
        (1..nx - 1)
            .map(|j| {
                let p = (v[j + 1] - v[j - 1]) / (2.0 * dx);
                prob.truncated_hamiltonian_unchecked(r, t, &[xs[j]], &[p])
            })
            .collect()
    };
    let q = dt / (4.0 * dx * dx);
    let mut scratch = vec![0.0; nx - 2];
    // One Crank–Nicolson step from level n with explicit source `src`.
    let step = |n: usize, v: &[f64], src: &[f64], scratch: &mut [f64]| -> Vec<f64> {
        let tau = (n + 1) as f64 * dt;
        let left = heat_boundary(prob, tau, xs[0]);
        let right = heat_boundary(prob, tau, xs[nx - 1]);
        let mut rhs: Vec<f64> = (1..nx - 1)
            .map(|j| v[j] + q * (v[j - 1] - 2.0 * v[j] + v[j + 1]) + dt * src[j - 1])
            .collect();
        rhs[0] += q * left;
        rhs[nx - 3] += q * right;
        thomas(-q, 1.0 + 2.0 * q, -q, &mut rhs, scratch);
        let mut out = Vec::with_capacity(nx);
        out.push(left);
        out.extend(rhs);
        out.push(right);
        out
    };

    let mut levels = Vec::with_capacity(nt + 1);
    levels.push(xs.iter().map(|&x| prob.psi_value(&[x])).collect::<Vec<f64>>());
    // Heun start, then second-order Adams–Bashforth for the explicit term.
    let h0 = ham(0, &levels[0]);
    let pred = step(0, &levels[0], &h0, &mut scratch);
    let h1p = ham(1, &pred);
    let avg: Vec<f64> = h0.iter().zip(&h1p).map(|(a, b)| 0.5 * (a + b)).collect();
    levels.push(step(0, &levels[0], &avg, &mut scratch));
    let mut prev = h0;
    for n in 1..nt {
        let cur = ham(n, &levels[n]);
        let src: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| 1.5 * c - 0.5 * p).collect();
        let next = step(n, &levels[n], &src, &mut scratch);
        levels.push(next);
        prev = cur;
    }
    FdField { x_lo, dx, dt, t_f: prob.t_f, levels }
}

/// Backward Crank–Nicolson solve of ∂ₜV + ½∂²ₓV + H_R(t, x, ∂ₓV) = 0,
/// V(t_f) = Ψ, on a one-dimensional problem, with far-field Dirichlet data
/// from the H ≡ 0 heat solution. A second solve on the grid with half the
/// nodes and steps supplies the Richardson error estimate.
pub fn fd_solve_1d(prob: &ControlProblem, grid: &FdGrid) -> Result<FdSolution> {
    prob.validate()?;
    grid.validate()?;
    if prob.d != 1 || prob.dbar != 1 {
        return Err(Error::InvalidParameter(format!(
            "the finite-difference oracle needs d = dbar = 1, got d = {}, dbar = {}",
            prob.d, prob.dbar
        )));
    }
    let r = prob.truncation_level()?;
    let dx = (grid.x_hi - grid.x_lo) / (grid.nx - 1) as f64;
    let slope = hamiltonian_p_slope(prob, r.value())?;
    let nt = match grid.nt {
        Some(nt) => nt,
        None => {
            let by_budget = (prob.t_f * slope / (EXPLICIT_BUDGET * dx)).ceil() as usize;
            let by_step = (prob.t_f / dx).ceil() as usize;
            let nt = by_budget.max(by_step).max(2);
            nt + nt % 2
        }
    };
    let explicit_budget = prob.t_f / nt as f64 * slope / dx;
    let mut warnings = Vec::new();
    if explicit_budget > EXPLICIT_BUDGET {
        warnings.push(format!(
            "explicit Hamiltonian budget {explicit_budget:.3} exceeds {EXPLICIT_BUDGET}; refine nt"
        ));
    }
    let fine = solve(prob, r, grid.nx, nt, grid.x_lo, grid.x_hi);
    let coarse = solve(prob, r, (grid.nx - 1) / 2 + 1, nt / 2, grid.x_lo, grid.x_hi);
    let margin = 4.0 * prob.t_f.sqrt();
    Ok(FdSolution {
        fine,
        coarse,
        explicit_budget,
        warnings,
        safe_lo: grid.x_lo + margin,
        safe_hi: grid.x_hi - margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::families;

    #[test]
    fn linear_terminal_is_exact_without_hamiltonian() {
        let prob = families::heat(vec![0.7]);
        let grid = FdGrid { nx: 201, nt: Some(40), x_lo: -8.0, x_hi: 8.0 };
        let sol = fd_solve_1d(&prob, &grid).unwrap();
        for &x in &[-3.0, 0.0, 1.3, 3.9] {
            let q = sol.query(0.0, x).unwrap();
            assert!((q.value - 0.7 * x).abs() < 1e-6, "{} vs {}", q.value, 0.7 * x);
            assert!((q.gradient[0] - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn terminal_level_samples_psi() {
        let prob = families::cole_hopf(1, 2.0);
        let grid = FdGrid { nx: 101, nt: Some(10), x_lo: -6.0, x_hi: 6.0 };
        let sol = fd_solve_1d(&prob, &grid).unwrap();
        for (j, v) in sol.fine.levels[0].iter().enumerate() {
            let x = -6.0 + j as f64 * sol.fine.dx;
            assert_eq!(*v, prob.psi_value(&[x]));
        }
        assert!(sol.query(0.0, 5.5).is_err());
    }

    #[test]
    fn heat_boundary_quadrature_is_exact_for_linear() {
        let prob = families::heat(vec![1.5]);
        assert!((heat_boundary(&prob, 0.8, 2.0) - 3.0).abs() < 1e-12);
    }
}
