use hjb_core::hamnet::{build_hamiltonian_net, build_policy_net, validate_net_lipschitz, LipschitzProbe, ProblemNets};
use hjb_core::netcalc::{clip_net, NeuralNet, SparseMatrix};
use hjb_core::problem::{families, ControlProblem, PsiSpec, TruncationLevel};

fn p1() -> ControlProblem {
    families::p1(2, PsiSpec::Bspline { c: 1.0 })
}

fn r(v: f64) -> TruncationLevel {
    TruncationLevel::new(v).unwrap()
}

struct Lcg(u64);

impl Lcg {
    fn unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

#[test]
fn hamiltonian_net_examples() {
    let prob = p1();
    let nets = ProblemNets::exact(&prob).unwrap();
    let h = build_hamiltonian_net(&nets, &prob, r(2.0), 1e-2).unwrap();
    let at = |p: [f64; 2]| h.net.realize_scalar(&[0.0, 0.0, 0.0, p[0], p[1]]).unwrap();
    assert!(at([0.0, 0.0]).abs() <= 1e-2);
    assert!((at([1.0, 0.0]) - -0.5).abs() <= 1e-2);
    assert!((at([4.0, 0.0]) - -1.5).abs() <= 1e-2);
    assert_eq!(h.meta.delta, 1e-2);
    assert_eq!(h.meta.truncation, 2.0);
}

#[test]
fn clip_band_invariance_is_exact() {
    let prob = families::drift();
    let nets = ProblemNets::exact(&prob).unwrap();
    let rl = r(1.5);
    let h = build_hamiltonian_net(&nets, &prob, rl, 1e-2).unwrap();
    let mut g = Lcg(2);
    for _ in 0..500 {
        let t = 0.5 * (g.unit() + 1.0);
        let x: Vec<f64> = (0..3).map(|_| 3.0 * g.unit()).collect();
        let p: Vec<f64> = (0..3).map(|_| 10.0 * g.unit()).collect();
        let pc: Vec<f64> = p.iter().map(|v| v.clamp(-1.5, 1.5)).collect();
        let input = |q: &[f64]| [&[t][..], &x, q].concat();
        assert_eq!(h.net.realize(&input(&p)).unwrap(), h.net.realize(&input(&pc)).unwrap());
    }
}

#[test]
fn error_envelope_on_builtins() {
    let mut g = Lcg(9);
    for prob in families::all_builtin() {
        let nets = ProblemNets::exact(&prob).unwrap();
        let rl = prob.truncation_level().unwrap();
        let h = build_hamiltonian_net(&nets, &prob, rl, 1e-2).unwrap();
        for _ in 0..500 {
            let t = 0.5 * (g.unit() + 1.0) * prob.t_f;
            let x: Vec<f64> = (0..prob.d).map(|_| 5.0 * g.unit()).collect();
            let p: Vec<f64> = (0..prob.d).map(|_| 2.0 * rl.value() * g.unit()).collect();
            let exact = prob.truncated_hamiltonian(rl, t, &x, &p).unwrap();
            let got = h.net.realize_scalar(&[&[t][..], &x, &p].concat()).unwrap();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((got - exact).abs() <= 1e-2 * (1.0 + xn.powf(prob.growth_q)), "{}", prob.family);
        }
    }
}

#[test]
fn policy_net_examples() {
    let prob = p1();
    let nets = ProblemNets::exact(&prob).unwrap();
    let zero = NeuralNet::zero(2, 2);
    let pol = build_policy_net(&nets, &prob, &zero, 1e-3).unwrap();
    assert_eq!(pol.realize(&[0.3, -0.2]).unwrap(), vec![0.0, 0.0]);

    let mut wide = p1();
    wide.box_lo = vec![-2.0; 2];
    wide.box_hi = vec![2.0; 2];
    let nets = ProblemNets::exact(&wide).unwrap();
    let grad = NeuralNet::constant(2, vec![1.0, 0.0]);
    let pol = build_policy_net(&nets, &wide, &grad, 1e-3).unwrap();
    for x in [[0.0, 0.0], [1.0, -1.0], [-0.5, 0.25]] {
        let u = pol.realize(&x).unwrap();
        assert!((u[0] - -1.0).abs() <= 1e-3 && u[1].abs() <= 1e-3, "{u:?}");
    }
}

#[test]
fn policy_matches_optimal_control_for_cole_hopf_linear_gradient() {
    // Linear terminal cost with f₁ = 0, f₂ = I: ∇V ≡ g while the clamp is inactive.
    let mut prob = families::cole_hopf(3, 2.0);
    let g = vec![0.4, -0.1, 0.25];
    prob.psi = PsiSpec::Linear { g: g.clone() };
    prob.r_override = Some(1.0);
    let nets = ProblemNets::exact(&prob).unwrap();
    let pol = build_policy_net(&nets, &prob, &NeuralNet::constant(3, g.clone()), 1e-4).unwrap();
    let want = prob.optimal_control(0.0, &[0.0; 3], &g).unwrap();
    for x in [[0.0, 0.0, 0.0], [1.0, 2.0, -3.0]] {
        let u = pol.realize(&x).unwrap();
        assert!(u.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-4), "{u:?} vs {want:?}");
    }
}

#[test]
fn policy_outputs_stay_in_the_box() {
    let prob = families::drift();
    let nets = ProblemNets::exact(&prob).unwrap();
    let w: Vec<f64> = (0..9).map(|k| [50.0, -80.0, 3.0][k % 3] * (k as f64 - 4.0)).collect();
    let grad = NeuralNet::affine(SparseMatrix::from_dense(3, 3, &w), vec![10.0, -20.0, 5.0]);
    let pol = build_policy_net(&nets, &prob, &grad, 1e-2).unwrap();
    let mut g = Lcg(4);
    for _ in 0..2000 {
        let x: Vec<f64> = (0..3).map(|_| 100.0 * g.unit()).collect();
        let u = pol.realize(&x).unwrap();
        for j in 0..2 {
            assert!(prob.box_lo[j] <= u[j] && u[j] <= prob.box_hi[j], "{u:?}");
        }
    }
}

#[test]
fn lipschitz_probe_examples() {
    let probe = |n: usize, x: std::ops::Range<usize>, p: std::ops::Range<usize>| LipschitzProbe {
        base: vec![0.0; n],
        x_coords: x,
        p_coords: p,
        x_radius: 3.0,
        p_radius: 5.0,
        samples: 2000,
        seed: 1,
    };
    let constant = NeuralNet::constant(4, vec![2.0]);
    let rep = validate_net_lipschitz(&constant, 0.0, 0.0, &probe(4, 0..2, 2..4)).unwrap();
    assert_eq!((rep.max_ratio_x, rep.max_ratio_p), (0.0, 0.0));
    assert!(rep.pass);

    // small perturbations resolve the difference quotient only to rounding
    let one = 1.0 + 1e-9;
    let c = clip_net(1.0, 2).unwrap();
    let rep = validate_net_lipschitz(&c, one, one, &probe(2, 0..1, 1..2)).unwrap();
    assert!(rep.pass, "{rep:?}");

    let prob = p1();
    let rl = r(2.0);
    let h = build_hamiltonian_net(&ProblemNets::exact(&prob).unwrap(), &prob, rl, 1e-2).unwrap();
    let b = h.meta.lipschitz;
    let rep = validate_net_lipschitz(&h.net, b.cx, b.cp, &probe(5, 1..3, 3..5)).unwrap();
    assert!(rep.pass, "{rep:?}");
    let est = prob.hamiltonian_lipschitz_estimate(rl).unwrap();
    assert!(b.cp >= est.cp && b.cx >= est.cx);
}

#[test]
fn size_grows_about_linearly_in_state_times_control_dimension() {
    for family in ["p1", "cole_hopf"] {
        let dims = [1usize, 2, 4, 8, 16];
        let pts: Vec<(f64, f64)> = dims
            .iter()
            .map(|&d| {
                let prob = if family == "p1" { families::p1(d, PsiSpec::Bspline { c: 1.0 }) } else { families::cole_hopf(d, 2.0) };
                let nets = ProblemNets::exact(&prob).unwrap();
                let h = build_hamiltonian_net(&nets, &prob, prob.truncation_level().unwrap(), 1e-2).unwrap();
                (((d * prob.dbar) as f64).ln(), (h.net.size() as f64).ln())
            })
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope <= 1.05, "{family}: slope {slope}");
    }
}

#[test]
fn rejects_bad_inputs() {
    let prob = p1();
    let nets = ProblemNets::exact(&prob).unwrap();
    assert!(build_hamiltonian_net(&nets, &prob, r(2.0), 0.0).is_err());
    assert!(build_hamiltonian_net(&nets, &prob, r(2.0), 1.5).is_err());
    let other = ProblemNets::exact(&families::p1(3, PsiSpec::Bspline { c: 1.0 })).unwrap();
    assert!(build_hamiltonian_net(&other, &prob, r(2.0), 1e-2).is_err());
    assert!(build_policy_net(&nets, &prob, &NeuralNet::zero(3, 2), 1e-2).is_err());
}
