use proptest::prelude::*;

use hjb_core::mlp::{mlp_estimate, path_stream, sample_tau, HamiltonianMode, IndexPath, MlpContext, MlpParams};
use hjb_core::netcalc::io::{from_json_str, to_json_string};
use hjb_core::netcalc::{compose, prod_net, sq_net, Activation, Layer, NeuralNet, SparseMatrix};
use hjb_core::oracle::oracle_validity_check;
use hjb_core::problem::{clip, families, ControlProblem, PsiSpec, TruncationLevel};

fn family(k: usize) -> ControlProblem {
    match k % 4 {
        0 => families::p1(2, PsiSpec::Bspline { c: 1.0 }),
        1 => families::drift(),
        2 => families::timevar(),
        _ => families::cole_hopf(3, 2.0),
    }
}

fn point(prob: &ControlProblem, raw: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let d = prob.d;
    let t = raw[0].abs().min(1.0) * prob.t_f;
    (t, raw[1..1 + d].to_vec(), raw[1 + d..1 + 2 * d].to_vec())
}

fn raw_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0f64..8.0, 7)
}

fn small_net() -> impl Strategy<Value = NeuralNet> {
    (1usize..4, 1usize..4, 1usize..3, prop::collection::vec(-3.0f64..3.0, 64), any::<bool>()).prop_map(
        |(input, hidden, output, w, recu)| {
            let mut it = w.into_iter().cycle();
            let mut take = |n: usize| -> Vec<f64> { (0..n).map(|_| it.next().unwrap()).collect() };
            let act = if recu { Activation::Recu } else { Activation::Relu };
            NeuralNet::new(vec![
                Layer::new(SparseMatrix::from_dense(hidden, input, &take(hidden * input)), take(hidden), act),
                Layer::new(SparseMatrix::from_dense(output, hidden, &take(output * hidden)), take(output), Activation::Linear),
            ])
            .unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clip_is_idempotent_and_one_lipschitz(p in prop::collection::vec(-50.0f64..50.0, 1..6), q in prop::collection::vec(-50.0f64..50.0, 6), r in 0.01f64..20.0) {
        let r = TruncationLevel::new(r).unwrap();
        let c = clip(&p, r).unwrap();
        prop_assert_eq!(&clip(&c, r).unwrap(), &c);
        let cq = clip(&q[..p.len()], r).unwrap();
        for k in 0..p.len() {
            prop_assert!((c[k] - cq[k]).abs() <= (p[k] - q[k]).abs());
            prop_assert!(c[k].abs() <= r.value());
        }
    }

    #[test]
    fn truncation_is_the_hamiltonian_at_the_clipped_costate(k in 0usize..4, raw in raw_point(), r in 0.05f64..10.0) {
        let prob = family(k);
        let (t, x, p) = point(&prob, &raw);
        let r = TruncationLevel::new(r).unwrap();
        let a = prob.truncated_hamiltonian(r, t, &x, &p).unwrap();
        let b = prob.hamiltonian(t, &x, &clip(&p, r).unwrap()).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn optimal_control_lies_in_the_box(k in 0usize..4, raw in raw_point(), scale in 0.0f64..1e4) {
        let prob = family(k);
        let (t, x, p) = point(&prob, &raw);
        let p: Vec<f64> = p.iter().map(|v| v * scale).collect();
        let u = prob.optimal_control(t, &x, &p).unwrap();
        for j in 0..prob.dbar {
            prop_assert!(prob.box_lo[j] <= u[j] && u[j] <= prob.box_hi[j]);
        }
    }

    #[test]
    fn closed_form_minimizes_over_the_grid(k in 0usize..4, raw in raw_point()) {
        let prob = family(k);
        let (t, x, p) = point(&prob, &raw);
        let h = prob.hamiltonian(t, &x, &p).unwrap();
        let g = prob.brute_force_hamiltonian(t, &x, &p, 1000).unwrap();
        prop_assert!(h <= g + 1e-12);
        // per coordinate the grid misses the minimum by at most γ·(step/2)² + |slope|·step/2
        let s: f64 = (0..prob.dbar).map(|j| {
            let step = (prob.box_hi[j] - prob.box_lo[j]) / 999.0;
            let slope: f64 = (0..prob.d).map(|i| (p[i] * prob.f2_entry(i, j, t, &x)).abs()).sum();
            prob.gamma * step * step / 4.0 + (slope + 2.0 * prob.gamma * prob.box_radius()[j]) * step / 2.0
        }).sum();
        prop_assert!(g - h <= s + 1e-12);
    }

    #[test]
    fn compose_realizes_the_composition(f in small_net(), g in small_net(), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        prop_assume!(f.input_dim() == g.output_dim());
        let x = &x[..g.input_dim()];
        let inner = g.realize(x);
        prop_assume!(inner.is_ok());
        let want = f.realize(&inner.unwrap());
        prop_assume!(want.is_ok());
        let got = compose(&f, &g).unwrap().realize(x).unwrap();
        for (a, b) in got.iter().zip(&want.unwrap()) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
        }
    }

    #[test]
    fn serialization_is_bit_faithful(net in small_net(), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let back = from_json_str(&to_json_string(&net)).unwrap();
        prop_assert_eq!(back.size(), net.size());
        let x = &x[..net.input_dim()];
        let (a, b) = (net.realize(x).unwrap(), back.realize(x).unwrap());
        for (u, v) in a.iter().zip(&b) {
            prop_assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn sq_net_error_bound(m in 1usize..9, x in 0.0f64..=1.0) {
        let err = (sq_net(m).unwrap().realize(&[x]).unwrap()[0] - x * x).abs();
        prop_assert!(err <= 2f64.powi(-2 * m as i32 - 2) * (1.0 + 1e-12));
    }

    #[test]
    fn prod_net_vanishes_on_the_axes(y in -4.0f64..4.0, delta in 1e-4f64..0.1) {
        let net = prod_net(4.0, delta).unwrap();
        prop_assert!(net.realize(&[y, 0.0]).unwrap()[0].abs() <= delta);
        prop_assert!(net.realize(&[0.0, y]).unwrap()[0].abs() <= delta);
        let z = net.realize(&[y, y / 2.0]).unwrap()[0];
        prop_assert!((z - y * y / 2.0).abs() <= delta);
    }

    #[test]
    fn tau_stays_in_the_open_unit_interval(seed in any::<u64>(), alpha in 0.01f64..=1.0) {
        let mut s = path_stream(seed, &IndexPath::root().child(1, 2));
        for _ in 0..50 {
            let tau = sample_tau(&mut s, alpha);
            prop_assert!(tau > 0.0 && tau < 1.0);
        }
    }

    #[test]
    fn validity_needs_the_box_to_contain_the_unclamped_control(half in 0.01f64..10.0, r in 0.01f64..5.0) {
        let mut prob = families::cole_hopf(1, 2.0);
        prob.box_lo = vec![-half];
        prob.box_hi = vec![half];
        let check = oracle_validity_check(&prob, TruncationLevel::new(r).unwrap());
        prop_assert_eq!(check.pass, r <= half);
        prop_assert_eq!(check.reason.is_none(), check.pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mlp_estimates_repeat_and_vanish_at_level_zero(seed in any::<u64>(), x in prop::collection::vec(-2.0f64..2.0, 2), t in 0.0f64..0.9) {
        let prob = families::p1(2, PsiSpec::Bspline { c: 1.0 });
        let ctx = MlpContext::exact(&prob, prob.truncation_level().unwrap());
        let p = MlpParams { levels: 2, branching: 2, alpha_time: 0.5, seed, h_mode: HamiltonianMode::ExactTruncated };
        let a = mlp_estimate(&ctx, &p, t, &x).unwrap();
        let b = mlp_estimate(&ctx, &p, t, &x).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert!(a.gradient.iter().all(|g| g.is_finite()));
        let z = mlp_estimate(&ctx, &MlpParams { levels: 0, ..p }, t, &x).unwrap();
        prop_assert_eq!(z.value, 0.0);
        prop_assert!(z.gradient.iter().all(|g| *g == 0.0));
    }
}
