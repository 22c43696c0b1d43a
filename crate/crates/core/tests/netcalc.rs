use hjb_core::netcalc::io::{from_json_str, load, save, to_json_string};
use hjb_core::netcalc::{
    add, affine_precompose, clamp_net, clip_net, compose, identity_net, matvec_net, parallelize, prod_net, sq_net,
    Activation, Layer, NeuralNet, SparseMatrix,
};

fn small_f() -> NeuralNet {
    NeuralNet::new(vec![
        Layer::new(SparseMatrix::from_dense(2, 2, &[1.0, -1.0, 0.0, 2.0]), vec![0.0, 1.0], Activation::Relu),
        Layer::new(SparseMatrix::from_dense(1, 2, &[1.0, 1.0]), vec![0.0], Activation::Linear),
    ])
    .unwrap()
}

fn small_g() -> NeuralNet {
    NeuralNet::affine(SparseMatrix::from_dense(2, 1, &[2.0, 3.0]), vec![1.0, 0.0])
}

fn small_h() -> NeuralNet {
    NeuralNet::new(vec![
        Layer::new(SparseMatrix::from_dense(1, 2, &[1.0, 1.0]), vec![-0.5], Activation::Recu),
        Layer::new(SparseMatrix::from_dense(1, 1, &[0.5]), vec![0.25], Activation::Linear),
    ])
    .unwrap()
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| lo + (hi - lo) * self.next()).collect()
    }
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

#[test]
fn size_accounting_matches_hand_counts() {
    let (f, g, h) = (small_f(), small_g(), small_h());
    assert_eq!((f.size(), f.depth(), f.width()), (6, 2, 2));
    assert_eq!((g.size(), g.depth(), g.width()), (3, 1, 2));
    assert_eq!((h.size(), h.depth(), h.width()), (5, 2, 2));

    // merged layer [[1,-1],[0,2]]·[[2],[3]] = [[-1],[6]], bias (1, 1)
    let fg = compose(&f, &g).unwrap();
    assert_eq!((fg.size(), fg.depth()), (6, 2));

    let ff = parallelize(&[&f, &f]).unwrap();
    assert_eq!((ff.size(), ff.depth(), ff.width()), (12, 2, 4));

    // g is carried through one ReLU layer as relu(y) - relu(-y)
    let fpg = parallelize(&[&f, &g]).unwrap();
    assert_eq!((fpg.size(), fpg.depth()), (16, 2));
    assert_eq!(fpg.hidden_activations(), vec![Activation::Relu]);
}

#[test]
fn realization_identities() {
    let mut rng = Lcg(11);
    let sq = sq_net(4).unwrap();
    let prod = prod_net(3.0, 1e-2).unwrap();
    let f = small_f();
    let h = small_h();
    let a = SparseMatrix::from_dense(2, 2, &[0.3, -0.7, 1.1, 0.2]);
    let b = [0.1, -0.4];

    let g = small_g();
    let composed = compose(&sq, &compose(&h, &g).unwrap()).unwrap();
    let par = parallelize(&[&sq, &prod, &h, &f]).unwrap();
    let sum = add(&prod, &f, 2.5, -0.75).unwrap();
    let pre = affine_precompose(&prod, &a, &b).unwrap();
    for _ in 0..1000 {
        let x = rng.vec(2, -1.0, 1.0);
        let s = rng.next();

        let inner = h.realize(&g.realize(&[s]).unwrap()).unwrap();
        assert!(rel_close(&composed.realize(&[s]).unwrap(), &sq.realize(&inner).unwrap(), 1e-10));

        let mut z = vec![s];
        z.extend(&x);
        z.extend(&x);
        z.extend(&x);
        let mut want = sq.realize(&[s]).unwrap();
        want.extend(prod.realize(&x).unwrap());
        want.extend(h.realize(&x).unwrap());
        want.extend(f.realize(&x).unwrap());
        assert!(rel_close(&par.realize(&z).unwrap(), &want, 1e-10));

        let want = 2.5 * prod.realize(&x).unwrap()[0] - 0.75 * f.realize(&x).unwrap()[0];
        assert!(rel_close(&sum.realize(&x).unwrap(), &[want], 1e-10));

        let ax: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(u, v)| u + v).collect();
        assert!(rel_close(&pre.realize(&x).unwrap(), &prod.realize(&ax).unwrap(), 1e-10));
    }
}

#[test]
fn identity_carriers() {
    let recu = identity_net(Activation::Recu, 1);
    assert!((recu.realize(&[1.5]).unwrap()[0] - 1.5).abs() <= 1e-12);
    let relu = identity_net(Activation::Relu, 3);
    assert_eq!(relu.realize(&[-2.0, 0.0, 7.5]).unwrap(), vec![-2.0, 0.0, 7.5]);
}

#[test]
fn block_examples() {
    let sq = sq_net(1).unwrap();
    assert_eq!(sq.realize(&[0.25]).unwrap()[0], 0.125);
    for m in 1..=6 {
        let sq = sq_net(m).unwrap();
        assert_eq!(sq.realize(&[0.5]).unwrap()[0], 0.25);
        assert_eq!(sq.realize(&[0.0]).unwrap()[0], 0.0);
        assert_eq!(sq.realize(&[1.0]).unwrap()[0], 1.0);
    }

    let par = parallelize(&[&sq_net(6).unwrap(), &sq_net(6).unwrap()]).unwrap();
    let out = par.realize(&[0.5, 0.25]).unwrap();
    let eps = 2f64.powi(-14);
    assert!((out[0] - 0.25).abs() <= eps && (out[1] - 0.0625).abs() <= eps);

    let prod = prod_net(4.0, 1e-3).unwrap();
    assert_eq!(prod.realize(&[0.0, 0.0]).unwrap()[0], 0.0);
    assert!((prod.realize(&[2.0, 3.0]).unwrap()[0] - 6.0).abs() <= 1e-3);

    let mv = matvec_net(2, 2, 4.0, 1e-3).unwrap();
    let out = mv.realize(&[1.0, 0.0, 0.0, 1.0, 1.0, 2.0]).unwrap();
    assert!((out[0] - 1.0).abs() <= 2e-3 && (out[1] - 2.0).abs() <= 2e-3);
    let out = mv.realize(&[0.0, 0.0, 0.0, 0.0, 3.0, -2.5]).unwrap();
    assert!(out.iter().all(|v| v.abs() <= 1e-12));
}

#[test]
fn clip_and_clamp_examples() {
    let c = clip_net(2.0, 3).unwrap();
    assert_eq!(c.realize(&[-5.0, 1.0, 3.0]).unwrap(), vec![-2.0, 1.0, 2.0]);
    let sizes: Vec<usize> = [1.0, 10.0, 100.0].iter().map(|r| clip_net(*r, 3).unwrap().size()).collect();
    assert!(sizes.windows(2).all(|w| w[0] == w[1]));
    let cc = compose(&c, &c).unwrap();
    let mut rng = Lcg(5);
    for _ in 0..200 {
        let x = rng.vec(3, -6.0, 6.0);
        assert_eq!(cc.realize(&x).unwrap(), c.realize(&x).unwrap());
    }

    let k = clamp_net(&[-1.0, 0.5], &[2.0, 0.75]).unwrap();
    assert_eq!(k.realize(&[0.5, 0.6]).unwrap(), vec![0.5, 0.6]);
    assert_eq!(k.realize(&[-2.0, 0.6]).unwrap(), vec![-1.0, 0.6]);
    assert_eq!(k.realize(&[3.0, 0.0]).unwrap(), vec![2.0, 0.5]);
}

#[test]
fn serialization_reproduces_realization_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let nets = [
        small_f(),
        small_h(),
        prod_net(3.0, 1e-3).unwrap(),
        matvec_net(3, 5, 2.0, 1e-2).unwrap(),
        parallelize(&[&sq_net(3).unwrap(), &small_h()]).unwrap(),
    ];
    let mut rng = Lcg(3);
    for (k, net) in nets.iter().enumerate() {
        let path = dir.path().join(format!("net{k}.json"));
        save(net, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.size(), net.size());
        assert_eq!(back.depth(), net.depth());
        assert_eq!(to_json_string(&back), to_json_string(net));
        for _ in 0..100 {
            let x = rng.vec(net.input_dim(), -1.0, 1.0);
            let (a, b) = (net.realize(&x).unwrap(), back.realize(&x).unwrap());
            assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
    assert!(to_json_string(&nets[3]).contains("A_sparse"));
}

#[test]
fn malformed_files_are_rejected() {
    assert!(from_json_str("{\"layers\": []}").is_err());
    assert!(from_json_str("{\"layers\": [{\"act\": \"linear\", \"A\": [[1, 2], [3]], \"b\": [0, 0]}]}").is_err());
    assert!(from_json_str("{\"layers\": [{\"act\": \"linear\", \"A\": [[1, 2]], \"b\": [0, 0]}]}").is_err());
    assert!(from_json_str("{\"layers\": [{\"act\": \"tanh\", \"A\": [[1]], \"b\": [0]}]}").is_err());
    let ok = from_json_str("{\"layers\": [{\"act\": \"linear\", \"A\": [[1, 2]], \"b\": [0.5]}]}").unwrap();
    assert_eq!(ok.realize(&[1.0, 1.0]).unwrap(), vec![3.5]);
}

#[test]
fn recu_envelope_is_enforced() {
    let h = small_h();
    assert!(h.realize(&[1e5, 1e5]).is_err());
}
