use empower_core::nn::gradcheck;
use empower_core::nn::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_net(sizes: &[usize], seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Mlp::zeros(sizes).unwrap().n_params();
    Mlp::from_params(sizes, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn backprop_matches_finite_differences() {
    let sizes = [4, 8, 8, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..5 {
        let net = unit_net(&sizes, seed);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let trace = net.forward_trace(&x).unwrap();
        let mut grad = vec![0.0; net.n_params()];
        net.backward(&trace, &c, &mut grad).unwrap();
        let f = |p: &[f64]| {
            let y = Mlp::from_params(&sizes, p.to_vec()).unwrap().forward(&x).unwrap();
            y.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
        };
        let r = gradcheck::check(f, net.params(), &grad, 1e-4);
        assert!(r.passes(1e-4), "seed {seed}: {r:?}");
    }
}

#[test]
fn batch_gradient_is_sum_of_sample_gradients() {
    let net = unit_net(&[3, 5, 2], 9);
    let xs = [[0.1, -0.4, 0.9], [1.0, 0.0, -0.2], [0.3, 0.3, 0.3]];
    let mut total = vec![0.0; net.n_params()];
    let mut parts = vec![vec![0.0; net.n_params()]; xs.len()];
    for (x, part) in xs.iter().zip(&mut parts) {
        let t = net.forward_trace(x).unwrap();
        net.backward(&t, &[1.0, -2.0], &mut total).unwrap();
        net.backward(&t, &[1.0, -2.0], part).unwrap();
    }
    for i in 0..net.n_params() {
        let s: f64 = parts.iter().map(|p| p[i]).sum();
        assert!((s - total[i]).abs() < 1e-12);
    }
}

#[test]
fn forward_is_deterministic() {
    let net = unit_net(&[4, 8, 8, 3], 1);
    let x = [0.2, -0.7, 0.0, 1.0];
    assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
}

/// Scalar Adam written out step by step.
fn adam_reference(p0: f64, grads: &[f64], lr: f64) -> f64 {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v, mut p) = (0.0, 0.0, p0);
    for (t, g) in grads.iter().enumerate() {
        let t = (t + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    p
}

#[test]
fn adam_matches_scalar_reference() {
    let grads = [0.5, -1.5, 2.0];
    let mut adam = Adam::new(1);
    let mut p = [0.25];
    for g in grads {
        adam.step(&mut p, &[g], 0.01).unwrap();
    }
    assert!((p[0] - adam_reference(0.25, &grads, 0.01)).abs() < 1e-12);
    assert_eq!(adam.steps(), 3);
}

#[test]
fn doubling_lr_doubles_first_update() {
    for g in [0.3, -7.0, 1e-5] {
        let mut a = [0.0];
        let mut b = [0.0];
        Adam::new(1).step(&mut a, &[g], 1e-3).unwrap();
        Adam::new(1).step(&mut b, &[g], 2e-3).unwrap();
        assert_eq!(b[0], 2.0 * a[0]);
    }
}

#[test]
fn categorical_gradients_match_finite_differences() {
    let logits = [0.3, -1.2, 2.0, 0.0, 0.7];
    let c = Categorical::from_logits(&logits);
    for a in 0..5 {
        let r = gradcheck::check(
            |l| Categorical::from_logits(l).log_prob(a),
            &logits,
            &c.grad_log_prob(a),
            1e-4,
        );
        assert!(r.passes(1e-6), "{r:?}");
    }
    let r = gradcheck::check(
        |l| Categorical::from_logits(l).entropy(),
        &logits,
        &c.grad_entropy(),
        1e-4,
    );
    assert!(r.passes(1e-6), "{r:?}");
}

fn net_strategy() -> impl Strategy<Value = (Vec<usize>, u64, u64)> {
    (prop::collection::vec(1usize..6, 2..5), any::<u64>(), 0u64..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn checkpoint_round_trip_is_bit_exact((sizes, seed, steps) in net_strategy(), tag in "[a-z0-9/_-]{0,16}") {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::init(&sizes, &mut rng).unwrap();
        let mut adam = Adam::new(net.n_params());
        let mut p = net.params().to_vec();
        for _ in 0..steps {
            let g: Vec<f64> = (0..p.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            adam.step(&mut p, &g, 1e-3).unwrap();
        }
        let trained = Mlp::from_params(&sizes, p).unwrap();
        let ck = Checkpoint::new(tag).with("policy", &trained, &adam).with("value", &net, &Adam::new(net.n_params()));
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        for (a, b) in back.models.iter().zip(&ck.models) {
            prop_assert!(a.net.params().iter().zip(b.net.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        prop_assert_eq!(back, ck);
    }
}
