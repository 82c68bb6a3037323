use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shotcol::numkernel::*;

fn relu(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Straight-line evaluation of a 3-4-2 rectifier network on one input row.
fn oracle_3_4_2(w0: &[f32], b0: &[f32], w1: &[f32], b1: &[f32], x: &[f32]) -> [f32; 2] {
    let h0 = relu(w0[0] * x[0] + w0[1] * x[1] + w0[2] * x[2] + b0[0]);
    let h1 = relu(w0[3] * x[0] + w0[4] * x[1] + w0[5] * x[2] + b0[1]);
    let h2 = relu(w0[6] * x[0] + w0[7] * x[1] + w0[8] * x[2] + b0[2]);
    let h3 = relu(w0[9] * x[0] + w0[10] * x[1] + w0[11] * x[2] + b0[3]);
    [
        w1[0] * h0 + w1[1] * h1 + w1[2] * h2 + w1[3] * h3 + b1[0],
        w1[4] * h0 + w1[5] * h1 + w1[6] * h2 + w1[7] * h3 + b1[1],
    ]
}

#[test]
fn forward_matches_straight_line_oracle() {
    let spec = MlpSpec::plain(vec![3, 4, 2]).unwrap();
    for seed in 0..20u64 {
        let mut params = spec.init_params::<f32>(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        for name in ["fc0.bias", "fc1.bias"] {
            for b in params.get_mut(name).unwrap().data_mut() {
                *b = rng.gen_range(-0.5..0.5);
            }
        }
        let x: Vec<f32> = (0..15).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let input = Tensor::new(vec![5, 3], x.clone()).unwrap();
        let (out, _) = forward(&spec, &params, &input, false, 0).unwrap();
        let p = |n: &str| params.get(n).unwrap().data().to_vec();
        let (w0, b0, w1, b1) = (p("fc0.weight"), p("fc0.bias"), p("fc1.weight"), p("fc1.bias"));
        for r in 0..5 {
            let want = oracle_3_4_2(&w0, &b0, &w1, &b1, &x[3 * r..3 * r + 3]);
            for c in 0..2 {
                assert!((out.row(r)[c] - want[c]).abs() < 1e-5, "seed {seed} row {r}");
            }
        }
    }
}

#[test]
fn forward_is_bitwise_deterministic() {
    let spec = MlpSpec::new(vec![6, 8, 3], vec![0.4]).unwrap();
    let params = spec.init_params::<f32>(3);
    let input = Tensor::filled(&[4, 6], 0.25f32);
    let (a, _) = forward(&spec, &params, &input, true, 99).unwrap();
    let (b, _) = forward(&spec, &params, &input, true, 99).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn random_3_4_2_gradients_within_tolerance() {
    let spec = MlpSpec::plain(vec![3, 4, 2]).unwrap();
    for seed in 0..10 {
        let params = spec.init_params::<f64>(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = Tensor::new(vec![3, 3], (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let report = finite_diff_check(&spec, &params, &input, 1e-3, GradCheckOptions::default()).unwrap();
        assert!(report.passed, "{report:?}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let spec = MlpSpec::new(vec![5, 7, 3], vec![0.1]).unwrap();
    let params = spec.init_params::<f32>(42);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    Checkpoint::new(spec.clone(), params.clone()).unwrap().save(&path).unwrap();
    let back = Checkpoint::<f32>::load(&path).unwrap();
    assert_eq!(back.network, spec);
    for ((_, a), (_, b)) in params.iter().zip(back.params.iter()) {
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn sgd_with_zero_rate_is_identity() {
    let spec = MlpSpec::plain(vec![3, 2]).unwrap();
    let mut params = spec.init_params::<f32>(1);
    let before = params.clone();
    let grads = ParamSet::new(
        params
            .iter()
            .map(|(n, t)| (n.to_string(), Tensor::filled(t.shape(), 0.7f32)))
            .collect(),
    )
    .unwrap();
    let cfg = SgdConfig {
        learning_rate: 0.0,
        momentum: 0.9,
        weight_decay: 1e-4,
        schedule: vec![],
    };
    let mut state = SgdState::new(cfg, &params).unwrap();
    sgd_step(&mut params, &grads, &mut state, 0).unwrap();
    assert_eq!(params, before);
}
