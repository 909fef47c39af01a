mod common;

use common::{finite_difference_error, random_input, random_net, random_small_net, reference_logits, rng};
use oodbench::netengine::{forward, input_gradient, Checkpoint, NetworkSpec, Tensor};

#[test]
fn forward_matches_nested_loop_evaluator() {
    let mut r = rng(7);
    for _ in 0..50 {
        let p = random_small_net(&mut r);
        let d = p.input_dim();
        let rows: Vec<Vec<f64>> = (0..5).map(|_| random_input(&mut r, d)).collect();
        let (logits, penultimate) = forward(&p, &Tensor::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(logits.shape(), &[5, p.num_classes()]);
        assert_eq!(penultimate.shape()[0], 5);
        for (i, x) in rows.iter().enumerate() {
            let want = reference_logits(&p, x);
            for (a, b) in logits.row(i).iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn batched_forward_equals_per_sample() {
    let mut r = rng(11);
    let p = random_net(&mut r, &[4, 9, 6, 3]);
    let rows: Vec<Vec<f64>> = (0..17).map(|_| random_input(&mut r, 4)).collect();
    let (logits, _) = forward(&p, &Tensor::from_rows(&rows).unwrap()).unwrap();
    for (i, x) in rows.iter().enumerate() {
        assert_eq!(logits.row(i), p.logits(x).unwrap().as_slice());
    }
}

#[test]
fn input_gradient_matches_central_differences() {
    let mut r = rng(19);
    let mut checked = 0;
    while checked < 40 {
        let p = random_small_net(&mut r);
        let x = random_input(&mut r, p.input_dim());
        for t in [1.0, 10.0, 1000.0] {
            let g = input_gradient(&p, &Tensor::row_vector(x.clone()).unwrap(), t).unwrap();
            assert_eq!(g.shape(), &[1, p.input_dim()]);
            if let Some(err) = finite_difference_error(&p, &x, t, g.data()) {
                assert!(err <= 1e-6, "relative error {err} at T={t}");
                checked += 1;
            }
        }
    }
}

#[test]
fn initial_params_are_seed_deterministic() {
    let a = NetworkSpec::desk_default(16, 3, 5).unwrap().init_params();
    let b = NetworkSpec::desk_default(16, 3, 5).unwrap().init_params();
    let c = NetworkSpec::desk_default(16, 3, 6).unwrap().init_params();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn checkpoint_bytes_round_trip() {
    let mut r = rng(23);
    let ck = Checkpoint {
        epoch: 12,
        params: random_net(&mut r, &[3, 5, 2]),
        train_accuracy: 0.75,
        test_accuracy: 0.5,
    };
    let bytes = ck.to_bytes();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes(), bytes);
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}
