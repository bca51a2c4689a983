use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_cfg(bidirectional: bool) -> ModelConfig {
    ModelConfig {
        hidden: 4,
        num_layers: 2,
        bidirectional,
        dropout_keep: 0.5,
        feature_dim: 3,
        num_classes: 4,
        seed: 11,
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// Scalar probe loss `Σ R ⊙ logits`, whose logit gradient is `R`.
fn probe_loss(
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
    x: &Matrix<f64>,
    r: &Matrix<f64>,
    train: bool,
) -> f64 {
    let (logits, _) = forward(params, cfg, x, train, 99).unwrap();
    logits.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
}

fn finite_difference_check(bidirectional: bool, train: bool) {
    let cfg = small_cfg(bidirectional);
    let mut params = init_params::<f64>(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Perturb biases away from their structured init so every path is exercised.
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += 0.1 * (rng.random::<f64>() - 0.5);
        }
    }
    let x = random_matrix(&mut rng, 5, 3);
    let r = random_matrix(&mut rng, 5, 4);
    let (_, cache) = forward(&params, &cfg, &x, train, 99).unwrap();
    let grads = backward(&params, &cfg, &cache, &r).unwrap();

    let eps = 1e-5;
    let names: Vec<String> = params.tensors().iter().map(|t| t.name.clone()).collect();
    let mut worst = 0.0f64;
    for (ti, name) in names.iter().enumerate() {
        let len = params.tensors()[ti].data.len();
        for j in 0..len {
            let orig = params.tensors()[ti].data[j];
            params.tensors_mut()[ti][j] = orig + eps;
            let up = probe_loss(&params, &cfg, &x, &r, train);
            params.tensors_mut()[ti][j] = orig - eps;
            let down = probe_loss(&params, &cfg, &x, &r, train);
            params.tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.tensors()[ti].data[j];
            let scale = numeric.abs().max(analytic.abs());
            let err = if scale > 1e-7 {
                (numeric - analytic).abs() / scale
            } else {
                (numeric - analytic).abs()
            };
            worst = worst.max(err);
            assert!(
                err < 1e-4,
                "{name}[{j}]: analytic {analytic:e} vs numeric {numeric:e}"
            );
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn gradients_match_finite_differences_lstm() {
    finite_difference_check(false, false);
}

#[test]
fn gradients_match_finite_differences_bilstm() {
    finite_difference_check(true, false);
}

#[test]
fn gradients_match_finite_differences_with_dropout() {
    finite_difference_check(false, true);
    finite_difference_check(true, true);
}

#[test]
fn init_is_deterministic_and_structured() {
    let cfg = ModelConfig::new(13, 44);
    let a = init_params::<f32>(&cfg).unwrap();
    let b = init_params::<f32>(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dense_w.shape(), [44, 128]);
    assert_eq!(a.layers[0].fwd.w_input.shape(), [512, 13]);
    assert_eq!(a.layers[1].fwd.w_input.shape(), [512, 128]);
    let h = cfg.hidden;
    for layer in &a.layers {
        assert!(layer.fwd.bias[h..2 * h].iter().all(|&v| v == 1.0));
        assert!(layer.fwd.bias[..h].iter().all(|&v| v == 0.0));
        assert!(layer.fwd.bias[2 * h..].iter().all(|&v| v == 0.0));
    }
    let limit = (6.0f64 / (13.0 + 512.0)).sqrt() as f32;
    assert!(a.layers[0].fwd.w_input.as_slice().iter().all(|v| v.abs() <= limit));
    assert!(a.dense_b.iter().all(|&v| v == 0.0));

    let other = init_params::<f32>(&ModelConfig { seed: 1, ..cfg.clone() }).unwrap();
    assert_ne!(a, other);

    let bi = init_params::<f32>(&ModelConfig {
        bidirectional: true,
        ..cfg
    })
    .unwrap();
    assert_eq!(bi.dense_w.shape(), [44, 256]);
    assert_eq!(bi.layers[1].bwd.as_ref().unwrap().w_input.shape(), [512, 256]);
    assert_eq!(bi.tensors().len(), 14);
}

#[test]
fn tensor_names_follow_canonical_scheme() {
    let params = init_params::<f32>(&small_cfg(true)).unwrap();
    let names: Vec<String> = params.tensors().into_iter().map(|t| t.name).collect();
    assert_eq!(names[0], "layer1.fwd.w_input");
    assert_eq!(names[3], "layer1.bwd.w_input");
    assert_eq!(names[11], "layer2.bwd.bias");
    assert_eq!(&names[12..], &["dense.w", "dense.b"]);
    let expected: Vec<String> = expected_tensors(&small_cfg(true)).into_iter().map(|e| e.0).collect();
    assert_eq!(names, expected);
}

#[test]
fn eval_mode_ignores_dropout_seed() {
    let cfg = small_cfg(true);
    let params = init_params::<f64>(&cfg).unwrap();
    let x = random_matrix(&mut ChaCha8Rng::seed_from_u64(1), 7, 3);
    let (a, _) = forward(&params, &cfg, &x, false, 1).unwrap();
    let (b, _) = forward(&params, &cfg, &x, false, 2).unwrap();
    assert_eq!(a, b);
    let (c, _) = forward(&params, &cfg, &x, true, 1).unwrap();
    let (d, _) = forward(&params, &cfg, &x, true, 2).unwrap();
    assert_ne!(c, d);
    let (e, _) = forward(&params, &cfg, &x, true, 1).unwrap();
    assert_eq!(c, e);
}

#[test]
fn zero_weights_give_zero_logits() {
    let cfg = small_cfg(true);
    let params = ModelParams::<f64>::zeros(&cfg);
    let x = random_matrix(&mut ChaCha8Rng::seed_from_u64(3), 6, 3);
    let (logits, _) = forward(&params, &cfg, &x, true, 4).unwrap();
    assert!(logits.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn hidden_states_are_bounded() {
    let cfg = ModelConfig {
        seed: 3,
        ..small_cfg(true)
    };
    let mut params = init_params::<f64>(&cfg).unwrap();
    params.scale(20.0);
    let x = random_matrix(&mut ChaCha8Rng::seed_from_u64(8), 30, 3);
    let (_, cache) = forward(&params, &cfg, &x, false, 0).unwrap();
    for out in cache.layer_outputs() {
        assert!(out.as_slice().iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn swapped_directions_reverse_time_on_palindromes() {
    let cfg = ModelConfig {
        seed: 21,
        ..small_cfg(true)
    };
    let params = init_params::<f64>(&cfg).unwrap();
    let h = cfg.hidden;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let half = random_matrix(&mut rng, 4, 3);
    let t_len = 7;
    let x = Matrix::from_fn(t_len, 3, |t, c| half.get(t.min(t_len - 1 - t), c));

    // Exchange directions; deeper layers and the head see [bwd | fwd] inputs,
    // so their input columns are swapped to match.
    let swap_cols = |m: &Matrix<f64>| {
        Matrix::from_fn(m.rows(), m.cols(), |r, c| {
            let src = if c < h { c + h } else { c - h };
            m.get(r, src)
        })
    };
    let mut swapped = params.clone();
    for (l, layer) in swapped.layers.iter_mut().enumerate() {
        let mut fwd = layer.bwd.take().unwrap();
        let mut bwd = std::mem::replace(&mut layer.fwd, fwd.clone());
        if l > 0 {
            fwd.w_input = swap_cols(&fwd.w_input);
            bwd.w_input = swap_cols(&bwd.w_input);
        }
        layer.fwd = fwd;
        layer.bwd = Some(bwd);
    }
    swapped.dense_w = swap_cols(&params.dense_w);

    let orig = recurrent_outputs(&params, &cfg, &x).unwrap();
    let swap = recurrent_outputs(&swapped, &cfg, &x).unwrap();
    for t in 0..t_len {
        let a = orig[0].row(t_len - 1 - t);
        let b = swap[0].row(t);
        for k in 0..h {
            assert!((a[k] - b[h + k]).abs() < 1e-14);
            assert!((a[h + k] - b[k]).abs() < 1e-14);
        }
    }
    let (la, _) = forward(&params, &cfg, &x, false, 0).unwrap();
    let (lb, _) = forward(&swapped, &cfg, &x, false, 0).unwrap();
    for t in 0..t_len {
        for (a, b) in la.row(t_len - 1 - t).iter().zip(lb.row(t)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn log_softmax_examples() {
    let m = Matrix::from_rows(&[
        vec![0.0, 0.0, 0.0, 0.0],
        vec![1000.0, 1000.0, 1000.0, 1000.0],
        vec![1.0, 2.0, 3.0, f64::NEG_INFINITY],
    ]);
    let ls = log_softmax(&m);
    for v in ls.row(0).iter().chain(ls.row(1)) {
        assert!((v.exp() - 0.25).abs() < 1e-15);
    }
    let p: Vec<f64> = ls.row(2).iter().map(|v| v.exp()).collect();
    // e^k / (e + e² + e³), evaluated independently.
    let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
    assert!((p[0] - 1f64.exp() / z).abs() < 1e-15);
    assert!((p[0] - 0.0900).abs() < 5e-5);
    assert!((p[1] - 0.2447).abs() < 5e-5);
    assert!((p[2] - 0.6652).abs() < 5e-5);
    assert_eq!(p[3], 0.0);
}

#[test]
fn dense_bias_gradient_is_column_sum() {
    let cfg = small_cfg(false);
    let params = init_params::<f64>(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_matrix(&mut rng, 6, 3);
    let d = random_matrix(&mut rng, 6, 4);
    let (_, cache) = forward(&params, &cfg, &x, true, 1).unwrap();
    let g = backward(&params, &cfg, &cache, &d).unwrap();
    for c in 0..4 {
        let sum: f64 = (0..6).map(|t| d.get(t, c)).sum();
        assert!((g.dense_b[c] - sum).abs() < 1e-14);
    }
    let zero = backward(&params, &cfg, &cache, &Matrix::zeros(6, 4)).unwrap();
    assert_eq!(zero.global_norm(), 0.0);
}

#[test]
fn shape_errors() {
    let cfg = small_cfg(false);
    let params = init_params::<f64>(&cfg).unwrap();
    let bad = Matrix::<f64>::zeros(5, 4);
    assert!(matches!(
        forward(&params, &cfg, &bad, false, 0),
        Err(NetworkError::ShapeMismatch(_))
    ));
    assert!(forward(&params, &cfg, &Matrix::zeros(0, 3), false, 0).is_err());
    let x = Matrix::<f64>::zeros(5, 3);
    let (_, cache) = forward(&params, &cfg, &x, false, 0).unwrap();
    let bi = small_cfg(true);
    let bi_params = init_params::<f64>(&bi).unwrap();
    assert!(matches!(
        backward(&bi_params, &bi, &cache, &Matrix::zeros(5, 4)),
        Err(NetworkError::CacheMismatch(_))
    ));
    assert!(backward(&params, &cfg, &cache, &Matrix::zeros(4, 4)).is_err());
}

#[test]
fn f32_and_f64_agree() {
    let cfg = small_cfg(true);
    let p64 = init_params::<f64>(&cfg).unwrap();
    let p32 = init_params::<f32>(&cfg).unwrap();
    assert_eq!(p64.cast::<f32>(), p32);
    let x = random_matrix(&mut ChaCha8Rng::seed_from_u64(1), 9, 3);
    let (a, _) = forward(&p64, &cfg, &x, true, 5).unwrap();
    let (b, _) = forward(&p32, &cfg, &x.cast(), true, 5).unwrap();
    assert!(a.max_abs_diff(&b.cast()) < 1e-5);
}
