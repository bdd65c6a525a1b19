use infogen_core::netkit::{
    backward, forward, forward_cached, init_weights, jvp, loss_and_grad, per_example_jacobian,
    softmax_rows, train, vjp, Activation, Dataset, FlatWeights, Loss, MlpSpec, NetError,
    TrainConfig,
};
use infogen_core::numkit::Rng;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_net(rng: &mut Rng) -> (MlpSpec, FlatWeights) {
    let spec = MlpSpec::new(vec![3, 5, 4, 2], vec![Activation::Tanh, Activation::Relu]).unwrap();
    let mut w = init_weights(&spec, rng);
    for v in w.values.iter_mut() {
        *v += 0.1 * rng.normal();
    }
    (spec, w)
}

/// Straight-line reimplementation of a 2-layer relu network.
fn manual_two_layer(w: &[f64], x: &[f64], p: usize, h: usize, k: usize) -> Vec<f64> {
    let mut hidden = vec![0.0; h];
    for o in 0..h {
        let mut s = w[p * h + o];
        for i in 0..p {
            s += w[o * p + i] * x[i];
        }
        hidden[o] = s.max(0.0);
    }
    let off = p * h + h;
    (0..k)
        .map(|c| {
            let mut s = w[off + k * h + c];
            for j in 0..h {
                s += w[off + c * h + j] * hidden[j];
            }
            s
        })
        .collect()
}

#[test]
fn zero_weights_give_zero_logits() {
    let spec = MlpSpec::uniform(vec![4, 6, 3], Activation::Relu).unwrap();
    let x = DMatrix::from_fn(5, 4, |i, j| (i + j) as f64);
    let out = forward(&spec, &FlatWeights::zeros(&spec), &x).unwrap();
    assert!(out.iter().all(|v| *v == 0.0));
}

#[test]
fn single_layer_identity_is_affine() {
    let spec = MlpSpec::uniform(vec![2, 2], Activation::Identity).unwrap();
    let w = FlatWeights::new(&spec, vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
    let x = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
    let out = forward(&spec, &w, &x).unwrap();
    assert_eq!(out[(0, 0)], 1.0 - 2.0 + 0.5);
    assert_eq!(out[(0, 1)], 3.0 - 4.0 - 0.5);
}

#[test]
fn two_layer_matches_manual_evaluation() {
    let mut rng = Rng::new(1);
    let spec = MlpSpec::uniform(vec![3, 7, 2], Activation::Relu).unwrap();
    let w = init_weights(&spec, &mut rng);
    let x = DMatrix::from_fn(3, 3, |_, _| rng.normal());
    let out = forward(&spec, &w, &x).unwrap();
    for i in 0..3 {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let manual = manual_two_layer(&w.values, &row, 3, 7, 2);
        for c in 0..2 {
            assert!((out[(i, c)] - manual[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn shape_errors_name_dimensions() {
    let spec = MlpSpec::uniform(vec![3, 2], Activation::Relu).unwrap();
    let err = forward(&spec, &FlatWeights::zeros(&spec), &DMatrix::zeros(1, 4)).unwrap_err();
    assert!(matches!(err, NetError::Shape { .. }));
    assert!(err.to_string().contains('3') && err.to_string().contains('4'));
    assert!(MlpSpec::new(vec![3], vec![]).is_err());
    assert!(MlpSpec::new(vec![3, 0, 1], vec![Activation::Relu]).is_err());
}

#[test]
fn linear_jacobian_is_kronecker_pattern() {
    let spec = MlpSpec::uniform(vec![3, 2], Activation::Identity).unwrap();
    let w = FlatWeights::zeros(&spec);
    let x = [0.5, -1.0, 2.0];
    let jac = per_example_jacobian(&spec, &w, &x).unwrap();
    let expected = DMatrix::from_row_slice(2, 8, &[
        0.5, -1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 0.5, -1.0, 2.0, 0.0, 1.0,
    ]);
    assert_eq!(jac, expected);
}

#[test]
fn zero_input_jacobian_only_touches_biases() {
    let spec = MlpSpec::uniform(vec![2, 3], Activation::Identity).unwrap();
    let mut rng = Rng::new(3);
    let w = init_weights(&spec, &mut rng);
    let jac = per_example_jacobian(&spec, &w, &[0.0, 0.0]).unwrap();
    for c in 0..3 {
        for j in 0..6 {
            assert_eq!(jac[(c, j)], 0.0);
        }
        for j in 6..9 {
            assert_eq!(jac[(c, j)], if j - 6 == c { 1.0 } else { 0.0 });
        }
    }
}

fn finite_diff_jacobian(spec: &MlpSpec, w: &FlatWeights, x: &[f64]) -> DMatrix<f64> {
    let h = 1e-4;
    let inputs = DMatrix::from_row_slice(1, x.len(), x);
    let mut jac = DMatrix::zeros(spec.output_dim(), spec.param_count());
    for j in 0..spec.param_count() {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp.values[j] += h;
        wm.values[j] -= h;
        let fp = forward(spec, &wp, &inputs).unwrap();
        let fm = forward(spec, &wm, &inputs).unwrap();
        for c in 0..spec.output_dim() {
            jac[(c, j)] = (fp[(0, c)] - fm[(0, c)]) / (2.0 * h);
        }
    }
    jac
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = Rng::new(9);
    for _ in 0..5 {
        let (spec, w) = random_net(&mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let jac = per_example_jacobian(&spec, &w, &x).unwrap();
        let fd = finite_diff_jacobian(&spec, &w, &x);
        let scale = jac.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let err = (&jac - &fd).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(err <= 1e-4 * scale.max(1.0), "err {err}");
    }
}

#[test]
fn jvp_and_vjp_are_adjoint() {
    let mut rng = Rng::new(10);
    let (spec, w) = random_net(&mut rng);
    let x = DMatrix::from_fn(4, 3, |_, _| rng.normal());
    let t: Vec<f64> = (0..spec.param_count()).map(|_| rng.normal()).collect();
    let c = DMatrix::from_fn(4, 2, |_, _| rng.normal());
    let jt = jvp(&spec, &w, &x, &t).unwrap();
    let jc = vjp(&spec, &w, &x, &c).unwrap();
    let lhs = jt.component_mul(&c).sum();
    let rhs: f64 = jc.iter().zip(&t).map(|(a, b)| a * b).sum();
    assert!(rel_err(lhs, rhs) < 1e-10);
}

fn check_loss_gradient(loss: Loss, logits: &DMatrix<f64>, targets: &DMatrix<f64>) {
    let (_, g) = loss_and_grad(loss, logits, targets).unwrap();
    let h = 1e-5;
    for i in 0..logits.nrows() {
        for j in 0..logits.ncols() {
            let mut p = logits.clone();
            let mut m = logits.clone();
            p[(i, j)] += h;
            m[(i, j)] -= h;
            let fd = (loss_and_grad(loss, &p, targets).unwrap().0 - loss_and_grad(loss, &m, targets).unwrap().0) / (2.0 * h);
            assert!((fd - g[(i, j)]).abs() <= 1e-5 * (1.0 + fd.abs()), "{loss:?} fd {fd} an {}", g[(i, j)]);
        }
    }
}

#[test]
fn kd_ce_reduces_to_ce_for_one_hot_teacher_at_unit_temperature() {
    // A one-hot teacher in logit space: very large gap makes softmax exactly one-hot.
    let student = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 2.0, 1.0, 0.0, -0.5]);
    let labels = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    let teacher = &labels * 1e4;
    let (kd, _) = loss_and_grad(Loss::KdCe { tau: 1.0 }, &student, &teacher).unwrap();
    let (ce, _) = loss_and_grad(Loss::SoftmaxCe, &student, &labels).unwrap();
    assert!((kd - ce).abs() < 1e-12);
}

#[test]
fn kd_mse_zero_when_student_outputs_soft_targets() {
    let teacher = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 2.0, 1.0, 0.0, -0.5]);
    let tau = 2.0;
    let student = softmax_rows(&teacher, tau);
    let (v, g) = loss_and_grad(Loss::KdMse { tau }, &student, &teacher).unwrap();
    assert_eq!(v, 0.0);
    assert!(g.iter().all(|x| *x == 0.0));
}

#[test]
fn kd_ce_high_temperature_gradient_pattern() {
    let mut rng = Rng::new(12);
    let student = DMatrix::from_fn(3, 4, |_, _| rng.normal());
    let teacher = DMatrix::from_fn(3, 4, |_, _| rng.normal());
    // Soft targets approach uniform as τ grows.
    let spread = |tau: f64| softmax_rows(&teacher, tau).map(|p| (p - 0.25).abs()).max();
    assert!(spread(1e2) < spread(1.0) && spread(1e4) < 1e-4);
    // With exactly uniform targets the gradient is τ²(softmax(f/τ) − 1/k)/(nτ).
    let flat = DMatrix::from_element(3, 4, 0.7);
    for tau in [1.0, 10.0, 1e3] {
        let (_, g) = loss_and_grad(Loss::KdCe { tau }, &student, &flat).unwrap();
        let expected = softmax_rows(&student, tau).map(|s| s - 0.25) * (tau * tau / (3.0 * tau));
        assert!((&g - &expected).amax() < 1e-12);
    }
    check_loss_gradient(Loss::KdCe { tau: 10.0 }, &student, &teacher);
}

#[test]
fn invalid_temperature_is_rejected() {
    let m = DMatrix::zeros(1, 2);
    assert!(loss_and_grad(Loss::KdCe { tau: 0.0 }, &m, &m).is_err());
    assert!(loss_and_grad(Loss::KdMse { tau: -1.0 }, &m, &m).is_err());
}

#[test]
fn softmax_rows_sum_to_one_and_ce_nonnegative() {
    let mut rng = Rng::new(2);
    let logits = DMatrix::from_fn(20, 5, |_, _| 10.0 * rng.normal());
    let p = softmax_rows(&logits, 1.0);
    for row in p.row_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
    let labels: Vec<usize> = (0..20).map(|i| i % 5).collect();
    let y = infogen_core::netkit::one_hot(&labels, 5);
    assert!(loss_and_grad(Loss::SoftmaxCe, &logits, &y).unwrap().0 >= 0.0);
}

fn linear_regression_data(rng: &mut Rng, n: usize, p: usize) -> Dataset {
    let x = DMatrix::from_fn(n, p, |_, _| rng.normal());
    let beta = DVector::from_fn(p, |_, _| rng.normal());
    let y = DMatrix::from_fn(n, 1, |i, _| x.row(i).dot(&beta.transpose()) + 0.3 * rng.normal());
    Dataset::new(x, y, false).unwrap()
}

#[test]
fn full_batch_gd_converges_to_least_squares() {
    let mut rng = Rng::new(31);
    let data = linear_regression_data(&mut rng, 20, 3);
    let spec = MlpSpec::uniform(vec![3, 1], Activation::Identity).unwrap();
    let w0 = FlatWeights::zeros(&spec);
    let cfg = TrainConfig::full_batch(0.3, 4000, Loss::Mse);
    let traj = train(&spec, &w0, &data, &cfg).unwrap();
    // Normal equations with an intercept column.
    let design = DMatrix::from_fn(20, 4, |i, j| if j < 3 { data.inputs[(i, j)] } else { 1.0 });
    let y = data.targets.column(0).into_owned();
    let beta = (design.transpose() * &design).lu().solve(&(design.transpose() * &y)).unwrap();
    let ls = &design * &beta;
    let pred = forward(&spec, &traj.final_weights, &data.inputs).unwrap();
    let dev = (pred.column(0) - ls).amax();
    assert!(dev <= 1e-6, "deviation {dev}");
    for w in traj.epoch_losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-15);
    }
}

#[test]
fn zero_epochs_return_initial_weights() {
    let mut rng = Rng::new(4);
    let data = linear_regression_data(&mut rng, 8, 2);
    let spec = MlpSpec::uniform(vec![2, 4, 1], Activation::Tanh).unwrap();
    let w0 = init_weights(&spec, &mut rng);
    let cfg = TrainConfig::full_batch(0.1, 0, Loss::Mse);
    assert_eq!(train(&spec, &w0, &data, &cfg).unwrap().final_weights, w0);
}

#[test]
fn training_is_deterministic_given_seed() {
    let mut rng = Rng::new(4);
    let data = linear_regression_data(&mut rng, 30, 2);
    let spec = MlpSpec::uniform(vec![2, 8, 1], Activation::Relu).unwrap();
    let w0 = init_weights(&spec, &mut rng);
    let mut cfg = TrainConfig::full_batch(0.05, 5, Loss::Mse);
    cfg.batch_size = 7;
    cfg.seed = 99;
    cfg.sgld = Some(infogen_core::netkit::SgldSchedule::constant(1e4));
    cfg.checkpoint_steps = vec![0, 3, 10];
    let a = train(&spec, &w0, &data, &cfg).unwrap();
    let b = train(&spec, &w0, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.checkpoints.iter().map(|c| c.step).collect::<Vec<_>>(), vec![0, 3, 10]);
    cfg.seed = 100;
    assert_ne!(train(&spec, &w0, &data, &cfg).unwrap().final_weights, a.final_weights);
}

#[test]
fn divergence_reports_step() {
    let mut rng = Rng::new(5);
    let data = linear_regression_data(&mut rng, 10, 2);
    let spec = MlpSpec::uniform(vec![2, 1], Activation::Identity).unwrap();
    let cfg = TrainConfig::full_batch(50.0, 200, Loss::Mse);
    match train(&spec, &FlatWeights::zeros(&spec), &data, &cfg) {
        Err(NetError::Diverged { step, .. }) => assert!(step > 0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn penultimate_injection_matches_finite_differences() {
    // d/dw of Σ c·z where z is the penultimate activation.
    let mut rng = Rng::new(6);
    let (spec, w) = random_net(&mut rng);
    let x = DMatrix::from_fn(3, 3, |_, _| rng.normal());
    let cache = forward_cached(&spec, &w, &x).unwrap();
    let c = DMatrix::from_fn(3, 4, |_, _| rng.normal());
    let g = backward(&spec, &w, &cache, &DMatrix::zeros(3, 2), Some(&c)).unwrap();
    let f = |w: &FlatWeights| forward_cached(&spec, w, &x).unwrap().penultimate().component_mul(&c).sum();
    for j in 0..spec.param_count() {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp.values[j] += 1e-5;
        wm.values[j] -= 1e-5;
        let fd = (f(&wp) - f(&wm)) / 2e-5;
        assert!((fd - g[j]).abs() <= 1e-5 * (1.0 + fd.abs()));
    }
}

#[test]
fn csv_roundtrip_is_exact() {
    let mut rng = Rng::new(8);
    let x = DMatrix::from_fn(5, 2, |_, _| rng.normal());
    let data = Dataset::from_labels(x, &[0, 1, 2, 1, 0], 3).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("x0,x1,y0,y1,y2\n"));
    let back = Dataset::read_csv(&buf[..], true).unwrap();
    assert_eq!(back, data);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn loss_gradients_match_finite_differences(seed in 0u64..100_000, which in 0usize..4) {
        let mut rng = Rng::new(seed);
        let logits = DMatrix::from_fn(3, 4, |_, _| rng.normal());
        let labels: Vec<usize> = (0..3).map(|_| rng.below(4)).collect();
        let (loss, targets) = match which {
            0 => (Loss::Mse, DMatrix::from_fn(3, 4, |_, _| rng.normal())),
            1 => (Loss::SoftmaxCe, infogen_core::netkit::one_hot(&labels, 4)),
            2 => (Loss::KdCe { tau: 0.5 + 4.0 * rng.uniform() }, DMatrix::from_fn(3, 4, |_, _| rng.normal())),
            _ => (Loss::KdMse { tau: 0.5 + 4.0 * rng.uniform() }, DMatrix::from_fn(3, 4, |_, _| rng.normal())),
        };
        check_loss_gradient(loss, &logits, &targets);
    }
}
