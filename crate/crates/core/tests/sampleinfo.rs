use infogen_core::kernels::{jacobian_features, DynMode, LinDynConfig, fisher_matrix};
use infogen_core::labelnoise::NoiseModel;
use infogen_core::netkit::{forward, init_weights, train, Dataset, FlatWeights, Loss, MlpSpec, TrainConfig, Activation};
use infogen_core::numkit::{Rng, SymMatrix};
use infogen_core::sampleinfo::*;
use infogen_core::stats::{roc_auc, spearman};
use infogen_core::synth::{SourceKind, SyntheticSource};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

fn stationary(lambda: f64) -> LinDynConfig {
    LinDynConfig { learning_rate: 1.0, time: f64::INFINITY, mode: DynMode::Continuous, weight_decay: lambda }
}

#[test]
fn no_training_means_no_information() {
    let spec = MlpSpec::new(vec![3, 8, 2], vec![Activation::Tanh]).unwrap();
    let w0 = init_weights(&spec, &mut Rng::new(1));
    let data = SyntheticSource::new(SourceKind::GaussBlobs { classes: 2, separation: 2.0, dim: 3 })
        .sample(6, &mut Rng::new(2))
        .unwrap();
    let cfg = InfoConfig::new(LinDynConfig { learning_rate: 0.1, time: 0.0, mode: DynMode::Discrete, weight_decay: 0.0 });
    let scorer = FsiScorer::new(&spec, &w0, &data.dataset, &data.dataset.inputs, cfg).unwrap();
    for (f, u) in scorer.scores(&[0, 1, 2, 3, 4, 5]).unwrap() {
        assert_eq!(f, 0.0);
        assert_eq!(u, 0.0);
    }
}

/// Primal ridge solution `w − w₀ = (JᵀJ + λI)⁻¹ Jᵀ (y − f₀)` for a 1-D
/// linear model with bias, `J = [x, 1]`.
fn ridge_update(xs: &[f64], resid: &[f64], lambda: f64) -> (f64, f64) {
    let (mut a, mut b, mut c, mut r0, mut r1) = (lambda, 0.0, lambda, 0.0, 0.0);
    for (x, r) in xs.iter().zip(resid) {
        a += x * x;
        b += x;
        c += 1.0;
        r0 += x * r;
        r1 += r;
    }
    let det = a * c - b * b;
    ((c * r0 - b * r1) / det, (a * r1 - b * r0) / det)
}

#[test]
fn two_point_least_squares_matches_primal_oracle() {
    let spec = MlpSpec::new(vec![1, 1], vec![]).unwrap();
    let w0 = FlatWeights::new(&spec, vec![0.3, -0.1]).unwrap();
    let xs = [0.5, -1.5];
    let ys = [1.0, 2.0];
    let lambda = 0.2;
    let data = Dataset::new(DMatrix::from_column_slice(2, 1, &xs), DMatrix::from_column_slice(2, 1, &ys), false).unwrap();
    let probes = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
    let mut cfg = InfoConfig::new(stationary(lambda));
    cfg.sigma = 0.7;
    let scorer = FsiScorer::new(&spec, &w0, &data, &probes, cfg).unwrap();
    let got = scorer.fsi_scores(&[0, 1]).unwrap();

    let f0: Vec<f64> = xs.iter().map(|x| 0.3 * x - 0.1).collect();
    let resid: Vec<f64> = ys.iter().zip(&f0).map(|(y, f)| y - f).collect();
    let full = ridge_update(&xs, &resid, lambda);
    for i in 0..2 {
        let o = 1 - i;
        let loo = ridge_update(&xs[o..o + 1], &resid[o..o + 1], lambda);
        let (dw, db) = (full.0 - loo.0, full.1 - loo.1);
        let want = [0.0, 1.0, 2.0].iter().map(|x| (dw * x + db).powi(2)).sum::<f64>() / (2.0 * 0.49 * 3.0);
        assert!((got[i] - want).abs() <= 1e-12 * want.max(1.0), "{i}: {} vs {want}", got[i]);
    }
}

#[test]
fn fsi_equals_fisher_smoothed_usi_for_linear_models() {
    let spec = MlpSpec::new(vec![4, 3], vec![]).unwrap();
    let mut rng = Rng::new(5);
    let w0 = init_weights(&spec, &mut rng);
    let data = SyntheticSource::new(SourceKind::GaussBlobs { classes: 3, separation: 2.0, dim: 4 })
        .sample(10, &mut rng)
        .unwrap();
    let probes = DMatrix::from_fn(7, 4, |_, _| rng.normal());
    let scorer = FsiScorer::new(&spec, &w0, &data.dataset, &probes, InfoConfig::new(stationary(0.1))).unwrap();
    let all: Vec<usize> = (0..10).collect();
    let scores = scorer.fsi_scores(&all).unwrap();
    let (deltas, _) = scorer.deltas(&all).unwrap();
    let features = jacobian_features(&spec, &w0, &data.dataset.inputs, None).unwrap();
    for (cap, label) in [(10_000, "dense"), (1, "operator")] {
        let fisher = fisher_matrix(&spec, &w0, &probes, cap).unwrap();
        let smoothing = Smoothing::Fisher { fisher, sigma: 1.0 };
        for (d, f) in deltas.iter().zip(&scores) {
            let u = usi(&d.weight_delta(&features), &smoothing).unwrap();
            assert!((u - f).abs() <= 1e-10 * f.max(1e-12), "{label}: {u} vs {f}");
        }
    }
}

#[test]
fn isotropic_usi_from_kernel_matches_weight_space() {
    let spec = MlpSpec::new(vec![3, 6, 2], vec![Activation::Tanh]).unwrap();
    let mut rng = Rng::new(8);
    let w0 = init_weights(&spec, &mut rng);
    let data = SyntheticSource::new(SourceKind::TwoMoons { noise: 0.1 }).sample(8, &mut rng).unwrap();
    let mut inputs = DMatrix::zeros(8, 3);
    inputs.columns_mut(0, 2).copy_from(&data.dataset.inputs);
    let train_set = Dataset::new(inputs, data.dataset.targets.clone(), true).unwrap();
    let scorer = FsiScorer::new(&spec, &w0, &train_set, &train_set.inputs, InfoConfig::new(stationary(0.05))).unwrap();
    let all: Vec<usize> = (0..8).collect();
    let scores = scorer.scores(&all).unwrap();
    let (deltas, _) = scorer.deltas(&all).unwrap();
    let features = jacobian_features(&spec, &w0, &train_set.inputs, None).unwrap();
    let iso = Smoothing::isotropic(1.0).unwrap();
    for (d, (_, u)) in deltas.iter().zip(&scores) {
        let direct = usi(&d.weight_delta(&features), &iso).unwrap();
        assert!((direct - u).abs() <= 1e-9 * direct.max(1e-12));
    }
}

#[test]
fn langevin_case_agrees_with_lyapunov_smoothing() {
    let mut rng = Rng::new(13);
    let d = 6;
    let b = DMatrix::from_fn(d, d, |_, _| rng.normal());
    let h = SymMatrix::new(&b * b.transpose() + DMatrix::identity(d, d) * 0.5).unwrap();
    let (eta, batch, sigma2) = (0.05, 8, 0.3);
    let noise = SymMatrix::identity(d).scale(sigma2);
    let smoothing = Smoothing::sgd_steady(&h, &noise, eta, batch).unwrap();
    for _ in 0..10 {
        let delta = DVector::from_fn(d, |_, _| rng.normal());
        let a = usi(&delta, &smoothing).unwrap();
        let l = langevin_usi(&delta, &h, eta, batch, sigma2);
        assert!((a - l).abs() <= 1e-8 * l, "{a} vs {l}");
    }
}

#[test]
fn smoothing_rejects_degenerate_inputs() {
    assert!(Smoothing::isotropic(0.0).is_err());
    let singular = SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
    assert!(Smoothing::covariance(&singular).is_err());
    let iso = Smoothing::isotropic(2.0).unwrap();
    assert_eq!(usi(&DVector::from_vec(vec![2.0, 0.0]), &iso).unwrap(), 1.0);
    assert!(fsi(&DMatrix::zeros(0, 2), 1.0).is_err());
}

/// Random tanh features, centred on the training set, feeding a linear head;
/// the linearization of the head is exact.
pub fn random_feature_task(n: usize, p: usize, dim: usize, separation: f64, flip: f64, seed: u64) -> (Dataset, DMatrix<f64>, Vec<bool>) {
    let mut rng = Rng::new(seed);
    let source = SyntheticSource::new(SourceKind::GaussBlobs { classes: 2, separation, dim });
    let sample = source.clone().with_noise(NoiseModel::Uniform { p: flip, k: 2 }).sample(n, &mut rng).unwrap();
    let probe = source.sample(64, &mut rng).unwrap();
    let g = DMatrix::from_fn(dim, p, |_, _| rng.normal());
    let lift = |x: &DMatrix<f64>| (x * &g / (dim as f64).sqrt()).map(f64::tanh);
    let (mut phi, mut phi_p) = (lift(&sample.dataset.inputs), lift(&probe.dataset.inputs));
    let mean = phi.row_mean();
    for mut r in phi.row_iter_mut().chain(phi_p.row_iter_mut()) {
        r -= &mean;
        r *= 0.5;
    }
    (Dataset::new(phi, sample.dataset.targets, true).unwrap(), phi_p, sample.flipped)
}

/// F-SI from retraining the head by full-batch gradient descent on the mean
/// loss, with and without each example. `lambda` is the summed-loss decay.
pub fn brute_force_fsi(spec: &MlpSpec, w0: &FlatWeights, data: &Dataset, probes: &DMatrix<f64>, lambda: f64, top: f64, cond: f64) -> Vec<f64> {
    let n = data.len();
    let fit = |idx: &[usize]| {
        let m = idx.len() as f64;
        let decay = lambda / m;
        let mut cfg = TrainConfig::full_batch(1.0 / (top / m + decay), (30.0 * cond).ceil() as usize, Loss::Mse);
        cfg.weight_decay = decay;
        let w = train(spec, w0, &data.select(idx), &cfg).unwrap().final_weights;
        forward(spec, &w, probes).unwrap()
    };
    let full = fit(&(0..n).collect::<Vec<_>>());
    (0..n)
        .into_par_iter()
        .map(|i| {
            let idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            (&full - fit(&idx)).norm_squared() / (2.0 * probes.nrows() as f64)
        })
        .collect()
}

#[test]
fn analytic_leave_one_out_matches_retraining() {
    let (data, probes, _) = random_feature_task(24, 96, 100, 4.0, 0.1, 3);
    let spec = MlpSpec::new(vec![96, 2], vec![]).unwrap();
    let w0 = init_weights(&spec, &mut Rng::new(4));
    let lambda = 1e-3;
    let scorer = FsiScorer::new(&spec, &w0, &data, &probes, InfoConfig::new(stationary(lambda))).unwrap();
    let analytic = scorer.fsi_scores(&(0..24).collect::<Vec<_>>()).unwrap();
    let e = scorer.ntk().eigen().unwrap();
    let cond = (e.max_value() + lambda) / (e.min_value() + lambda);
    let brute = brute_force_fsi(&spec, &w0, &data, &probes, lambda, e.max_value(), cond);
    let range = analytic.iter().cloned().fold(f64::MIN, f64::max) - analytic.iter().cloned().fold(f64::MAX, f64::min);
    let dev = analytic.iter().zip(&brute).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(spearman(&analytic, &brute) >= 0.99);
    assert!(dev <= 1e-3 * range, "{dev} vs range {range}");
}

#[test]
fn flipped_labels_carry_more_information() {
    let (data, probes, flipped) = random_feature_task(200, 256, 10, 3.0, 0.1, 17);
    let spec = MlpSpec::new(vec![256, 2], vec![]).unwrap();
    let w0 = init_weights(&spec, &mut Rng::new(18));
    let scorer = FsiScorer::new(&spec, &w0, &data, &probes, InfoConfig::new(stationary(1.0))).unwrap();
    let scores = scorer.fsi_scores(&(0..200).collect::<Vec<_>>()).unwrap();
    assert!(roc_auc(&scores, &flipped) >= 0.85);
}

#[test]
fn finite_time_scores_grow_toward_the_stationary_ones() {
    let (data, probes, _) = random_feature_task(16, 64, 100, 4.0, 0.1, 23);
    let spec = MlpSpec::new(vec![64, 2], vec![]).unwrap();
    let w0 = init_weights(&spec, &mut Rng::new(24));
    let at = |time: f64| {
        let dynamics = LinDynConfig { learning_rate: 0.01, time, mode: DynMode::Continuous, weight_decay: 0.1 };
        FsiScorer::new(&spec, &w0, &data, &probes, InfoConfig::new(dynamics))
            .unwrap()
            .fsi_scores(&(0..16).collect::<Vec<_>>())
            .unwrap()
    };
    let late = at(1e7);
    let inf = at(f64::INFINITY);
    for (a, b) in late.iter().zip(&inf) {
        assert!((a - b).abs() <= 1e-8 * b.max(1e-12));
    }
    let early = at(1.0);
    assert!(early.iter().sum::<f64>() < inf.iter().sum::<f64>());
}

#[test]
fn summarization_drops_planted_duplicates_first() {
    let mut rng = Rng::new(31);
    let base = SyntheticSource::new(SourceKind::GaussBlobs { classes: 2, separation: 4.0, dim: 100 })
        .sample(30, &mut rng)
        .unwrap();
    // Examples 30..40 are near copies of 0..10.
    let n = 40;
    let mut inputs = DMatrix::zeros(n, 100);
    inputs.rows_mut(0, 30).copy_from(&base.dataset.inputs);
    let mut labels = base.dataset.labels();
    for i in 0..10 {
        let row = base.dataset.inputs.row(i).map(|v| v + 1e-3 * rng.normal());
        inputs.row_mut(30 + i).copy_from(&row);
        labels.push(labels[i]);
    }
    let data = Dataset::from_labels(inputs, &labels, 2).unwrap();
    let spec = MlpSpec::new(vec![100, 2], vec![]).unwrap();
    let w0 = init_weights(&spec, &mut Rng::new(32));
    let scorer = FsiScorer::new(&spec, &w0, &data, &base.dataset.inputs, InfoConfig::new(stationary(1e-2))).unwrap();
    let run = || summarize(n, Some(&labels), |r| Ok(scorer.fsi_scores(r)?), Strategy::BottomOnce, &[0.25, 0.5], 0).unwrap();
    let summary = run();
    assert_eq!(summary, run());
    let dup = |i: usize| i < 10 || i >= 30;
    let first: Vec<usize> = summary.schedule.iter().take(20).map(|e| e.index).collect();
    let hits = first.iter().filter(|&&i| dup(i)).count();
    assert!(hits as f64 >= 0.8 * 20.0, "{hits} of 20 removals were duplicates");
    assert_eq!(summary.retained[0].1.len(), 30);
    assert_eq!(summary.retained[1].1.len(), 20);
}

#[test]
fn summarize_strategies_and_validation() {
    let scores = [0.5, 0.1, 0.9, 0.3, 0.7];
    let scorer = |r: &[usize]| Ok(r.iter().map(|&i| scores[i]).collect());
    let s = summarize(5, None, scorer, Strategy::BottomOnce, &[0.4], 0).unwrap();
    assert_eq!(s.schedule.iter().map(|e| e.index).collect::<Vec<_>>(), vec![1, 3]);
    let s = summarize(5, None, scorer, Strategy::Top, &[0.4], 0).unwrap();
    assert_eq!(s.schedule.iter().map(|e| e.index).collect::<Vec<_>>(), vec![2, 4]);
    let s = summarize(5, None, scorer, Strategy::BottomIterative { step_fraction: 0.2 }, &[0.6], 0).unwrap();
    assert_eq!(s.schedule.iter().map(|e| (e.index, e.round)).collect::<Vec<_>>(), vec![(1, 0), (3, 1), (0, 2)]);
    let r1 = summarize(5, None, scorer, Strategy::Random, &[0.6], 9).unwrap();
    assert_eq!(r1, summarize(5, None, scorer, Strategy::Random, &[0.6], 9).unwrap());
    assert!(summarize(5, None, scorer, Strategy::BottomOnce, &[1.0], 0).is_err());
    assert!(summarize(5, None, |_| Ok(vec![1.0]), Strategy::BottomOnce, &[0.2], 0).is_err());
}

#[test]
fn score_table_ranks_by_fsi() {
    let rows: Vec<SampleScore> = [0.2, 0.8, 0.5]
        .iter()
        .enumerate()
        .map(|(i, &f)| SampleScore { index: i, usi: Some(f * 2.0), fsi: f, label: Some(i % 2), group: None })
        .collect();
    let csv = scores_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,usi_nats,fsi_nats,label,group,rank,zscore");
    let ranks: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(5).unwrap()).collect();
    assert_eq!(ranks, vec!["3", "1", "2"]);
}

#[test]
fn unique_information_never_exceeds_sample_information() {
    for beta in [0.5, 5.0, 50.0] {
        for (w, z) in [(5, 3), (9, 4), (12, 6)] {
            let alg = ToyAlgorithm { weights: w, examples: z, beta };
            for s in [vec![0], vec![1, 2], vec![0, z - 1, 1]] {
                for i in 0..=s.len() {
                    let c = unique_info_check(&alg, &s, i);
                    assert!(c.unique_info >= 0.0);
                    assert!(c.sample_info + 1e-12 >= c.unique_info, "{c:?}");
                }
            }
        }
    }
}
