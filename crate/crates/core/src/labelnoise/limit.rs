use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{NoiseError, Result};
use crate::netkit::{
    argmax_rows, backward, forward, forward_cached, softmax_rows, BatchSampler, Dataset, FlatWeights, MlpSpec, NetError,
    TrainConfig, DIVERGENCE_THRESHOLD,
};
use crate::numkit::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QDist {
    Gaussian,
    Laplace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    pub q_dist: QDist,
    /// Weight of the `‖μ‖²` penalty in the q-network loss.
    pub beta: f64,
    pub sigma_q: f64,
    /// Sample `G ~ q` instead of using the predicted mean `μ`.
    pub sample_gradients: bool,
    pub q_spec: MlpSpec,
    /// Defaults to the classifier learning rate.
    #[serde(default)]
    pub q_learning_rate: Option<f64>,
    /// Start the q network from the classifier's initial weights.
    #[serde(default)]
    pub init_q_from_classifier: bool,
}

impl LimitConfig {
    pub fn validate(&self, classifier: &MlpSpec) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(NoiseError::Invalid("beta must be non-negative".into()));
        }
        if !(self.sigma_q > 0.0) {
            return Err(NoiseError::Invalid("sigma_q must be positive".into()));
        }
        if let Some(lr) = self.q_learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(NoiseError::Invalid("q_learning_rate must be positive".into()));
            }
        }
        self.q_spec.validate()?;
        if self.q_spec.input_dim() != classifier.input_dim() || self.q_spec.output_dim() != classifier.output_dim() {
            return Err(NoiseError::Invalid("q network must map inputs to the classifier's logit space".into()));
        }
        if self.init_q_from_classifier && &self.q_spec != classifier {
            return Err(NoiseError::Invalid("init_q_from_classifier needs identical network specs".into()));
        }
        Ok(())
    }
}

/// One LIMIT step on a batch, before any weights change.
#[derive(Debug, Clone)]
pub struct LimitStep {
    /// Gradient of the classifier weights from backpropagating `G/b`.
    pub classifier_grad: Vec<f64>,
    pub q_grad: Vec<f64>,
    pub q_loss: f64,
    /// Predicted logit gradient `softmax(a) − softmax(r)`.
    pub mu: DMatrix<f64>,
    /// Actual cross-entropy logit gradient `softmax(a) − y`.
    pub label_grad: DMatrix<f64>,
    /// Gradient fed to the classifier.
    pub used_grad: DMatrix<f64>,
}

/// `Jᵀ d` for the softmax Jacobian at probabilities `p`, row by row.
fn softmax_vjp(p: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = p.component_mul(d);
    for (mut row, prow) in out.row_iter_mut().zip(p.row_iter()) {
        let dot = row.sum();
        for (o, &pi) in row.iter_mut().zip(prow.iter()) {
            *o -= pi * dot;
        }
    }
    out
}

/// Gradients for one batch. Labels enter only the q-network loss and the
/// reported `label_grad`; with `sample_gradients` off the classifier
/// gradient depends on inputs and weights alone.
#[allow(clippy::too_many_arguments)]
pub fn limit_step(
    spec: &MlpSpec,
    w: &FlatWeights,
    q_spec: &MlpSpec,
    phi: &FlatWeights,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lcfg: &LimitConfig,
    rng: &mut Rng,
) -> Result<LimitStep> {
    let cache = forward_cached(spec, w, x)?;
    let q_cache = forward_cached(q_spec, phi, x)?;
    if y.shape() != cache.logits().shape() {
        return Err(NetError::Shape {
            what: "labels",
            expected: format!("{:?}", cache.logits().shape()),
            got: format!("{:?}", y.shape()),
        }
        .into());
    }
    let b = x.nrows().max(1) as f64;
    let s = softmax_rows(cache.logits(), 1.0);
    let p = softmax_rows(q_cache.logits(), 1.0);
    let mu = &s - &p;
    let label_grad = &s - y;

    let mut used = mu.clone();
    if lcfg.sample_gradients {
        let laplace_scale = lcfg.sigma_q / std::f64::consts::SQRT_2;
        used.apply(|g| {
            *g += match lcfg.q_dist {
                QDist::Gaussian => lcfg.sigma_q * rng.normal(),
                QDist::Laplace => rng.laplace(laplace_scale),
            }
        });
    }
    let classifier_grad = backward(spec, w, &cache, &(&used / b), None)?;

    // μ − G^ℓ = y − p, so the likelihood term only involves the q network.
    let resid = &p - y;
    let (fit, d_fit) = match lcfg.q_dist {
        QDist::Gaussian => (resid.norm_squared(), resid.map(|v| 2.0 * v)),
        QDist::Laplace => (resid.iter().map(|v| v.abs()).sum(), resid.map(|v| if v == 0.0 { 0.0 } else { v.signum() })),
    };
    let penalty = lcfg.beta * mu.norm_squared();
    let d_p = d_fit - &mu * (2.0 * lcfg.beta);
    let d_r = softmax_vjp(&p, &d_p) / b;
    let q_grad = backward(q_spec, phi, &q_cache, &d_r, None)?;
    Ok(LimitStep { classifier_grad, q_grad, q_loss: (fit + penalty) / b, mu, label_grad, used_grad: used })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    /// Mean norm of the per-example gradient fed to the classifier.
    pub mean_grad_norm: f64,
    pub mean_q_loss: f64,
}

#[derive(Debug, Clone)]
pub struct LimitOutcome {
    pub classifier: FlatWeights,
    pub q_weights: FlatWeights,
    pub metrics: Vec<EpochMetrics>,
    /// `‖y − softmax(r_φ(x))‖` per training example, the distance between
    /// predicted and actual logit gradients.
    pub grad_distance: Vec<f64>,
}

fn accuracy(spec: &MlpSpec, w: &FlatWeights, data: &Dataset) -> Result<f64> {
    let pred = argmax_rows(&forward(spec, w, &data.inputs)?);
    let labels = data.labels();
    let hits = pred.iter().zip(&labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}

/// Jointly train a classifier and a label-free gradient predictor.
pub fn limit_train(
    spec: &MlpSpec,
    w0: &FlatWeights,
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
    lcfg: &LimitConfig,
) -> Result<LimitOutcome> {
    cfg.validate()?;
    lcfg.validate(spec)?;
    w0.check(spec)?;
    if !data.classification {
        return Err(NoiseError::Invalid("LIMIT needs classification data".into()));
    }
    let n = data.len();
    if n == 0 {
        return Err(NetError::Data("empty training set".into()).into());
    }
    let root = Rng::new(cfg.seed);
    let mut sampler = BatchSampler::new(n, cfg.batch_size, false, root.fork(1));
    let mut noise = root.fork(2);
    let mut w = w0.clone();
    let mut phi = if lcfg.init_q_from_classifier {
        w0.clone()
    } else {
        crate::netkit::init_weights(&lcfg.q_spec, &mut root.fork(3))
    };
    let q_lr = lcfg.q_learning_rate.unwrap_or(cfg.learning_rate);
    let steps_per_epoch = cfg.steps_per_epoch(n);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let (mut grad_norm_sum, mut q_loss_sum, mut seen) = (0.0, 0.0, 0usize);
        for _ in 0..steps_per_epoch {
            let batch = sampler.next_batch();
            let x = data.inputs.select_rows(&batch);
            let y = data.targets.select_rows(&batch);
            let st = limit_step(spec, &w, &lcfg.q_spec, &phi, &x, &y, lcfg, &mut noise)?;
            if !st.q_loss.is_finite() || st.q_loss > DIVERGENCE_THRESHOLD {
                return Err(NetError::Diverged { step, loss: st.q_loss }.into());
            }
            grad_norm_sum += st.used_grad.row_iter().map(|r| r.norm()).sum::<f64>();
            q_loss_sum += st.q_loss * batch.len() as f64;
            seen += batch.len();
            for (i, wi) in w.values.iter_mut().enumerate() {
                *wi -= cfg.learning_rate * (st.classifier_grad[i] + cfg.weight_decay * (*wi - w0.values[i]));
            }
            for (pi, g) in phi.values.iter_mut().zip(&st.q_grad) {
                *pi -= q_lr * g;
            }
            if w.values.iter().chain(&phi.values).any(|v| !v.is_finite()) {
                return Err(NetError::Diverged { step, loss: f64::NAN }.into());
            }
            step += 1;
        }
        let train_acc = accuracy(spec, &w, data)?;
        let test_acc = test.map(|t| accuracy(spec, &w, t)).transpose()?;
        let denom = seen.max(1) as f64;
        metrics.push(EpochMetrics {
            epoch: epoch + 1,
            train_acc,
            test_acc,
            mean_grad_norm: grad_norm_sum / denom,
            mean_q_loss: q_loss_sum / denom,
        });
        log::debug!("limit epoch {} train_acc {:.4}", epoch + 1, train_acc);
    }
    let p = softmax_rows(&forward(&lcfg.q_spec, &phi, &data.inputs)?, 1.0);
    let grad_distance = (&data.targets - p).row_iter().map(|r| r.norm()).collect();
    Ok(LimitOutcome { classifier: w, q_weights: phi, metrics, grad_distance })
}

/// Value and gradients of the batch-mean soft-regularized objective
/// `CE(a, y) + λ‖z‖²‖y − softmax(r)‖²`.
#[derive(Debug, Clone)]
pub struct SoftRegValue {
    pub value: f64,
    pub d_logits: DMatrix<f64>,
    pub d_z: DMatrix<f64>,
    pub d_r: DMatrix<f64>,
}

pub fn soft_reg_loss(
    logits: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
    r: &DMatrix<f64>,
    lambda: f64,
) -> Result<SoftRegValue> {
    let b = logits.nrows();
    if y.shape() != logits.shape() || r.shape() != logits.shape() || z.nrows() != b {
        return Err(NoiseError::Invalid("soft_reg_loss inputs disagree in shape".into()));
    }
    let bf = b.max(1) as f64;
    let (ce, d_logits) = crate::netkit::loss_and_grad(crate::netkit::Loss::SoftmaxCe, logits, y)?;
    let p = softmax_rows(r, 1.0);
    let e = y - &p;
    let mut value = ce;
    let mut d_z = DMatrix::zeros(z.nrows(), z.ncols());
    let mut d_p = DMatrix::zeros(b, logits.ncols());
    for i in 0..b {
        let zn = z.row(i).norm_squared();
        let en = e.row(i).norm_squared();
        value += lambda * zn * en / bf;
        d_z.set_row(i, &(z.row(i) * (2.0 * lambda * en / bf)));
        d_p.set_row(i, &(e.row(i) * (-2.0 * lambda * zn / bf)));
    }
    let d_r = softmax_vjp(&p, &d_p);
    Ok(SoftRegValue { value, d_logits, d_z, d_r })
}

/// Gradient descent on the soft-regularized objective; the classifier and q
/// network are updated jointly.
pub fn soft_reg_train(
    spec: &MlpSpec,
    w0: &FlatWeights,
    q_spec: &MlpSpec,
    phi0: &FlatWeights,
    data: &Dataset,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<(FlatWeights, FlatWeights, Vec<f64>)> {
    cfg.validate()?;
    if !(lambda >= 0.0) {
        return Err(NoiseError::Invalid("lambda must be non-negative".into()));
    }
    if spec.num_layers() < 2 {
        return Err(NoiseError::Invalid("soft regularization needs a hidden layer".into()));
    }
    let n = data.len();
    let mut sampler = BatchSampler::new(n, cfg.batch_size, false, Rng::new(cfg.seed).fork(1));
    let (mut w, mut phi) = (w0.clone(), phi0.clone());
    let mut losses = Vec::with_capacity(cfg.epochs);
    let steps = cfg.steps_per_epoch(n);
    for step_epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for s in 0..steps {
            let batch = sampler.next_batch();
            let x = data.inputs.select_rows(&batch);
            let y = data.targets.select_rows(&batch);
            let cache = forward_cached(spec, &w, &x)?;
            let q_cache = forward_cached(q_spec, &phi, &x)?;
            let v = soft_reg_loss(cache.logits(), &y, cache.penultimate(), q_cache.logits(), lambda)?;
            if !v.value.is_finite() || v.value > DIVERGENCE_THRESHOLD {
                return Err(NetError::Diverged { step: step_epoch * steps + s, loss: v.value }.into());
            }
            total += v.value;
            let gw = backward(spec, &w, &cache, &v.d_logits, Some(&v.d_z))?;
            let gq = backward(q_spec, &phi, &q_cache, &v.d_r, None)?;
            for (i, wi) in w.values.iter_mut().enumerate() {
                *wi -= cfg.learning_rate * (gw[i] + cfg.weight_decay * (*wi - w0.values[i]));
            }
            for (pi, g) in phi.values.iter_mut().zip(&gq) {
                *pi -= cfg.learning_rate * g;
            }
        }
        losses.push(total / steps as f64);
    }
    Ok((w, phi, losses))
}
