use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{backward, forward_cached, loss_and_grad, Dataset, FlatWeights, Loss, MlpSpec, NetError, Result};
use crate::numkit::Rng;

/// Training aborts once the batch loss exceeds this value.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Piecewise-constant inverse temperature: entry `(s, β)` applies from step `s` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgldSchedule {
    pub inverse_temperature: Vec<(usize, f64)>,
}

impl SgldSchedule {
    pub fn constant(beta: f64) -> Self {
        Self { inverse_temperature: vec![(0, beta)] }
    }

    pub fn beta_at(&self, step: usize) -> f64 {
        let mut beta = self.inverse_temperature.first().map(|e| e.1).unwrap_or(f64::INFINITY);
        for &(s, b) in &self.inverse_temperature {
            if s <= step {
                beta = b;
            }
        }
        beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Penalty `(λ/2)‖w − w₀‖²`.
    #[serde(default)]
    pub weight_decay: f64,
    pub loss: Loss,
    #[serde(default)]
    pub seed: u64,
    /// Langevin noise; batches are then drawn with replacement.
    #[serde(default)]
    pub sgld: Option<SgldSchedule>,
    /// Steps after which weights are recorded (0 = initial weights).
    #[serde(default)]
    pub checkpoint_steps: Vec<usize>,
}

impl TrainConfig {
    pub fn full_batch(learning_rate: f64, epochs: usize, loss: Loss) -> Self {
        Self {
            learning_rate,
            epochs,
            batch_size: usize::MAX,
            weight_decay: 0.0,
            loss,
            seed: 0,
            sgld: None,
            checkpoint_steps: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(NetError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(NetError::InvalidConfig("weight_decay must be non-negative".into()));
        }
        if let Some(s) = &self.sgld {
            if s.inverse_temperature.iter().any(|&(_, b)| !(b > 0.0)) {
                return Err(NetError::InvalidConfig("inverse temperatures must be positive".into()));
            }
        }
        self.loss.validate()
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        let b = self.batch_size.min(n).max(1);
        n.div_ceil(b)
    }

    pub fn total_steps(&self, n: usize) -> usize {
        self.epochs * self.steps_per_epoch(n)
    }
}

/// Yields mini-batch index sets: shuffled epochs without replacement, or
/// independent draws with replacement.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    batch: usize,
    with_replacement: bool,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch: usize, with_replacement: bool, rng: Rng) -> Self {
        Self { n, batch: batch.min(n).max(1), with_replacement, rng, order: Vec::new(), cursor: n }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.batch >= self.n && !self.with_replacement {
            return (0..self.n).collect();
        }
        if self.with_replacement {
            return (0..self.batch).map(|_| self.rng.below(self.n)).collect();
        }
        if self.cursor >= self.n {
            self.order = self.rng.permutation(self.n);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch).min(self.n);
        let out = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub weights: FlatWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub final_weights: FlatWeights,
    /// Mean batch loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Gradient descent where `objective(step, batch, logits)` supplies the
/// batch loss and its gradient with respect to the logits.
pub fn train_with<F>(
    spec: &MlpSpec,
    w0: &FlatWeights,
    inputs: &DMatrix<f64>,
    cfg: &TrainConfig,
    mut objective: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &[usize], &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
{
    cfg.validate()?;
    w0.check(spec)?;
    let n = inputs.nrows();
    if n == 0 {
        return Err(NetError::Data("empty training set".into()));
    }
    let root = Rng::new(cfg.seed);
    let mut sampler = BatchSampler::new(n, cfg.batch_size, cfg.sgld.is_some(), root.fork(1));
    let mut noise = root.fork(2);
    let steps_per_epoch = cfg.steps_per_epoch(n);
    let mut w = w0.clone();
    let mut checkpoints = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let record = |step: usize, w: &FlatWeights, cps: &mut Vec<Checkpoint>| {
        if cfg.checkpoint_steps.contains(&step) {
            cps.push(Checkpoint { step, weights: w.clone() });
        }
    };
    record(0, &w, &mut checkpoints);
    let mut step = 0;
    for _epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..steps_per_epoch {
            let batch = sampler.next_batch();
            let x = inputs.select_rows(&batch);
            let cache = forward_cached(spec, &w, &x)?;
            let (loss, d_logits) = objective(step, &batch, cache.logits())?;
            if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
                return Err(NetError::Diverged { step, loss });
            }
            total += loss;
            let grad = backward(spec, &w, &cache, &d_logits, None)?;
            let eta = cfg.learning_rate;
            let noise_scale = cfg.sgld.as_ref().map(|s| (2.0 * eta / s.beta_at(step)).sqrt());
            for (i, wi) in w.values.iter_mut().enumerate() {
                let g = grad[i] + cfg.weight_decay * (*wi - w0.values[i]);
                *wi -= eta * g;
                if let Some(sd) = noise_scale {
                    *wi += sd * noise.normal();
                }
            }
            if w.values.iter().any(|v| !v.is_finite()) {
                return Err(NetError::Diverged { step, loss: f64::NAN });
            }
            step += 1;
            record(step, &w, &mut checkpoints);
        }
        epoch_losses.push(total / steps_per_epoch as f64);
    }
    Ok(Trajectory { checkpoints, final_weights: w, epoch_losses, steps: step })
}

/// Train on a dataset with the configured loss against its targets.
pub fn train(spec: &MlpSpec, w0: &FlatWeights, data: &Dataset, cfg: &TrainConfig) -> Result<Trajectory> {
    let targets = &data.targets;
    train_with(spec, w0, &data.inputs, cfg, |_, batch, logits| {
        loss_and_grad(cfg.loss, logits, &targets.select_rows(batch))
    })
}
