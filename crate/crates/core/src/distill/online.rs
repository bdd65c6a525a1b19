use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{supervision_complexity, DistillError, Result};
use crate::kernels::{build_ntk, kernel_similarity, NtkOperator, DEFAULT_NTK_CAP};
use crate::netkit::{
    argmax_rows, flatten_rows, forward, loss_and_grad, softmax_rows, train_with, Checkpoint, Dataset, FlatWeights, Loss,
    MlpSpec, TrainConfig, Trajectory,
};
use crate::numkit::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdLossKind {
    KdCe,
    KdMse,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdConfig {
    pub tau: f64,
    pub loss: KdLossKind,
    /// Weight of the distillation loss; `1 − α` goes to cross-entropy on labels.
    #[serde(default = "one")]
    pub alpha: f64,
    /// Teacher checkpoints every this many steps; `None` is offline distillation.
    #[serde(default)]
    pub teacher_checkpoint_period: Option<usize>,
}

impl KdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(DistillError::Invalid(format!("temperature must be positive, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(DistillError::Invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.teacher_checkpoint_period == Some(0) {
            return Err(DistillError::Invalid("teacher_checkpoint_period must be positive".into()));
        }
        Ok(())
    }

    pub fn loss(&self) -> Loss {
        match self.loss {
            KdLossKind::KdCe => Loss::KdCe { tau: self.tau },
            KdLossKind::KdMse => Loss::KdMse { tau: self.tau },
        }
    }
}

/// Teacher checkpoints ordered by step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherTrajectory {
    pub spec: MlpSpec,
    pub checkpoints: Vec<Checkpoint>,
}

/// Steps `p, 2p, …` up to `total`, always ending at `total`; `[total]` offline.
pub fn checkpoint_schedule(total_steps: usize, period: Option<usize>) -> Vec<usize> {
    let mut steps: Vec<usize> = match period {
        Some(p) if p > 0 => (1..).map(|i| i * p).take_while(|&s| s < total_steps).collect(),
        _ => Vec::new(),
    };
    steps.push(total_steps);
    steps
}

/// Index of the earliest checkpoint strictly after step `t`; the last one
/// once `t` has passed every checkpoint.
pub fn supervising_checkpoint(steps: &[usize], t: usize) -> usize {
    steps.iter().position(|&s| s > t).unwrap_or(steps.len().saturating_sub(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    /// Held-out points (from the test set when given) for NTK-based metrics.
    pub probe_count: usize,
    /// Random vectors for the kernel-similarity estimate.
    pub similarity_probes: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self { probe_count: 32, similarity_probes: 16, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub student_train_acc: f64,
    pub student_test_acc: Option<f64>,
    /// Argmax agreement with the final teacher.
    pub fidelity: f64,
    pub ntk_similarity: f64,
    /// Adjusted complexity of the supervising teacher's soft targets under the student NTK.
    pub adjusted_complexity: f64,
    pub trace_k: f64,
    pub cond_k: f64,
    pub supervising_checkpoint: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillOutcome {
    pub trajectory: Trajectory,
    /// Supervising checkpoint index for every update.
    pub schedule: Vec<usize>,
    pub records: Vec<EpochRecord>,
}

fn accuracy(spec: &MlpSpec, w: &FlatWeights, data: &Dataset) -> Result<f64> {
    let pred = argmax_rows(&forward(spec, w, &data.inputs)?);
    let labels = data.labels();
    Ok(pred.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / labels.len().max(1) as f64)
}

/// Student training where update `t` (counted from 1) is supervised by the
/// earliest teacher checkpoint with step `> t`.
pub fn online_distill(
    teacher: &TeacherTrajectory,
    student_spec: &MlpSpec,
    w0: &FlatWeights,
    data: &Dataset,
    test: Option<&Dataset>,
    kd: &KdConfig,
    cfg: &TrainConfig,
    tracking: Option<&TrackingConfig>,
) -> Result<DistillOutcome> {
    kd.validate()?;
    if teacher.checkpoints.is_empty() {
        return Err(DistillError::Invalid("teacher trajectory has no checkpoints".into()));
    }
    if teacher.checkpoints.windows(2).any(|w| w[1].step <= w[0].step) {
        return Err(DistillError::Invalid("teacher checkpoints must be ordered by step".into()));
    }
    if teacher.spec.output_dim() != student_spec.output_dim() || data.targets.ncols() != student_spec.output_dim() {
        return Err(DistillError::Invalid("teacher, student and labels disagree on the number of outputs".into()));
    }
    let steps: Vec<usize> = teacher.checkpoints.iter().map(|c| c.step).collect();
    let teacher_logits: Vec<DMatrix<f64>> = teacher
        .checkpoints
        .iter()
        .map(|c| forward(&teacher.spec, &c.weights, &data.inputs))
        .collect::<std::result::Result<_, _>>()?;
    let n = data.len();
    let spe = cfg.steps_per_epoch(n);
    let total = cfg.total_steps(n);
    let schedule: Vec<usize> = (0..total).map(|s| supervising_checkpoint(&steps, s + 1)).collect();
    let mut run_cfg = cfg.clone();
    if tracking.is_some() {
        run_cfg.checkpoint_steps.extend((1..=cfg.epochs).map(|e| e * spe));
        run_cfg.checkpoint_steps.sort_unstable();
        run_cfg.checkpoint_steps.dedup();
    }
    let kd_loss = kd.loss();
    let labels = &data.targets;
    let trajectory = train_with(student_spec, w0, &data.inputs, &run_cfg, |step, batch, logits| {
        let targets = teacher_logits[schedule[step]].select_rows(batch);
        if kd.alpha == 1.0 {
            return loss_and_grad(kd_loss, logits, &targets);
        }
        let (ce, g_ce) = loss_and_grad(Loss::SoftmaxCe, logits, &labels.select_rows(batch))?;
        if kd.alpha == 0.0 {
            return Ok((ce, g_ce));
        }
        let (kl, g_kd) = loss_and_grad(kd_loss, logits, &targets)?;
        Ok((kd.alpha * kl + (1.0 - kd.alpha) * ce, g_kd * kd.alpha + g_ce * (1.0 - kd.alpha)))
    })?;
    let records = match tracking {
        None => Vec::new(),
        Some(tc) => track(teacher, student_spec, data, test, kd, tc, &trajectory, &schedule, spe)?,
    };
    Ok(DistillOutcome { trajectory, schedule, records })
}

#[allow(clippy::too_many_arguments)]
fn track(
    teacher: &TeacherTrajectory,
    student_spec: &MlpSpec,
    data: &Dataset,
    test: Option<&Dataset>,
    kd: &KdConfig,
    tc: &TrackingConfig,
    trajectory: &Trajectory,
    schedule: &[usize],
    spe: usize,
) -> Result<Vec<EpochRecord>> {
    let eval = test.unwrap_or(data);
    let m = tc.probe_count.min(eval.len());
    if m == 0 || tc.similarity_probes == 0 {
        return Err(DistillError::Invalid("tracking needs probe points and similarity probes".into()));
    }
    let probes = eval.inputs.rows(0, m).into_owned();
    if m * student_spec.output_dim() > student_spec.param_count() {
        log::warn!(
            "{} probe outputs exceed {} student parameters; the student NTK is singular and the complexity infinite",
            m * student_spec.output_dim(),
            student_spec.param_count()
        );
    }
    let final_teacher = &teacher.checkpoints.last().unwrap().weights;
    let teacher_eval = argmax_rows(&forward(&teacher.spec, final_teacher, &eval.inputs)?);
    let epochs = trajectory.epoch_losses.len();
    (1..=epochs)
        .into_par_iter()
        .map(|e| {
            let step = e * spe;
            let w = &trajectory.checkpoints.iter().find(|c| c.step == step).expect("epoch checkpoint recorded").weights;
            let pred = argmax_rows(&forward(student_spec, w, &eval.inputs)?);
            let fidelity = pred.iter().zip(&teacher_eval).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64;
            let mut rng = Rng::with_stream(tc.seed, e as u64);
            let kf = NtkOperator { spec: student_spec, weights: w, inputs: &probes };
            let kg = NtkOperator { spec: &teacher.spec, weights: final_teacher, inputs: &probes };
            let sim = kernel_similarity(&kf, &kg, tc.similarity_probes, &mut rng)?;
            let sup = schedule[step - 1];
            let g = forward(&teacher.spec, &teacher.checkpoints[sup].weights, &probes)?;
            let targets = flatten_rows(&softmax_rows(&g, kd.tau));
            let f = forward(student_spec, w, &probes)?;
            let f = match kd.loss {
                KdLossKind::KdMse => f,
                KdLossKind::KdCe => softmax_rows(&f, kd.tau),
            };
            let ntk = build_ntk(student_spec, w, &probes, None, DEFAULT_NTK_CAP)?;
            let cx = supervision_complexity(&ntk, &targets, Some(&flatten_rows(&f)))?;
            Ok(EpochRecord {
                epoch: e,
                loss: trajectory.epoch_losses[e - 1],
                student_train_acc: accuracy(student_spec, w, data)?,
                student_test_acc: test.map(|t| accuracy(student_spec, w, t)).transpose()?,
                fidelity,
                ntk_similarity: sim.mean,
                adjusted_complexity: cx.adjusted,
                trace_k: cx.trace,
                cond_k: cx.condition,
                supervising_checkpoint: sup,
            })
        })
        .collect()
}
