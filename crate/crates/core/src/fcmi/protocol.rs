use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FcmiError, Result};
use crate::netkit::{argmax_rows, forward, init_weights, train, Dataset, MlpSpec, TrainConfig};
use crate::numkit::Rng;
use crate::synth::SyntheticSource;

pub trait DataSource: Sync {
    fn draw(&self, m: usize, rng: &mut Rng) -> Result<Dataset>;
}

impl DataSource for SyntheticSource {
    fn draw(&self, m: usize, rng: &mut Rng) -> Result<Dataset> {
        Ok(self.sample(m, rng)?.dataset)
    }
}

/// Uniform draws with replacement from a finite pool.
#[derive(Debug, Clone)]
pub struct PoolSource {
    pub pool: Dataset,
}

impl DataSource for PoolSource {
    fn draw(&self, m: usize, rng: &mut Rng) -> Result<Dataset> {
        if self.pool.is_empty() {
            return Err(FcmiError::Invalid("empty pool".into()));
        }
        let idx: Vec<usize> = (0..m).map(|_| rng.below(self.pool.len())).collect();
        Ok(self.pool.select(&idx))
    }
}

/// A learning method that outputs class labels.
pub trait Trainer: Sync {
    /// Predicted labels on `eval` after each checkpoint (epochs for
    /// iterative trainers). Must be deterministic given `seed`.
    fn fit_predict(&self, train: &Dataset, eval: &DMatrix<f64>, checkpoints: &[usize], seed: u64) -> Result<Vec<Vec<usize>>>;
}

/// MLP trained with the netkit trainer from a seed-dependent initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpTrainer {
    pub spec: MlpSpec,
    pub config: TrainConfig,
}

impl Trainer for MlpTrainer {
    fn fit_predict(&self, data: &Dataset, eval: &DMatrix<f64>, checkpoints: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
        let mut rng = Rng::new(seed);
        let w0 = init_weights(&self.spec, &mut rng);
        let mut cfg = self.config.clone();
        cfg.seed = rng.next_seed();
        let steps = cfg.steps_per_epoch(data.len());
        cfg.epochs = checkpoints.iter().copied().max().unwrap_or(0);
        cfg.checkpoint_steps = checkpoints.iter().map(|e| e * steps).collect();
        let traj = train(&self.spec, &w0, data, &cfg)?;
        checkpoints
            .iter()
            .map(|e| {
                let cp = traj.checkpoints.iter().find(|c| c.step == e * steps).expect("checkpoint recorded");
                Ok(argmax_rows(&forward(&self.spec, &cp.weights, eval)?))
            })
            .collect()
    }
}

/// Label of the nearest training input (lowest index on ties).
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighbor;

impl NearestNeighbor {
    pub fn nearest(train: &DMatrix<f64>, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (j, row) in train.row_iter().enumerate() {
            let d: f64 = row.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    }
}

impl Trainer for NearestNeighbor {
    fn fit_predict(&self, data: &Dataset, eval: &DMatrix<f64>, checkpoints: &[usize], _seed: u64) -> Result<Vec<Vec<usize>>> {
        let labels = data.labels();
        let preds: Vec<usize> = eval
            .row_iter()
            .map(|r| labels[Self::nearest(&data.inputs, &r.iter().copied().collect::<Vec<_>>())])
            .collect();
        Ok(vec![preds; checkpoints.len().max(1)])
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantTrainer {
    pub class: usize,
}

impl Trainer for ConstantTrainer {
    fn fit_predict(&self, _data: &Dataset, eval: &DMatrix<f64>, checkpoints: &[usize], _seed: u64) -> Result<Vec<Vec<usize>>> {
        Ok(vec![vec![self.class; eval.nrows()]; checkpoints.len().max(1)])
    }
}

/// `2n` examples grouped in pairs: row `2i + s` is member `s` of pair `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Supersample {
    pub data: Dataset,
    pub seed: u64,
}

impl Supersample {
    pub fn draw(source: &dyn DataSource, n: usize, seed: u64, stream: u64) -> Result<Self> {
        let data = source.draw(2 * n, &mut Rng::with_stream(seed, stream))?;
        if data.len() != 2 * n {
            return Err(FcmiError::Invalid(format!("source returned {} examples, wanted {}", data.len(), 2 * n)));
        }
        Ok(Self { data, seed })
    }

    pub fn n(&self) -> usize {
        self.data.len() / 2
    }

    pub fn training_set(&self, mask: &SplitMask) -> Dataset {
        let idx: Vec<usize> = (0..self.n()).map(|i| mask.train_index(i)).collect();
        self.data.select(&idx)
    }
}

/// Selector bits: pair `i` contributes member `bits[i]` to training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMask {
    pub bits: Vec<bool>,
}

impl SplitMask {
    pub fn draw(n: usize, rng: &mut Rng) -> Self {
        Self { bits: (0..n).map(|_| rng.bernoulli(0.5)).collect() }
    }

    pub fn from_code(n: usize, code: u64) -> Self {
        Self { bits: (0..n).map(|i| code >> i & 1 == 1).collect() }
    }

    pub fn train_index(&self, i: usize) -> usize {
        2 * i + self.bits[i] as usize
    }

    pub fn test_index(&self, i: usize) -> usize {
        2 * i + 1 - self.bits[i] as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// `k2` uniform masks per supersample.
    Random,
    /// Every mask once (`k2 = 2ⁿ`), so plug-in estimates are exact.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: usize,
    #[serde(default = "default_k1")]
    pub k1: usize,
    #[serde(default = "default_k2")]
    pub k2: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mask_mode")]
    pub masks: MaskMode,
}

fn default_k1() -> usize {
    5
}

fn default_k2() -> usize {
    30
}

fn default_checkpoints() -> Vec<usize> {
    vec![1]
}

fn default_mask_mode() -> MaskMode {
    MaskMode::Random
}

impl ProtocolConfig {
    pub fn new(n: usize, k1: usize, k2: usize, seed: u64) -> Self {
        Self { n, k1, k2, checkpoints: default_checkpoints(), seed, masks: MaskMode::Random }
    }

    /// Repetitions per supersample.
    pub fn repetitions(&self) -> usize {
        match self.masks {
            MaskMode::Random => self.k2,
            MaskMode::Exhaustive => 1 << self.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k1 == 0 || self.checkpoints.is_empty() {
            return Err(FcmiError::Invalid("n, k1 and the checkpoint list must be non-empty".into()));
        }
        match self.masks {
            MaskMode::Random if self.k2 == 0 => Err(FcmiError::Invalid("k2 must be positive".into())),
            MaskMode::Exhaustive if self.n > 16 => Err(FcmiError::Invalid("exhaustive masks need n ≤ 16".into())),
            _ => Ok(()),
        }
    }
}

/// Argmax predictions on all `2n` supersample points for every
/// (supersample, repetition, checkpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub checkpoints: Vec<usize>,
    /// True labels of the `2n` points, per supersample.
    pub labels: Vec<Vec<usize>>,
    /// Selector bits, indexed `u·k2 + r`.
    pub masks: Vec<Vec<bool>>,
    /// Whether the run succeeded, indexed `u·k2 + r`.
    pub valid: Vec<bool>,
    /// Flat `[u][r][c][point]`.
    pub predictions: Vec<u32>,
}

impl PredictionTable {
    fn offset(&self, u: usize, r: usize, c: usize) -> usize {
        ((u * self.k2 + r) * self.checkpoints.len() + c) * 2 * self.n
    }

    pub fn prediction(&self, u: usize, r: usize, c: usize, point: usize) -> u32 {
        self.predictions[self.offset(u, r, c) + point]
    }

    /// Predictions on both members of pair `i`.
    pub fn pair(&self, u: usize, r: usize, c: usize, i: usize) -> (u32, u32) {
        let o = self.offset(u, r, c) + 2 * i;
        (self.predictions[o], self.predictions[o + 1])
    }

    pub fn run_predictions(&self, u: usize, r: usize, c: usize) -> &[u32] {
        let o = self.offset(u, r, c);
        &self.predictions[o..o + 2 * self.n]
    }

    pub fn mask(&self, u: usize, r: usize) -> &[bool] {
        &self.masks[u * self.k2 + r]
    }

    pub fn is_valid(&self, u: usize, r: usize) -> bool {
        self.valid[u * self.k2 + r]
    }

    pub fn valid_runs(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k2).filter(move |&r| self.is_valid(u, r))
    }

    /// (train error, test error) of one run at one checkpoint under 0-1 loss.
    pub fn errors(&self, u: usize, r: usize, c: usize) -> (f64, f64) {
        let mask = self.mask(u, r);
        let labels = &self.labels[u];
        let preds = self.run_predictions(u, r, c);
        let (mut tr, mut te) = (0usize, 0usize);
        for (i, &b) in mask.iter().enumerate() {
            let (a, t) = (2 * i + b as usize, 2 * i + 1 - b as usize);
            tr += (preds[a] as usize != labels[a]) as usize;
            te += (preds[t] as usize != labels[t]) as usize;
        }
        (tr as f64 / self.n as f64, te as f64 / self.n as f64)
    }

    pub fn checkpoint_index(&self, epoch: usize) -> Option<usize> {
        self.checkpoints.iter().position(|&e| e == epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub supersample: usize,
    pub repetition: usize,
    pub seed: u64,
    pub failed: bool,
    /// Per checkpoint; empty for failed runs.
    pub train_error: Vec<f64>,
    pub test_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub table: PredictionTable,
    pub runs: Vec<RunRecord>,
    pub failed: usize,
}

impl ProtocolOutcome {
    /// `ĝ(z̃ᵤ)`: mean over successful repetitions of test minus train error.
    pub fn gaps(&self, c: usize) -> Vec<f64> {
        (0..self.table.k1).map(|u| self.per_run_gaps(u, c).iter().sum::<f64>() / self.table.valid_runs(u).count() as f64).collect()
    }

    pub fn per_run_gaps(&self, u: usize, c: usize) -> Vec<f64> {
        self.table
            .valid_runs(u)
            .map(|r| {
                let (tr, te) = self.table.errors(u, r, c);
                te - tr
            })
            .collect()
    }
}

/// Execute `k1 · k2` training runs. Supersample `u` is drawn on stream `u`
/// of `seed`; mask and training seed of run `(u, r)` come from stream
/// `u·k2 + r` of `seed + 1`.
pub fn run_protocol(trainer: &dyn Trainer, source: &dyn DataSource, cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    cfg.validate()?;
    let k2 = cfg.repetitions();
    if cfg.masks == MaskMode::Random && k2 < 10 {
        warn!("k2 = {k2} repetitions give a strongly biased plug-in estimate");
    }
    let n = cfg.n;
    let supersamples: Vec<Supersample> =
        (0..cfg.k1).map(|u| Supersample::draw(source, n, cfg.seed, u as u64)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.k1).flat_map(|u| (0..k2).map(move |r| (u, r))).collect();
    let results: Vec<(SplitMask, u64, std::result::Result<Vec<Vec<usize>>, FcmiError>)> = jobs
        .par_iter()
        .map(|&(u, r)| {
            let mut rng = Rng::with_stream(cfg.seed.wrapping_add(1), (u * k2 + r) as u64);
            let mask = match cfg.masks {
                MaskMode::Random => SplitMask::draw(n, &mut rng),
                MaskMode::Exhaustive => SplitMask::from_code(n, r as u64),
            };
            let seed = rng.next_seed();
            let z = &supersamples[u];
            let out = trainer.fit_predict(&z.training_set(&mask), &z.data.inputs, &cfg.checkpoints, seed);
            let out = out.and_then(|p| {
                if p.len() != cfg.checkpoints.len() || p.iter().any(|v| v.len() != 2 * n) {
                    Err(FcmiError::Invalid("trainer returned predictions of the wrong shape".into()))
                } else {
                    Ok(p)
                }
            });
            (mask, seed, out)
        })
        .collect();

    let nc = cfg.checkpoints.len();
    let mut table = PredictionTable {
        n,
        k1: cfg.k1,
        k2,
        checkpoints: cfg.checkpoints.clone(),
        labels: supersamples.iter().map(|z| z.data.labels()).collect(),
        masks: Vec::with_capacity(jobs.len()),
        valid: Vec::with_capacity(jobs.len()),
        predictions: Vec::with_capacity(jobs.len() * nc * 2 * n),
    };
    let mut runs = Vec::with_capacity(jobs.len());
    let mut failed = 0;
    for (&(u, r), (mask, seed, out)) in jobs.iter().zip(results) {
        table.masks.push(mask.bits.clone());
        match out {
            Ok(preds) => {
                table.valid.push(true);
                for p in &preds {
                    table.predictions.extend(p.iter().map(|&v| v as u32));
                }
            }
            Err(e) => {
                warn!("run ({u}, {r}) failed: {e}");
                failed += 1;
                table.valid.push(false);
                table.predictions.extend(std::iter::repeat_n(u32::MAX, nc * 2 * n));
            }
        }
        let ok = table.is_valid(u, r);
        let (train_error, test_error) =
            if ok { (0..nc).map(|c| table.errors(u, r, c)).unzip() } else { (Vec::new(), Vec::new()) };
        runs.push(RunRecord { supersample: u, repetition: r, seed, failed: !ok, train_error, test_error });
    }
    for u in 0..cfg.k1 {
        if table.valid_runs(u).next().is_none() {
            return Err(FcmiError::AllRunsFailed(u));
        }
    }
    Ok(ProtocolOutcome { table, runs, failed })
}
