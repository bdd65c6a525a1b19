//! Synthetic data sources with optional label noise and class imbalance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labelnoise::{NoiseError, NoiseModel};
use crate::netkit::{Dataset, NetError};
use crate::numkit::Rng;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid source: {0}")]
    Invalid(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceKind {
    /// Unit-variance Gaussians around `separation·e_c` (or a circle of that
    /// radius when there are more classes than dimensions).
    GaussBlobs { classes: usize, separation: f64, dim: usize },
    /// Two interleaved half circles in the plane.
    TwoMoons { noise: f64 },
    /// Uniform `±1` vectors labelled by the parity of their positive entries.
    ParityBits { bits: usize },
    /// Binary task whose classes are unions of Gaussian subclusters; group
    /// `g` belongs to class `g mod 2`.
    SubclassMixture { groups: usize, dim: usize, separation: f64 },
}

impl SourceKind {
    pub fn class_count(&self) -> usize {
        match self {
            SourceKind::GaussBlobs { classes, .. } => *classes,
            _ => 2,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SourceKind::GaussBlobs { dim, .. } | SourceKind::SubclassMixture { dim, .. } => *dim,
            SourceKind::TwoMoons { .. } => 2,
            SourceKind::ParityBits { bits } => *bits,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SourceKind::GaussBlobs { classes, separation, dim } => *classes >= 2 && *dim >= 1 && separation.is_finite(),
            SourceKind::TwoMoons { noise } => *noise >= 0.0 && noise.is_finite(),
            SourceKind::ParityBits { bits } => (1..=62).contains(bits),
            SourceKind::SubclassMixture { groups, dim, separation } => {
                *groups >= 2 && *dim >= 1 && separation.is_finite()
            }
        };
        if ok { Ok(()) } else { Err(SynthError::Invalid(format!("{self:?}"))) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub generator: SourceKind,
    #[serde(default)]
    pub label_noise: Option<NoiseModel>,
    /// Relative class frequencies; uniform when absent.
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub dataset: Dataset,
    pub clean_labels: Vec<usize>,
    pub flipped: Vec<bool>,
    /// Subcluster id for mixtures, clean label otherwise.
    pub groups: Vec<usize>,
}

impl SyntheticSource {
    pub fn new(kind: SourceKind) -> Self {
        Self { generator: kind, label_noise: None, class_weights: None }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.label_noise = Some(noise);
        self
    }

    fn draw_class(&self, rng: &mut Rng) -> usize {
        let k = self.generator.class_count();
        match &self.class_weights {
            None => rng.below(k),
            Some(w) => {
                let total: f64 = w.iter().sum();
                let mut u = rng.uniform() * total;
                for (c, &wc) in w.iter().enumerate() {
                    if u < wc {
                        return c;
                    }
                    u -= wc;
                }
                k - 1
            }
        }
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Sample> {
        self.generator.validate()?;
        let k = self.generator.class_count();
        if let Some(w) = &self.class_weights {
            if w.len() != k || w.iter().any(|v| !(*v >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
                return Err(SynthError::Invalid("class_weights must be k non-negative numbers with positive sum".into()));
            }
        }
        let dim = self.generator.input_dim();
        let mut inputs = DMatrix::zeros(n, dim);
        let mut labels = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(n);
        let mut feat_rng = rng.fork(0x5eed);
        let centres: Vec<Vec<f64>> = match &self.generator {
            SourceKind::SubclassMixture { groups, dim, separation } => (0..*groups)
                .map(|_| (0..*dim).map(|_| separation * feat_rng.normal()).collect())
                .collect(),
            _ => Vec::new(),
        };
        for i in 0..n {
            let c = self.draw_class(rng);
            let (row, group): (Vec<f64>, usize) = match &self.generator {
                SourceKind::GaussBlobs { classes, separation, dim } => {
                    let mut m = vec![0.0; *dim];
                    if classes <= dim {
                        m[c] = *separation;
                    } else if *dim == 1 {
                        m[0] = separation * c as f64;
                    } else {
                        let a = 2.0 * std::f64::consts::PI * c as f64 / *classes as f64;
                        m[0] = separation * a.cos();
                        m[1] = separation * a.sin();
                    }
                    (m.into_iter().map(|v| v + rng.normal()).collect(), c)
                }
                SourceKind::TwoMoons { noise } => {
                    let t = std::f64::consts::PI * rng.uniform();
                    let (x, y) = if c == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
                    (vec![x + noise * rng.normal(), y + noise * rng.normal()], c)
                }
                SourceKind::ParityBits { bits } => loop {
                    let v: Vec<f64> = (0..*bits).map(|_| if rng.bernoulli(0.5) { 1.0 } else { -1.0 }).collect();
                    let parity = v.iter().filter(|&&b| b > 0.0).count() % 2;
                    if parity == c {
                        break (v, c);
                    }
                },
                SourceKind::SubclassMixture { groups: g, .. } => {
                    let per_class = (g + 1 - c) / 2;
                    let grp = 2 * rng.below(per_class.max(1)) + c;
                    (centres[grp].iter().map(|m| m + rng.normal()).collect(), grp)
                }
            };
            for (j, v) in row.into_iter().enumerate() {
                inputs[(i, j)] = v;
            }
            labels.push(c);
            groups.push(group);
        }
        let (noisy, flipped) = match &self.label_noise {
            Some(noise) => noise.apply(&labels, &mut rng.fork(0xf11b))?,
            None => (labels.clone(), vec![false; n]),
        };
        Ok(Sample { dataset: Dataset::from_labels(inputs, &noisy, k)?, clean_labels: labels, flipped, groups })
    }
}
