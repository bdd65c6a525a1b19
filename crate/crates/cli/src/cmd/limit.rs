use infogen_core::io::{csv_string, fmt_f64};
use infogen_core::labelnoise::{limit_train, soft_reg_train, LimitConfig};
use infogen_core::netkit::{init_weights, MlpSpec, TrainConfig};
use infogen_core::numkit::Rng;
use infogen_core::stats::roc_auc;
use infogen_core::synth::SyntheticSource;
use serde::{Deserialize, Serialize};

use super::{accuracy, draw_split, opt, write_weights};
use crate::error::{CliError, Result};
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftRegParams {
    pub q_spec: MlpSpec,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitParams {
    pub source: SyntheticSource,
    pub n_train: usize,
    #[serde(default)]
    pub n_test: usize,
    pub classifier: MlpSpec,
    /// `seed` inside is replaced by one derived from the run seed.
    pub train: TrainConfig,
    #[serde(default)]
    pub limit: Option<LimitConfig>,
    #[serde(default)]
    pub soft_reg: Option<SoftRegParams>,
}

#[derive(Debug, Serialize)]
struct Summary {
    method: &'static str,
    final_train_acc: f64,
    final_test_acc: Option<f64>,
    flipped: usize,
    /// ROC-AUC of the gradient-prediction distance for spotting flipped labels.
    flip_detection_auc: Option<f64>,
}

pub fn run(p: &LimitParams, seed: u64, out: &mut Output) -> Result<()> {
    let (train, test) = draw_split(&p.source, p.n_train, p.n_test, seed)?;
    let test_data = (p.n_test > 0).then_some(&test.dataset);
    let w0 = init_weights(&p.classifier, &mut Rng::with_stream(seed, 2));
    let mut cfg = p.train.clone();
    cfg.seed = Rng::with_stream(seed, 3).next_seed();
    let flipped = train.flipped.iter().filter(|&&f| f).count();
    match (&p.limit, &p.soft_reg) {
        (Some(lcfg), None) => {
            let res = limit_train(&p.classifier, &w0, &train.dataset, test_data, &cfg, lcfg)?;
            let rows: Vec<Vec<String>> = res
                .metrics
                .iter()
                .map(|m| {
                    vec![
                        m.epoch.to_string(),
                        fmt_f64(m.train_acc),
                        opt(m.test_acc),
                        fmt_f64(m.mean_grad_norm),
                        fmt_f64(m.mean_q_loss),
                    ]
                })
                .collect();
            out.write(
                "metrics.csv",
                csv_string(&["epoch", "train_acc", "test_acc", "mean_grad_norm", "mean_q_loss"], &rows).as_bytes(),
            )?;
            let labels = train.dataset.labels();
            let rows: Vec<Vec<String>> = (0..p.n_train)
                .map(|i| {
                    vec![
                        i.to_string(),
                        labels[i].to_string(),
                        train.clean_labels[i].to_string(),
                        (train.flipped[i] as u8).to_string(),
                        fmt_f64(res.grad_distance[i]),
                    ]
                })
                .collect();
            out.write(
                "scores.csv",
                csv_string(&["index", "label", "clean_label", "flipped", "grad_distance"], &rows).as_bytes(),
            )?;
            let steps = cfg.total_steps(p.n_train);
            write_weights(out, "classifier.bin", &p.classifier, &res.classifier, steps, seed)?;
            write_weights(out, "q.bin", &lcfg.q_spec, &res.q_weights, steps, seed)?;
            let last = res.metrics.last();
            out.write_json(
                "summary.json",
                &Summary {
                    method: "limit",
                    final_train_acc: last.map_or(f64::NAN, |m| m.train_acc),
                    final_test_acc: last.and_then(|m| m.test_acc),
                    flipped,
                    flip_detection_auc: (flipped > 0 && flipped < p.n_train)
                        .then(|| roc_auc(&res.grad_distance, &train.flipped)),
                },
            )
        }
        (None, Some(sr)) => {
            let phi0 = init_weights(&sr.q_spec, &mut Rng::with_stream(seed, 4));
            let (w, phi, losses) =
                soft_reg_train(&p.classifier, &w0, &sr.q_spec, &phi0, &train.dataset, &cfg, sr.lambda)?;
            let rows: Vec<Vec<String>> =
                losses.iter().enumerate().map(|(e, l)| vec![(e + 1).to_string(), fmt_f64(*l)]).collect();
            out.write("metrics.csv", csv_string(&["epoch", "loss"], &rows).as_bytes())?;
            let steps = cfg.total_steps(p.n_train);
            write_weights(out, "classifier.bin", &p.classifier, &w, steps, seed)?;
            write_weights(out, "q.bin", &sr.q_spec, &phi, steps, seed)?;
            out.write_json(
                "summary.json",
                &Summary {
                    method: "soft_reg",
                    final_train_acc: accuracy(&p.classifier, &w, &train.dataset)?,
                    final_test_acc: test_data.map(|t| accuracy(&p.classifier, &w, t)).transpose()?,
                    flipped,
                    flip_detection_auc: None,
                },
            )
        }
        _ => Err(CliError::config("set exactly one of `limit` and `soft_reg`")),
    }
}
