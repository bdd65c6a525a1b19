use infogen_core::fcmi::{
    fcmi_bound_m1, fcmi_bound_mn, gap_summary, run_protocol, ConstantTrainer, MaskMode, MlpTrainer, NearestNeighbor,
    ProtocolConfig, Trainer,
};
use infogen_core::io::{csv_string, fmt_f64};
use infogen_core::netkit::{MlpSpec, TrainConfig};
use infogen_core::numkit::Rng;
use infogen_core::synth::SyntheticSource;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainerParams {
    Mlp { spec: MlpSpec, config: TrainConfig },
    NearestNeighbor,
    Constant { class: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcmiParams {
    pub source: SyntheticSource,
    pub trainer: TrainerParams,
    /// Training-set sizes; one protocol per entry.
    pub ns: Vec<usize>,
    #[serde(default = "default_k1")]
    pub k1: usize,
    #[serde(default = "default_k2")]
    pub k2: usize,
    /// Epochs at which predictions are recorded.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_masks")]
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

fn default_masks() -> MaskMode {
    MaskMode::Random
}

/// Per (n, checkpoint) estimates.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub epoch: usize,
    pub gap_mean: f64,
    pub gap_sd: f64,
    pub gap_stderr: f64,
    pub fcmi_m1: f64,
    pub fcmi_m1_sd: f64,
    pub fcmi_mn: f64,
    pub fcmi_mn_sd: f64,
    pub failed_runs: usize,
}

#[derive(Debug, Serialize)]
struct TableMeta<'a> {
    n: usize,
    k1: usize,
    k2: usize,
    checkpoints: &'a [usize],
    layout: &'static str,
    labels: &'a [Vec<usize>],
    masks: &'a [Vec<bool>],
    valid: &'a [bool],
}

pub fn run(p: &FcmiParams, seed: u64, out: &mut Output) -> Result<Vec<BoundRow>> {
    if p.ns.is_empty() {
        return Err(CliError::config("ns must list at least one training-set size"));
    }
    let trainer: Box<dyn Trainer> = match &p.trainer {
        TrainerParams::Mlp { spec, config } => Box::new(MlpTrainer { spec: spec.clone(), config: config.clone() }),
        TrainerParams::NearestNeighbor => Box::new(NearestNeighbor),
        TrainerParams::Constant { class } => Box::new(ConstantTrainer { class: *class }),
    };
    let mut run_rows = Vec::new();
    let mut bounds = Vec::new();
    for (idx, &n) in p.ns.iter().enumerate() {
        let mut cfg = ProtocolConfig::new(n, p.k1, p.k2, Rng::with_stream(seed, idx as u64).next_seed());
        cfg.checkpoints = p.checkpoints.clone();
        cfg.masks = p.masks;
        let outcome = run_protocol(trainer.as_ref(), &p.source, &cfg)?;
        log::info!("n = {n}: {} of {} runs failed", outcome.failed, outcome.runs.len());
        for r in &outcome.runs {
            for (c, &epoch) in cfg.checkpoints.iter().enumerate() {
                let (tr, te) = if r.failed {
                    (String::new(), String::new())
                } else {
                    (fmt_f64(r.train_error[c]), fmt_f64(r.test_error[c]))
                };
                run_rows.push(vec![
                    n.to_string(),
                    r.supersample.to_string(),
                    r.repetition.to_string(),
                    r.seed.to_string(),
                    (r.failed as u8).to_string(),
                    epoch.to_string(),
                    tr,
                    te,
                ]);
            }
        }
        for (c, &epoch) in cfg.checkpoints.iter().enumerate() {
            let gap = gap_summary(&outcome, c);
            let m1 = fcmi_bound_m1(&outcome.table, c)?;
            let mn = fcmi_bound_mn(&outcome.table, c)?;
            bounds.push(BoundRow {
                n,
                epoch,
                gap_mean: gap.mean,
                gap_sd: gap.sd,
                gap_stderr: gap.stderr,
                fcmi_m1: m1.mean,
                fcmi_m1_sd: m1.sd,
                fcmi_mn: mn.mean,
                fcmi_mn_sd: mn.sd,
                failed_runs: outcome.failed,
            });
        }
        let t = &outcome.table;
        let preds: Vec<f64> = t.predictions.iter().map(|&v| v as f64).collect();
        out.write_bin(
            &format!("table_n{n}.bin"),
            &preds,
            &TableMeta {
                n: t.n,
                k1: t.k1,
                k2: t.k2,
                checkpoints: &t.checkpoints,
                layout: "[supersample][repetition][checkpoint][point]",
                labels: &t.labels,
                masks: &t.masks,
                valid: &t.valid,
            },
        )?;
    }
    let header = ["n", "supersample", "repetition", "seed", "failed", "epoch", "train_error", "test_error"];
    out.write("runs.csv", csv_string(&header, &run_rows).as_bytes())?;
    let rows: Vec<Vec<String>> = bounds
        .iter()
        .map(|b| {
            vec![
                b.n.to_string(),
                b.epoch.to_string(),
                fmt_f64(b.gap_mean),
                fmt_f64(b.gap_sd),
                fmt_f64(b.gap_stderr),
                fmt_f64(b.fcmi_m1),
                fmt_f64(b.fcmi_m1_sd),
                fmt_f64(b.fcmi_mn),
                fmt_f64(b.fcmi_mn_sd),
                b.failed_runs.to_string(),
            ]
        })
        .collect();
    let header = [
        "n", "epoch", "gap_mean", "gap_sd", "gap_stderr", "fcmi_m1", "fcmi_m1_sd", "fcmi_mn", "fcmi_mn_sd", "failed_runs",
    ];
    out.write("bound.csv", csv_string(&header, &rows).as_bytes())?;
    Ok(bounds)
}
