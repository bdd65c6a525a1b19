use infogen_core::netkit::{init_weights, MlpSpec};
use infogen_core::numkit::Rng;
use infogen_core::sampleinfo::{scores_csv, summarize, FsiScorer, InfoConfig, SampleScore, Strategy};
use infogen_core::stats::roc_auc;
use infogen_core::synth::SyntheticSource;
use serde::{Deserialize, Serialize};

use super::draw_split;
use crate::error::Result;
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarizeParams {
    pub strategy: Strategy,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleInfoParams {
    pub source: SyntheticSource,
    pub n_train: usize,
    /// Probe points for prediction-space scores; fresh draws from the source.
    pub n_probe: usize,
    pub spec: MlpSpec,
    pub info: InfoConfig,
    #[serde(default)]
    pub summarize: Option<SummarizeParams>,
}

#[derive(Debug, Serialize)]
struct NtkMeta {
    examples: usize,
    outputs: usize,
    dim: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    flipped: usize,
    /// ROC-AUC of F-SI for spotting flipped labels.
    fsi_flip_auc: Option<f64>,
    usi_flip_auc: Option<f64>,
}

pub fn run(p: &SampleInfoParams, seed: u64, out: &mut Output) -> Result<()> {
    let (train, probes) = draw_split(&p.source, p.n_train, p.n_probe, seed)?;
    let w0 = init_weights(&p.spec, &mut Rng::with_stream(seed, 2));
    let scorer = FsiScorer::new(&p.spec, &w0, &train.dataset, &probes.dataset.inputs, p.info.clone())?;
    let all: Vec<usize> = (0..p.n_train).collect();
    let scored = scorer.scores(&all)?;
    let labels = train.dataset.labels();
    let noisy = p.source.label_noise.is_some();
    let scores: Vec<SampleScore> = scored
        .iter()
        .enumerate()
        .map(|(i, &(f, u))| SampleScore {
            index: i,
            usi: Some(u),
            fsi: f,
            label: Some(labels[i]),
            group: Some(if noisy {
                if train.flipped[i] { "flipped".into() } else { "clean".into() }
            } else {
                train.groups[i].to_string()
            }),
        })
        .collect();
    out.write("scores.csv", scores_csv(&scores).as_bytes())?;
    let ntk = scorer.ntk();
    out.write_bin(
        "ntk.bin",
        ntk.matrix().as_matrix().as_slice(),
        &NtkMeta { examples: ntk.examples(), outputs: ntk.outputs(), dim: ntk.dim() },
    )?;
    let flipped = train.flipped.iter().filter(|&&f| f).count();
    let detectable = flipped > 0 && flipped < p.n_train;
    let fsi: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let usi: Vec<f64> = scored.iter().map(|s| s.1).collect();
    out.write_json(
        "summary.json",
        &Summary {
            flipped,
            fsi_flip_auc: detectable.then(|| roc_auc(&fsi, &train.flipped)),
            usi_flip_auc: detectable.then(|| roc_auc(&usi, &train.flipped)),
        },
    )?;
    if let Some(s) = &p.summarize {
        let summary = summarize(
            p.n_train,
            Some(&labels),
            |retained| scorer.fsi_scores(retained),
            s.strategy,
            &s.fractions,
            Rng::with_stream(seed, 5).next_seed(),
        )?;
        out.write_json("schedule.json", &summary.schedule)?;
        out.write_json("retained.json", &summary.retained)?;
    }
    Ok(())
}
