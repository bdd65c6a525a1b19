pub mod cex;
pub mod complexity;
pub mod distill;
pub mod fano;
pub mod fcmi;
pub mod gen_data;
pub mod limit;
pub mod sample_info;

use infogen_core::io::fmt_f64;
use infogen_core::netkit::{argmax_rows, forward, Dataset, FlatWeights, MlpSpec};
use infogen_core::numkit::Rng;
use infogen_core::synth::{Sample, SyntheticSource};
use serde::Serialize;

use crate::error::Result;
use crate::run::Output;

/// Sidecar of a weight checkpoint.
#[derive(Debug, Serialize)]
pub struct WeightsMeta<'a> {
    pub spec: &'a MlpSpec,
    pub step: usize,
    pub seed: u64,
}

pub fn write_weights(out: &mut Output, name: &str, spec: &MlpSpec, w: &FlatWeights, step: usize, seed: u64) -> Result<()> {
    out.write_bin(name, &w.values, &WeightsMeta { spec, step, seed })
}

/// Training and test samples drawn on independent streams of `seed`.
pub fn draw_split(source: &SyntheticSource, n_train: usize, n_test: usize, seed: u64) -> Result<(Sample, Sample)> {
    let train = source.sample(n_train, &mut Rng::with_stream(seed, 0))?;
    let test = source.sample(n_test, &mut Rng::with_stream(seed, 1))?;
    Ok((train, test))
}

pub fn accuracy(spec: &MlpSpec, w: &FlatWeights, data: &Dataset) -> Result<f64> {
    let pred = argmax_rows(&forward(spec, w, &data.inputs)?);
    let hits = pred.iter().zip(data.labels()).filter(|(a, b)| **a == *b).count();
    Ok(hits as f64 / data.len().max(1) as f64)
}

pub fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
