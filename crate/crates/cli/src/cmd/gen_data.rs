use infogen_core::io::csv_string;
use infogen_core::labelnoise::NoiseModel;
use infogen_core::numkit::Rng;
use infogen_core::synth::{SourceKind, SyntheticSource};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataParams {
    pub source: SyntheticSource,
    pub n: usize,
}

/// Scalar knobs of the flag interface.
#[derive(Debug, Clone)]
pub struct Knobs {
    pub classes: usize,
    pub separation: f64,
    pub dim: usize,
    pub noise: f64,
    pub bits: usize,
    pub groups: usize,
    pub flip: Option<f64>,
}

pub fn source_from_flags(kind: &str, k: &Knobs) -> Result<SyntheticSource> {
    let generator = match kind {
        "gauss_blobs" => SourceKind::GaussBlobs { classes: k.classes, separation: k.separation, dim: k.dim },
        "two_moons" => SourceKind::TwoMoons { noise: k.noise },
        "parity_bits" => SourceKind::ParityBits { bits: k.bits },
        "subclass_mixture" => SourceKind::SubclassMixture { groups: k.groups, dim: k.dim, separation: k.separation },
        other => return Err(CliError::config(format!("unknown data kind {other:?}"))),
    };
    let classes = generator.class_count();
    let mut source = SyntheticSource::new(generator);
    if let Some(p) = k.flip {
        source = source.with_noise(NoiseModel::Uniform { p, k: classes });
    }
    Ok(source)
}

pub fn run(p: &GenDataParams, seed: u64, out: &mut Output) -> Result<()> {
    let sample = p.source.sample(p.n, &mut Rng::new(seed))?;
    let mut bytes = Vec::new();
    sample.dataset.write_csv(&mut bytes)?;
    out.write("data.csv", &bytes)?;
    let rows: Vec<Vec<String>> = (0..p.n)
        .map(|i| {
            vec![
                i.to_string(),
                sample.clean_labels[i].to_string(),
                (sample.flipped[i] as u8).to_string(),
                sample.groups[i].to_string(),
            ]
        })
        .collect();
    out.write("labels.csv", csv_string(&["index", "clean_label", "flipped", "group"], &rows).as_bytes())
}
