use std::f64::consts::LN_2;

use infogen_core::io::{csv_string, fmt_f64};
use infogen_core::labelnoise::{fano_curve, fano_lower_bound, FanoInputs, FANO_TOL};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoParams {
    pub k: usize,
    pub p: f64,
    pub bits_per_example: f64,
    /// Upper end of the curve in bits; `log₂ k` when absent.
    #[serde(default)]
    pub max_bits: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    101
}

#[derive(Debug, Serialize)]
struct FanoResult {
    k: usize,
    p: f64,
    bits_per_example: f64,
    h_y_given_x: f64,
    r0: f64,
}

pub fn run(p: &FanoParams, out: &mut Output) -> Result<f64> {
    if !(p.bits_per_example >= 0.0) || p.points < 2 {
        return Err(CliError::config("need bits_per_example ≥ 0 and at least 2 curve points"));
    }
    if p.k >= 2 && p.p > (p.k - 1) as f64 / p.k as f64 {
        log::warn!("p = {} exceeds (k-1)/k; the smallest root no longer equals p at zero information", p.p);
    }
    let inputs = FanoInputs::uniform(p.k, p.p, p.bits_per_example * LN_2)?;
    let r0 = fano_lower_bound(&inputs, FANO_TOL)?;
    let max_bits = p.max_bits.unwrap_or((p.k as f64).log2());
    if !(max_bits > 0.0) {
        return Err(CliError::config("max_bits must be positive"));
    }
    let bits: Vec<f64> = (0..p.points).map(|i| max_bits * i as f64 / (p.points - 1) as f64).collect();
    let nats: Vec<f64> = bits.iter().map(|b| b * LN_2).collect();
    let curve = fano_curve(p.k, p.p, &nats)?;
    let rows: Vec<Vec<String>> =
        bits.iter().zip(&curve).map(|(b, (i, r))| vec![fmt_f64(*b), fmt_f64(*i), fmt_f64(*r)]).collect();
    out.write("curve.csv", csv_string(&["bits_per_example", "info_nats", "r0"], &rows).as_bytes())?;
    out.write_json(
        "result.json",
        &FanoResult { k: p.k, p: p.p, bits_per_example: p.bits_per_example, h_y_given_x: inputs.h_y_given_x, r0 },
    )?;
    Ok(r0)
}
