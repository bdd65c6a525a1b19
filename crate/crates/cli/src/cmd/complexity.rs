use infogen_core::distill::{
    gamma_sweep, min_norm_interpolant_check, supervision_complexity, ComplexityValues, MarginBound, MarginInputs,
    MinNormReport, DEFAULT_LAMBDA_SWEEP,
};
use infogen_core::io::{csv_string, fmt_f64};
use infogen_core::kernels::{build_ntk, DEFAULT_NTK_CAP};
use infogen_core::netkit::{init_weights, one_hot, MlpSpec};
use infogen_core::numkit::Rng;
use infogen_core::synth::SyntheticSource;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityParams {
    pub source: SyntheticSource,
    pub n: usize,
    pub spec: MlpSpec,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_random_draws")]
    pub random_label_draws: usize,
    /// Ridge used to fit the binary kernel predictor whose margins enter the bound.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_lambdas() -> Vec<f64> {
    DEFAULT_LAMBDA_SWEEP.to_vec()
}

fn default_random_draws() -> usize {
    20
}

fn default_ridge() -> f64 {
    1e-3
}

fn default_gammas() -> Vec<f64> {
    (0..12).map(|i| 2f64.powi(i - 6)).collect()
}

fn default_delta() -> f64 {
    0.05
}

fn default_cap() -> usize {
    DEFAULT_NTK_CAP
}

#[derive(Debug, Serialize)]
struct GammaSweep {
    /// The bound holds per fixed γ; the minimum over the grid is a sweep result.
    label: &'static str,
    best: MarginBound,
    grid: Vec<MarginBound>,
    ridge: f64,
    predictor_norm: f64,
    train_accuracy: f64,
}

#[derive(Debug, Serialize)]
struct Report {
    dataset_labels: ComplexityValues,
    random_labels_raw_mean: Option<f64>,
    random_to_dataset_ratio: Option<f64>,
    min_norm: MinNormReport,
    gamma_sweep: Option<GammaSweep>,
}

pub fn run(p: &ComplexityParams, seed: u64, out: &mut Output) -> Result<()> {
    let sample = p.source.sample(p.n, &mut Rng::with_stream(seed, 0))?;
    let data = &sample.dataset;
    let w0 = init_weights(&p.spec, &mut Rng::with_stream(seed, 2));
    let ntk = build_ntk(&p.spec, &w0, &data.inputs, None, p.cap)?;
    let y = data.flat_targets();
    let dataset_labels = supervision_complexity(&ntk, &y, None)?;

    let k = data.class_count();
    let mut rng = Rng::with_stream(seed, 6);
    let random: Vec<f64> = (0..p.random_label_draws)
        .map(|_| {
            let labels: Vec<usize> = (0..p.n).map(|_| rng.below(k)).collect();
            let yr = DVector::from_row_slice(one_hot(&labels, k).transpose().as_slice());
            supervision_complexity(&ntk, &yr, None).map(|c| c.raw)
        })
        .collect::<std::result::Result<_, _>>()?;
    let random_mean = (!random.is_empty()).then(|| random.iter().sum::<f64>() / random.len() as f64);

    let min_norm = min_norm_interpolant_check(ntk.matrix(), &y, &p.lambdas)?;
    let rows: Vec<Vec<String>> = min_norm.norms.iter().map(|(l, v)| vec![fmt_f64(*l), fmt_f64(*v)]).collect();
    out.write("min_norm.csv", csv_string(&["lambda", "interpolant_norm_sq"], &rows).as_bytes())?;

    let gamma = if k == 2 { Some(margin_sweep(p, &ntk, &data.labels())?) } else { None };
    if let Some(g) = &gamma {
        let rows: Vec<Vec<String>> = g
            .grid
            .iter()
            .map(|b| {
                vec![
                    fmt_f64(b.gamma),
                    fmt_f64(b.empirical_margin_loss),
                    fmt_f64(b.complexity_term),
                    fmt_f64(b.confidence_term),
                    fmt_f64(b.total),
                ]
            })
            .collect();
        let header = ["gamma", "empirical_margin_loss", "complexity_term", "confidence_term", "total"];
        out.write("gamma_sweep.csv", csv_string(&header, &rows).as_bytes())?;
    }
    out.write_json(
        "complexity.json",
        &Report {
            random_to_dataset_ratio: random_mean.map(|m| m / dataset_labels.raw),
            dataset_labels,
            random_labels_raw_mean: random_mean,
            min_norm,
            gamma_sweep: gamma,
        },
    )
}

/// Binary margin bound for the ridge fit on the first-output kernel block
/// with `±1` targets.
fn margin_sweep(p: &ComplexityParams, ntk: &infogen_core::kernels::NtkMatrix, labels: &[usize]) -> Result<GammaSweep> {
    if !(p.ridge > 0.0) {
        return Err(CliError::config("ridge must be positive"));
    }
    let rows: Vec<usize> = (0..p.n).map(|i| i * ntk.outputs()).collect();
    let k0 = ntk.matrix().submatrix(&rows);
    let km = k0.as_matrix();
    let y = DVector::from_iterator(p.n, labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }));
    let reg = km + nalgebra::DMatrix::identity(p.n, p.n) * p.ridge;
    let chol = reg.cholesky().ok_or_else(|| CliError::Numeric("K + ridge·I is not positive definite".into()))?;
    let alpha = chol.solve(&y);
    let f = km * &alpha;
    let margins: Vec<f64> = f.iter().zip(y.iter()).map(|(a, b)| a * b).collect();
    let norm = alpha.dot(&f).max(0.0);
    let kappa = (0..p.n).map(|i| km[(i, i)]).fold(0.0, f64::max);
    let inputs = MarginInputs { margins: margins.clone(), gamma: 1.0, complexity: norm, trace: km.trace(), delta: p.delta, kappa };
    let (best, grid) = gamma_sweep(&inputs, &p.gammas)?;
    Ok(GammaSweep {
        label: "sweep",
        best: grid[best].clone(),
        grid,
        ridge: p.ridge,
        predictor_norm: norm,
        train_accuracy: margins.iter().filter(|&&m| m > 0.0).count() as f64 / p.n as f64,
    })
}
