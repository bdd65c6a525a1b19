use infogen_core::counterexample::{
    lemma_cov_check, pairwise_bound_check, verify_properties, CexConfig, CexError, CexMode, CovReport, PairwiseReport,
    PropertyReport,
};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CexParams {
    pub instance: CexConfig,
    /// Also evaluate the covariance lemma at these `N₀ = N₁` sizes with the
    /// instance's block size.
    #[serde(default)]
    pub lemma_sizes: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct CexReport {
    pub properties: PropertyReport,
    /// Exact pairwise inequality; only for exhaustive runs small enough to enumerate.
    pub pairwise: Option<PairwiseReport>,
    pub pairwise_skipped: Option<String>,
    pub lemma: Vec<CovReport>,
}

pub fn run(p: &CexParams, seed: u64, out: &mut Output) -> Result<CexReport> {
    let cfg = &p.instance;
    cfg.validate()?;
    let properties = verify_properties(cfg, seed)?;
    let (pairwise, pairwise_skipped) = match cfg.mode {
        CexMode::Exhaustive => match pairwise_bound_check(cfg) {
            Ok(r) => (Some(r), None),
            Err(e @ CexError::TooLarge { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        },
        CexMode::MonteCarlo { .. } => (None, Some("Monte-Carlo mode".to_string())),
    };
    let lemma = p.lemma_sizes.iter().map(|&m| lemma_cov_check(m, m, cfg.n)).collect::<std::result::Result<_, _>>()?;
    let report = CexReport { properties, pairwise, pairwise_skipped, lemma };
    out.write_json("report.json", &report)?;
    Ok(report)
}
