use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{InfoError, Result};
use crate::io::fmt_f64;
use crate::numkit::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub index: usize,
    pub usi: Option<f64>,
    pub fsi: f64,
    pub label: Option<usize>,
    pub group: Option<String>,
}

/// Score table with rank (1 = highest F-SI) and F-SI z-score columns.
pub fn scores_csv(scores: &[SampleScore]) -> String {
    let n = scores.len() as f64;
    let mean = scores.iter().map(|s| s.fsi).sum::<f64>() / n.max(1.0);
    let var = scores.iter().map(|s| (s.fsi - mean).powi(2)).sum::<f64>() / n.max(1.0);
    let sd = var.sqrt();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].fsi.total_cmp(&scores[a].fsi).then(a.cmp(&b)));
    let mut rank = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let mut out = String::from("index,usi_nats,fsi_nats,label,group,rank,zscore\n");
    for (i, s) in scores.iter().enumerate() {
        let z = if sd > 0.0 { (s.fsi - mean) / sd } else { 0.0 };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.index,
            s.usi.map(fmt_f64).unwrap_or_default(),
            fmt_f64(s.fsi),
            s.label.map(|l| l.to_string()).unwrap_or_default(),
            s.group.clone().unwrap_or_default(),
            rank[i],
            fmt_f64(z)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Score once, drop the lowest scores first.
    BottomOnce,
    /// Drop `step_fraction·n` lowest, rescore the rest, repeat.
    BottomIterative { step_fraction: f64 },
    /// Drop the highest scores first.
    Top,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalEvent {
    pub order: usize,
    pub index: usize,
    pub round: usize,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schedule: Vec<RemovalEvent>,
    /// For each requested fraction, the sorted indices still retained.
    pub retained: Vec<(f64, Vec<usize>)>,
}

/// Ordered removal schedule over `n` examples. `scorer(retained)` returns one
/// score per retained index, in the same order.
pub fn summarize<F>(
    n: usize,
    labels: Option<&[usize]>,
    mut scorer: F,
    strategy: Strategy,
    fractions: &[f64],
    seed: u64,
) -> Result<Summary>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    if let Some(f) = fractions.iter().find(|f| !(**f >= 0.0 && **f < 1.0)) {
        return Err(InfoError::Invalid(format!("fraction {f} outside [0, 1)")));
    }
    let target = fractions.iter().map(|f| removal_count(*f, n)).max().unwrap_or(0);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut schedule: Vec<RemovalEvent> = Vec::with_capacity(target);
    let push = |schedule: &mut Vec<RemovalEvent>, index: usize, round: usize, score: Option<f64>| {
        let order = schedule.len();
        schedule.push(RemovalEvent { order, index, round, score });
    };
    match strategy {
        Strategy::Random => {
            let perm = Rng::new(seed).permutation(n);
            for &i in perm.iter().take(target) {
                push(&mut schedule, i, 0, None);
            }
        }
        Strategy::BottomOnce | Strategy::Top => {
            let scores = checked_scores(&mut scorer, &remaining)?;
            let mut order: Vec<usize> = (0..n).collect();
            if strategy == Strategy::Top {
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            } else {
                order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
            }
            for &i in order.iter().take(target) {
                push(&mut schedule, i, 0, Some(scores[i]));
            }
        }
        Strategy::BottomIterative { step_fraction } => {
            if !(step_fraction > 0.0 && step_fraction < 1.0) {
                return Err(InfoError::Invalid("step_fraction must be in (0, 1)".into()));
            }
            let step = ((step_fraction * n as f64).ceil() as usize).max(1);
            let mut round = 0;
            while schedule.len() < target {
                let scores = checked_scores(&mut scorer, &remaining)?;
                let mut pos: Vec<usize> = (0..remaining.len()).collect();
                pos.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(remaining[a].cmp(&remaining[b])));
                let take = step.min(target - schedule.len());
                let drop: BTreeSet<usize> = pos[..take].iter().copied().collect();
                for &p in &pos[..take] {
                    push(&mut schedule, remaining[p], round, Some(scores[p]));
                }
                remaining = remaining.iter().enumerate().filter(|(p, _)| !drop.contains(p)).map(|(_, &i)| i).collect();
                round += 1;
            }
        }
    }
    if let Some(labels) = labels {
        let classes: BTreeSet<usize> = labels.iter().copied().collect();
        let removed: BTreeSet<usize> = schedule.iter().map(|e| e.index).collect();
        let left: BTreeSet<usize> = (0..n).filter(|i| !removed.contains(i)).map(|i| labels[i]).collect();
        for c in classes.difference(&left) {
            warn!("summarization removes every example of class {c}");
        }
    }
    let retained = fractions
        .iter()
        .map(|&f| {
            let cut = removal_count(f, n);
            let removed: BTreeSet<usize> = schedule[..cut].iter().map(|e| e.index).collect();
            (f, (0..n).filter(|i| !removed.contains(i)).collect())
        })
        .collect();
    Ok(Summary { schedule, retained })
}

fn removal_count(f: f64, n: usize) -> usize {
    ((f * n as f64).round() as usize).min(n)
}

fn checked_scores<F>(scorer: &mut F, retained: &[usize]) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    let s = scorer(retained)?;
    if s.len() != retained.len() {
        return Err(InfoError::Invalid(format!("scorer returned {} scores for {} examples", s.len(), retained.len())));
    }
    Ok(s)
}
