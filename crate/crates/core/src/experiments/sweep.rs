use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{repeat_explore_sets, SplitDataset};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::{evaluate, EvalConfig, GroupAssignment};
use crate::recommendation::Recommendation;
use crate::trex::{generate_basket, repetition_scores, ExplorationPolicy, RepetitionModel, RepetitionScores};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub v: f64,
    /// Aggregate metric values keyed like `recall@10`.
    pub metrics: BTreeMap<String, f64>,
}

impl FrontierPoint {
    pub fn get(&self, metric: &str, k: usize) -> Option<f64> {
        self.metrics.get(&format!("{metric}@{k}")).copied()
    }
}

/// Evenly spaced quantiles (linear interpolation) of the repetition scores
/// of every repeat candidate of `users`.
pub fn quantile_thresholds(model: &RepetitionModel, split: &SplitDataset, users: &[usize], n: usize) -> Vec<f64> {
    let mut all: Vec<f64> = users
        .iter()
        .flat_map(|&u| repetition_scores(model, split.history(u)).ranked().iter().map(|(_, s)| *s).collect::<Vec<_>>())
        .collect();
    if all.is_empty() || n == 0 {
        return Vec::new();
    }
    all.sort_by(f64::total_cmp);
    let last = (all.len() - 1) as f64;
    (0..n)
        .map(|j| {
            let q = if n == 1 { 0.0 } else { j as f64 / (n - 1) as f64 };
            let pos = q * last;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            all[lo] + (all[hi] - all[lo]) * (pos - lo as f64)
        })
        .collect()
}

/// One frontier point per threshold, evaluated on `users`. `v_values` must
/// be ascending.
pub fn sweep_threshold(
    model: &RepetitionModel,
    policy: &ExplorationPolicy,
    v_values: &[f64],
    split: &SplitDataset,
    users: &[usize],
    groups: &GroupAssignment,
    cfg: &EvalConfig,
) -> Result<Vec<FrontierPoint>> {
    use rayon::prelude::*;
    if v_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("threshold values must be ascending".into()));
    }
    let scores: Vec<RepetitionScores> = users
        .par_iter()
        .map(|&u| repetition_scores(model, split.history(u)))
        .collect();
    let mut points = Vec::with_capacity(v_values.len());
    for &v in v_values {
        let recs: Vec<Recommendation> = users
            .par_iter()
            .zip(&scores)
            .map(|(&u, s)| {
                let sets = repeat_explore_sets(split.history(u), &split.train.catalog);
                generate_basket(split.user_id(u), s, v, cfg.k, &sets, policy)
            })
            .collect();
        let report = evaluate(&recs, split, users, groups, cfg);
        points.push(FrontierPoint {
            v,
            metrics: report.aggregate,
        });
    }
    Ok(points)
}

/// Beyond-accuracy metrics that get a frontier file.
pub const FRONTIER_METRICS: &[&str] = &["logdp", "logeur", "logrur", "eel", "eed", "ild", "entropy", "ds"];

/// Writes `frontier_<metric>.csv` (columns `v`, `recall@k`, metric) into
/// `dir` for each beyond-accuracy metric.
pub fn write_frontiers(points: &[FrontierPoint], dir: &Path, k: usize) -> Result<()> {
    let recall = format!("recall@{k}");
    for metric in FRONTIER_METRICS {
        let key = format!("{metric}@{k}");
        let path = dir.join(format!("frontier_{metric}.csv"));
        write_atomic(&path, |w| {
            writeln!(w, "v,{recall},{key}")?;
            for p in points {
                let cell = |m: &str| p.metrics.get(m).map(|x| x.to_string()).unwrap_or_default();
                writeln!(w, "{},{},{}", p.v, cell(&recall), cell(&key))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split, synth_generate, SynthConfig};
    use crate::trex::{fit_repetition, RepetitionParams};

    #[test]
    fn quantiles_span_the_scores() {
        let d = synth_generate(&SynthConfig {
            n_users: 30,
            n_items: 40,
            ..Default::default()
        })
        .unwrap();
        let s = split(d, 1).unwrap();
        let model = fit_repetition(&s.train, RepetitionParams::default()).unwrap();
        let users = s.test_users();
        let q = quantile_thresholds(&model, &s, &users, 21);
        assert_eq!(q.len(), 21);
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
        let max = users
            .iter()
            .map(|&u| repetition_scores(&model, s.history(u)).ranked()[0].1)
            .fold(f64::MIN, f64::max);
        assert_eq!(q[20], max);
    }
}
