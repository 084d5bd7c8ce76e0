use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitDataset;
use crate::error::Result;
use crate::metrics::{evaluate, EvalConfig, GroupAssignment};
use crate::trex::RepetitionParams;

use super::grid::{grid_search, GridSpec, SelectionMetric, TrexGrid, TunedParams, ValidationSet};
use super::methods::{recommend, Method};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub params: RepetitionParams,
    pub metrics: BTreeMap<String, f64>,
}

/// Repetition-module ablation: `base` (no decay, no repurchase feature),
/// `+T` (tuned decay) and `+T+RF` (tuned decay and feature), tuned on
/// validation users and scored on `users`.
pub fn ablation_rep(
    split: &SplitDataset,
    users: &[usize],
    grid: &TrexGrid,
    groups: &GroupAssignment,
    cfg: &EvalConfig,
    metric: SelectionMetric,
) -> Result<Vec<AblationRow>> {
    let validation = ValidationSet::from_split(split);
    let tune = |g: TrexGrid| -> Result<RepetitionParams> {
        match grid_search(&GridSpec::TrexRep(g), &split.train, &validation, cfg.k, metric)?.best_params() {
            TunedParams::TrexRep(p) => Ok(p),
            _ => unreachable!("TREx grid yields TREx parameters"),
        }
    };
    let base = RepetitionParams {
        alpha: grid.alpha.first().copied().unwrap_or(0.0),
        beta: 1.0,
        rep_feature_enabled: false,
    };
    let plus_t = tune(TrexGrid {
        alpha: vec![base.alpha],
        beta: grid.beta.clone(),
        rep_feature: false,
    })?;
    let plus_rf = tune(TrexGrid {
        alpha: grid.alpha.clone(),
        beta: grid.beta.clone(),
        rep_feature: true,
    })?;

    [("base", base), ("+T", plus_t), ("+T+RF", plus_rf)]
        .into_iter()
        .map(|(variant, params)| {
            let method = TunedParams::TrexRep(params).method();
            debug_assert!(matches!(method, Method::TrexRep { .. }));
            let recs = recommend(&method, split, users, cfg.k, groups)?;
            let report = evaluate(&recs, split, users, groups, cfg);
            let metrics = ["recall", "ndcg", "phr"]
                .iter()
                .filter_map(|m| {
                    let key = format!("{m}@{}", cfg.k);
                    report.aggregate.get(&key).map(|v| (key, *v))
                })
                .collect();
            Ok(AblationRow {
                variant: variant.to_owned(),
                params,
                metrics,
            })
        })
        .collect()
}
