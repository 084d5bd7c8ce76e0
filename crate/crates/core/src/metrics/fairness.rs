//! Exposure-based item fairness between the popular and unpopular groups.

use serde::{Deserialize, Serialize};

use super::GroupAssignment;
use crate::corpus::ItemId;

/// Position weighting used to turn a ranked list into exposure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExposureModel {
    /// `a_j = 1 / log2(j + 1)`.
    LogDiscount,
    /// `a_j = gamma^(j-1) * prod_{l<j} (1 - stop * rel_l)`.
    Cascade { gamma: f64, stop: f64 },
}

impl ExposureModel {
    pub const DEFAULT_CASCADE: ExposureModel = ExposureModel::Cascade {
        gamma: 0.8,
        stop: 0.5,
    };
}

/// A recommended list and the ground truth it is judged against.
#[derive(Clone, Copy, Debug)]
pub struct RankedList<'a> {
    pub predicted: &'a [ItemId],
    pub target: &'a [ItemId],
}

pub fn exposure_vector(predicted: &[ItemId], target: &[ItemId], model: ExposureModel) -> Vec<f64> {
    match model {
        ExposureModel::LogDiscount => (1..=predicted.len())
            .map(|j| 1.0 / ((j + 1) as f64).log2())
            .collect(),
        ExposureModel::Cascade { gamma, stop } => {
            let mut out = Vec::with_capacity(predicted.len());
            let mut examine = 1.0;
            for item in predicted {
                out.push(examine);
                let rel = if target.contains(item) { 1.0 } else { 0.0 };
                examine *= gamma * (1.0 - stop * rel);
            }
            out
        }
    }
}

/// Per-group exposure `ε`, utility `Y` (relevant target items) and
/// relevance-weighted exposure `Γ`, pooled over users. Index 0 is the
/// popular group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupTotals {
    pub exposure: [f64; 2],
    pub utility: [f64; 2],
    pub click: [f64; 2],
}

fn slot(groups: &GroupAssignment, item: ItemId) -> usize {
    if groups.is_popular(item) {
        0
    } else {
        1
    }
}

pub fn group_totals(lists: &[RankedList<'_>], groups: &GroupAssignment, model: ExposureModel) -> GroupTotals {
    let mut totals = GroupTotals::default();
    for list in lists {
        let a = exposure_vector(list.predicted, list.target, model);
        for (item, w) in list.predicted.iter().zip(&a) {
            let g = slot(groups, *item);
            totals.exposure[g] += w;
            if list.target.contains(item) {
                totals.click[g] += w;
            }
        }
        for item in list.target {
            totals.utility[slot(groups, *item)] += 1.0;
        }
    }
    totals
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    /// Smoothing added to every group quantity before taking ratios.
    pub delta: f64,
    /// Weighting for logDP, logEUR and logRUR.
    pub ratio_model: ExposureModel,
    /// Weighting for EEL and EED; must be relevance-aware.
    pub expected_model: ExposureModel,
    /// Divide group exposure by group size in logDP.
    pub normalize_dp_by_group_size: bool,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        FairnessConfig {
            delta: 1e-6,
            ratio_model: ExposureModel::LogDiscount,
            expected_model: ExposureModel::DEFAULT_CASCADE,
            normalize_dp_by_group_size: false,
        }
    }
}

fn log_ratio(num: [f64; 2], delta: f64) -> f64 {
    ((num[0] + delta) / (num[1] + delta)).ln()
}

/// `ln((ε⁺ + δ) / (ε⁻ + δ))`.
pub fn log_dp(lists: &[RankedList<'_>], groups: &GroupAssignment, cfg: &FairnessConfig) -> f64 {
    let t = group_totals(lists, groups, cfg.ratio_model);
    log_dp_from(&t, groups, cfg)
}

pub fn log_dp_from(t: &GroupTotals, groups: &GroupAssignment, cfg: &FairnessConfig) -> f64 {
    let mut e = t.exposure;
    if cfg.normalize_dp_by_group_size {
        e[0] /= groups.n_popular().max(1) as f64;
        e[1] /= groups.n_unpopular().max(1) as f64;
    }
    log_ratio(e, cfg.delta)
}

/// Log ratio of exposure per unit utility between the groups.
pub fn log_eur(lists: &[RankedList<'_>], groups: &GroupAssignment, cfg: &FairnessConfig) -> f64 {
    log_eur_from(&group_totals(lists, groups, cfg.ratio_model), cfg.delta)
}

pub fn log_eur_from(t: &GroupTotals, delta: f64) -> f64 {
    log_ratio(t.exposure, delta) - log_ratio(t.utility, delta)
}

/// Log ratio of relevance-weighted exposure per unit utility.
pub fn log_rur(lists: &[RankedList<'_>], groups: &GroupAssignment, cfg: &FairnessConfig) -> f64 {
    log_rur_from(&group_totals(lists, groups, cfg.ratio_model), cfg.delta)
}

pub fn log_rur_from(t: &GroupTotals, delta: f64) -> f64 {
    log_ratio(t.click, delta) - log_ratio(t.utility, delta)
}

/// Group exposure `(ε⁺, ε⁻)` of one list.
pub fn list_group_exposure(
    predicted: &[ItemId],
    target: &[ItemId],
    groups: &GroupAssignment,
    model: ExposureModel,
) -> [f64; 2] {
    let mut e = [0.0; 2];
    for (item, w) in predicted.iter().zip(exposure_vector(predicted, target, model)) {
        e[slot(groups, *item)] += w;
    }
    e
}

/// Target group exposure under the ideal policy for a length-`k` list: the
/// relevant items fill the top positions in random order and share that
/// exposure equally; the tail positions are spread over the groups in
/// proportion to their non-relevant catalog items, up to the catalog size.
pub fn target_exposure(
    target: &[ItemId],
    groups: &GroupAssignment,
    k: usize,
    model: ExposureModel,
) -> [f64; 2] {
    let weight = |j: usize, relevant_above: usize| -> f64 {
        match model {
            ExposureModel::Cascade { gamma, stop } => {
                gamma.powi(j as i32 - 1) * (1.0 - stop).powi(relevant_above as i32)
            }
            ExposureModel::LogDiscount => 1.0 / ((j + 1) as f64).log2(),
        }
    };
    let m = target.len();
    let mut out = [0.0; 2];
    if m > 0 {
        let head: f64 = (1..=m.min(k)).map(|j| weight(j, j - 1)).sum();
        let share = head / m as f64;
        for item in target {
            out[slot(groups, *item)] += share;
        }
    }
    let mut rel = [0usize; 2];
    for item in target {
        rel[slot(groups, *item)] += 1;
    }
    let nonrel = [
        groups.n_popular().saturating_sub(rel[0]),
        groups.n_unpopular().saturating_sub(rel[1]),
    ];
    let end = k.min(m + nonrel[0] + nonrel[1]);
    if end > m {
        let tail: f64 = (m + 1..=end).map(|j| weight(j, m)).sum();
        let total = (nonrel[0] + nonrel[1]) as f64;
        out[0] += tail * nonrel[0] as f64 / total;
        out[1] += tail * nonrel[1] as f64 / total;
    }
    out
}

fn sq_norm(v: [f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

/// Per-user `‖ε_u − ε*_u‖²`.
pub fn eel_user(list: &RankedList<'_>, groups: &GroupAssignment, k: usize, model: ExposureModel) -> f64 {
    let e = list_group_exposure(list.predicted, list.target, groups, model);
    let t = target_exposure(list.target, groups, k, model);
    sq_norm([e[0] - t[0], e[1] - t[1]])
}

/// Per-user `‖ε_u‖²`.
pub fn eed_user(list: &RankedList<'_>, groups: &GroupAssignment, model: ExposureModel) -> f64 {
    sq_norm(list_group_exposure(list.predicted, list.target, groups, model))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Expected exposure loss, averaged over users.
pub fn eel(lists: &[RankedList<'_>], groups: &GroupAssignment, k: usize, cfg: &FairnessConfig) -> f64 {
    mean(lists.iter().map(|l| eel_user(l, groups, k, cfg.expected_model)))
}

/// Expected exposure disparity, averaged over users.
pub fn eed(lists: &[RankedList<'_>], groups: &GroupAssignment, cfg: &FairnessConfig) -> f64 {
    mean(lists.iter().map(|l| eed_user(l, groups, cfg.expected_model)))
}
