//! Accuracy, exposure fairness and diversity metrics.

mod accuracy;
mod diversity;
mod fairness;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use accuracy::{fine_grained, ndcg_at_k, phr_indicator, recall_at_k, FineGrained};
pub use diversity::{ds, entropy, ild};
pub use fairness::{
    eed, eed_user, eel, eel_user, exposure_vector, group_totals, list_group_exposure, log_dp,
    log_dp_from, log_eur, log_eur_from, log_rur, log_rur_from, target_exposure, ExposureModel,
    FairnessConfig, GroupTotals, RankedList,
};

use crate::corpus::{repeat_explore_sets, ItemId, SplitDataset};
use crate::recommendation::Recommendation;

/// Popular (`G⁺`) versus unpopular (`G⁻`) items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupAssignment {
    popular: Vec<bool>,
    n_popular: usize,
}

impl GroupAssignment {
    /// The top `ceil(share · |catalog|)` items by count (ties to the smaller
    /// id) form the popular group.
    pub fn from_counts(counts: &[u64], popular_share: f64) -> Self {
        let n = counts.len();
        let n_pop = ((popular_share * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
        let mut popular = vec![false; n];
        for item in crate::util::popularity_order(counts).into_iter().take(n_pop) {
            popular[item.index()] = true;
        }
        GroupAssignment {
            popular,
            n_popular: n_pop,
        }
    }

    pub fn from_popular_flags(popular: Vec<bool>) -> Self {
        let n_popular = popular.iter().filter(|p| **p).count();
        GroupAssignment { popular, n_popular }
    }

    pub fn is_popular(&self, item: ItemId) -> bool {
        self.popular.get(item.index()).copied().unwrap_or(false)
    }

    pub fn n_popular(&self) -> usize {
        self.n_popular
    }

    pub fn n_unpopular(&self) -> usize {
        self.popular.len() - self.n_popular
    }

    pub fn len(&self) -> usize {
        self.popular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.popular.is_empty()
    }

    pub fn popular(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items(true)
    }

    pub fn unpopular(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items(false)
    }

    fn items(&self, flag: bool) -> impl Iterator<Item = ItemId> + '_ {
        self.popular
            .iter()
            .enumerate()
            .filter(move |(_, p)| **p == flag)
            .map(|(i, _)| ItemId(i as u32))
    }

    /// Same sets with the labels exchanged.
    pub fn swapped(&self) -> Self {
        GroupAssignment::from_popular_flags(self.popular.iter().map(|p| !p).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub fairness: FairnessConfig,
}

impl EvalConfig {
    pub fn new(k: usize) -> Self {
        EvalConfig {
            k,
            fairness: FairnessConfig::default(),
        }
    }
}

/// Per-user and aggregate metric values for one method at one cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: EvalConfig,
    pub n_users: usize,
    pub aggregate: BTreeMap<String, f64>,
    pub per_user: BTreeMap<String, BTreeMap<String, f64>>,
}

impl MetricReport {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.aggregate
            .get(metric)
            .or_else(|| self.aggregate.get(&format!("{metric}@{}", self.config.k)))
            .copied()
    }

    /// Per-user values of one metric.
    pub fn per_user_values(&self, metric: &str) -> BTreeMap<String, f64> {
        let key = self.key(metric);
        self.per_user
            .iter()
            .filter_map(|(u, m)| m.get(&key).map(|v| (u.clone(), *v)))
            .collect()
    }

    fn key(&self, metric: &str) -> String {
        if metric.contains('@') {
            metric.to_owned()
        } else {
            format!("{metric}@{}", self.config.k)
        }
    }
}

/// Aggregated by mean over users where the metric is defined.
pub const PER_USER_METRICS: &[&str] = &[
    "recall", "ndcg", "phr", "recall_rep", "recall_expl", "phr_rep", "phr_expl", "eel", "eed",
    "ild", "entropy", "ds", "repeat_slots", "explore_slots",
];

/// Computed from totals pooled over users.
pub const POOLED_METRICS: &[&str] = &["logdp", "logeur", "logrur"];

/// Scores `recs` against the held-out baskets of `users`. Recommendations
/// are cut to the first `k` items; a user without one is scored as an empty
/// basket.
pub fn evaluate(
    recs: &[Recommendation],
    split: &SplitDataset,
    users: &[usize],
    groups: &GroupAssignment,
    cfg: &EvalConfig,
) -> MetricReport {
    let k = cfg.k;
    let by_user: HashMap<&str, &Recommendation> =
        recs.iter().map(|r| (r.user_id.as_str(), r)).collect();
    let categories = split.train.catalog.category_table();
    let empty = Recommendation {
        user_id: String::new(),
        items: Vec::new(),
        provenance: Vec::new(),
    };

    let mut per_user = BTreeMap::new();
    let mut lists: Vec<(&[ItemId], &[ItemId])> = Vec::with_capacity(users.len());
    for &u in users {
        let user_id = split.user_id(u);
        let rec = by_user.get(user_id).copied().unwrap_or(&empty);
        let n = rec.items.len().min(k);
        let predicted = &rec.items[..n];
        let target = &split.targets[u];
        lists.push((predicted, target));

        let rep = repeat_explore_sets(split.history(u), &split.train.catalog);
        let fg = fine_grained(predicted, target, &rep);
        let list = RankedList { predicted, target };
        let repeat_slots = rec.provenance[..n]
            .iter()
            .filter(|p| **p == crate::Provenance::Repeat)
            .count();
        let values: [(&str, Option<f64>); 14] = [
            ("recall", recall_at_k(predicted, target, k)),
            ("ndcg", ndcg_at_k(predicted, target, k)),
            ("phr", phr_indicator(predicted, target)),
            ("recall_rep", fg.recall_rep),
            ("recall_expl", fg.recall_expl),
            ("phr_rep", fg.phr_rep),
            ("phr_expl", fg.phr_expl),
            ("eel", Some(eel_user(&list, groups, k, cfg.fairness.expected_model))),
            ("eed", Some(eed_user(&list, groups, cfg.fairness.expected_model))),
            ("ild", ild(predicted, categories)),
            ("entropy", entropy(predicted, categories)),
            ("ds", ds(predicted, categories)),
            ("repeat_slots", Some(repeat_slots as f64)),
            ("explore_slots", Some((n - repeat_slots) as f64)),
        ];
        let row: BTreeMap<String, f64> = values
            .iter()
            .filter_map(|(name, v)| v.map(|v| (format!("{name}@{k}"), v)))
            .collect();
        per_user.insert(user_id.to_owned(), row);
    }

    let mut aggregate = BTreeMap::new();
    for name in PER_USER_METRICS {
        let key = format!("{name}@{k}");
        let (sum, count) = users
            .iter()
            .filter_map(|&u| per_user[split.user_id(u)].get(&key))
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count > 0 {
            aggregate.insert(key, sum / count as f64);
        }
    }
    let ranked: Vec<RankedList<'_>> = lists
        .iter()
        .map(|(predicted, target)| RankedList { predicted, target })
        .collect();
    let totals = group_totals(&ranked, groups, cfg.fairness.ratio_model);
    aggregate.insert(format!("logdp@{k}"), log_dp_from(&totals, groups, &cfg.fairness));
    aggregate.insert(format!("logeur@{k}"), log_eur_from(&totals, cfg.fairness.delta));
    aggregate.insert(format!("logrur@{k}"), log_rur_from(&totals, cfg.fairness.delta));

    MetricReport {
        config: *cfg,
        n_users: users.len(),
        aggregate,
        per_user,
    }
}
