use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{ItemId, SplitDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_items: usize,
    pub n_users: usize,
    pub avg_basket_size: f64,
    pub avg_baskets_per_user: f64,
    pub repeat_ratio: f64,
    pub explore_ratio: f64,
}

/// Corpus statistics over the full sequences (history plus target). The
/// repeat ratio pools all target items: the share of them the user had
/// already bought in their history.
pub fn dataset_stats(s: &SplitDataset) -> DatasetStats {
    let n_users = s.train.n_users();
    let mut baskets = 0usize;
    let mut occurrences = 0usize;
    let mut repeat = 0usize;
    let mut target_items = 0usize;
    for (u, target) in s.targets.iter().enumerate() {
        let history = s.history(u);
        baskets += history.len() + 1;
        occurrences += history.iter().map(Vec::len).sum::<usize>() + target.len();
        let seen: HashSet<ItemId> = history.iter().flatten().copied().collect();
        repeat += target.iter().filter(|i| seen.contains(i)).count();
        target_items += target.len();
    }
    let repeat_ratio = if target_items == 0 {
        0.0
    } else {
        repeat as f64 / target_items as f64
    };
    DatasetStats {
        n_items: s.train.catalog.len(),
        n_users,
        avg_basket_size: if baskets == 0 { 0.0 } else { occurrences as f64 / baskets as f64 },
        avg_baskets_per_user: if n_users == 0 { 0.0 } else { baskets as f64 / n_users as f64 },
        repeat_ratio,
        explore_ratio: 1.0 - repeat_ratio,
    }
}
