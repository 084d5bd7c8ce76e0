use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Dataset, ItemId, UserRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub min_baskets: usize,
    /// Minimum number of baskets an item must occur in, corpus-wide.
    pub min_item_count: u64,
    /// Keep only each user's most recent baskets.
    pub basket_cap: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_baskets: 3,
            min_item_count: 5,
            basket_cap: 50,
        }
    }
}

/// One pass of: item filter, empty-basket drop, user filter, truncation.
fn pass(users: Vec<UserRecord>, n_items: usize, cfg: &PreprocessConfig) -> (Vec<UserRecord>, bool) {
    let mut counts = vec![0u64; n_items];
    for user in &users {
        for basket in &user.baskets {
            for item in basket {
                counts[item.index()] += 1;
            }
        }
    }
    let mut changed = false;
    let mut out = Vec::with_capacity(users.len());
    for mut user in users {
        let before = user.baskets.len();
        user.baskets = user
            .baskets
            .into_iter()
            .filter_map(|basket| {
                let len = basket.len();
                let kept: Vec<ItemId> = basket
                    .into_iter()
                    .filter(|i| counts[i.index()] >= cfg.min_item_count)
                    .collect();
                changed |= kept.len() != len;
                (!kept.is_empty()).then_some(kept)
            })
            .collect();
        changed |= user.baskets.len() != before;
        if user.baskets.len() < cfg.min_baskets {
            changed = true;
            continue;
        }
        if user.baskets.len() > cfg.basket_cap {
            let drop = user.baskets.len() - cfg.basket_cap;
            user.baskets.drain(..drop);
            changed = true;
        }
        out.push(user);
    }
    (out, changed)
}

/// Applies the filters in order (rare items, emptied baskets, short
/// histories, truncation to the most recent `basket_cap` baskets) and repeats
/// the sequence until nothing changes, so every threshold holds on the
/// output and the operation is idempotent. The catalog is restricted to the
/// items that survive.
pub fn preprocess(d: Dataset, cfg: &PreprocessConfig) -> Result<Dataset> {
    if cfg.min_baskets == 0 || cfg.basket_cap < cfg.min_baskets.max(1) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= min_baskets <= basket_cap, got {} and {}",
            cfg.min_baskets, cfg.basket_cap
        )));
    }
    let n_items = d.catalog.len();
    let mut users = d.users;
    loop {
        let (next, changed) = pass(users, n_items, cfg);
        users = next;
        if !changed {
            break;
        }
    }
    if users.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let used: HashSet<ItemId> = users
        .iter()
        .flat_map(|u| u.baskets.iter().flatten().copied())
        .collect();
    let (catalog, remap) = d.catalog.restrict(&used);
    for user in &mut users {
        for basket in &mut user.baskets {
            for item in basket.iter_mut() {
                *item = remap[item];
            }
        }
    }
    Ok(Dataset {
        users,
        catalog: Arc::new(catalog),
    })
}
