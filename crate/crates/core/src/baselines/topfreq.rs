use crate::corpus::{personal_counts, Basket, Dataset, ItemId};
use crate::util::{popularity_order, rank_desc};

/// Global item ranking by training basket occurrences, ties by id.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalPopularity {
    order: Vec<ItemId>,
}

impl GlobalPopularity {
    pub fn fit(train: &Dataset) -> Self {
        GlobalPopularity {
            order: popularity_order(&train.item_basket_counts()),
        }
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        GlobalPopularity {
            order: popularity_order(counts),
        }
    }

    pub fn order(&self) -> &[ItemId] {
        &self.order
    }

    pub fn top(&self, k: usize) -> Vec<ItemId> {
        self.order.iter().take(k).copied().collect()
    }
}

/// The `k` most popular items of the corpus; the same basket for everyone.
pub fn g_topfreq(train: &Dataset, k: usize) -> Vec<ItemId> {
    GlobalPopularity::fit(train).top(k)
}

/// The user's own items by purchase count, ties by id. Under-filled when the
/// user bought fewer than `k` distinct items.
pub fn p_topfreq(history: &[Basket], k: usize) -> Vec<ItemId> {
    let mut scored: Vec<(ItemId, f64)> = personal_counts(history)
        .into_iter()
        .map(|(i, c)| (i, c as f64))
        .collect();
    rank_desc(&mut scored);
    scored.into_iter().take(k).map(|(i, _)| i).collect()
}

/// P-TopFreq, with any open slots filled by the most popular unseen items.
pub fn gp_topfreq(history: &[Basket], global: &GlobalPopularity, k: usize) -> Vec<ItemId> {
    let mut items = p_topfreq(history, k);
    if items.len() < k {
        let fill: Vec<ItemId> = global
            .order
            .iter()
            .copied()
            .filter(|i| !items.contains(i))
            .take(k - items.len())
            .collect();
        items.extend(fill);
    }
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn corpus() -> Dataset {
        let cats: HashMap<String, String> =
            ["a", "b", "c", "d"].iter().map(|i| (i.to_string(), "x".to_string())).collect();
        Dataset::from_named(
            vec![
                ("u1".to_string(), vec![vec!["a", "b"], vec!["a"], vec!["a", "c"]]),
                ("u2".to_string(), vec![vec!["d"], vec!["d", "b"]]),
                ("u3".to_string(), vec![vec!["d"], vec!["b"]]),
            ],
            &cats,
        )
        .unwrap()
    }

    #[test]
    fn global_ranking() {
        let d = corpus();
        let names: Vec<&str> = g_topfreq(&d, 3).iter().map(|i| d.catalog.name(*i)).collect();
        // a:3, b:3, d:3, c:1; ties by id
        assert_eq!(names, vec!["a", "b", "d"]);
    }

    #[test]
    fn personal_ranking() {
        let d = corpus();
        let p = p_topfreq(&d.users[0].baskets, 2);
        let names: Vec<&str> = p.iter().map(|i| d.catalog.name(*i)).collect();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(p_topfreq(&d.users[2].baskets, 10).len(), 2);
    }

    #[test]
    fn fill_composition() {
        let d = corpus();
        let g = GlobalPopularity::fit(&d);
        let h = &d.users[1].baskets;
        let gp = gp_topfreq(h, &g, 3);
        let names: Vec<&str> = gp.iter().map(|i| d.catalog.name(*i)).collect();
        assert_eq!(names, vec!["d", "b", "a"]);
        assert_eq!(gp_topfreq(h, &g, 1), p_topfreq(h, 1));
        assert_eq!(gp_topfreq(&[], &g, 3), g.top(3));
    }
}
