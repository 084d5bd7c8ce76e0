use std::cmp::Ordering;

use crate::corpus::ItemId;

/// Score descending, then item id ascending.
pub(crate) fn by_score_desc(a: &(ItemId, f64), b: &(ItemId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

pub(crate) fn rank_desc(scored: &mut [(ItemId, f64)]) {
    scored.sort_unstable_by(by_score_desc);
}

/// The `k` best items by score, ties to the smaller id.
pub(crate) fn top_k(mut scored: Vec<(ItemId, f64)>, k: usize) -> Vec<ItemId> {
    if scored.len() > k && k > 0 {
        scored.select_nth_unstable_by(k - 1, by_score_desc);
        scored.truncate(k);
    }
    rank_desc(&mut scored);
    scored.truncate(k);
    scored.into_iter().map(|(i, _)| i).collect()
}

/// Items ordered by count descending, then id ascending.
pub(crate) fn popularity_order(counts: &[u64]) -> Vec<ItemId> {
    let mut order: Vec<ItemId> = (0..counts.len() as u32).map(ItemId).collect();
    order.sort_by(|a, b| counts[b.index()].cmp(&counts[a.index()]).then(a.cmp(b)));
    order
}

/// Stable per-user seed derived from a run seed.
pub fn user_seed(run_seed: u64, user_id: &str) -> u64 {
    xxhash_rust::xxh3::xxh3_64_with_seed(user_id.as_bytes(), run_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_breaks_ties_by_id() {
        let scored = vec![(ItemId(3), 1.0), (ItemId(1), 1.0), (ItemId(2), 2.0), (ItemId(0), 0.5)];
        assert_eq!(top_k(scored.clone(), 2), vec![ItemId(2), ItemId(1)]);
        assert_eq!(top_k(scored.clone(), 10), vec![ItemId(2), ItemId(1), ItemId(3), ItemId(0)]);
        assert!(top_k(scored, 0).is_empty());
    }

    #[test]
    fn popularity_order_ties() {
        assert_eq!(
            popularity_order(&[1, 3, 3, 0]),
            vec![ItemId(1), ItemId(2), ItemId(0), ItemId(3)]
        );
    }

    #[test]
    fn user_seed_depends_on_both_inputs() {
        assert_eq!(user_seed(1, "a"), user_seed(1, "a"));
        assert_ne!(user_seed(1, "a"), user_seed(2, "a"));
        assert_ne!(user_seed(1, "a"), user_seed(1, "b"));
    }
}
