use serde::{Deserialize, Serialize};

use crate::corpus::{ItemId, RepeatExploreSets};

fn hits(predicted: &[ItemId], target: &[ItemId]) -> usize {
    predicted.iter().filter(|i| target.contains(i)).count()
}

/// `|P ∩ T| / |T|` over the first `k` predictions; `None` for an empty target.
pub fn recall_at_k(predicted: &[ItemId], target: &[ItemId], k: usize) -> Option<f64> {
    if target.is_empty() {
        return None;
    }
    let p = &predicted[..predicted.len().min(k)];
    Some(hits(p, target) as f64 / target.len() as f64)
}

/// Binary-gain NDCG with `1 / log2(pos + 1)` discounts.
pub fn ndcg_at_k(predicted: &[ItemId], target: &[ItemId], k: usize) -> Option<f64> {
    if target.is_empty() {
        return None;
    }
    let discount = |pos: usize| 1.0 / ((pos + 1) as f64).log2();
    let dcg: f64 = predicted
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| target.contains(i))
        .map(|(j, _)| discount(j + 1))
        .sum();
    let ideal: f64 = (1..=target.len().min(k)).map(discount).sum();
    Some(dcg / ideal)
}

/// 1 when the basket contains at least one target item.
pub fn phr_indicator(predicted: &[ItemId], target: &[ItemId]) -> Option<f64> {
    if target.is_empty() {
        return None;
    }
    Some(if hits(predicted, target) > 0 { 1.0 } else { 0.0 })
}

/// Accuracy split by whether target items were bought before. A side is
/// `None` when the target has no items on that side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FineGrained {
    pub recall_rep: Option<f64>,
    pub recall_expl: Option<f64>,
    pub phr_rep: Option<f64>,
    pub phr_expl: Option<f64>,
}

pub fn fine_grained(predicted: &[ItemId], target: &[ItemId], rep: &RepeatExploreSets) -> FineGrained {
    let (t_rep, t_expl): (Vec<ItemId>, Vec<ItemId>) =
        target.iter().partition(|i| rep.is_repeat(**i));
    let side = |t: &[ItemId], want_rep: bool| -> (Option<f64>, Option<f64>) {
        if t.is_empty() {
            return (None, None);
        }
        let h = predicted
            .iter()
            .filter(|i| rep.is_repeat(**i) == want_rep && t.contains(i))
            .count();
        (
            Some(h as f64 / t.len() as f64),
            Some(if h > 0 { 1.0 } else { 0.0 }),
        )
    };
    let (recall_rep, phr_rep) = side(&t_rep, true);
    let (recall_expl, phr_expl) = side(&t_expl, false);
    FineGrained {
        recall_rep,
        recall_expl,
        phr_rep,
        phr_expl,
    }
}
