//! Repetition-greedy basket assembly.

use crate::corpus::RepeatExploreSets;
use crate::recommendation::{Provenance, Recommendation};

use super::exploration::ExplorationPolicy;
use super::repetition::RepetitionScores;

/// Builds a size-`k` basket. Repeat candidates scoring below `v` are dropped;
/// the survivors fill the basket in score order and, when fewer than `k`
/// survive, the policy supplies the remaining explore items.
pub fn generate_basket(
    user_id: &str,
    scores: &RepetitionScores,
    v: f64,
    k: usize,
    candidates: &RepeatExploreSets,
    policy: &ExplorationPolicy,
) -> Recommendation {
    let survivors = scores.survivors(v);
    let mut items: Vec<_> = scores.ranked()[..survivors.min(k)]
        .iter()
        .map(|(i, _)| *i)
        .collect();
    let mut provenance = vec![Provenance::Repeat; items.len()];
    if items.len() < k {
        let explore = policy.explore(candidates, &items, user_id, k - items.len());
        provenance.extend(std::iter::repeat(Provenance::Explore).take(explore.len()));
        items.extend(explore);
    }
    Recommendation {
        user_id: user_id.to_owned(),
        items,
        provenance,
    }
}

/// Repeat-only basket: the top `k` repeat items, no exploration.
pub fn repeat_only(user_id: &str, scores: &RepetitionScores, k: usize) -> Recommendation {
    let items: Vec<_> = scores.ranked().iter().take(k).map(|(i, _)| *i).collect();
    Recommendation {
        user_id: user_id.to_owned(),
        provenance: vec![Provenance::Repeat; items.len()],
        items,
    }
}
