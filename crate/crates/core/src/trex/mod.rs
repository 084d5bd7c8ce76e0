//! Two-step repetition/exploration recommender.

mod basket;
mod exploration;
mod repetition;

pub use basket::{generate_basket, repeat_only};
pub use exploration::{explore_diversity, explore_fairness, ExplorationPolicy, PolicyKind};
pub use repetition::{
    fit_repetition, repetition_scores, user_interest, RepetitionModel, RepetitionParams,
    RepetitionScores,
};

use crate::corpus::{repeat_explore_sets, Dataset};
use crate::recommendation::Recommendation;

/// Recommends for every user of `train` at threshold `v`.
pub fn recommend_all(
    model: &RepetitionModel,
    policy: &ExplorationPolicy,
    train: &Dataset,
    users: &[usize],
    v: f64,
    k: usize,
) -> Vec<Recommendation> {
    use rayon::prelude::*;
    users
        .par_iter()
        .map(|&u| {
            let user = &train.users[u];
            let scores = repetition_scores(model, &user.baskets);
            let sets = repeat_explore_sets(&user.baskets, &train.catalog);
            generate_basket(&user.user_id, &scores, v, k, &sets, policy)
        })
        .collect()
}
