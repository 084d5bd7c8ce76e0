use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::baselines::{gp_topfreq, p_topfreq, tifuknn_fit, upcf_fit, GlobalPopularity, TifuknnParams, UpcfParams};
use crate::corpus::{repeat_explore_sets, ItemId, SplitDataset};
use crate::error::Result;
use crate::metrics::GroupAssignment;
use crate::recommendation::Recommendation;
use crate::trex::{
    fit_repetition, generate_basket, repeat_only, repetition_scores, ExplorationPolicy, PolicyKind,
    RepetitionParams,
};

fn yes() -> bool {
    true
}

/// A recommender with fixed hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Method {
    GTopfreq,
    PTopfreq,
    GpTopfreq,
    TrexRep {
        alpha: f64,
        beta: f64,
        #[serde(default = "yes")]
        rep_feature: bool,
    },
    Trex {
        alpha: f64,
        beta: f64,
        policy: PolicyKind,
        v: f64,
        #[serde(default)]
        seed: u64,
    },
    Tifuknn(TifuknnParams),
    Upcf(UpcfParams),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::GTopfreq => "g_topfreq".into(),
            Method::PTopfreq => "p_topfreq".into(),
            Method::GpTopfreq => "gp_topfreq".into(),
            Method::TrexRep { .. } => "trex_rep".into(),
            Method::Trex { policy, .. } => match policy {
                PolicyKind::Fairness => "trex_fairness".into(),
                PolicyKind::Diversity => "trex_diversity".into(),
                PolicyKind::None => "trex_none".into(),
            },
            Method::Tifuknn(_) => "tifuknn".into(),
            Method::Upcf(_) => "upcf".into(),
        }
    }

    pub fn with_threshold(&self, v: f64) -> Method {
        let mut m = self.clone();
        if let Method::Trex { v: old, .. } = &mut m {
            *old = v;
        }
        m
    }
}

/// The exploration policy a TREx variant uses, fitted on `split.train`.
pub fn build_policy(kind: PolicyKind, split: &SplitDataset, groups: &GroupAssignment, seed: u64) -> ExplorationPolicy {
    match kind {
        PolicyKind::Fairness => ExplorationPolicy::fairness(&split.train, groups.clone(), seed),
        PolicyKind::Diversity => ExplorationPolicy::diversity(&split.train),
        PolicyKind::None => ExplorationPolicy::none(&split.train),
    }
}

fn labelled(split: &SplitDataset, u: usize, items: Vec<ItemId>) -> Recommendation {
    let rep: HashSet<ItemId> = split.history(u).iter().flatten().copied().collect();
    Recommendation::labelled(split.user_id(u), items, &rep)
}

/// Recommends `k` items for each of `users` (indices into `split.train`),
/// fitting on the training histories only.
pub fn recommend(
    method: &Method,
    split: &SplitDataset,
    users: &[usize],
    k: usize,
    groups: &GroupAssignment,
) -> Result<Vec<Recommendation>> {
    use rayon::prelude::*;
    let train = &split.train;
    let recs = match method {
        Method::GTopfreq => {
            let top = GlobalPopularity::fit(train).top(k);
            users.iter().map(|&u| labelled(split, u, top.clone())).collect()
        }
        Method::PTopfreq => users
            .par_iter()
            .map(|&u| labelled(split, u, p_topfreq(split.history(u), k)))
            .collect(),
        Method::GpTopfreq => {
            let global = GlobalPopularity::fit(train);
            users
                .par_iter()
                .map(|&u| labelled(split, u, gp_topfreq(split.history(u), &global, k)))
                .collect()
        }
        Method::TrexRep {
            alpha,
            beta,
            rep_feature,
        } => {
            let model = fit_repetition(
                train,
                RepetitionParams {
                    alpha: *alpha,
                    beta: *beta,
                    rep_feature_enabled: *rep_feature,
                },
            )?;
            users
                .par_iter()
                .map(|&u| repeat_only(split.user_id(u), &repetition_scores(&model, split.history(u)), k))
                .collect()
        }
        Method::Trex {
            alpha,
            beta,
            policy,
            v,
            seed,
        } => {
            let model = fit_repetition(
                train,
                RepetitionParams {
                    alpha: *alpha,
                    beta: *beta,
                    rep_feature_enabled: true,
                },
            )?;
            let policy = build_policy(*policy, split, groups, *seed);
            users
                .par_iter()
                .map(|&u| {
                    let history = split.history(u);
                    let scores = repetition_scores(&model, history);
                    let sets = repeat_explore_sets(history, &train.catalog);
                    generate_basket(split.user_id(u), &scores, *v, k, &sets, &policy)
                })
                .collect()
        }
        Method::Tifuknn(params) => {
            let model = tifuknn_fit(train, *params)?;
            let baskets = model.predict_all(users, k);
            users.iter().zip(baskets).map(|(&u, b)| labelled(split, u, b)).collect()
        }
        Method::Upcf(params) => {
            let model = upcf_fit(train, *params)?;
            let baskets = model.predict_all(users, k);
            users.iter().zip(baskets).map(|(&u, b)| labelled(split, u, b)).collect()
        }
    };
    Ok(recs)
}
