//! Repetition scoring: item repurchase propensity times decayed user interest.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Basket, Dataset, ItemId};
use crate::error::{Error, Result};
use crate::util::rank_desc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionParams {
    /// Discount exponent on per-user repurchase counts, in [0, 1].
    pub alpha: f64,
    /// Per-basket time decay of user interest, in (0, 1].
    pub beta: f64,
    /// When off, every item's repurchase feature is treated as 1.
    pub rep_feature_enabled: bool,
}

impl Default for RepetitionParams {
    fn default() -> Self {
        RepetitionParams {
            alpha: 0.5,
            beta: 0.9,
            rep_feature_enabled: true,
        }
    }
}

impl RepetitionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta {} outside (0, 1]", self.beta)));
        }
        Ok(())
    }
}

/// Item-level repurchase features fitted on training histories.
#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionModel {
    pub params: RepetitionParams,
    /// Discounted repurchase frequency per item; `None` for items nobody bought.
    rep_f: Vec<Option<f64>>,
    /// Number of distinct buyers per item.
    n_buyers: Vec<u32>,
    pub mean_rep_f: f64,
}

impl RepetitionModel {
    /// The repurchase feature of `item`, or `None` when it was never bought
    /// in training.
    pub fn rep_feature(&self, item: ItemId) -> Option<f64> {
        let rep_f = (*self.rep_f.get(item.index())?)?;
        Some(rep_f + self.mean_rep_f / self.n_buyers[item.index()] as f64)
    }

    pub fn rep_f(&self, item: ItemId) -> Option<f64> {
        self.rep_f.get(item.index()).copied().flatten()
    }

    pub fn n_buyers(&self, item: ItemId) -> u32 {
        self.n_buyers.get(item.index()).copied().unwrap_or(0)
    }

    /// The multiplier applied to user interest. Items without a trained
    /// feature fall back to the corpus mean.
    pub fn effective_feature(&self, item: ItemId) -> f64 {
        if !self.params.rep_feature_enabled {
            return 1.0;
        }
        self.rep_feature(item).unwrap_or(self.mean_rep_f)
    }
}

/// `x^alpha` with `0^alpha = 0` for every alpha, including 0.
fn discounted(x: u32, alpha: f64) -> f64 {
    if x == 0 {
        0.0
    } else {
        (x as f64).powf(alpha)
    }
}

/// Fits repurchase features. A user's repurchase frequency of an item is the
/// number of their training baskets containing it minus one.
pub fn fit_repetition(train: &Dataset, params: RepetitionParams) -> Result<RepetitionModel> {
    params.validate()?;
    if train.users.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    let n = train.catalog.len();
    let mut sum = vec![0.0f64; n];
    let mut buyers = vec![0u32; n];
    let mut counts: HashMap<ItemId, u32> = HashMap::new();
    for user in &train.users {
        counts.clear();
        for basket in &user.baskets {
            for &item in basket {
                *counts.entry(item).or_insert(0) += 1;
            }
        }
        for (&item, &c) in &counts {
            sum[item.index()] += discounted(c - 1, params.alpha);
            buyers[item.index()] += 1;
        }
    }
    let rep_f: Vec<Option<f64>> = sum
        .iter()
        .zip(&buyers)
        .map(|(&s, &b)| (b > 0).then(|| s / b as f64))
        .collect();
    let bought: Vec<f64> = rep_f.iter().flatten().copied().collect();
    let mean_rep_f = if bought.is_empty() {
        0.0
    } else {
        bought.iter().sum::<f64>() / bought.len() as f64
    };
    Ok(RepetitionModel {
        params,
        rep_f,
        n_buyers: buyers,
        mean_rep_f,
    })
}

/// Time-decayed interest: sum of `beta^(T - l)` over the 1-based positions
/// `l` of the baskets containing `item`, with `T` the history length.
pub fn user_interest(history: &[Basket], beta: f64, item: ItemId) -> Result<f64> {
    let t = history.len();
    let mut total = 0.0;
    let mut found = false;
    for (pos, basket) in history.iter().enumerate() {
        if basket.binary_search(&item).is_ok() {
            total += beta.powi((t - 1 - pos) as i32);
            found = true;
        }
    }
    if found {
        Ok(total)
    } else {
        Err(Error::InvalidParameter(format!(
            "item #{} is not in the user's history",
            item.0
        )))
    }
}

/// Interest for every item in the history in one pass.
pub(crate) fn interests(history: &[Basket], beta: f64) -> HashMap<ItemId, f64> {
    let t = history.len();
    let mut out = HashMap::new();
    for (pos, basket) in history.iter().enumerate() {
        let w = beta.powi((t - 1 - pos) as i32);
        for &item in basket {
            *out.entry(item).or_insert(0.0) += w;
        }
    }
    out
}

/// Repetition scores over a user's repeat set, kept ranked by score
/// descending with ties to the smaller item id.
#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionScores {
    ranked: Vec<(ItemId, f64)>,
}

impl RepetitionScores {
    pub fn from_scores(mut scores: Vec<(ItemId, f64)>) -> Self {
        rank_desc(&mut scores);
        RepetitionScores { ranked: scores }
    }

    pub fn ranked(&self) -> &[(ItemId, f64)] {
        &self.ranked
    }

    pub fn get(&self, item: ItemId) -> Option<f64> {
        self.ranked.iter().find(|(i, _)| *i == item).map(|(_, s)| *s)
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// Number of items scoring at least `v`.
    pub fn survivors(&self, v: f64) -> usize {
        self.ranked.partition_point(|(_, s)| *s >= v)
    }
}

pub fn repetition_scores(model: &RepetitionModel, history: &[Basket]) -> RepetitionScores {
    let scores = interests(history, model.params.beta)
        .into_iter()
        .map(|(item, e)| (item, e * model.effective_feature(item)))
        .collect();
    RepetitionScores::from_scores(scores)
}
