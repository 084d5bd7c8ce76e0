use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Basket, Dataset, UserRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fold {
    Validation,
    Test,
}

/// Training histories plus the held-out last basket of every user.
///
/// `targets` and `folds` are indexed like `train.users`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub targets: Vec<Basket>,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

impl SplitDataset {
    pub fn users_in(&self, fold: Fold) -> Vec<usize> {
        (0..self.folds.len()).filter(|&u| self.folds[u] == fold).collect()
    }

    pub fn validation_users(&self) -> Vec<usize> {
        self.users_in(Fold::Validation)
    }

    pub fn test_users(&self) -> Vec<usize> {
        self.users_in(Fold::Test)
    }

    pub fn history(&self, user: usize) -> &[Basket] {
        &self.train.users[user].baskets
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.train.users[user].user_id
    }

    /// Reassembles the full sequences (training baskets followed by target).
    pub fn full_dataset(&self) -> Dataset {
        let users = self
            .train
            .users
            .iter()
            .zip(&self.targets)
            .map(|(u, t)| {
                let mut baskets = u.baskets.clone();
                baskets.push(t.clone());
                UserRecord {
                    user_id: u.user_id.clone(),
                    baskets,
                }
            })
            .collect();
        Dataset {
            users,
            catalog: self.train.catalog.clone(),
        }
    }

    /// Rebuilds a split from full sequences and a fixed fold assignment.
    pub(crate) fn from_full(d: Dataset, folds: Vec<Fold>, seed: u64) -> Result<Self> {
        let mut users = Vec::with_capacity(d.users.len());
        let mut targets = Vec::with_capacity(d.users.len());
        for mut user in d.users {
            if user.baskets.len() < 2 {
                return Err(Error::TooFewBaskets {
                    user: user.user_id,
                    baskets: user.baskets.len(),
                    required: 2,
                });
            }
            targets.push(user.baskets.pop().expect("non-empty"));
            users.push(user);
        }
        Ok(SplitDataset {
            train: Dataset {
                users,
                catalog: d.catalog,
            },
            targets,
            folds,
            seed,
        })
    }
}

/// Holds out each user's last basket and deals users alternately into the
/// validation and test folds after a seeded shuffle.
pub fn split(d: Dataset, seed: u64) -> Result<SplitDataset> {
    let mut order: Vec<usize> = (0..d.users.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Fold::Validation; d.users.len()];
    for (pos, &u) in order.iter().enumerate() {
        if pos % 2 == 1 {
            folds[u] = Fold::Test;
        }
    }
    SplitDataset::from_full(d, folds, seed)
}
