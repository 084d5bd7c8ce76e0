use serde::{Deserialize, Serialize};

use crate::baselines::{tifuknn_grid, upcf_grid, TifuknnGrid, TifuknnParams, UpcfGrid, UpcfParams};
use crate::corpus::{Basket, Dataset, ItemId, SplitDataset};
use crate::error::{Error, Result};
use crate::metrics::{ndcg_at_k, phr_indicator, recall_at_k};
use crate::trex::{fit_repetition, repeat_only, repetition_scores, RepetitionParams};

use super::methods::Method;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    #[default]
    Recall,
    Ndcg,
    Phr,
}

impl SelectionMetric {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMetric::Recall => "recall",
            SelectionMetric::Ndcg => "ndcg",
            SelectionMetric::Phr => "phr",
        }
    }

    fn value(self, predicted: &[ItemId], target: &[ItemId], k: usize) -> Option<f64> {
        match self {
            SelectionMetric::Recall => recall_at_k(predicted, target, k),
            SelectionMetric::Ndcg => ndcg_at_k(predicted, target, k),
            SelectionMetric::Phr => phr_indicator(&predicted[..predicted.len().min(k)], target),
        }
    }
}

/// Validation users and their held-out baskets; the only targets tuning
/// can see.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSet {
    pub users: Vec<usize>,
    targets: Vec<Basket>,
}

impl ValidationSet {
    pub fn from_split(split: &SplitDataset) -> Self {
        let users = split.validation_users();
        let targets = users.iter().map(|&u| split.targets[u].clone()).collect();
        ValidationSet { users, targets }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Mean of the metric over users where it is defined. `baskets` runs
    /// parallel to `users`.
    pub fn score(&self, baskets: &[Vec<ItemId>], k: usize, metric: SelectionMetric) -> f64 {
        let (sum, n) = baskets
            .iter()
            .zip(&self.targets)
            .filter_map(|(p, t)| metric.value(p, t, k))
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrexGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default = "default_true")]
    pub rep_feature: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TrexGrid {
    fn default() -> Self {
        TrexGrid {
            alpha: (0..=10).map(|x| x as f64 / 10.0).collect(),
            beta: (0..=6).map(|x| 0.7 + x as f64 * 0.05).collect(),
            rep_feature: true,
        }
    }
}

impl TrexGrid {
    /// Configurations in grid order (alpha, beta; beta fastest).
    pub fn configs(&self) -> Vec<RepetitionParams> {
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &beta in &self.beta {
                out.push(RepetitionParams {
                    alpha,
                    beta,
                    rep_feature_enabled: self.rep_feature,
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GridSpec {
    TrexRep(TrexGrid),
    Tifuknn(TifuknnGrid),
    Upcf(UpcfGrid),
}

/// One tuned configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TunedParams {
    TrexRep(RepetitionParams),
    Tifuknn(TifuknnParams),
    Upcf(UpcfParams),
}

impl TunedParams {
    pub fn method(&self) -> Method {
        match *self {
            TunedParams::TrexRep(p) => Method::TrexRep {
                alpha: p.alpha,
                beta: p.beta,
                rep_feature: p.rep_feature_enabled,
            },
            TunedParams::Tifuknn(p) => Method::Tifuknn(p),
            TunedParams::Upcf(p) => Method::Upcf(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: TunedParams,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub metric: SelectionMetric,
    pub k: usize,
    pub best: usize,
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn best_params(&self) -> TunedParams {
        self.rows[self.best].params
    }

    pub fn best_score(&self) -> f64 {
        self.rows[self.best].score
    }
}

/// Index of the highest score; the earliest wins ties.
fn argmax(rows: &[GridRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.score > rows[best].score {
            best = i;
        }
    }
    best
}

/// Evaluates every configuration of `spec` on the validation users and
/// returns the full table with the winner.
pub fn grid_search(
    spec: &GridSpec,
    train: &Dataset,
    validation: &ValidationSet,
    k: usize,
    metric: SelectionMetric,
) -> Result<GridResult> {
    use rayon::prelude::*;
    if validation.is_empty() {
        return Err(Error::InvalidParameter("grid search needs validation users".into()));
    }
    let score = |b: &[Vec<ItemId>]| validation.score(b, k, metric);
    let users = &validation.users;
    let rows: Vec<GridRow> = match spec {
        GridSpec::TrexRep(grid) => {
            let configs = grid.configs();
            if configs.is_empty() {
                return Err(Error::InvalidParameter("empty TREx grid".into()));
            }
            configs
                .into_iter()
                .map(|params| {
                    let model = fit_repetition(train, params)?;
                    let baskets: Vec<Vec<ItemId>> = users
                        .par_iter()
                        .map(|&u| {
                            let user = &train.users[u];
                            repeat_only(&user.user_id, &repetition_scores(&model, &user.baskets), k).items
                        })
                        .collect();
                    Ok(GridRow {
                        params: TunedParams::TrexRep(params),
                        score: score(&baskets),
                    })
                })
                .collect::<Result<_>>()?
        }
        GridSpec::Tifuknn(grid) => tifuknn_grid(train, users, grid, k, score)?
            .into_iter()
            .map(|(p, s)| GridRow {
                params: TunedParams::Tifuknn(p),
                score: s,
            })
            .collect(),
        GridSpec::Upcf(grid) => upcf_grid(train, users, grid, k, score)?
            .into_iter()
            .map(|(p, s)| GridRow {
                params: TunedParams::Upcf(p),
                score: s,
            })
            .collect(),
    };
    Ok(GridResult {
        metric,
        k,
        best: argmax(&rows),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(score: f64) -> GridRow {
        GridRow {
            params: TunedParams::TrexRep(RepetitionParams::default()),
            score,
        }
    }

    #[test]
    fn first_maximum_wins() {
        assert_eq!(argmax(&[row(0.1), row(0.3), row(0.3), row(0.2)]), 1);
        assert_eq!(argmax(&[row(0.5)]), 0);
    }

    #[test]
    fn default_grids() {
        let t = TrexGrid::default();
        assert_eq!(t.alpha.len(), 11);
        assert_eq!(t.beta.len(), 7);
        assert!((t.beta[6] - 1.0).abs() < 1e-12);
        assert_eq!(TifuknnGrid::default().configs().len(), 6 * 6 * 10 * 10 * 11);
        assert_eq!(UpcfGrid::default().configs().len(), 180);
    }
}
