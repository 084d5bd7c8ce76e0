//! Nearest neighbours over personalized item frequency (PIF) vectors.

use serde::{Deserialize, Serialize};

use crate::corpus::{Basket, Dataset, ItemId};
use crate::error::{Error, Result};
use crate::util::top_k;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TifuknnParams {
    pub k_neighbors: usize,
    pub m_groups: usize,
    /// Within-group basket decay.
    pub r_b: f64,
    /// Across-group decay.
    pub r_g: f64,
    /// Weight of the user's own PIF against the neighbour mean.
    pub alpha: f64,
}

impl Default for TifuknnParams {
    fn default() -> Self {
        TifuknnParams {
            k_neighbors: 300,
            m_groups: 7,
            r_b: 0.9,
            r_g: 0.7,
            alpha: 0.7,
        }
    }
}

impl TifuknnParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if self.k_neighbors == 0 || self.m_groups == 0 {
            return Err(Error::InvalidParameter("k_neighbors and m_groups must be positive".into()));
        }
        if !unit(self.r_b) || !unit(self.r_g) {
            return Err(Error::InvalidParameter(format!(
                "decay ratios r_b={} r_g={} outside (0, 1]",
                self.r_b, self.r_g
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Sparse PIF, sorted by item.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PifVector {
    pub weights: Vec<(ItemId, f64)>,
}

impl PifVector {
    pub fn get(&self, item: ItemId) -> f64 {
        self.weights
            .binary_search_by_key(&item, |(i, _)| *i)
            .map(|p| self.weights[p].1)
            .unwrap_or(0.0)
    }

    pub fn sq_norm(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w * w).sum()
    }
}

/// A history re-indexed against its own distinct items.
#[derive(Clone, Debug)]
pub(crate) struct LocalHistory {
    items: Vec<ItemId>,
    baskets: Vec<Vec<u32>>,
}

impl LocalHistory {
    pub(crate) fn new(history: &[Basket]) -> Self {
        let mut items: Vec<ItemId> = history.iter().flatten().copied().collect();
        items.sort_unstable();
        items.dedup();
        let baskets = history
            .iter()
            .map(|b| {
                b.iter()
                    .map(|i| items.binary_search(i).expect("item collected above") as u32)
                    .collect()
            })
            .collect();
        LocalHistory { items, baskets }
    }
}

/// Sizes of `m` contiguous groups over `t` baskets, oldest first. When `t` is
/// not divisible the earliest groups are one basket shorter. Users with fewer
/// baskets than groups get one group per basket.
pub fn group_sizes(t: usize, m: usize) -> Vec<usize> {
    let groups = m.min(t);
    if groups == 0 {
        return Vec::new();
    }
    let base = t / groups;
    let rem = t % groups;
    (0..groups).map(|j| base + usize::from(j >= groups - rem)).collect()
}

fn local_pif(h: &LocalHistory, m: usize, r_b: f64, r_g: f64) -> PifVector {
    let sizes = group_sizes(h.baskets.len(), m);
    let n_groups = sizes.len();
    let mut acc = vec![0.0f64; h.items.len()];
    let mut group = vec![0.0f64; h.items.len()];
    let mut start = 0;
    for (j, &g) in sizes.iter().enumerate() {
        group.iter_mut().for_each(|x| *x = 0.0);
        for (p, basket) in h.baskets[start..start + g].iter().enumerate() {
            let w = r_b.powi((g - 1 - p) as i32);
            for &local in basket {
                group[local as usize] += w;
            }
        }
        let gw = r_g.powi((n_groups - 1 - j) as i32) / g as f64;
        for (a, x) in acc.iter_mut().zip(&group) {
            *a += gw * x;
        }
        start += g;
    }
    let weights = h
        .items
        .iter()
        .zip(acc)
        .filter(|(_, w)| *w > 0.0)
        .map(|(&i, w)| (i, w / n_groups as f64))
        .collect();
    PifVector { weights }
}

/// PIF of one history: group vectors are decayed basket sums divided by group
/// size, and the PIF is the mean of decayed group vectors.
pub fn pif(history: &[Basket], m_groups: usize, r_b: f64, r_g: f64) -> PifVector {
    local_pif(&LocalHistory::new(history), m_groups, r_b, r_g)
}

/// PIFs of every user with an inverted index for sparse dot products.
#[derive(Clone, Debug)]
pub(crate) struct PifTable {
    pifs: Vec<PifVector>,
    sq_norms: Vec<f64>,
    index: Vec<Vec<(u32, f64)>>,
    n_items: usize,
}

/// Reusable per-query buffers.
pub(crate) struct Scratch {
    dots: Vec<f64>,
    acc: Vec<f64>,
    own: Vec<f64>,
    touched: Vec<u32>,
}

impl Scratch {
    pub(crate) fn new(n_users: usize, n_items: usize) -> Self {
        Scratch {
            dots: vec![0.0; n_users],
            acc: vec![0.0; n_items],
            own: vec![0.0; n_items],
            touched: Vec::new(),
        }
    }
}

impl PifTable {
    pub(crate) fn build(histories: &[LocalHistory], n_items: usize, m: usize, r_b: f64, r_g: f64) -> Self {
        use rayon::prelude::*;
        let pifs: Vec<PifVector> = histories.par_iter().map(|h| local_pif(h, m, r_b, r_g)).collect();
        let sq_norms = pifs.iter().map(PifVector::sq_norm).collect();
        let mut index = vec![Vec::new(); n_items];
        for (u, p) in pifs.iter().enumerate() {
            for &(i, w) in &p.weights {
                index[i.index()].push((u as u32, w));
            }
        }
        PifTable {
            pifs,
            sq_norms,
            index,
            n_items,
        }
    }

    fn n_users(&self) -> usize {
        self.pifs.len()
    }

    /// The `limit` users closest to `u` by Euclidean distance, nearest first,
    /// ties to the smaller index. `u` itself is excluded.
    pub(crate) fn nearest(&self, u: usize, limit: usize, scratch: &mut Scratch) -> Vec<u32> {
        let dots = &mut scratch.dots;
        dots.iter_mut().for_each(|d| *d = 0.0);
        for &(i, w) in &self.pifs[u].weights {
            for &(v, w2) in &self.index[i.index()] {
                dots[v as usize] += w * w2;
            }
        }
        let nu = self.sq_norms[u];
        let mut ranked: Vec<(f64, u32)> = (0..self.n_users())
            .filter(|&v| v != u)
            .map(|v| (nu + self.sq_norms[v] - 2.0 * dots[v], v as u32))
            .collect();
        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let limit = limit.min(ranked.len());
        if limit > 0 && limit < ranked.len() {
            ranked.select_nth_unstable_by(limit - 1, cmp);
        }
        ranked.truncate(limit);
        ranked.sort_unstable_by(cmp);
        ranked.into_iter().map(|(_, v)| v).collect()
    }

    /// Baskets for every combination of neighbour count and fusion weight,
    /// laid out as `[k_index * alphas.len() + alpha_index]`. `ks` must be
    /// ascending.
    pub(crate) fn predict_multi(
        &self,
        u: usize,
        ks: &[usize],
        alphas: &[f64],
        basket_k: usize,
        scratch: &mut Scratch,
    ) -> Vec<Vec<ItemId>> {
        debug_assert!(ks.windows(2).all(|w| w[0] <= w[1]));
        let max_k = ks.last().copied().unwrap_or(0);
        let neighbours = self.nearest(u, max_k, scratch);
        let n_others = self.n_users() - 1;

        let Scratch {
            acc, own, touched, ..
        } = scratch;
        for &t in touched.iter() {
            acc[t as usize] = 0.0;
            own[t as usize] = 0.0;
        }
        touched.clear();
        for &(i, w) in &self.pifs[u].weights {
            own[i.index()] = w;
            touched.push(i.0);
        }

        let mut out = vec![Vec::new(); ks.len() * alphas.len()];
        let mut ki = 0;
        let snapshot = |count: usize, ki: usize, acc: &[f64], touched: &[u32], out: &mut Vec<Vec<ItemId>>| {
            let nb = |i: usize| if count == 0 { 0.0 } else { acc[i] / count as f64 };
            // Items the user never bought rank by neighbour mean alone for
            // every alpha below one, so only their top `basket_k` can enter.
            let foreign: Vec<(ItemId, f64)> = touched
                .iter()
                .filter(|&&i| own[i as usize] == 0.0 && acc[i as usize] > 0.0)
                .map(|&i| (ItemId(i), nb(i as usize)))
                .collect();
            let foreign = top_k(foreign, basket_k);
            for (ai, &alpha) in alphas.iter().enumerate() {
                let mut cand: Vec<(ItemId, f64)> = self.pifs[u]
                    .weights
                    .iter()
                    .map(|&(i, w)| (i, alpha * w + (1.0 - alpha) * nb(i.index())))
                    .collect();
                if alpha < 1.0 {
                    cand.extend(foreign.iter().map(|&i| (i, (1.0 - alpha) * nb(i.index()))));
                }
                cand.retain(|(_, s)| *s > 0.0);
                out[ki * alphas.len() + ai] = top_k(cand, basket_k);
            }
        };

        let effective = |k: usize| k.min(n_others);
        while ki < ks.len() && effective(ks[ki]) == 0 {
            snapshot(0, ki, acc, touched, &mut out);
            ki += 1;
        }
        for (c, &v) in neighbours.iter().enumerate() {
            for &(i, w) in &self.pifs[v as usize].weights {
                let slot = &mut acc[i.index()];
                if *slot == 0.0 && own[i.index()] == 0.0 {
                    touched.push(i.0);
                }
                *slot += w;
            }
            let count = c + 1;
            while ki < ks.len() && effective(ks[ki]) == count {
                snapshot(count, ki, acc, touched, &mut out);
                ki += 1;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TifuknnModel {
    pub params: TifuknnParams,
    table: PifTable,
}

pub fn tifuknn_fit(train: &Dataset, params: TifuknnParams) -> Result<TifuknnModel> {
    params.validate()?;
    let histories: Vec<LocalHistory> = train.users.iter().map(|u| LocalHistory::new(&u.baskets)).collect();
    let table = PifTable::build(&histories, train.catalog.len(), params.m_groups, params.r_b, params.r_g);
    Ok(TifuknnModel { params, table })
}

impl TifuknnModel {
    pub fn pif(&self, user: usize) -> &PifVector {
        &self.table.pifs[user]
    }

    /// The neighbours used for `user`, nearest first.
    pub fn neighbors(&self, user: usize) -> Vec<usize> {
        let mut scratch = Scratch::new(self.table.n_users(), self.table.n_items);
        self.table
            .nearest(user, self.params.k_neighbors, &mut scratch)
            .into_iter()
            .map(|v| v as usize)
            .collect()
    }

    pub fn predict(&self, user: usize, k: usize) -> Vec<ItemId> {
        let mut scratch = Scratch::new(self.table.n_users(), self.table.n_items);
        self.predict_with(user, k, &mut scratch)
    }

    pub(crate) fn predict_with(&self, user: usize, k: usize, scratch: &mut Scratch) -> Vec<ItemId> {
        self.table
            .predict_multi(user, &[self.params.k_neighbors], &[self.params.alpha], k, scratch)
            .pop()
            .unwrap_or_default()
    }

    /// Predictions for many users, in order.
    pub fn predict_all(&self, users: &[usize], k: usize) -> Vec<Vec<ItemId>> {
        use rayon::prelude::*;
        users
            .par_iter()
            .map_init(
                || Scratch::new(self.table.n_users(), self.table.n_items),
                |s, &u| self.predict_with(u, k, s),
            )
            .collect()
    }
}

pub fn tifuknn_predict(model: &TifuknnModel, user: usize, k: usize) -> Vec<ItemId> {
    model.predict(user, k)
}

/// Value lists of a TIFUKNN grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TifuknnGrid {
    pub k_neighbors: Vec<usize>,
    pub m_groups: Vec<usize>,
    pub r_b: Vec<f64>,
    pub r_g: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for TifuknnGrid {
    fn default() -> Self {
        let tenths = |from: u32| (from..=10).map(|x| x as f64 / 10.0).collect::<Vec<_>>();
        TifuknnGrid {
            k_neighbors: vec![100, 300, 500, 900, 1100, 1300],
            m_groups: vec![3, 7, 11, 15, 19, 23],
            r_b: tenths(1),
            r_g: tenths(1),
            alpha: tenths(0),
        }
    }
}

impl TifuknnGrid {
    /// All configurations in grid order (k, m, r_b, r_g, alpha; last fastest).
    pub fn configs(&self) -> Vec<TifuknnParams> {
        let mut out = Vec::new();
        for &k_neighbors in &self.k_neighbors {
            for &m_groups in &self.m_groups {
                for &r_b in &self.r_b {
                    for &r_g in &self.r_g {
                        for &alpha in &self.alpha {
                            out.push(TifuknnParams {
                                k_neighbors,
                                m_groups,
                                r_b,
                                r_g,
                                alpha,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.configs().is_empty()
    }
}

/// Scores every grid configuration. `score` receives the baskets of `users`
/// in order; results follow [`TifuknnGrid::configs`] order. PIF tables and
/// neighbour lists are shared across the neighbour counts and fusion
/// weights that do not affect them.
pub fn tifuknn_grid<F>(train: &Dataset, users: &[usize], grid: &TifuknnGrid, basket_k: usize, score: F) -> Result<Vec<(TifuknnParams, f64)>>
where
    F: Fn(&[Vec<ItemId>]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(Error::InvalidParameter("empty TIFUKNN grid".into()));
    }
    for p in &configs {
        p.validate()?;
    }
    let mut ks: Vec<(usize, usize)> = grid.k_neighbors.iter().copied().enumerate().map(|(i, k)| (k, i)).collect();
    ks.sort();
    let sorted_ks: Vec<usize> = ks.iter().map(|(k, _)| *k).collect();
    let histories: Vec<LocalHistory> = train.users.iter().map(|u| LocalHistory::new(&u.baskets)).collect();
    let n_items = train.catalog.len();
    let na = grid.alpha.len();

    // results[(m, r_b, r_g)][k_sorted][alpha]
    let mut inner: Vec<Vec<f64>> = Vec::new();
    for &m in &grid.m_groups {
        for &r_b in &grid.r_b {
            for &r_g in &grid.r_g {
                let table = PifTable::build(&histories, n_items, m, r_b, r_g);
                let per_user: Vec<Vec<Vec<ItemId>>> = users
                    .par_iter()
                    .map_init(
                        || Scratch::new(table.n_users(), n_items),
                        |s, &u| table.predict_multi(u, &sorted_ks, &grid.alpha, basket_k, s),
                    )
                    .collect();
                let mut cell = vec![0.0; sorted_ks.len() * na];
                for (c, v) in cell.iter_mut().enumerate() {
                    let baskets: Vec<Vec<ItemId>> = per_user.iter().map(|p| p[c].clone()).collect();
                    *v = score(&baskets);
                }
                inner.push(cell);
            }
        }
    }

    let mut out = Vec::with_capacity(configs.len());
    let n_rg = grid.r_g.len();
    let n_rb = grid.r_b.len();
    for (ki_orig, &k_neighbors) in grid.k_neighbors.iter().enumerate() {
        let ki = ks.iter().position(|&(_, i)| i == ki_orig).expect("k index present");
        for (mi, &m_groups) in grid.m_groups.iter().enumerate() {
            for (bi, &r_b) in grid.r_b.iter().enumerate() {
                for (gi, &r_g) in grid.r_g.iter().enumerate() {
                    let cell = &inner[(mi * n_rb + bi) * n_rg + gi];
                    for (ai, &alpha) in grid.alpha.iter().enumerate() {
                        out.push((
                            TifuknnParams {
                                k_neighbors,
                                m_groups,
                                r_b,
                                r_g,
                                alpha,
                            },
                            cell[ki * na + ai],
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn corpus(users: Vec<Vec<Vec<&str>>>) -> Dataset {
        let mut cats = HashMap::new();
        for b in users.iter().flatten().flatten() {
            cats.insert(b.to_string(), "c".to_string());
        }
        Dataset::from_named(users.into_iter().enumerate().map(|(n, b)| (format!("u{n}"), b)), &cats).unwrap()
    }

    #[test]
    fn earliest_group_is_shorter() {
        assert_eq!(group_sizes(7, 3), vec![2, 2, 3]);
        assert_eq!(group_sizes(8, 3), vec![2, 3, 3]);
        assert_eq!(group_sizes(2, 5), vec![1, 1]);
        assert_eq!(group_sizes(6, 3), vec![2, 2, 2]);
    }

    #[test]
    fn no_decay_single_group_is_frequency() {
        let d = corpus(vec![vec![vec!["a", "b"], vec!["a"], vec!["a", "c"]]]);
        let p = pif(&d.users[0].baskets, 1, 1.0, 1.0);
        let a = d.catalog.lookup("a").unwrap();
        let b = d.catalog.lookup("b").unwrap();
        assert!((p.get(a) - 1.0).abs() < 1e-12);
        assert!((p.get(b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hand_decay() {
        // groups of sizes [1, 2]: {a}, then {a,b},{b}
        let d = corpus(vec![vec![vec!["a"], vec!["a", "b"], vec!["b"]]]);
        let (rb, rg) = (0.5, 0.4);
        let p = pif(&d.users[0].baskets, 2, rb, rg);
        let a = d.catalog.lookup("a").unwrap();
        let b = d.catalog.lookup("b").unwrap();
        let g1_a = 1.0;
        let g2_a = rb / 2.0;
        let g2_b = (rb + 1.0) / 2.0;
        assert!((p.get(a) - (rg * g1_a + g2_a) / 2.0).abs() < 1e-12);
        assert!((p.get(b) - g2_b / 2.0).abs() < 1e-12);
    }

    #[test]
    fn pure_own_ignores_neighbours() {
        let d = corpus(vec![
            vec![vec!["a", "b"], vec!["a"]],
            vec![vec!["c"], vec!["c", "d"]],
            vec![vec!["d"], vec!["e"]],
        ]);
        let params = TifuknnParams {
            k_neighbors: 2,
            m_groups: 1,
            r_b: 1.0,
            r_g: 1.0,
            alpha: 1.0,
        };
        let m = tifuknn_fit(&d, params).unwrap();
        let names: Vec<&str> = m.predict(0, 5).iter().map(|i| d.catalog.name(*i)).collect();
        assert_eq!(names, vec!["a", "b"]);
    }

    #[test]
    fn single_neighbour_alpha_zero() {
        let d = corpus(vec![
            vec![vec!["a"], vec!["a"]],
            vec![vec!["a", "b"], vec!["b", "c"]],
            vec![vec!["x", "y"], vec!["y", "z"]],
        ]);
        let params = TifuknnParams {
            k_neighbors: 1,
            m_groups: 1,
            r_b: 1.0,
            r_g: 1.0,
            alpha: 0.0,
        };
        let m = tifuknn_fit(&d, params).unwrap();
        assert_eq!(m.neighbors(0), vec![1]);
        let names: Vec<&str> = m.predict(0, 2).iter().map(|i| d.catalog.name(*i)).collect();
        // neighbour PIF: a 0.5, b 1.0, c 0.5
        assert_eq!(names, vec!["b", "a"]);
    }

    #[test]
    fn grid_matches_direct_fit() {
        let cfg = crate::corpus::SynthConfig {
            n_users: 40,
            n_items: 60,
            ..Default::default()
        };
        let d = crate::corpus::synth_generate(&cfg).unwrap();
        let grid = TifuknnGrid {
            k_neighbors: vec![30, 5, 100],
            m_groups: vec![2, 5],
            r_b: vec![0.5, 1.0],
            r_g: vec![0.7],
            alpha: vec![0.0, 0.3, 1.0],
        };
        let users: Vec<usize> = (0..10).collect();
        let fingerprint = |b: &[Vec<ItemId>]| {
            b.iter()
                .flatten()
                .enumerate()
                .map(|(n, i)| ((n as f64 + 1.0) * (i.0 as f64 + 1.0)).sqrt())
                .sum::<f64>()
        };
        let results = tifuknn_grid(&d, &users, &grid, 5, fingerprint).unwrap();
        assert_eq!(results.len(), grid.configs().len());
        for (params, value) in results {
            let m = tifuknn_fit(&d, params).unwrap();
            let direct = m.predict_all(&users, 5);
            assert_eq!(fingerprint(&direct), value, "{params:?}");
        }
    }
}
