//! Recency-aware user-wise popularity with user-wise collaborative filtering.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Basket, Dataset, ItemId};
use crate::error::{Error, Result};
use crate::util::top_k;

/// How many of the most recent baskets count towards user-wise popularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Recency {
    Window(usize),
    All,
}

impl Recency {
    fn window(self, t: usize) -> usize {
        match self {
            Recency::Window(r) => r.min(t),
            Recency::All => t,
        }
    }
}

impl fmt::Display for Recency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recency::Window(r) => write!(f, "{r}"),
            Recency::All => f.write_str("inf"),
        }
    }
}

impl Serialize for Recency {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Recency::Window(r) => s.serialize_u64(*r as u64),
            Recency::All => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Recency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(u64),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(0) => Err(serde::de::Error::custom("recency window must be positive")),
            Repr::N(n) => Ok(Recency::Window(n as usize)),
            Repr::S(s) if s == "inf" || s == "all" => Ok(Recency::All),
            Repr::S(s) => Err(serde::de::Error::custom(format!("invalid recency {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpcfParams {
    pub recency: Recency,
    /// Exponent applied to similarities.
    pub locality: f64,
    /// Weight of the query user's set size in the similarity denominator.
    pub asymmetry: f64,
}

impl Default for UpcfParams {
    fn default() -> Self {
        UpcfParams {
            recency: Recency::Window(5),
            locality: 10.0,
            asymmetry: 0.25,
        }
    }
}

impl UpcfParams {
    pub fn validate(&self) -> Result<()> {
        if self.recency == Recency::Window(0) {
            return Err(Error::InvalidParameter("recency window must be positive".into()));
        }
        if !(self.locality > 0.0) || !self.locality.is_finite() {
            return Err(Error::InvalidParameter(format!("locality {} must be positive", self.locality)));
        }
        if !(0.0..=1.0).contains(&self.asymmetry) {
            return Err(Error::InvalidParameter(format!("asymmetry {} outside [0, 1]", self.asymmetry)));
        }
        Ok(())
    }
}

/// Share of the last `min(r, T)` baskets containing each item.
pub fn uwp(history: &[Basket], recency: Recency) -> Vec<(ItemId, f64)> {
    let w = recency.window(history.len());
    if w == 0 {
        return Vec::new();
    }
    let mut items: Vec<ItemId> = history[history.len() - w..].iter().flatten().copied().collect();
    items.sort_unstable();
    let mut out: Vec<(ItemId, f64)> = Vec::new();
    for i in items {
        match out.last_mut() {
            Some((last, c)) if *last == i => *c += 1.0,
            _ => out.push((i, 1.0)),
        }
    }
    for (_, c) in &mut out {
        *c /= w as f64;
    }
    out
}

/// `|I_u ∩ I_v| / (|I_u|^ω · |I_v|^(1-ω))`.
pub fn similarity(overlap: usize, n_u: usize, n_v: usize, asymmetry: f64) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    overlap as f64 / ((n_u as f64).powf(asymmetry) * (n_v as f64).powf(1.0 - asymmetry))
}

/// Distinct item sets and an inverted index over them.
#[derive(Clone, Debug)]
struct ItemSets {
    sizes: Vec<usize>,
    sets: Vec<Vec<ItemId>>,
    index: Vec<Vec<u32>>,
}

impl ItemSets {
    fn new(train: &Dataset) -> Self {
        let sets: Vec<Vec<ItemId>> = train
            .users
            .iter()
            .map(|u| {
                let mut s: Vec<ItemId> = u.baskets.iter().flatten().copied().collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        let mut index = vec![Vec::new(); train.catalog.len()];
        for (u, s) in sets.iter().enumerate() {
            for i in s {
                index[i.index()].push(u as u32);
            }
        }
        ItemSets {
            sizes: sets.iter().map(Vec::len).collect(),
            sets,
            index,
        }
    }

    /// Users sharing at least one item with `u` (including `u`), ascending,
    /// with the overlap size.
    fn overlaps(&self, u: usize, counts: &mut Vec<u32>) -> Vec<(u32, u32)> {
        counts.clear();
        counts.resize(self.sizes.len(), 0);
        for i in &self.sets[u] {
            for &v in &self.index[i.index()] {
                counts[v as usize] += 1;
            }
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(v, c)| (v as u32, *c))
            .collect()
    }
}

/// UWP rows in compressed form: per user the item ids and basket counts
/// within the window, and the window length.
#[derive(Clone, Debug)]
struct UwpTable {
    offsets: Vec<usize>,
    items: Vec<u32>,
    counts: Vec<f64>,
    windows: Vec<f64>,
}

impl UwpTable {
    fn new(train: &Dataset, recency: Recency) -> Self {
        let mut offsets = vec![0];
        let mut items = Vec::new();
        let mut counts = Vec::new();
        let mut windows = Vec::new();
        for u in &train.users {
            let w = recency.window(u.baskets.len());
            for (i, p) in uwp(&u.baskets, recency) {
                items.push(i.0);
                counts.push((p * w as f64).round());
            }
            offsets.push(items.len());
            windows.push(w as f64);
        }
        UwpTable {
            offsets,
            items,
            counts,
            windows,
        }
    }

    fn row(&self, v: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[v]..self.offsets[v + 1];
        (&self.items[r.clone()], &self.counts[r])
    }
}

/// Number of queries scored together per pass over the UWP table.
const BLOCK: usize = 8;

/// Scores up to [`BLOCK`] users at once. Each lane accumulates
/// `(w_v / window_v) · count_v(i)` over `v` in ascending order, so a lane's
/// result does not depend on which other users share its block.
struct BlockAccumulator {
    acc: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<u32>,
    weights: Vec<f64>,
}

impl BlockAccumulator {
    fn new(n_items: usize, n_users: usize) -> Self {
        BlockAccumulator {
            acc: vec![0.0; n_items * BLOCK],
            seen: vec![false; n_items],
            touched: Vec::new(),
            weights: vec![0.0; n_users * BLOCK],
        }
    }

    /// `lanes[b]` holds `(v, sim^q)` pairs of query `b`.
    fn baskets(&mut self, lanes: &[Vec<(u32, f64)>], table: &UwpTable, k: usize) -> Vec<Vec<ItemId>> {
        debug_assert!(lanes.len() <= BLOCK);
        for &t in &self.touched {
            self.acc[t as usize * BLOCK..(t as usize + 1) * BLOCK].fill(0.0);
            self.seen[t as usize] = false;
        }
        self.touched.clear();
        self.weights.fill(0.0);
        for (b, lane) in lanes.iter().enumerate() {
            for &(v, w) in lane {
                self.weights[v as usize * BLOCK + b] = w;
            }
        }
        let mut scaled = [0.0f64; BLOCK];
        for v in 0..table.windows.len() {
            let w = &self.weights[v * BLOCK..(v + 1) * BLOCK];
            if w.iter().all(|x| *x == 0.0) {
                continue;
            }
            for b in 0..BLOCK {
                scaled[b] = w[b] / table.windows[v];
            }
            let (items, counts) = table.row(v);
            for (&i, &c) in items.iter().zip(counts) {
                if !self.seen[i as usize] {
                    self.seen[i as usize] = true;
                    self.touched.push(i);
                }
                let slot = &mut self.acc[i as usize * BLOCK..(i as usize + 1) * BLOCK];
                for b in 0..BLOCK {
                    slot[b] += scaled[b] * c;
                }
            }
        }
        (0..lanes.len())
            .map(|b| {
                let scored: Vec<(ItemId, f64)> = self
                    .touched
                    .iter()
                    .map(|&i| (ItemId(i), self.acc[i as usize * BLOCK + b]))
                    .filter(|(_, s)| *s > 0.0)
                    .collect();
                top_k(scored, k)
            })
            .collect()
    }
}

fn weights(overlaps: &[(u32, u32)], sets: &ItemSets, u: usize, params: &UpcfParams) -> Vec<(u32, f64)> {
    overlaps
        .iter()
        .map(|&(v, c)| {
            let sim = similarity(c as usize, sets.sizes[u], sets.sizes[v as usize], params.asymmetry);
            (v, sim.powf(params.locality))
        })
        .collect()
}

/// Baskets for `users`, scored in blocks.
fn predict_blocked(
    users: &[usize],
    lane_weights: impl Fn(usize, usize) -> Vec<(u32, f64)> + Sync,
    table: &UwpTable,
    n_items: usize,
    k: usize,
) -> Vec<Vec<ItemId>> {
    use rayon::prelude::*;
    let n_users = table.windows.len();
    let chunks: Vec<(usize, &[usize])> = users.chunks(BLOCK).enumerate().map(|(c, b)| (c * BLOCK, b)).collect();
    chunks
        .par_iter()
        .map_init(
            || BlockAccumulator::new(n_items, n_users),
            |acc, &(start, block)| {
                let lanes: Vec<Vec<(u32, f64)>> =
                    block.iter().enumerate().map(|(b, &u)| lane_weights(start + b, u)).collect();
                acc.baskets(&lanes, table, k)
            },
        )
        .flatten()
        .collect()
}

#[derive(Clone, Debug)]
pub struct UpcfModel {
    pub params: UpcfParams,
    sets: ItemSets,
    uwp: Vec<Vec<(ItemId, f64)>>,
    table: UwpTable,
    n_items: usize,
}

pub fn upcf_fit(train: &Dataset, params: UpcfParams) -> Result<UpcfModel> {
    params.validate()?;
    Ok(UpcfModel {
        params,
        sets: ItemSets::new(train),
        uwp: train.users.iter().map(|u| uwp(&u.baskets, params.recency)).collect(),
        table: UwpTable::new(train, params.recency),
        n_items: train.catalog.len(),
    })
}

impl UpcfModel {
    pub fn uwp(&self, user: usize) -> &[(ItemId, f64)] {
        &self.uwp[user]
    }

    pub fn similarity(&self, u: usize, v: usize) -> f64 {
        let (a, b) = (&self.sets.sets[u], &self.sets.sets[v]);
        let overlap = a.iter().filter(|i| b.binary_search(i).is_ok()).count();
        similarity(overlap, a.len(), b.len(), self.params.asymmetry)
    }

    /// `Σ_v sim(u, v)^q · UWP(v, i)` over all users, `u` included, as a
    /// ranked basket.
    pub fn predict(&self, user: usize, k: usize) -> Vec<ItemId> {
        self.predict_all(&[user], k).pop().unwrap_or_default()
    }

    pub fn predict_all(&self, users: &[usize], k: usize) -> Vec<Vec<ItemId>> {
        let lane = |_: usize, u: usize| {
            let overlaps = self.sets.overlaps(u, &mut Vec::new());
            weights(&overlaps, &self.sets, u, &self.params)
        };
        predict_blocked(users, lane, &self.table, self.n_items, k)
    }
}

pub fn upcf_predict(model: &UpcfModel, user: usize, k: usize) -> Vec<ItemId> {
    model.predict(user, k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpcfGrid {
    pub recency: Vec<Recency>,
    pub locality: Vec<f64>,
    pub asymmetry: Vec<f64>,
}

impl Default for UpcfGrid {
    fn default() -> Self {
        UpcfGrid {
            recency: vec![
                Recency::Window(1),
                Recency::Window(5),
                Recency::Window(10),
                Recency::Window(25),
                Recency::Window(100),
                Recency::All,
            ],
            locality: vec![1.0, 5.0, 10.0, 50.0, 100.0, 1000.0],
            asymmetry: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl UpcfGrid {
    /// All configurations in grid order (recency, locality, asymmetry; last
    /// fastest).
    pub fn configs(&self) -> Vec<UpcfParams> {
        let mut out = Vec::new();
        for &recency in &self.recency {
            for &locality in &self.locality {
                for &asymmetry in &self.asymmetry {
                    out.push(UpcfParams {
                        recency,
                        locality,
                        asymmetry,
                    });
                }
            }
        }
        out
    }
}

/// Scores every grid configuration, sharing overlap counts across the grid.
/// Results follow [`UpcfGrid::configs`] order.
pub fn upcf_grid<F>(train: &Dataset, users: &[usize], grid: &UpcfGrid, basket_k: usize, score: F) -> Result<Vec<(UpcfParams, f64)>>
where
    F: Fn(&[Vec<ItemId>]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(Error::InvalidParameter("empty UP-CF@r grid".into()));
    }
    for p in &configs {
        p.validate()?;
    }
    let sets = ItemSets::new(train);
    let overlaps: Vec<Vec<(u32, u32)>> = users
        .par_iter()
        .map_init(Vec::new, |counts, &u| sets.overlaps(u, counts))
        .collect();
    let n_items = train.catalog.len();
    let mut out = Vec::with_capacity(configs.len());
    for &recency in &grid.recency {
        let table = UwpTable::new(train, recency);
        for &locality in &grid.locality {
            for &asymmetry in &grid.asymmetry {
                let params = UpcfParams {
                    recency,
                    locality,
                    asymmetry,
                };
                let lane = |pos: usize, u: usize| weights(&overlaps[pos], &sets, u, &params);
                let baskets = predict_blocked(users, lane, &table, n_items, basket_k);
                out.push((params, score(&baskets)));
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

    fn toy() -> Dataset {
        corpus(vec![
            vec![vec!["a", "b"], vec!["a"], vec!["c"]],
            vec![vec!["a", "d"], vec!["d"]],
            vec![vec!["b", "c", "e"], vec!["e"], vec!["e", "a"]],
        ])
    }

    #[test]
    fn last_basket_window() {
        let d = toy();
        let w = uwp(&d.users[0].baskets, Recency::Window(1));
        assert_eq!(w, vec![(d.catalog.lookup("c").unwrap(), 1.0)]);
        let all = uwp(&d.users[0].baskets, Recency::All);
        assert_eq!(all[0], (d.catalog.lookup("a").unwrap(), 2.0 / 3.0));
    }

    #[test]
    fn self_similarity_is_one() {
        let d = toy();
        for omega in [0.0, 0.3, 1.0] {
            let m = upcf_fit(
                &d,
                UpcfParams {
                    recency: Recency::All,
                    locality: 2.0,
                    asymmetry: omega,
                },
            )
            .unwrap();
            assert!((m.similarity(2, 2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_only_at_half() {
        let d = toy();
        let fit = |omega| {
            upcf_fit(
                &d,
                UpcfParams {
                    recency: Recency::All,
                    locality: 1.0,
                    asymmetry: omega,
                },
            )
            .unwrap()
        };
        let half = fit(0.5);
        assert!((half.similarity(0, 2) - half.similarity(2, 0)).abs() < 1e-12);
        let skew = fit(0.0);
        assert!((skew.similarity(0, 2) - skew.similarity(2, 0)).abs() > 1e-6);
    }

    #[test]
    fn brute_force_scores() {
        let d = toy();
        let params = UpcfParams {
            recency: Recency::Window(2),
            locality: 3.0,
            asymmetry: 0.25,
        };
        let m = upcf_fit(&d, params).unwrap();
        for u in 0..3 {
            let mut scores: Vec<(ItemId, f64)> = Vec::new();
            for i in d.catalog.items() {
                let mut s = 0.0;
                for v in 0..3 {
                    let p = m.uwp(v).iter().find(|(j, _)| *j == i).map_or(0.0, |(_, p)| *p);
                    s += m.similarity(u, v).powf(3.0) * p;
                }
                if s > 0.0 {
                    scores.push((i, s));
                }
            }
            let want = top_k(scores, 3);
            assert_eq!(m.predict(u, 3), want);
        }
    }

    #[test]
    fn grid_matches_direct_fit() {
        let d = toy();
        let grid = UpcfGrid {
            recency: vec![Recency::Window(1), Recency::All],
            locality: vec![1.0, 50.0],
            asymmetry: vec![0.0, 0.75],
        };
        let users = [0, 2];
        let fp = |b: &[Vec<ItemId>]| b.iter().flatten().enumerate().map(|(n, i)| (n + 1) as f64 * (i.0 + 1) as f64).sum::<f64>();
        for (params, value) in upcf_grid(&d, &users, &grid, 2, fp).unwrap() {
            let m = upcf_fit(&d, params).unwrap();
            assert_eq!(fp(&m.predict_all(&users, 2)), value);
        }
    }

    #[test]
    fn recency_serde() {
        let p: UpcfParams = serde_json::from_str(r#"{"recency":"inf","locality":5,"asymmetry":0.5}"#).unwrap();
        assert_eq!(p.recency, Recency::All);
        assert_eq!(serde_json::to_string(&Recency::Window(25)).unwrap(), "25");
        assert!(serde_json::from_str::<Recency>("0").is_err());
    }
}
