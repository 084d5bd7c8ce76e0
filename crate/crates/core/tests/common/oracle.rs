//! Direct-definition metric implementations and random small instances.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbr_core::corpus::{Catalog, Dataset, Fold, ItemId, SplitDataset, UserRecord};
use nbr_core::metrics::{evaluate, EvalConfig, ExposureModel, GroupAssignment};
use nbr_core::recommendation::Recommendation;

pub struct Instance {
    pub split: SplitDataset,
    pub groups: GroupAssignment,
    pub recs: Vec<Recommendation>,
    pub k: usize,
    /// Category index per item.
    pub category: Vec<usize>,
    pub popular: Vec<bool>,
}

fn subset(rng: &mut ChaCha8Rng, n: usize, min: usize, max: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    let size = rng.gen_range(min..=max.min(n));
    all.truncate(size);
    all
}

/// Catalog of at most 12 items in at most 4 categories, up to 6 users, cutoff
/// at most 5, and a random two-way group split.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n_items = rng.gen_range(2..=12);
    let n_cats = rng.gen_range(1..=4);
    let category: Vec<usize> = (0..n_items).map(|_| rng.gen_range(0..n_cats)).collect();
    let catalog = Catalog::new((0..n_items).map(|i| (format!("i{i:02}"), format!("c{}", category[i])))).unwrap();
    let catalog = Arc::new(catalog);
    let k = rng.gen_range(1..=5);
    let n_users = rng.gen_range(1..=6);
    let mut users = Vec::new();
    let mut targets = Vec::new();
    let mut recs = Vec::new();
    for u in 0..n_users {
        let user_id = format!("u{u}");
        let n_baskets = rng.gen_range(1..=3);
        let baskets: Vec<Vec<ItemId>> = (0..n_baskets)
            .map(|_| subset(rng, n_items, 1, 4).into_iter().map(|i| ItemId(i as u32)).collect())
            .collect();
        let history: HashSet<ItemId> = baskets.iter().flatten().copied().collect();
        let min_target = usize::from(!rng.gen_bool(0.1));
        let mut target: Vec<ItemId> = subset(rng, n_items, min_target, 6).into_iter().map(|i| ItemId(i as u32)).collect();
        target.sort_unstable();
        if !rng.gen_bool(0.1) {
            let items: Vec<ItemId> = subset(rng, n_items, 0, k + 1).into_iter().map(|i| ItemId(i as u32)).collect();
            recs.push(Recommendation::labelled(user_id.clone(), items, &history));
        }
        users.push(UserRecord { user_id, baskets });
        targets.push(target);
    }
    let popular: Vec<bool> = (0..n_items).map(|_| rng.gen_bool(0.3)).collect();
    let train = Dataset::new(users, catalog).unwrap();
    Instance {
        split: SplitDataset {
            train,
            folds: vec![Fold::Test; n_users],
            targets,
            seed: 0,
        },
        groups: GroupAssignment::from_popular_flags(popular.clone()),
        recs,
        k,
        category,
        popular,
    }
}

fn permutations(items: &[ItemId]) -> Vec<Vec<ItemId>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Ordered selections of `len` distinct items from `pool`.
fn arrangements(pool: &[ItemId], len: usize) -> Vec<Vec<ItemId>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in pool.iter().enumerate() {
        let mut rest = pool.to_vec();
        rest.remove(i);
        for mut a in arrangements(&rest, len - 1) {
            a.insert(0, first);
            out.push(a);
        }
    }
    out
}

fn cascade(list: &[ItemId], target: &[ItemId], gamma: f64, stop: f64) -> Vec<f64> {
    (0..list.len())
        .map(|j| {
            let mut a = gamma.powi(j as i32);
            for l in &list[..j] {
                if target.contains(l) {
                    a *= 1.0 - stop;
                }
            }
            a
        })
        .collect()
}

fn group_exposure(list: &[ItemId], weights: &[f64], popular: &[bool]) -> [f64; 2] {
    let mut e = [0.0; 2];
    for (item, w) in list.iter().zip(weights) {
        e[usize::from(!popular[item.index()])] += w;
    }
    e
}

/// Mean group exposure over every ranking the ideal policy can produce:
/// relevant items in any order on top, then any non-relevant items.
fn ideal_exposure(target: &[ItemId], n_items: usize, k: usize, popular: &[bool], gamma: f64, stop: f64) -> [f64; 2] {
    let nonrel: Vec<ItemId> = (0..n_items as u32).map(ItemId).filter(|i| !target.contains(i)).collect();
    let mut total = [0.0; 2];
    let mut count = 0.0;
    for head in permutations(target) {
        let head: Vec<ItemId> = head.into_iter().take(k).collect();
        let tail_len = (k - head.len()).min(nonrel.len());
        for tail in arrangements(&nonrel, tail_len) {
            let list: Vec<ItemId> = head.iter().chain(&tail).copied().collect();
            let e = group_exposure(&list, &cascade(&list, target, gamma, stop), popular);
            total[0] += e[0];
            total[1] += e[1];
            count += 1.0;
        }
    }
    [total[0] / count, total[1] / count]
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregate metrics computed straight from their definitions.
pub fn brute_force(inst: &Instance, cfg: &EvalConfig) -> BTreeMap<String, f64> {
    let k = inst.k;
    let (gamma, stop) = match cfg.fairness.expected_model {
        ExposureModel::Cascade { gamma, stop } => (gamma, stop),
        ExposureModel::LogDiscount => panic!("expected-exposure metrics need a cascade model"),
    };
    let delta = cfg.fairness.delta;
    let n_items = inst.category.len();
    let mut per: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut exposure = [0.0; 2];
    let mut utility = [0.0; 2];
    let mut click = [0.0; 2];
    for (u, user) in inst.split.train.users.iter().enumerate() {
        let target = &inst.split.targets[u];
        let predicted: Vec<ItemId> = inst
            .recs
            .iter()
            .find(|r| r.user_id == user.user_id)
            .map(|r| r.items.iter().take(k).copied().collect())
            .unwrap_or_default();
        let seen: HashSet<ItemId> = user.baskets.iter().flatten().copied().collect();
        let hit = |i: &ItemId| target.contains(i);
        let hits = predicted.iter().filter(|i| hit(i)).count() as f64;
        if !target.is_empty() {
            per.entry("recall").or_default().push(hits / target.len() as f64);
            let dcg: f64 = predicted
                .iter()
                .enumerate()
                .filter(|(_, i)| hit(i))
                .map(|(j, _)| 1.0 / (j as f64 + 2.0).log2())
                .sum();
            let idcg: f64 = (0..target.len().min(k)).map(|j| 1.0 / (j as f64 + 2.0).log2()).sum();
            per.entry("ndcg").or_default().push(dcg / idcg);
            per.entry("phr").or_default().push(if hits > 0.0 { 1.0 } else { 0.0 });
        }
        for (name, phr, want_seen) in [("recall_rep", "phr_rep", true), ("recall_expl", "phr_expl", false)] {
            let part: Vec<&ItemId> = target.iter().filter(|i| seen.contains(i) == want_seen).collect();
            if !part.is_empty() {
                let h = predicted.iter().filter(|i| part.contains(i)).count() as f64;
                per.entry(name).or_default().push(h / part.len() as f64);
                per.entry(phr).or_default().push(if h > 0.0 { 1.0 } else { 0.0 });
            }
        }

        let cas = cascade(&predicted, target, gamma, stop);
        let e = group_exposure(&predicted, &cas, &inst.popular);
        let ideal = ideal_exposure(target, n_items, k, &inst.popular, gamma, stop);
        per.entry("eel").or_default().push((e[0] - ideal[0]).powi(2) + (e[1] - ideal[1]).powi(2));
        per.entry("eed").or_default().push(e[0].powi(2) + e[1].powi(2));

        for (j, item) in predicted.iter().enumerate() {
            let g = usize::from(!inst.popular[item.index()]);
            let a = 1.0 / (j as f64 + 2.0).log2();
            exposure[g] += a;
            if hit(item) {
                click[g] += a;
            }
        }
        for item in target {
            utility[usize::from(!inst.popular[item.index()])] += 1.0;
        }

        if !predicted.is_empty() {
            let n = predicted.len();
            let onehot = |i: &ItemId| -> Vec<f64> {
                (0..4).map(|c| if inst.category[i.index()] == c { 1.0 } else { 0.0 }).collect()
            };
            let mut dist = 0.0;
            let mut pairs = 0.0;
            for a in 0..n {
                for b in a + 1..n {
                    let (x, y) = (onehot(&predicted[a]), onehot(&predicted[b]));
                    dist += x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                    pairs += 1.0;
                }
            }
            per.entry("ild").or_default().push(if pairs > 0.0 { dist / pairs } else { 0.0 });
            let mut counts = [0.0f64; 4];
            for i in &predicted {
                counts[inst.category[i.index()]] += 1.0;
            }
            let h: f64 = counts
                .iter()
                .filter(|c| **c > 0.0)
                .map(|c| {
                    let p = c / n as f64;
                    -p * p.log2()
                })
                .sum();
            per.entry("entropy").or_default().push(h);
            per.entry("ds").or_default().push(counts.iter().filter(|c| **c > 0.0).count() as f64 / n as f64);
        }
    }
    let mut out: BTreeMap<String, f64> = per
        .iter()
        .filter_map(|(name, v)| mean(v).map(|m| (format!("{name}@{k}"), m)))
        .collect();
    let ratio = |x: [f64; 2]| ((x[0] + delta) / (x[1] + delta)).ln();
    out.insert(format!("logdp@{k}"), ratio(exposure));
    out.insert(
        format!("logeur@{k}"),
        (((exposure[0] + delta) / (utility[0] + delta)) / ((exposure[1] + delta) / (utility[1] + delta))).ln(),
    );
    out.insert(
        format!("logrur@{k}"),
        (((click[0] + delta) / (utility[0] + delta)) / ((click[1] + delta) / (utility[1] + delta))).ln(),
    );
    out
}

pub const ORACLE_METRICS: &[&str] = &[
    "recall", "ndcg", "phr", "recall_rep", "recall_expl", "phr_rep", "phr_expl", "logdp", "logeur", "logrur", "eel",
    "eed", "ild", "entropy", "ds",
];

/// Compares `evaluate` with the direct definitions on one instance.
pub fn check_instance(inst: &Instance, tol: f64) -> Result<(), String> {
    let cfg = EvalConfig::new(inst.k);
    let users: Vec<usize> = (0..inst.split.train.n_users()).collect();
    let report = evaluate(&inst.recs, &inst.split, &users, &inst.groups, &cfg);
    let want = brute_force(inst, &cfg);
    for name in ORACLE_METRICS {
        let key = format!("{name}@{}", inst.k);
        match (report.aggregate.get(&key), want.get(&key)) {
            (Some(g), Some(w)) if (g - w).abs() <= tol => {}
            (None, None) => {}
            (g, w) => return Err(format!("{key}: evaluate {g:?}, direct {w:?}")),
        }
    }
    Ok(())
}

/// Runs `n` seeded instances; returns the first mismatch.
pub fn run_suite(n: usize, seed: u64, tol: f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..n {
        let inst = random_instance(&mut rng);
        check_instance(&inst, tol).map_err(|e| format!("instance {case}: {e}"))?;
    }
    Ok(())
}
