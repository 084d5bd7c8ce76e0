//! TREx invariants checked on a synthetic corpus.

use std::collections::{BTreeSet, HashMap};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use nbr_core::baselines::p_topfreq;
use nbr_core::corpus::{repeat_explore_sets, split, synth_generate, ItemId, SplitDataset, SynthConfig};
use nbr_core::metrics::GroupAssignment;
use nbr_core::trex::{
    explore_fairness, fit_repetition, recommend_all, repeat_only, repetition_scores, user_interest,
    ExplorationPolicy, RepetitionParams,
};
use nbr_core::Provenance;

pub const K: usize = 10;

pub fn synth_split(seed: u64) -> SplitDataset {
    let cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    split(synth_generate(&cfg).unwrap(), seed).unwrap()
}

fn all_users(s: &SplitDataset) -> Vec<usize> {
    (0..s.train.n_users()).collect()
}

fn groups(s: &SplitDataset) -> GroupAssignment {
    GroupAssignment::from_counts(&s.train.item_basket_counts(), 0.2)
}

fn params(alpha: f64, beta: f64, features: bool) -> RepetitionParams {
    RepetitionParams {
        alpha,
        beta,
        rep_feature_enabled: features,
    }
}

/// Score levels spanning the corpus, used as thresholds.
fn thresholds(s: &SplitDataset, p: RepetitionParams) -> Vec<f64> {
    let model = fit_repetition(&s.train, p).unwrap();
    let mut all: Vec<f64> = s
        .train
        .users
        .iter()
        .flat_map(|u| repetition_scores(&model, &u.baskets).ranked().iter().map(|(_, x)| *x).collect::<Vec<_>>())
        .collect();
    all.sort_by(f64::total_cmp);
    let mut v: Vec<f64> = (0..=10).map(|q| all[(all.len() - 1) * q / 10]).collect();
    v.insert(0, 0.0);
    v.push(f64::INFINITY);
    v
}

/// Raising `v` never adds repeat items: the repeat part at a higher
/// threshold is a prefix of the repeat part at a lower one.
pub fn threshold_monotonicity(s: &SplitDataset) -> Result<(), String> {
    let p = params(0.5, 0.9, true);
    let model = fit_repetition(&s.train, p).unwrap();
    let policy = ExplorationPolicy::diversity(&s.train);
    let users = all_users(s);
    let mut prev: Option<Vec<Vec<ItemId>>> = None;
    for v in thresholds(s, p) {
        let recs = recommend_all(&model, &policy, &s.train, &users, v, K);
        let rep: Vec<Vec<ItemId>> = recs
            .iter()
            .map(|r| {
                r.items
                    .iter()
                    .zip(&r.provenance)
                    .filter(|(_, p)| **p == Provenance::Repeat)
                    .map(|(i, _)| *i)
                    .collect()
            })
            .collect();
        if let Some(prev) = &prev {
            for (u, (lo, hi)) in prev.iter().zip(&rep).enumerate() {
                if hi.len() > lo.len() || lo[..hi.len()] != hi[..] {
                    return Err(format!("user {u} at v = {v}: {hi:?} is not a prefix of {lo:?}"));
                }
            }
        }
        prev = Some(rep);
    }
    Ok(())
}

/// Repetition scores equal interest times the repurchase feature, both
/// recomputed here from their definitions.
pub fn score_decomposition(s: &SplitDataset) -> Result<(), String> {
    for (alpha, beta) in [(0.0, 1.0), (0.3, 0.8), (1.0, 0.95)] {
        let model = fit_repetition(&s.train, params(alpha, beta, true)).unwrap();
        let mut sum: HashMap<ItemId, f64> = HashMap::new();
        let mut buyers: HashMap<ItemId, f64> = HashMap::new();
        for u in &s.train.users {
            let mut freq: HashMap<ItemId, u32> = HashMap::new();
            for b in &u.baskets {
                for i in b {
                    *freq.entry(*i).or_default() += 1;
                }
            }
            for (i, f) in freq {
                let x = if f == 1 { 0.0 } else { ((f - 1) as f64).powf(alpha) };
                *sum.entry(i).or_default() += x;
                *buyers.entry(i).or_default() += 1.0;
            }
        }
        let rep_f: HashMap<ItemId, f64> = sum.iter().map(|(i, x)| (*i, x / buyers[i])).collect();
        let mean = rep_f.values().sum::<f64>() / rep_f.len() as f64;
        for u in &s.train.users {
            let t = u.baskets.len();
            let scores = repetition_scores(&model, &u.baskets);
            let items: BTreeSet<ItemId> = u.baskets.iter().flatten().copied().collect();
            if scores.len() != items.len() {
                return Err(format!("{}: {} scores for {} repeat items", u.user_id, scores.len(), items.len()));
            }
            for i in items {
                let interest: f64 = (1..=t)
                    .filter(|l| u.baskets[l - 1].contains(&i))
                    .map(|l| beta.powi((t - l) as i32))
                    .sum();
                let feature = rep_f[&i] + mean / buyers[&i];
                let want = interest * feature;
                let got = scores.get(i).unwrap();
                let e = user_interest(&u.baskets, beta, i).unwrap();
                if (got - want).abs() > 1e-9 * want.max(1.0) || (e - interest).abs() > 1e-9 * interest.max(1.0) {
                    return Err(format!("{} item {}: score {got} vs {want}", u.user_id, i.0));
                }
            }
        }
    }
    Ok(())
}

/// With beta = 1 and the repurchase feature off, the repeat ranking is the
/// personal frequency ranking.
pub fn ptopfreq_equivalence(s: &SplitDataset) -> Result<(), String> {
    for alpha in [0.0, 0.5, 1.0] {
        let model = fit_repetition(&s.train, params(alpha, 1.0, false)).unwrap();
        for u in &s.train.users {
            let scores = repetition_scores(&model, &u.baskets);
            let trex = repeat_only(&u.user_id, &scores, K).items;
            let ptf = p_topfreq(&u.baskets, K);
            if trex != ptf {
                return Err(format!("{}: {trex:?} vs {ptf:?}", u.user_id));
            }
        }
    }
    Ok(())
}

/// Diversity exploration takes items whose category is new to the basket
/// first; an explore item repeats a category only once no unpicked
/// candidate with a new category is left.
pub fn diversity_novelty(s: &SplitDataset) -> Result<(), String> {
    let p = params(0.5, 0.9, true);
    let model = fit_repetition(&s.train, p).unwrap();
    let policy = ExplorationPolicy::diversity(&s.train);
    let catalog = &s.train.catalog;
    let users = all_users(s);
    let mut explored = 0;
    for v in thresholds(s, p) {
        for (r, &u) in recommend_all(&model, &policy, &s.train, &users, v, K).iter().zip(&users) {
            let sets = repeat_explore_sets(s.history(u), catalog);
            let cats: BTreeSet<_> = r.items.iter().map(|i| catalog.category(*i)).collect();
            let mut duplicate = false;
            for (j, (item, prov)) in r.items.iter().zip(&r.provenance).enumerate() {
                if *prov != Provenance::Explore {
                    continue;
                }
                explored += 1;
                if !sets.is_explore(*item) {
                    return Err(format!("{}: explore item {} was bought before", r.user_id, item.0));
                }
                let c = catalog.category(*item);
                if r.items[..j].iter().any(|i| catalog.category(*i) == c) {
                    duplicate = true;
                }
            }
            if duplicate {
                let missed = sets
                    .expl()
                    .find(|i| !r.items.contains(i) && !cats.contains(&catalog.category(*i)));
                if let Some(i) = missed {
                    return Err(format!("{}: repeated a category while item {} was new", r.user_id, i.0));
                }
            }
        }
    }
    if explored == 0 {
        return Err("no exploration happened".into());
    }
    Ok(())
}

/// Fairness exploration takes only unpopular items unless every eligible
/// unpopular candidate is already in the basket.
pub fn fairness_membership(s: &SplitDataset) -> Result<(), String> {
    let p = params(0.5, 0.9, true);
    let model = fit_repetition(&s.train, p).unwrap();
    let g = groups(s);
    let counts = s.train.item_basket_counts();
    let policy = ExplorationPolicy::fairness(&s.train, g.clone(), 11);
    let users = all_users(s);
    let mut explored = 0;
    for v in thresholds(s, p) {
        for (r, &u) in recommend_all(&model, &policy, &s.train, &users, v, K).iter().zip(&users) {
            let sets = repeat_explore_sets(s.history(u), &s.train.catalog);
            let explore: Vec<ItemId> = r
                .items
                .iter()
                .zip(&r.provenance)
                .filter(|(_, p)| **p == Provenance::Explore)
                .map(|(i, _)| *i)
                .collect();
            explored += explore.len();
            if explore.iter().all(|i| !g.is_popular(*i) && counts[i.index()] > 0) {
                continue;
            }
            let left = sets
                .expl()
                .find(|i| !g.is_popular(*i) && counts[i.index()] > 0 && !r.items.contains(i));
            if let Some(i) = left {
                return Err(format!("{}: popular fill while item {} was eligible", r.user_id, i.0));
            }
        }
    }
    if explored == 0 {
        return Err("no exploration happened".into());
    }
    Ok(())
}

/// Pearson χ² goodness of fit of `draws` single fairness draws against
/// probabilities proportional to training frequency. Returns the p-value.
pub fn sampling_law(s: &SplitDataset, draws: usize) -> f64 {
    let g = groups(s);
    let counts = s.train.item_basket_counts();
    let policy = ExplorationPolicy::fairness(&s.train, g.clone(), 5);
    let u = 0;
    let sets = repeat_explore_sets(s.history(u), &s.train.catalog);
    let eligible: Vec<ItemId> = sets.expl().filter(|i| !g.is_popular(*i) && counts[i.index()] > 0).collect();
    let total: f64 = eligible.iter().map(|i| counts[i.index()] as f64).sum();
    let mut observed: HashMap<ItemId, f64> = HashMap::new();
    for d in 0..draws {
        let got = explore_fairness(&sets, &policy, &[], &format!("draw-{d}"), 1);
        *observed.entry(got[0]).or_default() += 1.0;
    }
    let mut bins: Vec<(f64, f64)> = eligible
        .iter()
        .map(|i| {
            (
                draws as f64 * counts[i.index()] as f64 / total,
                observed.get(i).copied().unwrap_or(0.0),
            )
        })
        .collect();
    let stray: f64 = observed.iter().filter(|(i, _)| !eligible.contains(i)).map(|(_, c)| c).sum();
    if stray > 0.0 {
        return 0.0;
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in bins {
        acc = (acc.0 + e, acc.1 + o);
        if acc.0 >= 5.0 {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 {
        match merged.last_mut() {
            Some(last) => *last = (last.0 + acc.0, last.1 + acc.1),
            None => merged.push(acc),
        }
    }
    let stat: f64 = merged.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let df = (merged.len() - 1) as f64;
    ChiSquared::new(df).unwrap().sf(stat)
}
