//! Exploration policies that fill the slots repeat items leave open.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryId, Dataset, ItemId, RepeatExploreSets};
use crate::metrics::GroupAssignment;
use crate::util::{popularity_order, user_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Fairness,
    Diversity,
    None,
}

/// Unpopular items with positive training frequency and their cumulative
/// weights, for exact integer sampling.
#[derive(Clone, Debug, PartialEq)]
struct UnpopularPool {
    items: Vec<ItemId>,
    cumulative: Vec<u64>,
    weight: Vec<u64>,
}

impl UnpopularPool {
    fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> ItemId {
        let r = rng.gen_range(0..self.total());
        let pos = self.cumulative.partition_point(|&c| c <= r);
        self.items[pos]
    }

    fn weight_of(&self, item: ItemId) -> Option<u64> {
        self.items.binary_search(&item).ok().map(|p| self.weight[p])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationPolicy {
    kind: PolicyKind,
    /// Training purchase frequency (basket occurrences) per item.
    popularity: Vec<u64>,
    /// Items by popularity descending, ties by id.
    order: Vec<ItemId>,
    categories: Option<Vec<CategoryId>>,
    groups: Option<GroupAssignment>,
    pool: Option<UnpopularPool>,
    pub seed: u64,
}

impl ExplorationPolicy {
    fn base(kind: PolicyKind, popularity: Vec<u64>, seed: u64) -> Self {
        ExplorationPolicy {
            kind,
            order: popularity_order(&popularity),
            popularity,
            categories: None,
            groups: None,
            pool: None,
            seed,
        }
    }

    /// Fills with the most popular unseen items.
    pub fn none(train: &Dataset) -> Self {
        Self::base(PolicyKind::None, train.item_basket_counts(), 0)
    }

    /// Samples unpopular items proportionally to their training frequency.
    pub fn fairness(train: &Dataset, groups: GroupAssignment, seed: u64) -> Self {
        Self::fairness_from_counts(train.item_basket_counts(), groups, seed)
    }

    pub fn fairness_from_counts(popularity: Vec<u64>, groups: GroupAssignment, seed: u64) -> Self {
        let mut policy = Self::base(PolicyKind::Fairness, popularity, seed);
        let mut items = Vec::new();
        let mut weight = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0u64;
        for (idx, &w) in policy.popularity.iter().enumerate() {
            let item = ItemId(idx as u32);
            if w > 0 && !groups.is_popular(item) {
                acc += w;
                items.push(item);
                weight.push(w);
                cumulative.push(acc);
            }
        }
        policy.pool = Some(UnpopularPool {
            items,
            cumulative,
            weight,
        });
        policy.groups = Some(groups);
        policy
    }

    /// Picks popular items from categories not yet in the basket.
    pub fn diversity(train: &Dataset) -> Self {
        Self::diversity_from_counts(
            train.item_basket_counts(),
            train.catalog.category_table().to_vec(),
        )
    }

    pub fn diversity_from_counts(popularity: Vec<u64>, categories: Vec<CategoryId>) -> Self {
        let mut policy = Self::base(PolicyKind::Diversity, popularity, 0);
        policy.categories = Some(categories);
        policy
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn popularity(&self) -> &[u64] {
        &self.popularity
    }

    pub fn groups(&self) -> Option<&GroupAssignment> {
        self.groups.as_ref()
    }

    /// Dispatches to the policy's exploration routine.
    pub fn explore(
        &self,
        candidates: &RepeatExploreSets,
        basket_so_far: &[ItemId],
        user_id: &str,
        m_slots: usize,
    ) -> Vec<ItemId> {
        match self.kind {
            PolicyKind::Fairness => explore_fairness(candidates, self, basket_so_far, user_id, m_slots),
            PolicyKind::Diversity => explore_diversity(candidates, self, basket_so_far, m_slots),
            PolicyKind::None => popularity_fill(candidates, self, basket_so_far, &[], m_slots),
        }
    }
}

/// Takes the most popular explore candidates not in `basket` or `taken`.
fn popularity_fill(
    candidates: &RepeatExploreSets,
    policy: &ExplorationPolicy,
    basket: &[ItemId],
    taken: &[ItemId],
    m_slots: usize,
) -> Vec<ItemId> {
    policy
        .order
        .iter()
        .copied()
        .filter(|i| candidates.is_explore(*i) && !basket.contains(i) && !taken.contains(i))
        .take(m_slots)
        .collect()
}

/// Draws `m_slots` distinct unpopular explore candidates, each draw
/// proportional to training frequency among those still available. The
/// random stream is seeded from the policy seed and the user id. If the
/// unpopular pool runs out, the rest is filled by popularity from any group.
pub fn explore_fairness(
    candidates: &RepeatExploreSets,
    policy: &ExplorationPolicy,
    basket_so_far: &[ItemId],
    user_id: &str,
    m_slots: usize,
) -> Vec<ItemId> {
    if m_slots == 0 {
        return Vec::new();
    }
    let pool = policy
        .pool
        .as_ref()
        .expect("fairness exploration requires a group assignment");
    let mut rng = ChaCha8Rng::seed_from_u64(user_seed(policy.seed, user_id));

    // Mass and count of pool items that are not candidates.
    let blocked = |i: &ItemId| !candidates.is_explore(*i) || basket_so_far.contains(i);
    let mut blocked_mass = 0u64;
    let mut blocked_count = 0usize;
    let mut counted: Vec<ItemId> = Vec::new();
    for &i in candidates.rep.iter().chain(basket_so_far) {
        if counted.contains(&i) {
            continue;
        }
        if let Some(w) = pool.weight_of(i) {
            blocked_mass += w;
            blocked_count += 1;
            counted.push(i);
        }
    }
    let mut remaining_mass = pool.total() - blocked_mass;
    let mut remaining_count = pool.items.len() - blocked_count;

    let mut chosen: Vec<ItemId> = Vec::with_capacity(m_slots);
    // Rejection sampling from the full pool while most of its mass is
    // eligible; exact successive sampling over an explicit list afterwards.
    while chosen.len() < m_slots && remaining_count > 0 && remaining_mass * 4 >= pool.total() {
        let item = pool.draw(&mut rng);
        if blocked(&item) || chosen.contains(&item) {
            continue;
        }
        let w = pool.weight_of(item).expect("drawn from pool");
        remaining_mass -= w;
        remaining_count -= 1;
        chosen.push(item);
    }
    if chosen.len() < m_slots && remaining_count > 0 {
        let rest: Vec<(ItemId, u64)> = pool
            .items
            .iter()
            .zip(&pool.weight)
            .filter(|(i, _)| !blocked(i) && !chosen.contains(i))
            .map(|(&i, &w)| (i, w))
            .collect();
        let mut dist =
            WeightedIndex::new(rest.iter().map(|(_, w)| *w)).expect("positive pool weights");
        let mut left = rest.len();
        while chosen.len() < m_slots && left > 0 {
            let pos = dist.sample(&mut rng);
            chosen.push(rest[pos].0);
            left -= 1;
            if left > 0 {
                dist.update_weights(&[(pos, &0)]).expect("positive weight remains");
            }
        }
    }
    if chosen.len() < m_slots {
        let fill = popularity_fill(candidates, policy, basket_so_far, &chosen, m_slots - chosen.len());
        chosen.extend(fill);
    }
    chosen
}

/// Scans explore candidates from most to least popular and keeps those whose
/// category is new to the basket. If the scan ends short, the remaining slots
/// take the most popular leftovers regardless of category.
pub fn explore_diversity(
    candidates: &RepeatExploreSets,
    policy: &ExplorationPolicy,
    basket_so_far: &[ItemId],
    m_slots: usize,
) -> Vec<ItemId> {
    if m_slots == 0 {
        return Vec::new();
    }
    let categories = policy
        .categories
        .as_ref()
        .expect("diversity exploration requires categories");
    let mut used: Vec<CategoryId> = basket_so_far.iter().map(|i| categories[i.index()]).collect();
    let mut chosen = Vec::with_capacity(m_slots);
    for &item in &policy.order {
        if chosen.len() == m_slots {
            break;
        }
        if !candidates.is_explore(item) || basket_so_far.contains(&item) {
            continue;
        }
        let cat = categories[item.index()];
        if !used.contains(&cat) {
            used.push(cat);
            chosen.push(item);
        }
    }
    if chosen.len() < m_slots {
        let fill = popularity_fill(candidates, policy, basket_so_far, &chosen, m_slots - chosen.len());
        chosen.extend(fill);
    }
    chosen
}
