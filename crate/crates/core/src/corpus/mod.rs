//! Basket corpora: loading, preprocessing, splitting and summary statistics.
//!
//! Items and categories are interned into dense ids. Item ids are assigned in
//! lexicographic order of the source item names, so comparing two [`ItemId`]s
//! gives the same answer as comparing their names. Every tie-break in the
//! crate ("ascending item id") relies on this.

mod canonical;
mod ingest;
mod preprocess;
mod split;
mod stats;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use canonical::{
    read_canonical, read_prepared, write_canonical, write_prepared, BASKETS_FILE, CATEGORIES_FILE, SPLIT_FILE,
};
pub use ingest::{ingest, DunnhumbyColumns, InstacartColumns, SourceFormat};
pub use preprocess::{preprocess, PreprocessConfig};
pub use split::{split, Fold, SplitDataset};
pub use stats::{dataset_stats, DatasetStats};
pub use synth::{synth_generate, SynthConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryId(pub u32);

/// A basket is a set of items, stored sorted and deduplicated.
pub type Basket = Vec<ItemId>;

#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub user_id: String,
    /// Oldest first.
    pub baskets: Vec<Basket>,
}

/// The fixed item set with its category taxonomy.
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    names: Vec<String>,
    categories: Vec<CategoryId>,
    category_names: Vec<String>,
    index: HashMap<String, ItemId>,
}

impl Catalog {
    /// Builds a catalog from `(item, category)` pairs. Duplicate items must
    /// agree on their category.
    pub fn new<I, S, C>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, C)>,
        S: Into<String>,
        C: Into<String>,
    {
        let mut by_item: BTreeMap<String, String> = BTreeMap::new();
        for (item, cat) in pairs {
            let item = item.into();
            let cat = cat.into();
            if let Some(prev) = by_item.get(&item) {
                if *prev != cat {
                    return Err(Error::InvalidParameter(format!(
                        "item {item:?} assigned to categories {prev:?} and {cat:?}"
                    )));
                }
                continue;
            }
            by_item.insert(item, cat);
        }
        let category_names: Vec<String> = by_item
            .values()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cat_index: HashMap<&str, CategoryId> = category_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), CategoryId(i as u32)))
            .collect();
        let mut names = Vec::with_capacity(by_item.len());
        let mut categories = Vec::with_capacity(by_item.len());
        for (item, cat) in &by_item {
            names.push(item.clone());
            categories.push(cat_index[cat.as_str()]);
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), ItemId(i as u32)))
            .collect();
        Ok(Catalog {
            names,
            categories,
            category_names,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        (0..self.names.len() as u32).map(ItemId)
    }

    pub fn name(&self, item: ItemId) -> &str {
        &self.names[item.index()]
    }

    pub fn lookup(&self, name: &str) -> Option<ItemId> {
        self.index.get(name).copied()
    }

    pub fn category(&self, item: ItemId) -> CategoryId {
        self.categories[item.index()]
    }

    pub fn category_name(&self, cat: CategoryId) -> &str {
        &self.category_names[cat.0 as usize]
    }

    pub fn n_categories(&self) -> usize {
        self.category_names.len()
    }

    /// Dense item → category table, indexed by [`ItemId::index`].
    pub fn category_table(&self) -> &[CategoryId] {
        &self.categories
    }

    /// Restricts the catalog to `keep`, re-interning ids. Returns the new
    /// catalog and an old → new id map.
    pub(crate) fn restrict(&self, keep: &HashSet<ItemId>) -> (Catalog, HashMap<ItemId, ItemId>) {
        let pairs = self
            .items()
            .filter(|i| keep.contains(i))
            .map(|i| (self.name(i).to_owned(), self.category_name(self.category(i)).to_owned()));
        let restricted = Catalog::new(pairs).expect("restriction of a valid catalog");
        let remap = self
            .items()
            .filter(|i| keep.contains(i))
            .map(|i| (i, restricted.lookup(self.name(i)).expect("kept item")))
            .collect();
        (restricted, remap)
    }
}

/// Users with their basket sequences over a shared catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub users: Vec<UserRecord>,
    pub catalog: Arc<Catalog>,
}

impl Dataset {
    /// Validates the user list against the catalog. Baskets are normalised
    /// to sorted, deduplicated form.
    pub fn new(mut users: Vec<UserRecord>, catalog: Arc<Catalog>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(users.len());
        for user in &mut users {
            if !seen.insert(user.user_id.clone()) {
                return Err(Error::DuplicateUser(user.user_id.clone()));
            }
            for basket in &mut user.baskets {
                basket.sort_unstable();
                basket.dedup();
                if basket.is_empty() {
                    return Err(Error::InvalidParameter(format!(
                        "user {:?} has an empty basket",
                        user.user_id
                    )));
                }
                if let Some(bad) = basket.iter().find(|i| i.index() >= catalog.len()) {
                    return Err(Error::UnknownItem(format!("#{}", bad.0)));
                }
            }
        }
        Ok(Dataset { users, catalog })
    }

    /// Builds a dataset from item names. Every item must have a category.
    pub fn from_named<U, B, S>(users: U, categories: &HashMap<String, String>) -> Result<Self>
    where
        U: IntoIterator<Item = (String, B)>,
        B: IntoIterator<Item = Vec<S>>,
        S: AsRef<str>,
    {
        let raw: Vec<(String, Vec<Vec<S>>)> = users
            .into_iter()
            .map(|(u, b)| (u, b.into_iter().collect()))
            .collect();
        let mut used = BTreeSet::new();
        for (_, baskets) in &raw {
            for basket in baskets {
                for item in basket {
                    used.insert(item.as_ref());
                }
            }
        }
        let mut pairs = Vec::with_capacity(used.len());
        for item in used {
            let cat = categories
                .get(item)
                .ok_or_else(|| Error::MissingCategory(item.to_owned()))?;
            pairs.push((item.to_owned(), cat.clone()));
        }
        let catalog = Arc::new(Catalog::new(pairs)?);
        let users = raw
            .into_iter()
            .map(|(user_id, baskets)| UserRecord {
                user_id,
                baskets: baskets
                    .into_iter()
                    .map(|b| {
                        b.iter()
                            .map(|i| catalog.lookup(i.as_ref()).expect("interned"))
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Dataset::new(users, catalog)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_baskets(&self) -> usize {
        self.users.iter().map(|u| u.baskets.len()).sum()
    }

    /// Number of baskets containing each item, indexed by item id.
    pub fn item_basket_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.catalog.len()];
        for user in &self.users {
            for basket in &user.baskets {
                for item in basket {
                    counts[item.index()] += 1;
                }
            }
        }
        counts
    }
}

/// Repeat and explore item sets of one user at one point in time.
///
/// The explore set is the complement of `rep` in the catalog and is not
/// materialised.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepeatExploreSets {
    pub rep: BTreeSet<ItemId>,
    catalog_len: usize,
}

impl RepeatExploreSets {
    pub fn is_repeat(&self, item: ItemId) -> bool {
        self.rep.contains(&item)
    }

    pub fn is_explore(&self, item: ItemId) -> bool {
        item.index() < self.catalog_len && !self.rep.contains(&item)
    }

    pub fn expl(&self) -> impl Iterator<Item = ItemId> + '_ {
        (0..self.catalog_len as u32)
            .map(ItemId)
            .filter(move |i| !self.rep.contains(i))
    }

    pub fn expl_len(&self) -> usize {
        self.catalog_len - self.rep.len()
    }

    /// Adds the next basket to the history.
    pub fn push(&mut self, basket: &[ItemId]) {
        self.rep.extend(basket.iter().copied());
    }
}

/// Repeat items are everything the user bought so far; the rest of the
/// catalog is left to explore.
pub fn repeat_explore_sets(history: &[Basket], catalog: &Catalog) -> RepeatExploreSets {
    let mut sets = RepeatExploreSets {
        rep: BTreeSet::new(),
        catalog_len: catalog.len(),
    };
    for basket in history {
        sets.push(basket);
    }
    sets
}

/// Per-user personal purchase counts (basket occurrences).
pub(crate) fn personal_counts(history: &[Basket]) -> HashMap<ItemId, u32> {
    let mut counts = HashMap::new();
    for basket in history {
        for &item in basket {
            *counts.entry(item).or_insert(0) += 1;
        }
    }
    counts
}
