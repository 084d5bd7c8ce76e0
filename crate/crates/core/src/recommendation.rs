//! Recommended baskets and their JSON-lines interchange format.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Catalog, ItemId};
use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Repeat,
    Explore,
}

/// A ranked basket for one user. `provenance` runs parallel to `items`.
#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub user_id: String,
    pub items: Vec<ItemId>,
    pub provenance: Vec<Provenance>,
}

impl Recommendation {
    /// Labels every item by whether the user bought it before.
    pub fn labelled(user_id: impl Into<String>, items: Vec<ItemId>, rep: &HashSet<ItemId>) -> Self {
        let provenance = items
            .iter()
            .map(|i| {
                if rep.contains(i) {
                    Provenance::Repeat
                } else {
                    Provenance::Explore
                }
            })
            .collect();
        Recommendation {
            user_id: user_id.into(),
            items,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn repeat_slots(&self) -> usize {
        self.provenance.iter().filter(|p| **p == Provenance::Repeat).count()
    }

    pub fn explore_slots(&self) -> usize {
        self.len() - self.repeat_slots()
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    user: String,
    items: Vec<String>,
    #[serde(default)]
    provenance: Option<Vec<Provenance>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    v: Option<f64>,
}

pub fn write_recommendations(
    path: &Path,
    recs: &[Recommendation],
    catalog: &Catalog,
    v: Option<f64>,
) -> Result<()> {
    write_atomic(path, |w| {
        for rec in recs {
            let line = Line {
                user: rec.user_id.clone(),
                items: rec.items.iter().map(|&i| catalog.name(i).to_owned()).collect(),
                provenance: Some(rec.provenance.clone()),
                v: v.filter(|x| x.is_finite()),
            };
            serde_json::to_writer(&mut *w, &line).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Reads a predictions file. Lines without `provenance` are labelled with
/// `label(user, item)`, so predictions from other tools can be scored.
pub fn read_recommendations(
    path: &Path,
    catalog: &Catalog,
    label: impl Fn(&str, ItemId) -> Provenance,
) -> Result<Vec<Recommendation>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(&line).map_err(|e| Error::malformed(path, n + 1, e.to_string()))?;
        let items = parsed
            .items
            .iter()
            .map(|name| {
                catalog
                    .lookup(name)
                    .ok_or_else(|| Error::malformed(path, n + 1, format!("unknown item {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let provenance = match parsed.provenance {
            Some(p) if p.len() != items.len() => {
                return Err(Error::malformed(path, n + 1, "items and provenance differ in length"))
            }
            Some(p) => p,
            None => items.iter().map(|&i| label(&parsed.user, i)).collect(),
        };
        out.push(Recommendation {
            user_id: parsed.user,
            items,
            provenance,
        });
    }
    Ok(out)
}
