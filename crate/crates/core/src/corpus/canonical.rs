//! Canonical JSON-lines corpus format.
//!
//! A corpus directory holds `baskets.jsonl` (one `{"user", "baskets"}` object
//! per line) and `categories.jsonl` (one `{"item", "category"}` per line). A
//! prepared corpus adds `split.json` with the fold assignment.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Fold, SplitDataset};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const BASKETS_FILE: &str = "baskets.jsonl";
pub const CATEGORIES_FILE: &str = "categories.jsonl";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Serialize, Deserialize)]
struct UserLine {
    user: String,
    baskets: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct CategoryLine {
    item: String,
    category: String,
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    seed: u64,
    validation: Vec<String>,
    test: Vec<String>,
}

fn read_lines<T: for<'de> Deserialize<'de>>(
    path: &Path,
    mut f: impl FnMut(usize, T) -> Result<()>,
) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, line_no, e.to_string()))?;
        f(line_no, value)?;
    }
    Ok(())
}

pub fn read_canonical(dir: &Path) -> Result<Dataset> {
    let cat_path = dir.join(CATEGORIES_FILE);
    let mut categories = HashMap::new();
    read_lines(&cat_path, |line, c: CategoryLine| {
        if categories.insert(c.item.clone(), c.category).is_some() {
            return Err(Error::malformed(&cat_path, line, format!("duplicate item {:?}", c.item)));
        }
        Ok(())
    })?;

    let basket_path = dir.join(super::canonical::BASKETS_FILE);
    let mut users = Vec::new();
    read_lines(&basket_path, |line, u: UserLine| {
        if u.baskets.iter().any(Vec::is_empty) {
            return Err(Error::EmptyBasket {
                file: basket_path.clone(),
                line,
            });
        }
        users.push((u.user, u.baskets));
        Ok(())
    })?;
    Dataset::from_named(users, &categories)
}

fn write_lines<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    write_atomic(path, |w| {
        for row in rows {
            serde_json::to_writer(&mut *w, &row).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Writes the dataset in canonical form. Only items that occur in some
/// basket are listed in the category file.
pub fn write_canonical(d: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cat = &d.catalog;
    write_lines(
        &dir.join(BASKETS_FILE),
        d.users.iter().map(|u| UserLine {
            user: u.user_id.clone(),
            baskets: u
                .baskets
                .iter()
                .map(|b| b.iter().map(|&i| cat.name(i).to_owned()).collect())
                .collect(),
        }),
    )?;
    let counts = d.item_basket_counts();
    write_lines(
        &dir.join(CATEGORIES_FILE),
        cat.items().filter(|i| counts[i.index()] > 0).map(|i| CategoryLine {
            item: cat.name(i).to_owned(),
            category: cat.category_name(cat.category(i)).to_owned(),
        }),
    )
}

/// Writes full sequences plus the fold assignment.
pub fn write_prepared(s: &SplitDataset, dir: &Path) -> Result<()> {
    write_canonical(&s.full_dataset(), dir)?;
    let ids = |fold| {
        s.users_in(fold)
            .into_iter()
            .map(|u| s.user_id(u).to_owned())
            .collect()
    };
    let file = SplitFile {
        seed: s.seed,
        validation: ids(Fold::Validation),
        test: ids(Fold::Test),
    };
    write_atomic(&dir.join(SPLIT_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &file).map_err(std::io::Error::other)?;
        w.write_all(b"\n")
    })
}

pub fn read_prepared(dir: &Path) -> Result<SplitDataset> {
    let d = read_canonical(dir)?;
    let path = dir.join(SPLIT_FILE);
    let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: SplitFile =
        serde_json::from_str(&raw).map_err(|e| Error::malformed(&path, 1, e.to_string()))?;
    let mut fold_of: HashMap<&str, Fold> = HashMap::new();
    for u in &file.validation {
        fold_of.insert(u, Fold::Validation);
    }
    for u in &file.test {
        if fold_of.insert(u, Fold::Test).is_some() {
            return Err(Error::malformed(&path, 1, format!("user {u:?} in both folds")));
        }
    }
    let folds = d
        .users
        .iter()
        .map(|u| {
            fold_of
                .get(u.user_id.as_str())
                .copied()
                .ok_or_else(|| Error::malformed(&path, 1, format!("user {:?} has no fold", u.user_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    SplitDataset::from_full(d, folds, file.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::split;

    fn fixture(dir: &Path) {
        std::fs::write(
            dir.join(CATEGORIES_FILE),
            "{\"item\":\"a\",\"category\":\"x\"}\n{\"item\":\"b\",\"category\":\"y\"}\n{\"item\":\"c\",\"category\":\"x\"}\n",
        )
        .unwrap();
        std::fs::write(
            dir.join(BASKETS_FILE),
            "{\"user\":\"1\",\"baskets\":[[\"a\"],[\"a\",\"b\"],[\"c\"]]}\n\
             {\"user\":\"2\",\"baskets\":[[\"b\"],[\"b\",\"c\"],[\"a\",\"b\"]]}\n",
        )
        .unwrap();
    }

    #[test]
    fn loads_two_users() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let d = read_canonical(dir.path()).unwrap();
        assert_eq!(d.n_users(), 2);
        assert_eq!(d.n_baskets(), 6);
    }

    #[test]
    fn empty_basket_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        std::fs::write(
            dir.path().join(BASKETS_FILE),
            "{\"user\":\"1\",\"baskets\":[[\"a\"]]}\n{\"user\":\"2\",\"baskets\":[[\"b\"],[]]}\n",
        )
        .unwrap();
        let err = read_canonical(dir.path()).unwrap_err();
        assert!(err.to_string().contains("empty basket at line 2"), "{err}");
    }

    #[test]
    fn prepared_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let s = split(read_canonical(dir.path()).unwrap(), 5).unwrap();
        let out = dir.path().join("prepared");
        write_prepared(&s, &out).unwrap();
        assert_eq!(read_prepared(&out).unwrap(), s);
    }
}
