//! Adapters for raw transaction logs.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{canonical, Dataset};
use crate::error::{Error, Result};

/// Column names for the Dunnhumby "Complete Journey" export.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DunnhumbyColumns {
    pub transactions_file: String,
    pub products_file: String,
    pub user: String,
    pub basket: String,
    pub item: String,
    /// Sort key for baskets, compared column by column.
    pub order: Vec<String>,
    pub product_item: String,
    pub category: String,
}

impl Default for DunnhumbyColumns {
    fn default() -> Self {
        DunnhumbyColumns {
            transactions_file: "transaction_data.csv".into(),
            products_file: "product.csv".into(),
            user: "household_key".into(),
            basket: "BASKET_ID".into(),
            item: "PRODUCT_ID".into(),
            order: vec!["DAY".into(), "TRANS_TIME".into()],
            product_item: "PRODUCT_ID".into(),
            category: "COMMODITY_DESC".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstacartColumns {
    pub orders_file: String,
    pub order_products_files: Vec<String>,
    pub products_file: String,
    pub order_id: String,
    pub user: String,
    pub order_number: String,
    pub item: String,
    pub category: String,
}

impl Default for InstacartColumns {
    fn default() -> Self {
        InstacartColumns {
            orders_file: "orders.csv".into(),
            order_products_files: vec![
                "order_products__prior.csv".into(),
                "order_products__train.csv".into(),
            ],
            products_file: "products.csv".into(),
            order_id: "order_id".into(),
            user: "user_id".into(),
            order_number: "order_number".into(),
            item: "product_id".into(),
            category: "aisle_id".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SourceFormat {
    Canonical,
    Dunnhumby(DunnhumbyColumns),
    Instacart {
        columns: InstacartColumns,
        /// Seeded uniform sample of this many users, drawn before preprocessing.
        sample_users: Option<usize>,
        seed: u64,
    },
}

pub fn ingest(format: &SourceFormat, path: &Path) -> Result<Dataset> {
    match format {
        SourceFormat::Canonical => canonical::read_canonical(path),
        SourceFormat::Dunnhumby(cols) => ingest_dunnhumby(cols, path),
        SourceFormat::Instacart {
            columns,
            sample_users,
            seed,
        } => ingest_instacart(columns, *sample_users, *seed, path),
    }
}

/// One component of a basket's sort key.
#[derive(Clone, Debug, PartialEq)]
enum KeyPart {
    Num(f64),
    Text(String),
}

impl KeyPart {
    fn parse(raw: &str) -> Self {
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => KeyPart::Num(v),
            _ => KeyPart::Text(raw.to_owned()),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyPart::Num(a), KeyPart::Num(b)) => a.total_cmp(b),
            (KeyPart::Text(a), KeyPart::Text(b)) => a.cmp(b),
            (KeyPart::Num(_), KeyPart::Text(_)) => Ordering::Less,
            (KeyPart::Text(_), KeyPart::Num(_)) => Ordering::Greater,
        }
    }
}

fn cmp_keys(a: &[KeyPart], b: &[KeyPart]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

struct PendingBasket {
    user: String,
    key: Vec<KeyPart>,
    first_row: usize,
    items: Vec<String>,
}

/// Groups pending baskets per user and orders them by key, then by source row.
fn assemble(
    baskets: impl IntoIterator<Item = PendingBasket>,
) -> Vec<(String, Vec<Vec<String>>)> {
    let mut per_user: HashMap<String, Vec<PendingBasket>> = HashMap::new();
    for basket in baskets {
        per_user.entry(basket.user.clone()).or_default().push(basket);
    }
    let mut users: Vec<(String, Vec<Vec<String>>)> = per_user
        .into_iter()
        .map(|(user, mut baskets)| {
            baskets.sort_by(|a, b| cmp_keys(&a.key, &b.key).then(a.first_row.cmp(&b.first_row)));
            (user, baskets.into_iter().map(|b| b.items).collect())
        })
        .collect();
    users.sort_by(|a, b| a.0.cmp(&b.0));
    users
}

struct Table {
    path: PathBuf,
    reader: csv::Reader<File>,
    headers: csv::StringRecord,
}

impl Table {
    fn open(path: PathBuf) -> Result<Self> {
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| Error::malformed(&path, 1, e.to_string()))?
            .clone();
        Ok(Table {
            path,
            reader,
            headers,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::malformed(&self.path, 1, format!("missing column {name:?}")))
    }

    /// Visits every data row with its 1-based line number.
    fn for_each(mut self, mut f: impl FnMut(usize, &csv::StringRecord) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let line = self.reader.position().line() as usize;
            match self.reader.read_record(&mut record) {
                Ok(true) => {
                    let line = record.position().map_or(line, |p| p.line() as usize);
                    f(line, &record)?;
                }
                Ok(false) => return Ok(()),
                Err(e) => {
                    let line = e.position().map_or(line, |p| p.line() as usize);
                    return Err(Error::malformed(&self.path, line, e.to_string()));
                }
            }
        }
    }
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, path: &Path, line: usize) -> Result<&'r str> {
    match record.get(idx).map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::malformed(path, line, format!("missing value in column {}", idx + 1))),
    }
}

fn read_categories(table: Table, item_col: &str, cat_col: &str) -> Result<HashMap<String, String>> {
    let item_idx = table.column(item_col)?;
    let cat_idx = table.column(cat_col)?;
    let path = table.path.clone();
    let mut categories = HashMap::new();
    table.for_each(|line, rec| {
        let item = field(rec, item_idx, &path, line)?;
        // An empty category is reported as missing when the item is used.
        if let Some(cat) = rec.get(cat_idx).map(str::trim).filter(|c| !c.is_empty()) {
            categories.insert(item.to_owned(), cat.to_owned());
        }
        Ok(())
    })?;
    Ok(categories)
}

fn ingest_dunnhumby(cols: &DunnhumbyColumns, dir: &Path) -> Result<Dataset> {
    let products = Table::open(dir.join(&cols.products_file))?;
    let categories = read_categories(products, &cols.product_item, &cols.category)?;

    let tx = Table::open(dir.join(&cols.transactions_file))?;
    let user_idx = tx.column(&cols.user)?;
    let basket_idx = tx.column(&cols.basket)?;
    let item_idx = tx.column(&cols.item)?;
    let order_idx = cols
        .order
        .iter()
        .map(|c| tx.column(c))
        .collect::<Result<Vec<_>>>()?;
    let path = tx.path.clone();

    let mut pending: HashMap<String, PendingBasket> = HashMap::new();
    let mut row = 0usize;
    tx.for_each(|line, rec| {
        let user = field(rec, user_idx, &path, line)?;
        let basket = field(rec, basket_idx, &path, line)?;
        let item = field(rec, item_idx, &path, line)?;
        let entry = match pending.get_mut(basket) {
            Some(entry) => {
                if entry.user != user {
                    return Err(Error::malformed(
                        &path,
                        line,
                        format!("basket {basket:?} belongs to users {:?} and {user:?}", entry.user),
                    ));
                }
                entry
            }
            None => {
                let key = order_idx
                    .iter()
                    .map(|&i| field(rec, i, &path, line).map(KeyPart::parse))
                    .collect::<Result<Vec<_>>>()?;
                pending.entry(basket.to_owned()).or_insert(PendingBasket {
                    user: user.to_owned(),
                    key,
                    first_row: row,
                    items: Vec::new(),
                })
            }
        };
        entry.items.push(item.to_owned());
        row += 1;
        Ok(())
    })?;

    Dataset::from_named(assemble(pending.into_values()), &categories)
}

fn ingest_instacart(
    cols: &InstacartColumns,
    sample_users: Option<usize>,
    seed: u64,
    dir: &Path,
) -> Result<Dataset> {
    let products = Table::open(dir.join(&cols.products_file))?;
    let categories = read_categories(products, &cols.item, &cols.category)?;

    let orders = Table::open(dir.join(&cols.orders_file))?;
    let order_idx = orders.column(&cols.order_id)?;
    let user_idx = orders.column(&cols.user)?;
    let number_idx = orders.column(&cols.order_number)?;
    let path = orders.path.clone();
    let mut order_rows: Vec<(String, String, KeyPart)> = Vec::new();
    orders.for_each(|line, rec| {
        order_rows.push((
            field(rec, order_idx, &path, line)?.to_owned(),
            field(rec, user_idx, &path, line)?.to_owned(),
            KeyPart::parse(field(rec, number_idx, &path, line)?),
        ));
        Ok(())
    })?;

    let keep_users: Option<std::collections::HashSet<String>> = sample_users.map(|n| {
        let mut users: Vec<&str> = order_rows.iter().map(|(_, u, _)| u.as_str()).collect();
        users.sort_unstable();
        users.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        users.shuffle(&mut rng);
        users.into_iter().take(n).map(str::to_owned).collect()
    });

    let mut pending: HashMap<String, PendingBasket> = HashMap::new();
    for (row, (order, user, number)) in order_rows.into_iter().enumerate() {
        if keep_users.as_ref().is_some_and(|k| !k.contains(&user)) {
            continue;
        }
        pending.insert(
            order,
            PendingBasket {
                user,
                key: vec![number],
                first_row: row,
                items: Vec::new(),
            },
        );
    }

    for file in &cols.order_products_files {
        let table = Table::open(dir.join(file))?;
        let order_idx = table.column(&cols.order_id)?;
        let item_idx = table.column(&cols.item)?;
        let path = table.path.clone();
        table.for_each(|line, rec| {
            let order = field(rec, order_idx, &path, line)?;
            let item = field(rec, item_idx, &path, line)?;
            if let Some(basket) = pending.get_mut(order) {
                basket.items.push(item.to_owned());
            }
            Ok(())
        })?;
    }

    // Orders without products (the held-out "test" eval set) carry no basket.
    let baskets = pending.into_values().filter(|b| !b.items.is_empty());
    Dataset::from_named(assemble(baskets), &categories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn dunnhumby_fixture(dir: &Path) {
        write(
            dir,
            "product.csv",
            "PRODUCT_ID,COMMODITY_DESC\n1,MILK\n2,BREAD\n3,MILK\n",
        );
        write(
            dir,
            "transaction_data.csv",
            "household_key,BASKET_ID,DAY,PRODUCT_ID,TRANS_TIME\n\
             7,b2,10,2,900\n\
             7,b1,3,1,1200\n\
             7,b1,3,3,1200\n\
             7,b2,10,2,900\n\
             8,b3,1,1,800\n\
             7,b4,10,3,800\n",
        );
    }

    #[test]
    fn dunnhumby_orders_by_day_then_time() {
        let dir = tempfile::tempdir().unwrap();
        dunnhumby_fixture(dir.path());
        let d = ingest(&SourceFormat::Dunnhumby(Default::default()), dir.path()).unwrap();
        assert_eq!(d.n_users(), 2);
        let u7 = d.users.iter().find(|u| u.user_id == "7").unwrap();
        let names: Vec<Vec<&str>> = u7
            .baskets
            .iter()
            .map(|b| b.iter().map(|&i| d.catalog.name(i)).collect())
            .collect();
        // day 3 first, then day 10 at 800 before day 10 at 900
        assert_eq!(names, vec![vec!["1", "3"], vec!["3"], vec!["2"]]);
        let milk = d.catalog.category(d.catalog.lookup("1").unwrap());
        assert_eq!(d.catalog.category_name(milk), "MILK");
    }

    #[test]
    fn missing_category_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        dunnhumby_fixture(dir.path());
        write(dir.path(), "product.csv", "PRODUCT_ID,COMMODITY_DESC\n1,MILK\n2,BREAD\n");
        let err = ingest(&SourceFormat::Dunnhumby(Default::default()), dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingCategory(ref i) if i == "3"), "{err}");
    }

    #[test]
    fn malformed_row_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        dunnhumby_fixture(dir.path());
        write(
            dir.path(),
            "transaction_data.csv",
            "household_key,BASKET_ID,DAY,PRODUCT_ID,TRANS_TIME\n7,b1,3,1,1200\n7,b1,3\n",
        );
        let err = ingest(&SourceFormat::Dunnhumby(Default::default()), dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("transaction_data.csv") && msg.contains(":3:"), "{msg}");
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest(&SourceFormat::Dunnhumby(Default::default()), dir.path()).unwrap_err();
        assert!(err.to_string().contains("product.csv"));
    }

    #[test]
    fn instacart_joins_orders_and_samples_users() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "products.csv", "product_id,product_name,aisle_id\n1,a,10\n2,b,11\n");
        write(
            dir.path(),
            "orders.csv",
            "order_id,user_id,eval_set,order_number\n\
             100,1,prior,2\n101,1,prior,1\n102,1,test,3\n200,2,prior,1\n300,3,prior,1\n",
        );
        write(
            dir.path(),
            "order_products__prior.csv",
            "order_id,product_id,add_to_cart_order,reordered\n100,1,1,0\n101,2,1,0\n200,1,1,0\n300,2,1,0\n",
        );
        write(
            dir.path(),
            "order_products__train.csv",
            "order_id,product_id,add_to_cart_order,reordered\n",
        );
        let full = SourceFormat::Instacart {
            columns: Default::default(),
            sample_users: None,
            seed: 0,
        };
        let d = ingest(&full, dir.path()).unwrap();
        assert_eq!(d.n_users(), 3);
        let u1 = &d.users[0];
        assert_eq!(u1.user_id, "1");
        assert_eq!(u1.baskets.len(), 2);
        assert_eq!(d.catalog.name(u1.baskets[0][0]), "2");

        let sampled = SourceFormat::Instacart {
            columns: Default::default(),
            sample_users: Some(2),
            seed: 9,
        };
        let a = ingest(&sampled, dir.path()).unwrap();
        let b = ingest(&sampled, dir.path()).unwrap();
        assert_eq!(a.n_users(), 2);
        assert_eq!(a, b);
    }
}
