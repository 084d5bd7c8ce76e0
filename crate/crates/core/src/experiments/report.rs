use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::MetricReport;

use super::significance::SignificanceResult;

/// Pretty JSON, written atomically.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
}

/// Long-format aggregate table: `method,k,metric,value`.
pub fn write_report_csv(path: &Path, reports: &[(String, &MetricReport)]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "method,k,metric,value")?;
        for (method, r) in reports {
            for (metric, value) in &r.aggregate {
                writeln!(w, "{method},{},{metric},{value}", r.config.k)?;
            }
        }
        Ok(())
    })
}

/// Wide per-user table: one row per user, one column per metric, empty
/// cells where a metric is undefined.
pub fn write_per_user_csv(path: &Path, report: &MetricReport) -> Result<()> {
    let columns: BTreeSet<&String> = report.per_user.values().flat_map(|m| m.keys()).collect();
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["user".to_owned()];
    header.extend(columns.iter().map(|c| c.to_string()));
    out.write_record(&header)?;
    for (user, values) in &report.per_user {
        let mut row = vec![user.clone()];
        row.extend(columns.iter().map(|c| values.get(*c).map(|v| v.to_string()).unwrap_or_default()));
        out.write_record(&row)?;
    }
    let bytes = out.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    write_atomic(path, |w| w.write_all(&bytes))
}

/// Per-user values by metric then user, as written by [`write_per_user_csv`].
pub type PerUser = BTreeMap<String, BTreeMap<String, f64>>;

pub fn read_per_user_csv(path: &Path) -> Result<PerUser> {
    let file_name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.first().map(String::as_str) != Some("user") {
        return Err(Error::malformed(&file_name, 1, "first column must be `user`"));
    }
    let mut out: PerUser = header[1..].iter().map(|m| (m.clone(), BTreeMap::new())).collect();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let line = n + 2;
        let user = record.get(0).unwrap_or_default().to_owned();
        for (metric, cell) in header[1..].iter().zip(record.iter().skip(1)) {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::malformed(&file_name, line, format!("bad value {cell:?} for {metric}")))?;
            out.get_mut(metric).expect("metric from header").insert(user.clone(), v);
        }
    }
    Ok(out)
}

pub fn write_significance_csv(path: &Path, rows: &[SignificanceResult]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "metric,method_a,method_b,n,mean_diff,t,p,degenerate")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.metric, r.method_a, r.method_b, r.n, r.mean_diff, r.t, r.p, r.degenerate
            )?;
        }
        Ok(())
    })
}
