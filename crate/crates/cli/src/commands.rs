use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use nbr_core::corpus::{
    dataset_stats, ingest, ItemId, preprocess, read_prepared, split, synth_generate, write_canonical, write_prepared,
    Fold, SplitDataset, SynthConfig, BASKETS_FILE, CATEGORIES_FILE, SPLIT_FILE,
};
use nbr_core::experiments::{
    ablation_rep, build_policy, compare_methods, grid_search, quantile_thresholds, read_per_user_csv, recommend,
    sweep_threshold, write_frontiers, write_json, write_per_user_csv, write_report_csv, write_significance_csv,
    FrontierPoint, GridResult, GridSpec, Method, TunedParams, ValidationSet,
};
use nbr_core::metrics::{evaluate, EvalConfig, GroupAssignment, MetricReport};
use nbr_core::recommendation::{read_recommendations, write_recommendations};
use nbr_core::trex::{fit_repetition, PolicyKind, RepetitionParams};
use nbr_core::Provenance;

use crate::config::{MethodSpec, RunConfig};
use crate::manifest::{corpus_hash, Manifest};
use crate::UsageError;

pub const STATS_FILE: &str = "stats.json";
pub const BEST_FILE: &str = "best.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const PER_USER_CSV: &str = "per_user.csv";
pub const SIGNIFICANCE_CSV: &str = "significance.csv";

const CORPUS_FILES: [&str; 3] = [BASKETS_FILE, CATEGORIES_FILE, SPLIT_FILE];

/// Absolute form of a path flag, as recorded in manifests.
fn abs_path(p: &Path) -> String {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string()
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

struct Prepared {
    split: SplitDataset,
    sha256: String,
}

fn load_prepared(dir: &Path) -> anyhow::Result<Prepared> {
    if !dir.join(SPLIT_FILE).exists() {
        anyhow::bail!("no prepared corpus in {}; run `nbr prepare` first", dir.display());
    }
    let split = read_prepared(dir)?;
    Ok(Prepared {
        split,
        sha256: corpus_hash(dir, &CORPUS_FILES)?,
    })
}

fn groups_for(split: &SplitDataset, share: f64) -> GroupAssignment {
    GroupAssignment::from_counts(&split.train.item_basket_counts(), share)
}

pub fn prepare(cfg: &RunConfig) -> anyhow::Result<Manifest> {
    let mut m = Manifest::new("prepare", Some(cfg));
    let dir = cfg.corpus_dir();
    let raw = m.time("ingest", || ingest(&cfg.dataset.source_format(), &cfg.dataset.path))?;
    let clean = m.time("preprocess", || preprocess(raw, &cfg.dataset.preprocess))?;
    let s = m.time("split", || split(clean, cfg.dataset.split_seed))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    m.time("write", || write_prepared(&s, &dir))?;
    write_json(&dir.join(STATS_FILE), &dataset_stats(&s))?;
    m.corpus_sha256 = Some(corpus_hash(&dir, &CORPUS_FILES)?);
    let m = m.finish(&dir)?;
    println!("prepared {} users into {}", s.train.n_users(), dir.display());
    Ok(m)
}

pub fn stats(corpus: &Path) -> anyhow::Result<()> {
    let p = load_prepared(corpus)?;
    println!("{}", serde_json::to_string_pretty(&dataset_stats(&p.split))?);
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestEntry {
    pub params: TunedParams,
    pub validation_score: f64,
    pub metric: String,
    pub k: usize,
}

fn write_grid_csv(path: &Path, result: &GridResult) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    for r in &result.rows {
        let serde_json::Value::Object(mut obj) = serde_json::to_value(r.params)? else {
            unreachable!("parameters serialize as objects");
        };
        obj.remove("method");
        if columns.is_empty() {
            columns = obj.keys().cloned().collect();
        }
        let mut cells: Vec<String> = columns
            .iter()
            .map(|c| match &obj[c] {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        cells.push(r.score.to_string());
        rows.push(cells);
    }
    let score_col = format!("{}@{}", result.metric.name(), result.k);
    let text = std::iter::once([columns.join(","), score_col].join(","))
        .chain(rows.iter().map(|r| r.join(",")))
        .collect::<Vec<_>>()
        .join("\n");
    nbr_core::io::write_string(path, &(text + "\n"))?;
    Ok(())
}

pub fn tune(cfg: &RunConfig) -> anyhow::Result<Manifest> {
    let mut m = Manifest::new("tune", Some(cfg));
    let p = m.time("load", || load_prepared(&cfg.corpus_dir()))?;
    m.corpus_sha256 = Some(p.sha256.clone());
    let dir = cfg.stage_dir("tune");
    fs::create_dir_all(&dir)?;
    let validation = ValidationSet::from_split(&p.split);
    let k = cfg.evaluation.k;
    let mut best = BTreeMap::new();
    for name in &cfg.tune.methods {
        let spec = match name.as_str() {
            "trex_rep" => GridSpec::TrexRep(cfg.tune.trex_rep.clone()),
            "tifuknn" => GridSpec::Tifuknn(cfg.tune.tifuknn.clone()),
            "upcf" => GridSpec::Upcf(cfg.tune.upcf.clone()),
            other => return Err(usage(format!("unknown tunable method {other:?}"))),
        };
        let result = m.time(name, || grid_search(&spec, &p.split.train, &validation, k, cfg.tune.metric))?;
        write_grid_csv(&dir.join(format!("grid_{name}.csv")), &result)?;
        println!("tuned {name}: {}@{k} = {:.4}", result.metric.name(), result.best_score());
        best.insert(
            name.clone(),
            BestEntry {
                params: result.best_params(),
                validation_score: result.best_score(),
                metric: result.metric.name().to_owned(),
                k,
            },
        );
    }
    write_json(&dir.join(BEST_FILE), &best)?;
    m.finish(&dir)
}

pub fn read_best(cfg: &RunConfig) -> anyhow::Result<BTreeMap<String, BestEntry>> {
    let path = cfg.stage_dir("tune").join(BEST_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn resolve_method(cfg: &RunConfig) -> anyhow::Result<Method> {
    match &cfg.method {
        None => Err(usage("the config has no [method] block")),
        Some(MethodSpec::Fixed(m)) => Ok(m.clone()),
        Some(MethodSpec::Tuned { tuned }) => read_best(cfg)?
            .get(tuned)
            .map(|b| b.params.method())
            .ok_or_else(|| anyhow!("no tuned parameters for {tuned:?}; run `nbr tune` first")),
    }
}

fn write_reports(dir: &Path, label: &str, report: &MetricReport) -> anyhow::Result<()> {
    write_json(&dir.join(REPORT_JSON), &serde_json::json!({
        "method": label,
        "k": report.config.k,
        "n_users": report.n_users,
        "fairness": report.config.fairness,
        "metrics": report.aggregate,
    }))?;
    write_report_csv(&dir.join(REPORT_CSV), &[(label.to_owned(), report)])?;
    write_per_user_csv(&dir.join(PER_USER_CSV), report)?;
    Ok(())
}

pub fn run(cfg: &RunConfig, v: Option<f64>) -> anyhow::Result<Manifest> {
    let mut m = Manifest::new("run", Some(cfg));
    let mut method = resolve_method(cfg)?;
    if let Some(v) = v {
        if !matches!(method, Method::Trex { .. }) {
            return Err(usage("--v only applies to method `trex`"));
        }
        method = method.with_threshold(v);
        m.flags.insert("v".into(), v.to_string());
    }
    let p = m.time("load", || load_prepared(&cfg.corpus_dir()))?;
    m.corpus_sha256 = Some(p.sha256.clone());
    let s = &p.split;
    let users = s.test_users();
    let groups = groups_for(s, cfg.evaluation.popular_share);
    let k = cfg.evaluation.k;
    let recs = m.time("recommend", || recommend(&method, s, &users, k, &groups))?;
    let label = method.label();
    let dir = cfg.stage_dir("run").join(&label);
    fs::create_dir_all(&dir)?;
    let threshold = match method {
        Method::Trex { v, .. } => Some(v),
        _ => None,
    };
    write_recommendations(&dir.join(PREDICTIONS_FILE), &recs, &s.train.catalog, threshold)?;
    let eval_cfg = cfg.evaluation.eval_config();
    let report = m.time("evaluate", || evaluate(&recs, s, &users, &groups, &eval_cfg));
    write_reports(&dir, &label, &report)?;
    write_json(&dir.join("method.json"), &method)?;
    println!(
        "{label}: recall@{k} = {:.4}, ndcg@{k} = {:.4}",
        report.get("recall").unwrap_or(f64::NAN),
        report.get("ndcg").unwrap_or(f64::NAN)
    );
    m.finish(&dir)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldChoice {
    Validation,
    Test,
    All,
}

impl FoldChoice {
    pub fn name(self) -> &'static str {
        match self {
            FoldChoice::Validation => "validation",
            FoldChoice::Test => "test",
            FoldChoice::All => "all",
        }
    }
}

pub struct EvalArgs<'a> {
    pub predictions: &'a Path,
    pub corpus: &'a Path,
    pub k: usize,
    pub out: Option<PathBuf>,
    pub fold: FoldChoice,
    pub popular_share: f64,
}

pub fn eval(args: EvalArgs<'_>) -> anyhow::Result<Manifest> {
    if args.k == 0 {
        return Err(usage("--k must be positive"));
    }
    let mut m = Manifest::new("eval", None);
    m.flags.insert("predictions".into(), abs_path(args.predictions));
    m.flags.insert("corpus".into(), abs_path(args.corpus));
    m.flags.insert("k".into(), args.k.to_string());
    m.flags.insert("fold".into(), args.fold.name().into());
    m.flags.insert("popular-share".into(), args.popular_share.to_string());
    let p = m.time("load", || load_prepared(args.corpus))?;
    m.corpus_sha256 = Some(p.sha256.clone());
    let s = &p.split;
    let seen: HashMap<&str, HashSet<ItemId>> = (0..s.train.n_users())
        .map(|u| (s.user_id(u), s.history(u).iter().flatten().copied().collect()))
        .collect();
    let label = |user: &str, item: ItemId| match seen.get(user) {
        Some(h) if h.contains(&item) => Provenance::Repeat,
        _ => Provenance::Explore,
    };
    let recs = read_recommendations(args.predictions, &s.train.catalog, label)?;
    let users = match args.fold {
        FoldChoice::Validation => s.users_in(Fold::Validation),
        FoldChoice::Test => s.users_in(Fold::Test),
        FoldChoice::All => (0..s.train.n_users()).collect(),
    };
    let groups = groups_for(s, args.popular_share);
    let cfg = EvalConfig::new(args.k);
    let report = m.time("evaluate", || evaluate(&recs, s, &users, &groups, &cfg));
    let dir = args.out.unwrap_or_else(|| {
        args.predictions
            .parent()
            .map(|d| d.join("eval"))
            .unwrap_or_else(|| PathBuf::from("eval"))
    });
    fs::create_dir_all(&dir)?;
    m.flags.insert("out".into(), abs_path(&dir));
    let label = args
        .predictions
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "predictions".into());
    write_reports(&dir, &label, &report)?;
    println!("{}", serde_json::to_string_pretty(&report.aggregate)?);
    m.finish(&dir)
}

/// Repetition parameters for sweeps: explicit values, else the tuned
/// TREx-Rep winner, else the defaults.
pub fn sweep_params(cfg: &RunConfig) -> anyhow::Result<RepetitionParams> {
    let tuned = match read_best(cfg)?.get("trex_rep").map(|b| b.params) {
        Some(TunedParams::TrexRep(p)) => p,
        _ => RepetitionParams::default(),
    };
    Ok(RepetitionParams {
        alpha: cfg.sweep.alpha.unwrap_or(tuned.alpha),
        beta: cfg.sweep.beta.unwrap_or(tuned.beta),
        rep_feature_enabled: true,
    })
}

#[derive(Serialize, Deserialize)]
pub struct SweepReport {
    pub policy: PolicyKind,
    pub params: RepetitionParams,
    pub k: usize,
    pub points: Vec<FrontierPoint>,
}

pub fn sweep(cfg: &RunConfig, policy: PolicyKind) -> anyhow::Result<Manifest> {
    let mut m = Manifest::new("sweep", Some(cfg));
    let name = match policy {
        PolicyKind::Fairness => "fairness",
        PolicyKind::Diversity => "diversity",
        PolicyKind::None => "none",
    };
    m.flags.insert("policy".into(), name.into());
    let p = m.time("load", || load_prepared(&cfg.corpus_dir()))?;
    m.corpus_sha256 = Some(p.sha256.clone());
    let s = &p.split;
    let params = sweep_params(cfg)?;
    let model = fit_repetition(&s.train, params)?;
    let users = s.test_users();
    let groups = groups_for(s, cfg.evaluation.popular_share);
    let explorer = build_policy(policy, s, &groups, cfg.sweep.seed);
    let v_values = match &cfg.sweep.v {
        Some(v) => {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            v
        }
        None => quantile_thresholds(&model, s, &users, cfg.sweep.quantiles),
    };
    let eval_cfg = cfg.evaluation.eval_config();
    let points = m.time("sweep", || sweep_threshold(&model, &explorer, &v_values, s, &users, &groups, &eval_cfg))?;
    let dir = cfg.stage_dir(&format!("sweep_{name}"));
    fs::create_dir_all(&dir)?;
    write_frontiers(&points, &dir, eval_cfg.k)?;
    let report = SweepReport {
        policy,
        params,
        k: eval_cfg.k,
        points,
    };
    write_json(&dir.join(REPORT_JSON), &report)?;
    let mut csv = String::from("v,metric,value\n");
    for pt in &report.points {
        for (metric, value) in &pt.metrics {
            csv.push_str(&format!("{},{metric},{value}\n", pt.v));
        }
    }
    nbr_core::io::write_string(&dir.join(REPORT_CSV), &csv)?;
    println!("swept {} thresholds for trex_{name} into {}", report.points.len(), dir.display());
    m.finish(&dir)
}

pub fn ablate(cfg: &RunConfig) -> anyhow::Result<Manifest> {
    let mut m = Manifest::new("ablate", Some(cfg));
    let p = m.time("load", || load_prepared(&cfg.corpus_dir()))?;
    m.corpus_sha256 = Some(p.sha256.clone());
    let s = &p.split;
    let users = s.test_users();
    let groups = groups_for(s, cfg.evaluation.popular_share);
    let eval_cfg = cfg.evaluation.eval_config();
    let rows = m.time("ablate", || {
        ablation_rep(s, &users, &cfg.tune.trex_rep, &groups, &eval_cfg, cfg.tune.metric)
    })?;
    let dir = cfg.stage_dir("ablate");
    fs::create_dir_all(&dir)?;
    write_json(&dir.join(REPORT_JSON), &rows)?;
    let mut csv = String::from("variant,alpha,beta,rep_feature,metric,value\n");
    for r in &rows {
        for (metric, value) in &r.metrics {
            csv.push_str(&format!(
                "{},{},{},{},{metric},{value}\n",
                r.variant, r.params.alpha, r.params.beta, r.params.rep_feature_enabled
            ));
        }
        println!("{:<6} {:?}", r.variant, r.metrics);
    }
    nbr_core::io::write_string(&dir.join(REPORT_CSV), &csv)?;
    m.finish(&dir)
}

pub fn compare(a: &Path, b: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let label = |p: &Path| {
        p.parent()
            .and_then(|d| d.file_name())
            .or_else(|| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let (la, lb) = (label(a), label(b));
    let ta = read_per_user_csv(a)?;
    let tb = read_per_user_csv(b)?;
    let mut rows = Vec::new();
    for (metric, va) in &ta {
        let Some(vb) = tb.get(metric) else { continue };
        let pa: BTreeMap<String, f64> = va.iter().filter(|(u, _)| vb.contains_key(*u)).map(|(u, x)| (u.clone(), *x)).collect();
        let pb: BTreeMap<String, f64> = vb.iter().filter(|(u, _)| va.contains_key(*u)).map(|(u, x)| (u.clone(), *x)).collect();
        if pa.len() < 2 {
            continue;
        }
        rows.push(compare_methods(metric, &la, &pa, &lb, &pb)?);
    }
    if rows.is_empty() {
        anyhow::bail!("the two files share no metric with at least two common users");
    }
    println!("metric,method_a,method_b,n,mean_diff,t,p,degenerate");
    for r in &rows {
        println!("{},{},{},{},{},{},{},{}", r.metric, r.method_a, r.method_b, r.n, r.mean_diff, r.t, r.p, r.degenerate);
    }
    if let Some(dir) = out {
        let mut m = Manifest::new("compare", None);
        m.flags.insert("a".into(), abs_path(a));
        m.flags.insert("b".into(), abs_path(b));
        m.flags.insert("out".into(), abs_path(&dir));
        fs::create_dir_all(dir)?;
        write_significance_csv(&dir.join(SIGNIFICANCE_CSV), &rows)?;
        m.finish(dir)?;
    }
    Ok(())
}

pub fn synth(users: usize, items: usize, seed: u64, out: &Path) -> anyhow::Result<Manifest> {
    if users == 0 || items == 0 {
        return Err(usage("--users and --items must be positive"));
    }
    let mut m = Manifest::new("synth", None);
    m.flags.insert("users".into(), users.to_string());
    m.flags.insert("items".into(), items.to_string());
    m.flags.insert("seed".into(), seed.to_string());
    let cfg = SynthConfig {
        n_users: users,
        n_items: items,
        seed,
        ..SynthConfig::default()
    };
    let d = m.time("generate", || synth_generate(&cfg))?;
    fs::create_dir_all(out)?;
    m.flags.insert("out".into(), abs_path(out));
    write_canonical(&d, out)?;
    println!("wrote {} users over {} items to {}", d.n_users(), d.catalog.len(), out.display());
    m.finish(out)
}
