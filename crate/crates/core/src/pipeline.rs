//! Subcommand bodies. Each takes a resolved [`KvConfig`] (file plus flag
//! overrides), stages its outputs as files in `out_dir` and writes a
//! `<command>.manifest.txt` next to them (`topics_<scope>.manifest.txt` for
//! topic fits, so both scopes can share a directory).
//!
//! Path-valued keys never enter a manifest; their file digests do.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::correlate::{run_scheme, write_correlation_csv, CorrelateError, Scheme, SchemeInputs};
use crate::ingest::{
    census_from_counts, ingest_reader, open_input, read_bins, read_normalized_posts, write_bins_csv, write_census_csv,
    write_index_csv, write_normalized_post, BinAccumulator, BinSeries, CommunityFilter, EmptyTextPolicy, IngestError,
    IngestOptions, IngestStats, Scope, WeekKey,
};
use crate::manifest::Manifest;
use crate::metrics::{overload_series, GiniVariant, MetricsError, OverloadFlags, OverloadSeries};
use crate::synth::{gen_stream, SynthConfig, SynthError};
use crate::text::TextConfig;
use crate::topic_model::{
    fit_topics, load_topic_labels, write_topic_labels, FitConfig, KChoice, OutlierReduction, TopicAssignment,
    TopicError, TopicScope, DEFAULT_N_INIT, DEFAULT_TAU,
};
use crate::veracity::baseline::{train_baseline, BaselineModel, TrainConfig};
use crate::veracity::report::classification_report;
use crate::veracity::{
    fake_fraction, load_veracity_labels, read_training_csv, write_training_csv, write_veracity_labels, Class,
    FakeFractionSeries, VeracityAssignment, VeracityError, VeracitySource,
};

pub const POSTS_FILE: &str = "posts.ndjson";
pub const BINS_FILE: &str = "bins.csv";
pub const INDEX_FILE: &str = "index.csv";
pub const CENSUS_FILE: &str = "census.csv";
pub const VERACITY_FILE: &str = "veracity.csv";
pub const MODEL_FILE: &str = "model.json";
pub const AGGREGATE_FILE: &str = "panel_aggregate.csv";

/// Two-sided 95% normal quantile used for the aggregate band.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error("{0}")]
    Failed(String),
}

impl PipelineError {
    /// 1 for fatal errors, 2 for an empty result.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Empty(_) => 2,
            _ => 1,
        }
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Failed(e.to_string())
            }
        }
    )*};
}
failed_from!(std::io::Error, csv::Error, IngestError, CorrelateError);

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<SynthError> for PipelineError {
    fn from(e: SynthError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl From<TopicError> for PipelineError {
    fn from(e: TopicError) -> Self {
        match e {
            TopicError::MissingLabel(id) => PipelineError::Failed(format!("missing topic label for post `{id}`")),
            e => PipelineError::Failed(e.to_string()),
        }
    }
}

impl From<VeracityError> for PipelineError {
    fn from(e: VeracityError) -> Self {
        match e {
            VeracityError::MissingClass(id) => PipelineError::Failed(format!("missing veracity label for post `{id}`")),
            e => PipelineError::Failed(e.to_string()),
        }
    }
}

impl From<MetricsError> for PipelineError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Topic(t) => t.into(),
            e => PipelineError::Failed(e.to_string()),
        }
    }
}

pub const INGEST_KEYS: &[&str] = &["input", "out_dir", "keywords", "drop_empty"];
pub const TOPICS_KEYS: &[&str] = &[
    "posts",
    "out_dir",
    "scope",
    "outlier",
    "k",
    "seed",
    "tau",
    "n_init",
    "ngram_max",
    "stopwords",
];
pub const CLASSIFY_KEYS: &[&str] = &[
    "posts",
    "out_dir",
    "training",
    "model",
    "holdout",
    "save_model",
    "epochs",
    "learning_rate",
    "l2",
    "seed",
];
pub const METRICS_KEYS: &[&str] = &[
    "ingest_dir",
    "topics",
    "veracity",
    "out_dir",
    "topic_scope",
    "include_outliers",
    "gini_variant",
];
pub const CORRELATE_KEYS: &[&str] = &[
    "ingest_dir",
    "topics_f",
    "topics_ds",
    "veracity",
    "out_dir",
    "schemes",
    "include_outliers",
    "gini_variant",
];

fn required_path(kv: &KvConfig, key: &str) -> Result<PathBuf, PipelineError> {
    match kv.get(key) {
        Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
        _ => Err(PipelineError::Config(format!("`{key}` is required"))),
    }
}

fn out_dir(kv: &KvConfig) -> Result<PathBuf, PipelineError> {
    let dir = required_path(kv, "out_dir")?;
    fs::create_dir_all(&dir).map_err(|e| PipelineError::Config(format!("out_dir {}: {e}", dir.display())))?;
    Ok(dir)
}

fn existing(path: PathBuf, key: &str) -> Result<PathBuf, PipelineError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(PipelineError::Config(format!(
            "`{key}`: no such file {}",
            path.display()
        )))
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, PipelineError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn finish(mut manifest: Manifest, dir: &Path, outputs: &[String]) -> Result<Manifest, PipelineError> {
    manifest.add_outputs(dir, outputs)?;
    manifest.write(dir)?;
    Ok(manifest)
}

/// Read dumps, filter communities, and stage posts plus weekly bins.
///
/// Outputs: `posts.ndjson`, `bins.csv`, `index.csv`, `census.csv`.
pub fn cmd_ingest(kv: &KvConfig) -> Result<Manifest, PipelineError> {
    kv.check_keys(INGEST_KEYS)?;
    let inputs: Vec<PathBuf> = kv
        .list("input")
        .unwrap_or_default()
        .into_iter()
        .map(PathBuf::from)
        .collect();
    if inputs.is_empty() {
        return Err(PipelineError::Config("`input` is required".into()));
    }
    let inputs = inputs
        .into_iter()
        .map(|p| existing(p, "input"))
        .collect::<Result<Vec<_>, _>>()?;
    let filter = match kv.list("keywords") {
        Some(k) => Some(CommunityFilter::new(&k).map_err(|e| PipelineError::Config(e.to_string()))?),
        None => None,
    };
    let drop_empty: bool = kv.parse_or("drop_empty", false)?;
    let dir = out_dir(kv)?;

    let mut settings = KvConfig::default();
    settings.set(
        "keywords",
        filter.as_ref().map(|f| f.keywords().join(",")).unwrap_or_default(),
    );
    settings.set("drop_empty", drop_empty.to_string());
    let mut manifest = Manifest::new("ingest", settings);
    for (i, p) in inputs.iter().enumerate() {
        manifest.add_input(&format!("dump.{}", i + 1), p)?;
    }

    let opts = IngestOptions {
        filter,
        empty_text: if drop_empty {
            EmptyTextPolicy::Drop
        } else {
            EmptyTextPolicy::Keep
        },
    };
    let mut seen = HashSet::new();
    let mut stats = IngestStats::default();
    let mut acc = BinAccumulator::default();
    let mut counts: HashMap<String, usize> = HashMap::new();
    let posts_path = dir.join(POSTS_FILE);
    let mut posts_out = create(&dir, POSTS_FILE)?;
    for path in &inputs {
        let reader = open_input(path)?;
        ingest_reader(reader, &opts, &mut seen, &mut stats, |p| {
            acc.push(&p.id, &p.community, p.created_utc);
            *counts.entry(p.community.clone()).or_default() += 1;
            write_normalized_post(&mut posts_out, &p)
        })?;
    }
    posts_out.flush()?;
    drop(posts_out);
    log::info!(
        "ingest: {} lines, {} kept, {} filtered out, {} duplicates, {} malformed, {} empty dropped",
        stats.lines,
        stats.kept,
        stats.filtered_out,
        stats.duplicates,
        stats.malformed,
        stats.skipped_empty
    );
    if stats.kept == 0 {
        let _ = fs::remove_file(&posts_path);
        return Err(PipelineError::Empty("no posts matched the community keywords".into()));
    }

    let (global, communities) = acc.finish_all();
    let mut all: Vec<&BinSeries> = vec![&global];
    all.extend(communities.iter());
    write_bins_csv(create(&dir, BINS_FILE)?, &all)?;
    write_index_csv(create(&dir, INDEX_FILE)?, &all)?;
    write_census_csv(create(&dir, CENSUS_FILE)?, &census_from_counts(counts))?;
    let outputs = [POSTS_FILE, BINS_FILE, INDEX_FILE, CENSUS_FILE].map(String::from);
    finish(manifest, &dir, &outputs)
}

/// Label file written by [`cmd_topics`] for a scope.
pub fn topics_file(scope: TopicScope) -> String {
    format!("topics_{scope}.csv")
}

/// Fit the built-in topic model over staged posts.
///
/// Output: `topics_ds.csv` or `topics_f.csv`, with a manifest named after it.
pub fn cmd_topics(kv: &KvConfig) -> Result<Manifest, PipelineError> {
    kv.check_keys(TOPICS_KEYS)?;
    let posts_path = existing(required_path(kv, "posts")?, "posts")?;
    let scope: TopicScope = kv.parse_or("scope", TopicScope::PerCommunity)?;
    let outlier: OutlierReduction = kv.parse_or("outlier", OutlierReduction::None)?;
    let k: KChoice = kv.parse_or("k", KChoice::Auto)?;
    let seed: u64 = kv.parse_or("seed", 0)?;
    let tau: f64 = kv.parse_or("tau", DEFAULT_TAU)?;
    let n_init: usize = kv.parse_or("n_init", DEFAULT_N_INIT)?;
    let ngram_max: usize = kv.parse_or("ngram_max", TextConfig::default().ngram_max)?;
    let stopwords: bool = kv.parse_or("stopwords", true)?;
    if !(-1.0..=1.0).contains(&tau) {
        return Err(PipelineError::Config(format!("tau = {tau} outside [-1, 1]")));
    }
    if ngram_max == 0 {
        return Err(PipelineError::Config("ngram_max must be >= 1".into()));
    }
    if n_init == 0 {
        return Err(PipelineError::Config("n_init must be >= 1".into()));
    }
    let dir = out_dir(kv)?;

    let mut settings = KvConfig::default();
    settings.set("scope", scope.to_string());
    settings.set("outlier", outlier.to_string());
    settings.set("k", kv.get("k").unwrap_or("auto"));
    settings.set("seed", seed.to_string());
    settings.set("tau", tau.to_string());
    settings.set("n_init", n_init.to_string());
    settings.set("ngram_max", ngram_max.to_string());
    settings.set("stopwords", stopwords.to_string());
    let mut manifest = Manifest::new("topics", settings);
    manifest.stem = format!("topics_{scope}");
    manifest.add_input("posts", &posts_path)?;

    let posts = read_normalized_posts(&posts_path)?;
    if posts.is_empty() {
        return Err(PipelineError::Empty("no posts to model".into()));
    }
    let cfg = FitConfig {
        scope,
        k,
        seed,
        tau,
        n_init,
        text: TextConfig {
            ngram_max,
            remove_stopwords: stopwords,
        },
    };
    let model = fit_topics(&posts, &cfg)?;
    let assignment = model.reduce_outliers(outlier);
    log::info!(
        "topics: {} posts, {} topics, {} outliers",
        assignment.len(),
        assignment.topic_count(),
        assignment.outlier_count()
    );
    let name = topics_file(scope);
    write_topic_labels(create(&dir, &name)?, &assignment)?;
    finish(manifest, &dir, &[name])
}

/// Assign a veracity class to every staged post with the baseline model.
///
/// Exactly one of `training` (a `text,class` CSV) or `model` (a saved
/// artifact) must be given. Output: `veracity.csv`, plus `model.json` when
/// `save_model` is set and `classification_report.csv` when a `holdout`
/// set is given.
pub fn cmd_classify(kv: &KvConfig) -> Result<Manifest, PipelineError> {
    kv.check_keys(CLASSIFY_KEYS)?;
    let posts_path = existing(required_path(kv, "posts")?, "posts")?;
    let training = kv.get("training").filter(|s| !s.is_empty()).map(PathBuf::from);
    let model_path = kv.get("model").filter(|s| !s.is_empty()).map(PathBuf::from);
    let holdout = kv.get("holdout").filter(|s| !s.is_empty()).map(PathBuf::from);
    let save_model: bool = kv.parse_or("save_model", false)?;
    let d = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: kv.parse_or("epochs", d.epochs)?,
        learning_rate: kv.parse_or("learning_rate", d.learning_rate)?,
        l2: kv.parse_or("l2", d.l2)?,
        seed: kv.parse_or("seed", d.seed)?,
    };
    let dir = out_dir(kv)?;

    let mut settings = KvConfig::default();
    settings.set("save_model", save_model.to_string());
    let mut manifest;
    let model = match (training, model_path) {
        (Some(t), None) => {
            let t = existing(t, "training")?;
            settings.set("source", "training");
            settings.set("epochs", train_cfg.epochs.to_string());
            settings.set("learning_rate", train_cfg.learning_rate.to_string());
            settings.set("l2", train_cfg.l2.to_string());
            settings.set("seed", train_cfg.seed.to_string());
            manifest = Manifest::new("classify", settings);
            manifest.add_input("training", &t)?;
            let rows = read_training_csv(File::open(&t)?)?;
            train_baseline(&rows, &train_cfg)?
        }
        (None, Some(m)) => {
            let m = existing(m, "model")?;
            settings.set("source", "model");
            manifest = Manifest::new("classify", settings);
            manifest.add_input("model", &m)?;
            BaselineModel::load(File::open(&m)?)?
        }
        _ => {
            return Err(PipelineError::Config(
                "exactly one of `training` or `model` must be given".into(),
            ))
        }
    };
    manifest.add_input("posts", &posts_path)?;

    let posts = read_normalized_posts(&posts_path)?;
    let labels: Vec<(String, Class)> = posts
        .par_iter()
        .map(|p| (p.id.clone(), model.classify(&p.text)))
        .collect();
    let assignment = VeracityAssignment::new(VeracitySource::Builtin, labels);
    let mut outputs = vec![VERACITY_FILE.to_string()];
    write_veracity_labels(create(&dir, VERACITY_FILE)?, &assignment)?;
    if save_model {
        let mut w = create(&dir, MODEL_FILE)?;
        model.save(&mut w)?;
        w.flush()?;
        outputs.push(MODEL_FILE.into());
    }
    if let Some(h) = holdout {
        let h = existing(h, "holdout")?;
        manifest.add_input("holdout", &h)?;
        let rows = read_training_csv(File::open(&h)?)?;
        let golds: Vec<Class> = rows.iter().map(|r| r.1).collect();
        let preds: Vec<Class> = rows.iter().map(|r| model.classify(&r.0)).collect();
        let report = classification_report(&preds, &golds)?;
        let name = "classification_report.csv".to_string();
        let mut out = csv::Writer::from_writer(create(&dir, &name)?);
        out.write_record(["label", "precision", "recall", "f1", "support"])?;
        for r in &report.rows {
            out.write_record([
                r.label.to_string(),
                r.precision.to_string(),
                r.recall.to_string(),
                r.f1.to_string(),
                r.support.to_string(),
            ])?;
        }
        out.write_record([
            "accuracy",
            "",
            "",
            &report.accuracy.to_string(),
            &report.total.to_string(),
        ])?;
        out.flush()?;
        outputs.push(name);
    }
    finish(manifest, &dir, &outputs)
}

/// Staged bins plus the post-to-community map they imply.
struct Staged {
    global: BinSeries,
    communities: Vec<BinSeries>,
    community_of: HashMap<String, String>,
}

fn load_staged(ingest_dir: &Path, manifest: &mut Manifest) -> Result<Staged, PipelineError> {
    let bins_path = existing(ingest_dir.join(BINS_FILE), "ingest_dir")?;
    let index_path = existing(ingest_dir.join(INDEX_FILE), "ingest_dir")?;
    manifest.add_input("bins", &bins_path)?;
    manifest.add_input("index", &index_path)?;
    let series = read_bins(File::open(&bins_path)?, File::open(&index_path)?)?;
    let mut global = None;
    let mut communities = Vec::new();
    for s in series {
        match s.scope {
            Scope::Global => global = Some(s),
            Scope::Community(_) => communities.push(s),
        }
    }
    let global = global.ok_or_else(|| PipelineError::Failed("bins file has no global series".into()))?;
    if communities.is_empty() || global.total_posts() == 0 {
        return Err(PipelineError::Empty("staged bins contain no posts".into()));
    }
    let mut community_of = HashMap::new();
    for s in &communities {
        let name = s.scope.community().unwrap_or_default().to_string();
        for ids in s.bins.values() {
            for id in ids {
                community_of.insert(id.clone(), name.clone());
            }
        }
    }
    Ok(Staged {
        global,
        communities,
        community_of,
    })
}

fn load_topics(
    kv: &KvConfig,
    key: &str,
    scope: TopicScope,
    staged: &Staged,
    manifest: &mut Manifest,
) -> Result<TopicAssignment, PipelineError> {
    let path = existing(required_path(kv, key)?, key)?;
    manifest.add_input(key, &path)?;
    Ok(load_topic_labels(&path, scope, &|id| {
        staged.community_of.get(id).cloned()
    })?)
}

fn load_veracity(kv: &KvConfig, staged: &Staged, manifest: &mut Manifest) -> Result<VeracityAssignment, PipelineError> {
    let path = existing(required_path(kv, "veracity")?, "veracity")?;
    manifest.add_input("veracity", &path)?;
    Ok(load_veracity_labels(&path, &|id| staged.community_of.contains_key(id))?)
}

fn overload_flags(kv: &KvConfig, settings: &mut KvConfig) -> Result<OverloadFlags, PipelineError> {
    let include_outliers: bool = kv.parse_or("include_outliers", false)?;
    let variant: GiniVariant = kv.parse_or("gini_variant", GiniVariant::Exact)?;
    settings.set("include_outliers", include_outliers.to_string());
    settings.set("gini_variant", variant.to_string());
    Ok(OverloadFlags {
        include_outliers,
        variant,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn week_cells(scope: &str, w: &WeekKey) -> [String; 3] {
    [scope.to_string(), w.iso_year.to_string(), w.iso_week.to_string()]
}

/// Per-week values of one panel quantity across communities.
type PanelValues = BTreeMap<WeekKey, Vec<f64>>;

/// `mean ± 1.96 sd / sqrt(n)` with the sample standard deviation. The band
/// is undefined for fewer than two values.
pub fn mean_ci(values: &[f64]) -> Option<(f64, Option<(f64, f64)>)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some((mean, None));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = Z95 * var.sqrt() / (n as f64).sqrt();
    Some((mean, Some((mean - half, mean + half))))
}

/// Weekly panel data for the overload and veracity figures.
///
/// Per scope (global first, then communities by name): `panel_a_posts.csv`,
/// `panel_b_topics.csv`, `panel_c_ratio.csv`, `panel_d_gini.csv`,
/// `panel_e_veracity.csv`. `panel_aggregate.csv` holds the across-community
/// mean and 95% band per week.
pub fn cmd_metrics(kv: &KvConfig) -> Result<Manifest, PipelineError> {
    kv.check_keys(METRICS_KEYS)?;
    let ingest_dir = required_path(kv, "ingest_dir")?;
    let topic_scope: TopicScope = kv.parse_or("topic_scope", TopicScope::PerCommunity)?;
    let mut settings = KvConfig::default();
    settings.set("topic_scope", topic_scope.to_string());
    let flags = overload_flags(kv, &mut settings)?;
    required_path(kv, "topics")?;
    required_path(kv, "veracity")?;
    let dir = out_dir(kv)?;

    let mut manifest = Manifest::new("metrics", settings);
    let staged = load_staged(&ingest_dir, &mut manifest)?;
    let topics = load_topics(kv, "topics", topic_scope, &staged, &mut manifest)?;
    let veracity = load_veracity(kv, &staged, &mut manifest)?;

    let mut scopes: Vec<&BinSeries> = vec![&staged.global];
    scopes.extend(staged.communities.iter());
    let computed: Vec<(OverloadSeries, FakeFractionSeries)> = scopes
        .par_iter()
        .map(|b| -> Result<_, PipelineError> {
            Ok((overload_series(&topics, b, flags)?, fake_fraction(&veracity, b)?))
        })
        .collect::<Result<_, _>>()?;

    let mut a = csv::Writer::from_writer(create(&dir, "panel_a_posts.csv")?);
    let mut b = csv::Writer::from_writer(create(&dir, "panel_b_topics.csv")?);
    let mut c = csv::Writer::from_writer(create(&dir, "panel_c_ratio.csv")?);
    let mut d = csv::Writer::from_writer(create(&dir, "panel_d_gini.csv")?);
    let mut e = csv::Writer::from_writer(create(&dir, "panel_e_veracity.csv")?);
    a.write_record(["scope", "iso_year", "iso_week", "post_count"])?;
    b.write_record(["scope", "iso_year", "iso_week", "topic_count"])?;
    c.write_record(["scope", "iso_year", "iso_week", "ratio"])?;
    d.write_record(["scope", "iso_year", "iso_week", "gini", "entropy"])?;
    e.write_record(["scope", "iso_year", "iso_week", "fake", "true", "unverified"])?;

    let panels = ["posts", "topics", "ratio", "gini", "fake", "true", "unverified"];
    let mut agg: BTreeMap<&str, PanelValues> = BTreeMap::new();
    for (overload, fractions) in &computed {
        let scope = overload.scope.to_string();
        let is_community = overload.scope.community().is_some();
        for (w, entry) in &overload.weeks {
            let cells = week_cells(&scope, w);
            let m = entry.metrics.as_ref();
            let fr = fractions.weeks.get(w).copied().flatten();
            a.write_record(cells.iter().cloned().chain([entry.post_count.to_string()]))?;
            b.write_record(
                cells
                    .iter()
                    .cloned()
                    .chain([m.map(|m| m.topics.to_string()).unwrap_or_default()]),
            )?;
            c.write_record(cells.iter().cloned().chain([opt(m.map(|m| m.ratio))]))?;
            d.write_record(
                cells
                    .iter()
                    .cloned()
                    .chain([opt(m.map(|m| m.gini)), opt(m.map(|m| m.entropy))]),
            )?;
            e.write_record(cells.iter().cloned().chain([
                opt(fr.map(|f| f.fake)),
                opt(fr.map(|f| f.true_)),
                opt(fr.map(|f| f.unverified)),
            ]))?;
            if !is_community {
                continue;
            }
            let values = [
                Some(entry.post_count as f64),
                m.map(|m| m.topics as f64),
                m.map(|m| m.ratio),
                m.map(|m| m.gini),
                fr.map(|f| f.fake),
                fr.map(|f| f.true_),
                fr.map(|f| f.unverified),
            ];
            for (p, v) in panels.iter().zip(values) {
                if let Some(v) = v {
                    agg.entry(p).or_default().entry(*w).or_default().push(v);
                }
            }
        }
    }
    for w in [&mut a, &mut b, &mut c, &mut d, &mut e] {
        w.flush()?;
    }

    let mut out = csv::Writer::from_writer(create(&dir, AGGREGATE_FILE)?);
    out.write_record(["panel", "iso_year", "iso_week", "n", "mean", "ci_low", "ci_high"])?;
    for p in panels {
        let Some(weeks) = agg.get(p) else { continue };
        for (w, values) in weeks {
            let Some((mean, band)) = mean_ci(values) else { continue };
            out.write_record(week_cells(p, w).into_iter().chain([
                values.len().to_string(),
                mean.to_string(),
                opt(band.map(|b| b.0)),
                opt(band.map(|b| b.1)),
            ]))?;
        }
    }
    out.flush()?;

    let outputs = [
        "panel_a_posts.csv",
        "panel_b_topics.csv",
        "panel_c_ratio.csv",
        "panel_d_gini.csv",
        "panel_e_veracity.csv",
        AGGREGATE_FILE,
    ]
    .map(String::from);
    finish(manifest, &dir, &outputs)
}

pub fn correlation_file(s: Scheme) -> String {
    format!("correlation_{s}.csv")
}

/// Per-community correlation of fake fraction against Gini for each
/// requested scheme. Output: `correlation_<scheme>.csv`.
pub fn cmd_correlate(kv: &KvConfig) -> Result<Manifest, PipelineError> {
    kv.check_keys(CORRELATE_KEYS)?;
    let ingest_dir = required_path(kv, "ingest_dir")?;
    let mut schemes: Vec<Scheme> = kv
        .list("schemes")
        .unwrap_or_else(|| vec!["a".into(), "b".into(), "c".into()])
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()
        .map_err(|e: CorrelateError| PipelineError::Config(e.to_string()))?;
    schemes.sort();
    schemes.dedup();
    if schemes.is_empty() {
        return Err(PipelineError::Config("`schemes` is empty".into()));
    }
    let needs_f = schemes.iter().any(|s| s.scopes().topic_scope == TopicScope::Global);
    let needs_ds = schemes
        .iter()
        .any(|s| s.scopes().topic_scope == TopicScope::PerCommunity);
    let mut settings = KvConfig::default();
    settings.set(
        "schemes",
        schemes.iter().map(Scheme::to_string).collect::<Vec<_>>().join(","),
    );
    let flags = overload_flags(kv, &mut settings)?;
    if needs_f {
        required_path(kv, "topics_f")?;
    }
    if needs_ds {
        required_path(kv, "topics_ds")?;
    }
    required_path(kv, "veracity")?;
    let dir = out_dir(kv)?;

    let mut manifest = Manifest::new("correlate", settings);
    let staged = load_staged(&ingest_dir, &mut manifest)?;
    let global_topics = if needs_f {
        Some(load_topics(kv, "topics_f", TopicScope::Global, &staged, &mut manifest)?)
    } else {
        None
    };
    let community_topics = if needs_ds {
        Some(load_topics(
            kv,
            "topics_ds",
            TopicScope::PerCommunity,
            &staged,
            &mut manifest,
        )?)
    } else {
        None
    };
    let veracity = load_veracity(kv, &staged, &mut manifest)?;
    let inputs = SchemeInputs {
        global_bins: &staged.global,
        community_bins: &staged.communities,
        global_topics: global_topics.as_ref(),
        community_topics: community_topics.as_ref(),
        veracity: &veracity,
        flags,
    };

    let mut outputs = Vec::new();
    for s in schemes {
        let results = run_scheme(s, &inputs)?;
        let significant = results.iter().filter(|r| r.significant).count();
        log::info!("scheme {s}: {significant} of {} communities significant", results.len());
        let name = correlation_file(s);
        write_correlation_csv(create(&dir, &name)?, &results)?;
        outputs.push(name);
    }
    finish(manifest, &dir, &outputs)
}

/// Generate a synthetic corpus with ground-truth labels.
///
/// Outputs: `posts.ndjson` (dump format), `topics_truth.csv`,
/// `veracity_truth.csv`, `training.csv`, `truth.csv`.
pub fn cmd_synth(kv: &KvConfig) -> Result<Manifest, PipelineError> {
    let mut synth_kv = KvConfig::default();
    for (k, v) in kv.iter().filter(|(k, _)| *k != "out_dir") {
        synth_kv.set(k, v);
    }
    let cfg = SynthConfig::from_kv(&synth_kv)?;
    let dir = out_dir(kv)?;
    let manifest = Manifest::new("synth", cfg.to_kv());

    let data = gen_stream(&cfg)?;
    data.write_dump(create(&dir, POSTS_FILE)?)?;
    write_topic_labels(create(&dir, "topics_truth.csv")?, &data.topics)?;
    write_veracity_labels(create(&dir, "veracity_truth.csv")?, &data.veracity)?;
    write_training_csv(create(&dir, "training.csv")?, &data.training)?;
    data.write_truth_csv(create(&dir, "truth.csv")?)?;
    let clipped: usize = data.clipped.values().sum();
    if clipped > 0 {
        log::warn!("synth: {clipped} planted fake fractions were clipped to [0, 1]");
    }
    let outputs = [
        POSTS_FILE,
        "topics_truth.csv",
        "veracity_truth.csv",
        "training.csv",
        "truth.csv",
    ]
    .map(String::from);
    finish(manifest, &dir, &outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_band() {
        let (m, band) = mean_ci(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        let (lo, hi) = band.unwrap();
        assert!((hi - 2.0 - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        assert!((2.0 - lo - (hi - 2.0)).abs() < 1e-12);
        assert_eq!(mean_ci(&[4.0]).unwrap(), (4.0, None));
        assert!(mean_ci(&[]).is_none());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Empty("x".into()).exit_code(), 2);
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 1);
    }
}
