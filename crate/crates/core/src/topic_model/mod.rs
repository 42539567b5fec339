//! Topic assignment: a built-in TF-IDF + spherical k-means model fitted per
//! community (`Ds`) or over the whole dataset (`F`), outlier reduction, and
//! the `post_id,topic_id` label interchange format.
//!
//! Topic ids are global within an assignment. Per-community fits are laid
//! out in consecutive blocks (communities in name order), so a single flat
//! `post_id -> topic_id` map covers both scopes.

pub mod kmeans;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::Post;
use crate::text::{SparseVec, TextConfig, TextError, Vectorizer};

/// Label of a post the model declined to place in any topic.
pub const OUTLIER: i32 = -1;

/// Cosine-similarity floor below which a document becomes an outlier.
pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_N_INIT: usize = 3;

pub const MAX_AUTO_K: usize = 200;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("no posts to fit")]
    NoPosts,
    #[error("empty bin")]
    EmptyBin,
    #[error("empty histogram")]
    EmptyHistogram,
    #[error("post `{0}` has no topic label")]
    MissingLabel(String),
    #[error("line {line}: unknown post id `{id}`")]
    UnknownPost { line: usize, id: String },
    #[error("line {line}: duplicate post id `{id}`")]
    DuplicatePost { line: usize, id: String },
    #[error("line {line}: invalid topic id `{value}`")]
    BadTopic { line: usize, value: String },
    #[error("line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error("invalid setting: {0}")]
    BadSetting(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Fitting unit: one model per community (`Ds`) or one for everything (`F`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopicScope {
    PerCommunity,
    Global,
}

impl fmt::Display for TopicScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopicScope::PerCommunity => "ds",
            TopicScope::Global => "f",
        })
    }
}

impl FromStr for TopicScope {
    type Err = TopicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ds" | "community" | "per-community" => Ok(TopicScope::PerCommunity),
            "f" | "global" => Ok(TopicScope::Global),
            _ => Err(TopicError::BadSetting(format!("topic scope `{s}` (expected ds|f)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutlierReduction {
    None,
    /// Reassign by token-frequency profile (stands in for `Fd`).
    Distribution,
    /// Reassign to the nearest centroid (stands in for `Fe`).
    Centroid,
}

impl fmt::Display for OutlierReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutlierReduction::None => "none",
            OutlierReduction::Distribution => "distribution",
            OutlierReduction::Centroid => "centroid",
        })
    }
}

impl FromStr for OutlierReduction {
    type Err = TopicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "distribution" | "d" => Ok(Self::Distribution),
            "centroid" | "e" | "embedding" => Ok(Self::Centroid),
            _ => Err(TopicError::BadSetting(format!(
                "outlier reduction `{s}` (expected none|distribution|centroid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strategy {
    pub scope: TopicScope,
    pub outlier_reduction: OutlierReduction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopicMethod {
    Builtin(Strategy),
    External(PathBuf),
    GroundTruth,
}

/// Number of clusters per fitted unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    /// `max(2, round(sqrt(n / 2)))`, capped at [`MAX_AUTO_K`].
    Auto,
    Fixed(usize),
}

impl KChoice {
    pub fn resolve(self, n_docs: usize) -> usize {
        match self {
            KChoice::Fixed(k) => k.max(1),
            KChoice::Auto => (((n_docs as f64) / 2.0).sqrt().round() as usize).clamp(2, MAX_AUTO_K),
        }
    }
}

impl FromStr for KChoice {
    type Err = TopicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
            _ => Err(TopicError::BadSetting(format!(
                "k `{s}` (expected auto or a positive integer)"
            ))),
        }
    }
}

/// Post-to-topic labels plus provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicAssignment {
    pub scope: TopicScope,
    pub method: TopicMethod,
    labels: BTreeMap<String, i32>,
}

impl TopicAssignment {
    /// Build from raw labels, compacting topic ids to `0..TC`.
    ///
    /// With [`TopicScope::PerCommunity`], raw ids are namespaced by the
    /// post's community before compaction; `community_of` must know every id.
    pub fn from_raw(
        scope: TopicScope,
        method: TopicMethod,
        raw: impl IntoIterator<Item = (String, i32)>,
        community_of: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, TopicError> {
        let raw: Vec<(String, i32)> = raw.into_iter().collect();
        let key = |id: &str, t: i32| -> Result<(String, i32), TopicError> {
            let ns = match scope {
                TopicScope::Global => String::new(),
                TopicScope::PerCommunity => community_of(id).ok_or_else(|| TopicError::MissingLabel(id.to_string()))?,
            };
            Ok((ns, t))
        };
        let mut keys = BTreeSet::new();
        for (id, t) in &raw {
            if *t != OUTLIER {
                keys.insert(key(id, *t)?);
            }
        }
        let remap: HashMap<(String, i32), i32> = keys.into_iter().enumerate().map(|(i, k)| (k, i as i32)).collect();
        let mut labels = BTreeMap::new();
        for (id, t) in raw {
            let compact = if t == OUTLIER { OUTLIER } else { remap[&key(&id, t)?] };
            labels.insert(id, compact);
        }
        Ok(Self { scope, method, labels })
    }

    pub fn get(&self, post_id: &str) -> Option<i32> {
        self.labels.get(post_id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i32)> {
        self.labels.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Distinct non-outlier topics.
    pub fn topic_count(&self) -> usize {
        self.labels
            .values()
            .filter(|&&t| t != OUTLIER)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.values().filter(|&&t| t == OUTLIER).count()
    }

    pub fn labels(&self) -> &BTreeMap<String, i32> {
        &self.labels
    }
}

/// Post counts per topic, ascending, all positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicHistogram {
    counts: Vec<u64>,
}

impl TopicHistogram {
    /// Sorts ascending and drops zero counts.
    pub fn from_counts(counts: impl IntoIterator<Item = u64>) -> Result<Self, TopicError> {
        let mut counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
        if counts.is_empty() {
            return Err(TopicError::EmptyHistogram);
        }
        counts.sort_unstable();
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of topics, `TC`.
    pub fn topic_count(&self) -> usize {
        self.counts.len()
    }

    /// Number of posts, `PC`.
    pub fn post_count(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histogram of topic sizes over the posts in `bin`.
///
/// Outliers are left out unless `include_outliers`, in which case they form
/// one extra topic.
pub fn topic_histogram<S: AsRef<str>>(
    assignment: &TopicAssignment,
    bin: &[S],
    include_outliers: bool,
) -> Result<TopicHistogram, TopicError> {
    let mut counts: BTreeMap<i32, u64> = BTreeMap::new();
    for id in bin {
        let id = id.as_ref();
        let t = assignment
            .get(id)
            .ok_or_else(|| TopicError::MissingLabel(id.to_string()))?;
        if t == OUTLIER && !include_outliers {
            continue;
        }
        *counts.entry(t).or_default() += 1;
    }
    TopicHistogram::from_counts(counts.into_values()).map_err(|_| TopicError::EmptyBin)
}

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub scope: TopicScope,
    pub k: KChoice,
    pub seed: u64,
    pub tau: f64,
    /// 2-means trials per bisection; the best objective wins.
    pub n_init: usize,
    pub text: TextConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            scope: TopicScope::Global,
            k: KChoice::Auto,
            seed: 0,
            tau: DEFAULT_TAU,
            n_init: DEFAULT_N_INIT,
            text: TextConfig::default(),
        }
    }
}

/// One fitted model (a single community for `Ds`, everything for `F`).
#[derive(Debug, Clone)]
struct FittedUnit {
    post_ids: Vec<String>,
    counts: Vec<SparseVec>,
    rows: Vec<SparseVec>,
    /// Centroids of surviving topics, indexed by local topic id.
    centroids: Vec<Vec<f64>>,
    /// Local labels (`0..centroids.len()` or [`OUTLIER`]).
    local: Vec<i32>,
    offset: i32,
}

/// Result of [`fit_topics`]: the assignment plus what outlier reduction needs.
#[derive(Debug, Clone)]
pub struct TopicModel {
    pub assignment: TopicAssignment,
    units: Vec<FittedUnit>,
}

fn distinct_rows(rows: &[SparseVec]) -> usize {
    let mut seen = BTreeSet::new();
    for r in rows.iter().filter(|r| !r.is_zero()) {
        let sig: Vec<(u32, u64)> = r.idx.iter().zip(&r.val).map(|(&i, v)| (i, v.to_bits())).collect();
        seen.insert(sig);
    }
    seen.len()
}

fn fit_unit(posts: &[&Post], cfg: &FitConfig) -> Result<FittedUnit, TopicError> {
    if posts.is_empty() {
        return Err(TopicError::NoPosts);
    }
    let texts: Vec<&str> = posts.iter().map(|p| p.text.as_str()).collect();
    let (vectorizer, rows) = Vectorizer::fit_transform(&texts, cfg.text)?;
    let counts = texts.iter().map(|t| vectorizer.counts(t)).collect();

    let mut k = cfg.k.resolve(posts.len());
    let distinct = distinct_rows(&rows).max(1);
    if k > distinct {
        log::warn!("k = {k} exceeds {distinct} distinct documents; clamping");
        k = distinct;
    }
    let clustering = kmeans::spherical_kmeans(&rows, vectorizer.vocab_size(), k, cfg.seed, cfg.n_init);

    // Outlier cut, then compact surviving clusters to 0..TC in centroid order.
    let raw: Vec<Option<usize>> = clustering
        .labels
        .iter()
        .zip(&clustering.similarity)
        .map(|(&c, &s)| if k == 1 || s >= cfg.tau { Some(c) } else { None })
        .collect();
    let used: BTreeSet<usize> = raw.iter().flatten().copied().collect();
    let remap: HashMap<usize, i32> = used.iter().enumerate().map(|(i, &c)| (c, i as i32)).collect();
    let centroids = used.iter().map(|&c| clustering.centroids[c].clone()).collect();
    let local = raw.iter().map(|r| r.map_or(OUTLIER, |c| remap[&c])).collect();

    Ok(FittedUnit {
        post_ids: posts.iter().map(|p| p.id.clone()).collect(),
        counts,
        rows,
        centroids,
        local,
        offset: 0,
    })
}

/// Fit the built-in topic model.
pub fn fit_topics(posts: &[Post], cfg: &FitConfig) -> Result<TopicModel, TopicError> {
    if posts.is_empty() {
        return Err(TopicError::NoPosts);
    }
    let groups: Vec<Vec<&Post>> = match cfg.scope {
        TopicScope::Global => vec![posts.iter().collect()],
        TopicScope::PerCommunity => {
            let mut by: BTreeMap<&str, Vec<&Post>> = BTreeMap::new();
            for p in posts {
                by.entry(p.community.as_str()).or_default().push(p);
            }
            by.into_values().collect()
        }
    };
    let mut units = groups
        .par_iter()
        .map(|g| fit_unit(g, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut offset = 0;
    let mut labels = BTreeMap::new();
    for u in &mut units {
        u.offset = offset;
        for (id, &l) in u.post_ids.iter().zip(&u.local) {
            labels.insert(id.clone(), if l == OUTLIER { OUTLIER } else { l + offset });
        }
        offset += u.centroids.len() as i32;
    }
    let assignment = TopicAssignment {
        scope: cfg.scope,
        method: TopicMethod::Builtin(Strategy {
            scope: cfg.scope,
            outlier_reduction: OutlierReduction::None,
        }),
        labels,
    };
    Ok(TopicModel { assignment, units })
}

fn cosine_sparse_dense(row: &SparseVec, dense: &[f64], dense_norm: f64) -> f64 {
    let rn = row.norm();
    if rn == 0.0 || dense_norm == 0.0 {
        return 0.0;
    }
    row.dot_dense(dense) / (rn * dense_norm)
}

/// Highest score wins; ties (including an all-zero document) go to the
/// largest topic, then the lowest id.
fn pick(scores: &[f64], sizes: &[usize]) -> usize {
    let mut best = 0;
    for t in 1..scores.len() {
        let better = scores[t] > scores[best] || (scores[t] == scores[best] && sizes[t] > sizes[best]);
        if better {
            best = t;
        }
    }
    best
}

impl TopicModel {
    /// Reassign every outlier; non-outlier labels are never changed.
    pub fn reduce_outliers(&self, method: OutlierReduction) -> TopicAssignment {
        let mut out = self.assignment.clone();
        if method == OutlierReduction::None {
            return out;
        }
        for u in &self.units {
            let ntopics = u.centroids.len();
            if ntopics == 0 || !u.local.contains(&OUTLIER) {
                continue;
            }
            let mut sizes = vec![0usize; ntopics];
            for &l in u.local.iter().filter(|&&l| l != OUTLIER) {
                sizes[l as usize] += 1;
            }
            let profiles: Vec<(Vec<f64>, f64)> = match method {
                OutlierReduction::Distribution => {
                    let dim = u.centroids[0].len();
                    let mut prof = vec![vec![0.0; dim]; ntopics];
                    for (c, &l) in u.counts.iter().zip(&u.local) {
                        if l != OUTLIER {
                            for (j, v) in c.iter() {
                                prof[l as usize][j] += v;
                            }
                        }
                    }
                    prof.into_iter()
                        .map(|p| {
                            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                            (p, n)
                        })
                        .collect()
                }
                _ => u.centroids.iter().map(|c| (c.clone(), 1.0)).collect(),
            };
            for (i, &l) in u.local.iter().enumerate() {
                if l != OUTLIER {
                    continue;
                }
                let doc = match method {
                    OutlierReduction::Distribution => &u.counts[i],
                    _ => &u.rows[i],
                };
                let scores: Vec<f64> = profiles.iter().map(|(p, n)| cosine_sparse_dense(doc, p, *n)).collect();
                let t = pick(&scores, &sizes) as i32;
                out.labels.insert(u.post_ids[i].clone(), t + u.offset);
            }
        }
        out.method = TopicMethod::Builtin(Strategy {
            scope: self.assignment.scope,
            outlier_reduction: method,
        });
        out
    }
}

/// Share of items whose cluster's majority ground-truth label equals their own.
pub fn cluster_purity<C: Ord, G: Ord + Clone>(pairs: impl IntoIterator<Item = (C, G)>) -> f64 {
    let mut table: BTreeMap<C, BTreeMap<G, usize>> = BTreeMap::new();
    let mut n = 0usize;
    for (c, g) in pairs {
        *table.entry(c).or_default().entry(g).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let majority: usize = table.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    majority as f64 / n as f64
}

/// Write `post_id,topic_id`, rows ordered by post id.
pub fn write_topic_labels<W: Write>(w: W, assignment: &TopicAssignment) -> Result<(), TopicError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["post_id", "topic_id"])?;
    for (id, t) in assignment.iter() {
        out.write_record([id, &t.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Read a `post_id,topic_id` file. `community_of` maps known post ids to
/// their community; ids it does not know are rejected.
pub fn read_topic_labels<R: Read>(
    r: R,
    scope: TopicScope,
    method: TopicMethod,
    community_of: &dyn Fn(&str) -> Option<String>,
) -> Result<TopicAssignment, TopicError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "post_id" || &headers[1] != "topic_id" {
        return Err(TopicError::BadRecord {
            line: 1,
            msg: "expected header `post_id,topic_id`".into(),
        });
    }
    let mut raw: Vec<(String, i32)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != 2 {
            return Err(TopicError::BadRecord {
                line,
                msg: format!("expected 2 fields, got {}", rec.len()),
            });
        }
        let id = rec[0].to_string();
        let topic = match rec[1].trim().parse::<i32>() {
            Ok(t) if t >= OUTLIER => t,
            _ => {
                return Err(TopicError::BadTopic {
                    line,
                    value: rec[1].to_string(),
                })
            }
        };
        if community_of(&id).is_none() {
            return Err(TopicError::UnknownPost { line, id });
        }
        if !seen.insert(id.clone()) {
            return Err(TopicError::DuplicatePost { line, id });
        }
        raw.push((id, topic));
    }
    TopicAssignment::from_raw(scope, method, raw, community_of)
}

pub fn load_topic_labels(
    path: &Path,
    scope: TopicScope,
    community_of: &dyn Fn(&str) -> Option<String>,
) -> Result<TopicAssignment, TopicError> {
    let f = std::fs::File::open(path)?;
    read_topic_labels(f, scope, TopicMethod::External(path.to_path_buf()), community_of)
}
