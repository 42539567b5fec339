//! Post-dump ingestion: NDJSON parsing, community keyword filtering, and
//! weekly binning.
//!
//! Records follow the Pushshift submission layout (`id`, `subreddit`,
//! `created_utc`, optional `title` / `selftext`). Weeks are ISO-8601 weeks
//! computed in UTC.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, Weekday};
use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("community keyword list is empty")]
    NoKeywords,
    #[error("invalid scope `{0}`")]
    BadScope(String),
    #[error("line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
}

/// Reason a single dump line could not be turned into a post.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MalformedRecord {
    #[error("not valid JSON: {0}")]
    Json(String),
    #[error("record is not a JSON object")]
    NotObject,
    #[error("missing or invalid field `{0}`")]
    Field(&'static str),
    #[error("negative created_utc {0}")]
    NegativeTimestamp(i64),
    #[error("line is not valid UTF-8")]
    Utf8,
}

/// One ingested document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub community: String,
    pub created_utc: i64,
    pub text: String,
}

impl Post {
    pub fn week(&self) -> WeekKey {
        WeekKey::from_epoch(self.created_utc)
    }
}

/// What to do with records whose text is empty or marked deleted/removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyTextPolicy {
    #[default]
    Keep,
    Drop,
}

/// Result of parsing one line that was well-formed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedLine {
    Post(Post),
    /// Well-formed but rejected by the empty-text policy.
    Skip,
    /// Blank line.
    Blank,
}

const DELETED_MARKERS: [&str; 2] = ["[deleted]", "[removed]"];

fn text_field(obj: &serde_json::Map<String, Value>, key: &str) -> String {
    match obj.get(key) {
        Some(Value::String(s)) => s.clone(),
        _ => String::new(),
    }
}

fn timestamp_field(v: Option<&Value>) -> Option<i64> {
    match v? {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.is_finite()).map(|f| f.trunc() as i64)),
        Value::String(s) => {
            let s = s.trim();
            s.parse::<i64>().ok().or_else(|| {
                s.parse::<f64>()
                    .ok()
                    .filter(|f| f.is_finite())
                    .map(|f| f.trunc() as i64)
            })
        }
        _ => None,
    }
}

/// Parse one NDJSON dump line into a [`Post`].
///
/// `text` is `title` and `selftext` joined by a single space; a missing or
/// empty part contributes nothing.
pub fn parse_post_line(line: &str, policy: EmptyTextPolicy) -> Result<ParsedLine, MalformedRecord> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Ok(ParsedLine::Blank);
    }
    let value: Value = serde_json::from_str(trimmed).map_err(|e| MalformedRecord::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(MalformedRecord::NotObject)?;

    let id = match obj.get("id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        _ => return Err(MalformedRecord::Field("id")),
    };
    let community = match obj.get("subreddit") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        _ => return Err(MalformedRecord::Field("subreddit")),
    };
    let created_utc = timestamp_field(obj.get("created_utc")).ok_or(MalformedRecord::Field("created_utc"))?;
    if created_utc < 0 {
        return Err(MalformedRecord::NegativeTimestamp(created_utc));
    }

    let title = text_field(obj, "title");
    let body = text_field(obj, "selftext");
    if policy == EmptyTextPolicy::Drop {
        let blank = |s: &str| s.trim().is_empty() || DELETED_MARKERS.contains(&s.trim());
        if blank(&title) && blank(&body) {
            return Ok(ParsedLine::Skip);
        }
    }
    let text = match (title.is_empty(), body.is_empty()) {
        (false, false) => format!("{title} {body}"),
        (false, true) => title,
        (true, _) => body,
    };
    Ok(ParsedLine::Post(Post {
        id,
        community,
        created_utc,
        text,
    }))
}

/// Case-insensitive substring match of community names against keywords.
#[derive(Debug, Clone)]
pub struct CommunityFilter {
    keywords: Vec<String>,
}

impl CommunityFilter {
    pub fn new<S: AsRef<str>>(keywords: &[S]) -> Result<Self, IngestError> {
        let keywords: Vec<String> = keywords
            .iter()
            .map(|k| k.as_ref().trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        if keywords.is_empty() {
            return Err(IngestError::NoKeywords);
        }
        Ok(Self { keywords })
    }

    pub fn matches(&self, community: &str) -> bool {
        let name = community.to_lowercase();
        self.keywords.iter().any(|k| name.contains(k.as_str()))
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }
}

/// Keep only posts whose community matches at least one keyword.
pub fn filter_communities<'a, I>(posts: I, filter: &'a CommunityFilter) -> impl Iterator<Item = Post> + 'a
where
    I: IntoIterator<Item = Post>,
    I::IntoIter: 'a,
{
    posts.into_iter().filter(move |p| filter.matches(&p.community))
}

/// ISO-8601 week identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeekKey {
    pub iso_year: i32,
    pub iso_week: u32,
}

impl WeekKey {
    pub fn new(iso_year: i32, iso_week: u32) -> Option<Self> {
        NaiveDate::from_isoywd_opt(iso_year, iso_week, Weekday::Mon).map(|_| Self { iso_year, iso_week })
    }

    /// Week containing the given UTC epoch second.
    pub fn from_epoch(secs: i64) -> Self {
        let dt = DateTime::from_timestamp(secs, 0).expect("timestamp within chrono range");
        let iw = dt.iso_week();
        Self {
            iso_year: iw.year(),
            iso_week: iw.week(),
        }
    }

    pub fn monday(&self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.iso_year, self.iso_week, Weekday::Mon).expect("valid ISO week")
    }

    /// Epoch second at which this week starts (Monday 00:00 UTC).
    pub fn start_epoch(&self) -> i64 {
        self.monday().and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()
    }

    pub fn next(&self) -> Self {
        let d = self.monday() + chrono::Duration::days(7);
        let iw = d.iso_week();
        Self {
            iso_year: iw.year(),
            iso_week: iw.week(),
        }
    }

    /// Every week from `self` through `last`, inclusive.
    pub fn range_inclusive(self, last: WeekKey) -> Vec<WeekKey> {
        let mut out = Vec::new();
        let mut w = self;
        while w <= last {
            out.push(w);
            w = w.next();
        }
        out
    }
}

impl fmt::Display for WeekKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.iso_year, self.iso_week)
    }
}

/// Whole dataset or a single community.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Global,
    Community(String),
}

impl Scope {
    pub fn community(&self) -> Option<&str> {
        match self {
            Scope::Global => None,
            Scope::Community(c) => Some(c),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Community(c) => write!(f, "community:{c}"),
        }
    }
}

impl std::str::FromStr for Scope {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "global" {
            Ok(Scope::Global)
        } else if let Some(c) = s.strip_prefix("community:") {
            Ok(Scope::Community(c.to_string()))
        } else {
            Err(IngestError::BadScope(s.to_string()))
        }
    }
}

/// How [`bin_weekly`] partitions posts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinMode {
    Global,
    PerCommunity,
}

/// Weekly bins of post ids for one scope. Weeks between the first and last
/// observed week are always present, possibly with no posts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinSeries {
    pub scope: Scope,
    pub bins: BTreeMap<WeekKey, Vec<String>>,
}

impl BinSeries {
    pub fn empty(scope: Scope) -> Self {
        Self {
            scope,
            bins: BTreeMap::new(),
        }
    }

    pub fn post_count(&self, week: &WeekKey) -> usize {
        self.bins.get(week).map_or(0, Vec::len)
    }

    pub fn total_posts(&self) -> usize {
        self.bins.values().map(Vec::len).sum()
    }

    pub fn weeks(&self) -> impl Iterator<Item = &WeekKey> {
        self.bins.keys()
    }

    /// Merge another partial series of the same scope and re-materialize gaps.
    pub fn merge(&mut self, other: BinSeries) {
        assert_eq!(self.scope, other.scope, "merging series of different scopes");
        for (week, ids) in other.bins {
            self.bins.entry(week).or_default().extend(ids);
        }
        for ids in self.bins.values_mut() {
            ids.sort();
        }
        self.fill_gaps();
    }

    fn fill_gaps(&mut self) {
        let (Some(&first), Some(&last)) = (self.bins.keys().next(), self.bins.keys().next_back()) else {
            return;
        };
        for w in first.range_inclusive(last) {
            self.bins.entry(w).or_default();
        }
    }
}

/// Streaming accumulator behind [`bin_weekly`].
#[derive(Debug, Default)]
pub struct BinAccumulator {
    global: BTreeMap<WeekKey, Vec<String>>,
    communities: BTreeMap<String, BTreeMap<WeekKey, Vec<String>>>,
}

impl BinAccumulator {
    pub fn push(&mut self, id: &str, community: &str, created_utc: i64) {
        let week = WeekKey::from_epoch(created_utc);
        self.global.entry(week).or_default().push(id.to_string());
        self.communities
            .entry(community.to_string())
            .or_default()
            .entry(week)
            .or_default()
            .push(id.to_string());
    }

    pub fn finish(self, mode: BinMode) -> Vec<BinSeries> {
        let finish_one = |scope: Scope, bins: BTreeMap<WeekKey, Vec<String>>| {
            let mut s = BinSeries { scope, bins };
            for ids in s.bins.values_mut() {
                ids.sort();
            }
            s.fill_gaps();
            s
        };
        match mode {
            BinMode::Global => vec![finish_one(Scope::Global, self.global)],
            BinMode::PerCommunity => self
                .communities
                .into_iter()
                .map(|(c, bins)| finish_one(Scope::Community(c), bins))
                .collect(),
        }
    }

    /// Global series followed by every community series.
    pub fn finish_all(self) -> (BinSeries, Vec<BinSeries>) {
        let Self { global, communities } = self;
        let g = BinAccumulator {
            global,
            communities: BTreeMap::new(),
        }
        .finish(BinMode::Global)
        .pop()
        .unwrap();
        let c = BinAccumulator {
            global: BTreeMap::new(),
            communities,
        }
        .finish(BinMode::PerCommunity);
        (g, c)
    }
}

/// Assign each post to the ISO week of its UTC timestamp.
///
/// An empty input gives a single empty global series (global mode) or no
/// series at all (per-community mode).
pub fn bin_weekly<'a, I>(posts: I, mode: BinMode) -> Vec<BinSeries>
where
    I: IntoIterator<Item = &'a Post>,
{
    let mut acc = BinAccumulator::default();
    for p in posts {
        acc.push(&p.id, &p.community, p.created_utc);
    }
    acc.finish(mode)
}

/// Post count per community, largest first (ties by name).
pub fn community_census<'a, I>(posts: I) -> Vec<(String, usize)>
where
    I: IntoIterator<Item = &'a Post>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for p in posts {
        *counts.entry(p.community.as_str()).or_default() += 1;
    }
    census_from_counts(counts.into_iter().map(|(k, v)| (k.to_string(), v)))
}

pub fn census_from_counts(counts: impl IntoIterator<Item = (String, usize)>) -> Vec<(String, usize)> {
    let mut table: Vec<(String, usize)> = counts.into_iter().collect();
    table.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    table
}

/// Counters accumulated while reading dumps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub lines: usize,
    pub blank: usize,
    pub malformed: usize,
    pub skipped_empty: usize,
    pub duplicates: usize,
    pub filtered_out: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub filter: Option<CommunityFilter>,
    pub empty_text: EmptyTextPolicy,
}

/// Open a dump file, transparently decompressing gzip input.
pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Single-pass ingestion fold: parse, drop duplicates, filter.
///
/// `sink` receives every accepted post in input order. Malformed lines are
/// logged and counted, never fatal.
pub fn ingest_reader<R: BufRead>(
    mut reader: R,
    opts: &IngestOptions,
    seen: &mut HashSet<String>,
    stats: &mut IngestStats,
    mut sink: impl FnMut(Post) -> io::Result<()>,
) -> io::Result<()> {
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        stats.lines += 1;
        let parsed = match std::str::from_utf8(&buf) {
            Ok(line) => parse_post_line(line, opts.empty_text),
            Err(_) => Err(MalformedRecord::Utf8),
        };
        let post = match parsed {
            Ok(ParsedLine::Post(p)) => p,
            Ok(ParsedLine::Blank) => {
                stats.blank += 1;
                continue;
            }
            Ok(ParsedLine::Skip) => {
                stats.skipped_empty += 1;
                continue;
            }
            Err(e) => {
                stats.malformed += 1;
                log::warn!("line {}: malformed record skipped: {e}", stats.lines);
                continue;
            }
        };
        if let Some(f) = &opts.filter {
            if !f.matches(&post.community) {
                stats.filtered_out += 1;
                continue;
            }
        }
        if !seen.insert(post.id.clone()) {
            stats.duplicates += 1;
            continue;
        }
        stats.kept += 1;
        sink(post)?;
    }
    Ok(())
}

/// Read a whole dump into memory.
pub fn read_posts<R: BufRead>(reader: R, opts: &IngestOptions) -> io::Result<(Vec<Post>, IngestStats)> {
    let mut posts = Vec::new();
    let mut stats = IngestStats::default();
    let mut seen = HashSet::new();
    ingest_reader(reader, opts, &mut seen, &mut stats, |p| {
        posts.push(p);
        Ok(())
    })?;
    Ok((posts, stats))
}

/// Read a normalized posts file (one serialized [`Post`] per line).
pub fn read_normalized_posts(path: &Path) -> Result<Vec<Post>, IngestError> {
    let reader = open_input(path)?;
    let mut posts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post: Post = serde_json::from_str(&line).map_err(|e| IngestError::BadRecord {
            line: i + 1,
            msg: e.to_string(),
        })?;
        posts.push(post);
    }
    Ok(posts)
}

pub fn write_normalized_post<W: Write>(w: &mut W, post: &Post) -> io::Result<()> {
    serde_json::to_writer(&mut *w, post)?;
    w.write_all(b"\n")
}

/// Write a dump line in the Pushshift layout that [`parse_post_line`] reads.
pub fn write_dump_line<W: Write>(w: &mut W, post: &Post, title: &str, selftext: &str) -> io::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        subreddit: &'a str,
        created_utc: i64,
        title: &'a str,
        selftext: &'a str,
    }
    serde_json::to_writer(
        &mut *w,
        &Line {
            id: &post.id,
            subreddit: &post.community,
            created_utc: post.created_utc,
            title,
            selftext,
        },
    )?;
    w.write_all(b"\n")
}

/// `scope,iso_year,iso_week,post_count`
pub fn write_bins_csv<W: Write>(w: W, series: &[&BinSeries]) -> Result<(), IngestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scope", "iso_year", "iso_week", "post_count"])?;
    for s in series {
        let scope = s.scope.to_string();
        for (week, ids) in &s.bins {
            out.write_record([
                scope.clone(),
                week.iso_year.to_string(),
                week.iso_week.to_string(),
                ids.len().to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `scope,iso_year,iso_week,post_id`, one row per binned post.
pub fn write_index_csv<W: Write>(w: W, series: &[&BinSeries]) -> Result<(), IngestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scope", "iso_year", "iso_week", "post_id"])?;
    for s in series {
        let scope = s.scope.to_string();
        for (week, ids) in &s.bins {
            let (y, wk) = (week.iso_year.to_string(), week.iso_week.to_string());
            for id in ids {
                out.write_record([scope.as_str(), &y, &wk, id])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_bins_csv`] + [`write_index_csv`]: rebuild series from
/// the two files. Zero-count weeks come from the bins file.
pub fn read_bins(bins: impl Read, index: impl Read) -> Result<Vec<BinSeries>, IngestError> {
    let mut series: BTreeMap<Scope, BTreeMap<WeekKey, Vec<String>>> = BTreeMap::new();
    let week_of = |line: usize, y: &str, w: &str| -> Result<WeekKey, IngestError> {
        let bad = || IngestError::BadRecord {
            line,
            msg: format!("invalid week {y}-{w}"),
        };
        WeekKey::new(y.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?).ok_or_else(bad)
    };
    let mut r = csv::Reader::from_reader(bins);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let scope: Scope = rec[0].parse()?;
        let week = week_of(i + 2, &rec[1], &rec[2])?;
        series.entry(scope).or_default().entry(week).or_default();
    }
    let mut r = csv::Reader::from_reader(index);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let scope: Scope = rec[0].parse()?;
        let week = week_of(i + 2, &rec[1], &rec[2])?;
        series
            .entry(scope)
            .or_default()
            .entry(week)
            .or_default()
            .push(rec[3].to_string());
    }
    Ok(series
        .into_iter()
        .map(|(scope, bins)| {
            let mut s = BinSeries { scope, bins };
            s.fill_gaps();
            s
        })
        .collect())
}

/// `community,post_count`
pub fn write_census_csv<W: Write>(w: W, census: &[(String, usize)]) -> Result<(), IngestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["community", "post_count"])?;
    for (c, n) in census {
        out.write_record([c.as_str(), &n.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
