//! Information-overload metrics over topic-size histograms: posts, topics,
//! topics-per-post, the Gini index and Shannon entropy.
//!
//! For sizes `x_1 <= ... <= x_TC` summing to `PC` the Gini index is
//!
//! ```text
//! G = sum_i (2i - TC - 1) x_i / (TC * PC)
//!   = 2 sum_i i x_i / (TC * PC) - (TC + 1) / TC
//! ```
//!
//! and lies in `[0, 1 - 1/TC]`. When one topic holds everything but
//! `TC - 1` singletons, `G ~ 1 - TC/PC`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{BinSeries, Scope, WeekKey};
use crate::topic_model::{topic_histogram, TopicAssignment, TopicError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty histogram")]
    EmptyHistogram,
    #[error("histogram contains a zero count")]
    ZeroCount,
    #[error("topic count {tc} exceeds post count {pc}")]
    TopicsExceedPosts { tc: u64, pc: u64 },
    #[error("unknown Gini variant `{0}`")]
    BadVariant(String),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GiniVariant {
    #[default]
    Exact,
    Rewritten,
    DegenerateApprox,
    /// `G * TC / (TC - 1)`, spanning the full `[0, 1]` range.
    BiasCorrected,
}

impl fmt::Display for GiniVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GiniVariant::Exact => "exact",
            GiniVariant::Rewritten => "rewritten",
            GiniVariant::DegenerateApprox => "approx",
            GiniVariant::BiasCorrected => "bias-corrected",
        })
    }
}

impl FromStr for GiniVariant {
    type Err = MetricsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "rewritten" => Ok(Self::Rewritten),
            "approx" | "degenerate" | "degenerate-approx" => Ok(Self::DegenerateApprox),
            "bias-corrected" | "corrected" => Ok(Self::BiasCorrected),
            _ => Err(MetricsError::BadVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GiniResult {
    pub value: f64,
    pub topics: u64,
    pub posts: u64,
    pub variant: GiniVariant,
}

fn sorted_counts(counts: &[u64]) -> Result<Vec<u64>, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::EmptyHistogram);
    }
    if counts.contains(&0) {
        return Err(MetricsError::ZeroCount);
    }
    let mut x = counts.to_vec();
    x.sort_unstable();
    Ok(x)
}

/// Exact Gini index. Input order does not matter.
///
/// The signed numerator is accumulated in `i128`; the only floating-point
/// step is the final division.
pub fn gini(counts: &[u64]) -> Result<GiniResult, MetricsError> {
    let x = sorted_counts(counts)?;
    let tc = x.len() as i128;
    let mut num: i128 = 0;
    let mut pc: u128 = 0;
    for (i, &xi) in x.iter().enumerate() {
        let rank = i as i128 + 1;
        num += (2 * rank - tc - 1) * xi as i128;
        pc += xi as u128;
    }
    let den = tc as u128 * pc;
    Ok(GiniResult {
        value: num as f64 / den as f64,
        topics: tc as u64,
        posts: pc as u64,
        variant: GiniVariant::Exact,
    })
}

/// Gini index via `2 sum i x_i / (TC PC) - (TC + 1) / TC`; an independent
/// route to the same value as [`gini`].
pub fn gini_rewritten(counts: &[u64]) -> Result<GiniResult, MetricsError> {
    let x = sorted_counts(counts)?;
    let tc = x.len() as f64;
    let weighted: u128 = x.iter().enumerate().map(|(i, &xi)| (i as u128 + 1) * xi as u128).sum();
    let pc: u128 = x.iter().map(|&v| v as u128).sum();
    let value = 2.0 * weighted as f64 / (tc * pc as f64) - (tc + 1.0) / tc;
    Ok(GiniResult {
        value,
        topics: x.len() as u64,
        posts: pc as u64,
        variant: GiniVariant::Rewritten,
    })
}

/// `1 - TC/PC`, the single-dominant-topic approximation.
pub fn gini_degenerate_approx(topics: u64, posts: u64) -> Result<f64, MetricsError> {
    if topics == 0 {
        return Err(MetricsError::EmptyHistogram);
    }
    if topics > posts {
        return Err(MetricsError::TopicsExceedPosts { tc: topics, pc: posts });
    }
    Ok(1.0 - topics as f64 / posts as f64)
}

/// `G * TC / (TC - 1)`; 0 for a single topic.
pub fn gini_bias_corrected(counts: &[u64]) -> Result<GiniResult, MetricsError> {
    let g = gini(counts)?;
    let value = if g.topics > 1 {
        g.value * g.topics as f64 / (g.topics - 1) as f64
    } else {
        0.0
    };
    Ok(GiniResult {
        value,
        variant: GiniVariant::BiasCorrected,
        ..g
    })
}

pub fn gini_variant(counts: &[u64], variant: GiniVariant) -> Result<GiniResult, MetricsError> {
    match variant {
        GiniVariant::Exact => gini(counts),
        GiniVariant::Rewritten => gini_rewritten(counts),
        GiniVariant::BiasCorrected => gini_bias_corrected(counts),
        GiniVariant::DegenerateApprox => {
            let x = sorted_counts(counts)?;
            let pc = x.iter().sum();
            Ok(GiniResult {
                value: gini_degenerate_approx(x.len() as u64, pc)?,
                topics: x.len() as u64,
                posts: pc,
                variant,
            })
        }
    }
}

/// Shannon entropy (nats) of topic shares.
pub fn shannon_entropy(counts: &[u64]) -> Result<f64, MetricsError> {
    let x = sorted_counts(counts)?;
    let pc: u64 = x.iter().sum();
    let pc = pc as f64;
    let h: f64 = x
        .iter()
        .map(|&c| {
            let p = c as f64 / pc;
            -p * p.ln()
        })
        .sum();
    Ok(if h > 0.0 { h } else { 0.0 })
}

/// Metrics of one non-empty week.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeekMetrics {
    pub topics: u64,
    /// Posts in the histogram (outliers excluded unless included by flag).
    pub posts: u64,
    pub ratio: f64,
    pub gini: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverloadEntry {
    /// All binned posts of the week.
    pub post_count: usize,
    /// `None` for a gap week (no posts, or only outliers).
    pub metrics: Option<WeekMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverloadSeries {
    pub scope: Scope,
    pub weeks: BTreeMap<WeekKey, OverloadEntry>,
}

impl OverloadSeries {
    pub fn gini(&self) -> BTreeMap<WeekKey, Option<f64>> {
        self.weeks
            .iter()
            .map(|(w, e)| (*w, e.metrics.map(|m| m.gini)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OverloadFlags {
    pub include_outliers: bool,
    pub variant: GiniVariant,
}

/// Weekly PC, TC, TC/PC, Gini and entropy for one bin series.
pub fn overload_series(
    assignment: &TopicAssignment,
    bins: &BinSeries,
    flags: OverloadFlags,
) -> Result<OverloadSeries, MetricsError> {
    let mut weeks = BTreeMap::new();
    for (week, ids) in &bins.bins {
        let metrics = match topic_histogram(assignment, ids, flags.include_outliers) {
            Ok(h) => {
                let g = gini_variant(h.counts(), flags.variant)?;
                Some(WeekMetrics {
                    topics: h.topic_count() as u64,
                    posts: h.post_count(),
                    ratio: h.topic_count() as f64 / h.post_count() as f64,
                    gini: g.value,
                    entropy: shannon_entropy(h.counts())?,
                })
            }
            Err(TopicError::EmptyBin) => None,
            Err(e) => return Err(e.into()),
        };
        weeks.insert(
            *week,
            OverloadEntry {
                post_count: ids.len(),
                metrics,
            },
        );
    }
    Ok(OverloadSeries {
        scope: bins.scope.clone(),
        weeks,
    })
}

/// `scope,iso_year,iso_week,post_count,topic_count,ratio,gini`; gap weeks
/// leave the metric cells empty.
pub fn write_overload_csv<W: Write>(w: W, series: &[&OverloadSeries]) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scope",
        "iso_year",
        "iso_week",
        "post_count",
        "topic_count",
        "ratio",
        "gini",
    ])?;
    for s in series {
        let scope = s.scope.to_string();
        for (week, e) in &s.weeks {
            let (tc, ratio, g) = match e.metrics {
                Some(m) => (m.topics.to_string(), m.ratio.to_string(), m.gini.to_string()),
                None => Default::default(),
            };
            out.write_record([
                scope.clone(),
                week.iso_year.to_string(),
                week.iso_week.to_string(),
                e.post_count.to_string(),
                tc,
                ratio,
                g,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
