//! Information-overload measurement for time-binned post streams.
//!
//! The pipeline ingests Pushshift-style dumps into weekly bins, assigns
//! topics and veracity classes, computes per-week topic inequality (Gini
//! index) and fake-news fractions, and correlates the two per community.
//!
//! Modules map onto the stages:
//!
//! - [`ingest`]: dump parsing, community filtering, ISO-week binning
//! - [`topic_model`]: built-in topic model and label interchange
//! - [`veracity`]: F/T/U labels, baseline classifier, classification reports
//! - [`metrics`]: Gini variants, entropy, weekly overload series
//! - [`correlate`]: Pearson correlation, p-values, scoping schemes
//! - [`synth`]: synthetic streams with planted ground truth
//! - [`pipeline`]: file-staged commands behind the `iol` binary

pub mod config;
pub mod correlate;
pub mod ingest;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod text;
pub mod topic_model;
pub mod veracity;

pub use correlate::{p_value, pearson, CorrelationResult, Scheme};
pub use ingest::{BinSeries, Post, Scope, WeekKey};
pub use metrics::{gini, gini_degenerate_approx, gini_rewritten, shannon_entropy, GiniResult, GiniVariant};
pub use topic_model::{TopicAssignment, TopicHistogram};
pub use veracity::{Class, VeracityAssignment};
