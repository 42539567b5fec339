//! Per-community Pearson correlation between the weekly fake fraction and
//! the weekly Gini index, with two-sided t-test significance.
//!
//! Three scoping schemes are supported:
//!
//! | scheme | topic model          | fake fraction        |
//! |--------|----------------------|----------------------|
//! | `a`    | whole dataset (`F`)  | whole dataset        |
//! | `b`    | whole dataset (`F`)  | per community        |
//! | `c`    | per community (`Ds`) | per community        |
//!
//! In every scheme `G_t` is computed over each community's own weekly bins.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{BinSeries, WeekKey};
use crate::metrics::{overload_series, MetricsError, OverloadFlags};
use crate::stats;
use crate::topic_model::{TopicAssignment, TopicScope};
use crate::veracity::{fake_fraction, VeracityAssignment, VeracityError};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
pub const MIN_SERIES_LEN: usize = 3;

#[derive(Debug, Error)]
pub enum CorrelateError {
    #[error("insufficient data: {0} paired points (need at least 3)")]
    InsufficientData(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("|rho| = {0} exceeds 1")]
    BadRho(f64),
    #[error("scheme {scheme} needs a {scope} topic assignment")]
    MissingTopics { scheme: String, scope: TopicScope },
    #[error("unknown scheme `{0}`")]
    BadScheme(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Veracity(#[from] VeracityError),
}

/// Sample Pearson correlation of two equal-length series.
pub fn pearson(f: &[f64], g: &[f64]) -> Result<f64, CorrelateError> {
    if f.len() != g.len() {
        return Err(CorrelateError::LengthMismatch(f.len(), g.len()));
    }
    let n = f.len();
    if n < MIN_SERIES_LEN {
        return Err(CorrelateError::InsufficientData(n));
    }
    let mf = f.iter().sum::<f64>() / n as f64;
    let mg = g.iter().sum::<f64>() / n as f64;
    let (mut sfg, mut sff, mut sgg) = (0.0, 0.0, 0.0);
    for (a, b) in f.iter().zip(g) {
        let (da, db) = (a - mf, b - mg);
        sfg += da * db;
        sff += da * da;
        sgg += db * db;
    }
    if sff == 0.0 || sgg == 0.0 {
        return Err(CorrelateError::ZeroVariance);
    }
    Ok((sfg / (sff * sgg).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `rho` over `t_len` pairs, using
/// `t = rho sqrt((T - 2) / (1 - rho^2))` with `T - 2` degrees of freedom.
pub fn p_value(rho: f64, t_len: usize) -> Result<f64, CorrelateError> {
    if t_len < MIN_SERIES_LEN {
        return Err(CorrelateError::InsufficientData(t_len));
    }
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(CorrelateError::BadRho(rho));
    }
    let df = (t_len - 2) as f64;
    if rho.abs() == 1.0 {
        return Ok(0.0);
    }
    // The t tail reduces to I_{1 - rho^2}(df / 2, 1 / 2).
    Ok(stats::inc_beta(df / 2.0, 0.5, 1.0 - rho * rho).clamp(0.0, 1.0))
}

/// Values at weeks where both series are defined, in week order.
pub fn paired(f: &BTreeMap<WeekKey, Option<f64>>, g: &BTreeMap<WeekKey, Option<f64>>) -> (Vec<f64>, Vec<f64>) {
    let mut fs = Vec::new();
    let mut gs = Vec::new();
    for (w, fv) in f {
        if let (Some(fv), Some(Some(gv))) = (fv, g.get(w)) {
            fs.push(*fv);
            gs.push(*gv);
        }
    }
    (fs, gs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    A,
    B,
    C,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::A, Scheme::B, Scheme::C];

    pub fn scopes(self) -> SchemeScopes {
        match self {
            Scheme::A => SchemeScopes {
                topic_scope: TopicScope::Global,
                fake_scope: FakeScope::Global,
            },
            Scheme::B => SchemeScopes {
                topic_scope: TopicScope::Global,
                fake_scope: FakeScope::Community,
            },
            Scheme::C => SchemeScopes {
                topic_scope: TopicScope::PerCommunity,
                fake_scope: FakeScope::Community,
            },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::A => "a",
            Scheme::B => "b",
            Scheme::C => "c",
        })
    }
}

impl FromStr for Scheme {
    type Err = CorrelateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Scheme::A),
            "b" => Ok(Scheme::B),
            "c" => Ok(Scheme::C),
            _ => Err(CorrelateError::BadScheme(s.to_string())),
        }
    }
}

/// Where the fake fraction is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FakeScope {
    Global,
    Community,
}

/// Explicit scope flags behind a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeScopes {
    pub topic_scope: TopicScope,
    pub fake_scope: FakeScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    InsufficientData,
    ZeroVariance,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::InsufficientData => "insufficient_data",
            SkipReason::ZeroVariance => "zero_variance",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub scheme: Scheme,
    pub community: String,
    pub community_size: usize,
    /// Paired weeks used.
    pub t_len: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub skipped: Option<SkipReason>,
}

/// Everything the schemes draw on.
#[derive(Debug, Clone, Copy)]
pub struct SchemeInputs<'a> {
    pub global_bins: &'a BinSeries,
    pub community_bins: &'a [BinSeries],
    /// `F`-scope assignment (schemes a and b).
    pub global_topics: Option<&'a TopicAssignment>,
    /// `Ds`-scope assignment (scheme c).
    pub community_topics: Option<&'a TopicAssignment>,
    pub veracity: &'a VeracityAssignment,
    pub flags: OverloadFlags,
}

/// Correlate each community's two weekly series under `scopes`.
pub fn run_scheme_with(
    scheme: Scheme,
    scopes: SchemeScopes,
    inputs: &SchemeInputs<'_>,
) -> Result<Vec<CorrelationResult>, CorrelateError> {
    let topics = match scopes.topic_scope {
        TopicScope::Global => inputs.global_topics,
        TopicScope::PerCommunity => inputs.community_topics,
    }
    .ok_or(CorrelateError::MissingTopics {
        scheme: scheme.to_string(),
        scope: scopes.topic_scope,
    })?;
    let global_f = match scopes.fake_scope {
        FakeScope::Global => Some(fake_fraction(inputs.veracity, inputs.global_bins)?.fake()),
        FakeScope::Community => None,
    };

    let mut out = Vec::with_capacity(inputs.community_bins.len());
    for bins in inputs.community_bins {
        let community = bins.scope.community().unwrap_or("global").to_string();
        let g = overload_series(topics, bins, inputs.flags)?.gini();
        let f = match &global_f {
            Some(f) => f.clone(),
            None => fake_fraction(inputs.veracity, bins)?.fake(),
        };
        let (fs, gs) = paired(&f, &g);
        let mut r = CorrelationResult {
            scheme,
            community,
            community_size: bins.total_posts(),
            t_len: fs.len(),
            rho: None,
            p_value: None,
            significant: false,
            skipped: None,
        };
        match pearson(&fs, &gs) {
            Ok(rho) => {
                let p = p_value(rho, fs.len())?;
                r.rho = Some(rho);
                r.p_value = Some(p);
                r.significant = p < SIGNIFICANCE_LEVEL;
            }
            Err(CorrelateError::InsufficientData(_)) => r.skipped = Some(SkipReason::InsufficientData),
            Err(CorrelateError::ZeroVariance) => r.skipped = Some(SkipReason::ZeroVariance),
            Err(e) => return Err(e),
        }
        out.push(r);
    }
    Ok(out)
}

pub fn run_scheme(scheme: Scheme, inputs: &SchemeInputs<'_>) -> Result<Vec<CorrelationResult>, CorrelateError> {
    run_scheme_with(scheme, scheme.scopes(), inputs)
}

/// `scheme,community,community_size,T,rho,p_value,significant,skipped_reason`
pub fn write_correlation_csv<W: Write>(w: W, results: &[CorrelationResult]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scheme",
        "community",
        "community_size",
        "T",
        "rho",
        "p_value",
        "significant",
        "skipped_reason",
    ])?;
    for r in results {
        out.write_record([
            r.scheme.to_string(),
            r.community.clone(),
            r.community_size.to_string(),
            r.t_len.to_string(),
            r.rho.map(|v| v.to_string()).unwrap_or_default(),
            r.p_value.map(|v| v.to_string()).unwrap_or_default(),
            r.significant.to_string(),
            r.skipped.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8);
    }

    #[test]
    fn identical_and_mirrored() {
        let g = [0.3, 0.1, 0.7, 0.2, 0.9];
        let anti: Vec<f64> = g.iter().map(|v| 2.0 - v).collect();
        assert!((pearson(&g, &g).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&anti, &g).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(CorrelateError::InsufficientData(2))
        ));
        assert!(matches!(
            pearson(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]),
            Err(CorrelateError::ZeroVariance)
        ));
        assert!(p_value(0.5, 2).is_err());
    }

    #[test]
    fn p_value_edges() {
        assert_eq!(p_value(0.0, 10).unwrap(), 1.0);
        assert_eq!(p_value(1.0, 10).unwrap(), 0.0);
        assert_eq!(p_value(-1.0, 3).unwrap(), 0.0);
        assert!((p_value(0.6319, 10).unwrap() - 0.05).abs() <= 5e-4);
    }

    #[test]
    fn pairing_drops_gaps() {
        let w: Vec<WeekKey> = {
            let mut v = vec![WeekKey::new(2020, 1).unwrap()];
            for _ in 0..3 {
                let n = v.last().unwrap().next();
                v.push(n);
            }
            v
        };
        let f: BTreeMap<_, _> = [(w[0], Some(1.0)), (w[1], None), (w[2], Some(3.0)), (w[3], Some(4.0))].into();
        let g: BTreeMap<_, _> = [(w[0], Some(5.0)), (w[1], Some(6.0)), (w[2], None)].into();
        assert_eq!(paired(&f, &g), (vec![1.0], vec![5.0]));
    }
}
