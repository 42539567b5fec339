//! Python bindings for the overload metrics, correlation, synthetic
//! generator and pipeline commands.

use std::collections::BTreeMap;

use iol_core::config::KvConfig;
use iol_core::ingest::{self, EmptyTextPolicy, ParsedLine};
use iol_core::metrics::{self, GiniVariant};
use iol_core::pipeline::{self, PipelineError};
use iol_core::veracity::baseline::{self, TrainConfig};
use iol_core::veracity::report;
use iol_core::{correlate, synth, Class};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_class(s: &str) -> PyResult<Class> {
    s.parse()
        .map_err(|_| PyValueError::new_err(format!("class must be F, T or U, got `{s}`")))
}

#[pyclass(name = "WeekKey", frozen, eq, ord, hash, from_py_object)]
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct PyWeekKey(ingest::WeekKey);

#[pymethods]
impl PyWeekKey {
    #[new]
    fn new(iso_year: i32, iso_week: u32) -> PyResult<Self> {
        ingest::WeekKey::new(iso_year, iso_week)
            .map(Self)
            .ok_or_else(|| PyValueError::new_err(format!("no ISO week {iso_year}-W{iso_week:02}")))
    }

    /// ISO week of a UTC epoch timestamp in seconds.
    #[staticmethod]
    fn from_epoch(secs: i64) -> Self {
        Self(ingest::WeekKey::from_epoch(secs))
    }

    #[getter]
    fn iso_year(&self) -> i32 {
        self.0.iso_year
    }

    #[getter]
    fn iso_week(&self) -> u32 {
        self.0.iso_week
    }

    fn next(&self) -> Self {
        Self(self.0.next())
    }

    fn start_epoch(&self) -> i64 {
        self.0.start_epoch()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("WeekKey({}, {})", self.0.iso_year, self.0.iso_week)
    }
}

#[pyclass(name = "Post", get_all, from_py_object)]
#[derive(Clone)]
struct PyPost {
    id: String,
    community: String,
    created_utc: i64,
    text: String,
}

#[pymethods]
impl PyPost {
    fn week(&self) -> PyWeekKey {
        PyWeekKey::from_epoch(self.created_utc)
    }

    fn __repr__(&self) -> String {
        format!(
            "Post(id={:?}, community={:?}, created_utc={})",
            self.id, self.community, self.created_utc
        )
    }
}

/// Parse one dump line. Returns `None` for blank lines and for posts
/// rejected by `drop_empty`; raises `ValueError` on malformed records.
#[pyfunction]
#[pyo3(signature = (line, drop_empty = false))]
fn parse_post_line(line: &str, drop_empty: bool) -> PyResult<Option<PyPost>> {
    let policy = if drop_empty {
        EmptyTextPolicy::Drop
    } else {
        EmptyTextPolicy::Keep
    };
    match ingest::parse_post_line(line, policy).map_err(value_err)? {
        ParsedLine::Post(p) => Ok(Some(PyPost {
            id: p.id,
            community: p.community,
            created_utc: p.created_utc,
            text: p.text,
        })),
        ParsedLine::Skip | ParsedLine::Blank => Ok(None),
    }
}

/// Gini index of a topic histogram (zero topics are not allowed).
#[pyfunction]
#[pyo3(signature = (counts, variant = "exact"))]
fn gini(counts: Vec<u64>, variant: &str) -> PyResult<f64> {
    let v: GiniVariant = variant.parse().map_err(value_err)?;
    Ok(metrics::gini_variant(&counts, v).map_err(value_err)?.value)
}

#[pyfunction]
fn gini_rewritten(counts: Vec<u64>) -> PyResult<f64> {
    Ok(metrics::gini_rewritten(&counts).map_err(value_err)?.value)
}

#[pyfunction]
fn gini_degenerate_approx(topics: u64, posts: u64) -> PyResult<f64> {
    metrics::gini_degenerate_approx(topics, posts).map_err(value_err)
}

#[pyfunction]
fn gini_bias_corrected(counts: Vec<u64>) -> PyResult<f64> {
    Ok(metrics::gini_bias_corrected(&counts).map_err(value_err)?.value)
}

/// Shannon entropy in nats.
#[pyfunction]
fn shannon_entropy(counts: Vec<u64>) -> PyResult<f64> {
    metrics::shannon_entropy(&counts).map_err(value_err)
}

#[pyfunction]
fn pearson(f: Vec<f64>, g: Vec<f64>) -> PyResult<f64> {
    correlate::pearson(&f, &g).map_err(value_err)
}

/// Two-sided p-value of a correlation over `t_len` pairs.
#[pyfunction]
fn p_value(rho: f64, t_len: usize) -> PyResult<f64> {
    correlate::p_value(rho, t_len).map_err(value_err)
}

#[pyfunction]
fn f1_score(precision: f64, recall: f64) -> f64 {
    report::f1_score(precision, recall)
}

/// Per-class precision/recall/F1 plus accuracy, keyed by class label.
#[pyfunction]
fn classification_report(
    predictions: Vec<String>,
    golds: Vec<String>,
) -> PyResult<BTreeMap<String, BTreeMap<String, f64>>> {
    let r = report::classification_report(&predictions, &golds).map_err(value_err)?;
    let mut out = BTreeMap::new();
    for row in &r.rows {
        out.insert(
            row.label.clone(),
            BTreeMap::from([
                ("precision".to_string(), row.precision),
                ("recall".to_string(), row.recall),
                ("f1".to_string(), row.f1),
                ("support".to_string(), row.support as f64),
            ]),
        );
    }
    out.insert(
        "accuracy".into(),
        BTreeMap::from([("value".to_string(), r.accuracy), ("total".to_string(), r.total as f64)]),
    );
    Ok(out)
}

/// Dirichlet-multinomial topic counts, sorted ascending, zeros dropped.
#[pyfunction]
#[pyo3(signature = (topics, posts, alpha, seed = 0))]
fn gen_topic_counts(topics: usize, posts: usize, alpha: f64, seed: u64) -> PyResult<Vec<u64>> {
    if topics == 0 || posts == 0 || alpha.is_nan() || alpha <= 0.0 {
        return Err(PyValueError::new_err("topics and posts must be >= 1 and alpha > 0"));
    }
    Ok(synth::gen_topic_counts(topics, posts, alpha, seed).counts().to_vec())
}

/// Fake-fraction series correlated with `g` at `rho`; returns
/// `(values, clipped)`.
#[pyfunction]
#[pyo3(signature = (g, rho, base = 0.35, spread = 0.08, seed = 0))]
fn plant_correlation(g: Vec<f64>, rho: f64, base: f64, spread: f64, seed: u64) -> PyResult<(Vec<f64>, usize)> {
    let p = synth::plant_correlation(&g, rho, base, spread, seed).map_err(value_err)?;
    Ok((p.values, p.clipped))
}

#[pyclass(name = "BaselineModel", frozen)]
struct PyBaselineModel(baseline::BaselineModel);

#[pymethods]
impl PyBaselineModel {
    /// Train on parallel lists of texts and `F`/`T`/`U` labels.
    #[staticmethod]
    #[pyo3(signature = (texts, classes, epochs = 30, seed = 0))]
    fn train(texts: Vec<String>, classes: Vec<String>, epochs: usize, seed: u64) -> PyResult<Self> {
        if texts.len() != classes.len() {
            return Err(PyValueError::new_err("texts and classes differ in length"));
        }
        let rows = texts
            .into_iter()
            .zip(classes)
            .map(|(t, c)| Ok((t, parse_class(&c)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let cfg = TrainConfig {
            epochs,
            seed,
            ..TrainConfig::default()
        };
        baseline::train_baseline(&rows, &cfg).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        baseline::BaselineModel::load(s.as_bytes()).map(Self).map_err(value_err)
    }

    fn to_json(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.0.save(&mut buf).map_err(value_err)?;
        String::from_utf8(buf).map_err(value_err)
    }

    fn classify(&self, text: &str) -> &'static str {
        self.0.classify(text).as_str()
    }
}

/// Run a pipeline command (`ingest`, `topics`, `classify`, `metrics`,
/// `correlate`, `synth`) with the given settings; returns the written file
/// names, manifest last.
#[pyfunction]
fn run(command: &str, settings: BTreeMap<String, String>) -> PyResult<Vec<String>> {
    let mut kv = KvConfig::default();
    for (k, v) in settings {
        kv.set(k, v);
    }
    let result = match command {
        "ingest" => pipeline::cmd_ingest(&kv),
        "topics" => pipeline::cmd_topics(&kv),
        "classify" => pipeline::cmd_classify(&kv),
        "metrics" => pipeline::cmd_metrics(&kv),
        "correlate" => pipeline::cmd_correlate(&kv),
        "synth" => pipeline::cmd_synth(&kv),
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    };
    match result {
        Ok(m) => {
            let mut names: Vec<String> = m.outputs.iter().map(|(n, _)| n.clone()).collect();
            names.push(m.file_name());
            Ok(names)
        }
        Err(e @ PipelineError::Config(_)) => Err(PyValueError::new_err(e.to_string())),
        Err(e) => Err(PyRuntimeError::new_err(e.to_string())),
    }
}

#[pymodule]
fn iol_overload(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeekKey>()?;
    m.add_class::<PyPost>()?;
    m.add_class::<PyBaselineModel>()?;
    m.add_function(wrap_pyfunction!(parse_post_line, m)?)?;
    m.add_function(wrap_pyfunction!(gini, m)?)?;
    m.add_function(wrap_pyfunction!(gini_rewritten, m)?)?;
    m.add_function(wrap_pyfunction!(gini_degenerate_approx, m)?)?;
    m.add_function(wrap_pyfunction!(gini_bias_corrected, m)?)?;
    m.add_function(wrap_pyfunction!(shannon_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(p_value, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_function(wrap_pyfunction!(gen_topic_counts, m)?)?;
    m.add_function(wrap_pyfunction!(plant_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("SIGNIFICANCE_LEVEL", correlate::SIGNIFICANCE_LEVEL)?;
    Ok(())
}
