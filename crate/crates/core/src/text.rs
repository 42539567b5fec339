//! Tokenization and TF-IDF vectorization shared by the topic model and the
//! baseline veracity classifier.
//!
//! Weights use raw term counts and smoothed inverse document frequency
//!
//! ```text
//! idf(t) = ln((1 + N) / (1 + df(t))) + 1
//! ```
//!
//! where `N` is the number of fitted documents and `df(t)` the number of
//! documents containing `t`. Rows are L2-normalized.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("no vocabulary: every document is empty after tokenization")]
    NoVocabulary,
    #[error("empty document list")]
    NoDocuments,
}

static STOPWORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();

pub fn stopwords() -> &'static HashSet<&'static str> {
    STOPWORDS.get_or_init(|| {
        include_str!("../data/stopwords_en.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextConfig {
    /// Largest n-gram length (1 = unigrams only).
    pub ngram_max: usize,
    pub remove_stopwords: bool,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            ngram_max: 1,
            remove_stopwords: true,
        }
    }
}

/// Lowercased Unicode words, optionally without stopwords.
pub fn tokenize(text: &str, remove_stopwords: bool) -> Vec<String> {
    let stop = stopwords();
    text.unicode_words()
        .map(str::to_lowercase)
        .filter(|w| !remove_stopwords || !stop.contains(w.as_str()))
        .collect()
}

/// Unigrams through `ngram_max`-grams, n-grams joined by a single space.
pub fn terms(text: &str, cfg: &TextConfig) -> Vec<String> {
    let toks = tokenize(text, cfg.remove_stopwords);
    let mut out = toks.clone();
    for n in 2..=cfg.ngram_max.max(1) {
        for win in toks.windows(n) {
            out.push(win.join(" "));
        }
    }
    out
}

/// Sparse row: strictly increasing term indices with matching weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn is_zero(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.idx
            .iter()
            .zip(&self.val)
            .map(|(&i, &v)| v * dense[i as usize])
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| (i as usize, v))
    }

    fn from_counts(counts: BTreeMap<u32, f64>) -> Self {
        let (idx, val) = counts.into_iter().unzip();
        Self { idx, val }
    }

    fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.val {
                *v /= n;
            }
        }
    }
}

/// Fitted TF-IDF vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vectorizer {
    config: TextConfig,
    terms: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl PartialEq for Vectorizer {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.terms == other.terms && self.idf == other.idf
    }
}

impl Vectorizer {
    /// Fit on `docs` and return the vectorizer with the transformed rows.
    pub fn fit_transform<S: AsRef<str>>(docs: &[S], config: TextConfig) -> Result<(Self, Vec<SparseVec>), TextError> {
        if docs.is_empty() {
            return Err(TextError::NoDocuments);
        }
        let doc_terms: Vec<Vec<String>> = docs.iter().map(|d| terms(d.as_ref(), &config)).collect();
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &doc_terms {
            let uniq: HashSet<&str> = t.iter().map(String::as_str).collect();
            for term in uniq {
                *df.entry(term).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(TextError::NoVocabulary);
        }
        let n = docs.len() as f64;
        let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        let idf: Vec<f64> = df
            .values()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let mut v = Self {
            config,
            terms,
            idf,
            index: HashMap::new(),
        };
        v.rebuild_index();
        let rows = doc_terms.iter().map(|t| v.weigh(t)).collect();
        Ok((v, rows))
    }

    /// Rebuild the term lookup after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn transform(&self, doc: &str) -> SparseVec {
        self.weigh(&terms(doc, &self.config))
    }

    /// Raw in-vocabulary term counts, no weighting or normalization.
    pub fn counts(&self, doc: &str) -> SparseVec {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in terms(doc, &self.config) {
            if let Some(&i) = self.index.get(&t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        SparseVec::from_counts(counts)
    }

    fn weigh(&self, doc_terms: &[String]) -> SparseVec {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in doc_terms {
            if let Some(&i) = self.index.get(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        for (i, c) in counts.iter_mut() {
            *c *= self.idf[*i as usize];
        }
        let mut row = SparseVec::from_counts(counts);
        row.normalize();
        row
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i as usize])
    }

    pub fn config(&self) -> &TextConfig {
        &self.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAW: TextConfig = TextConfig {
        ngram_max: 1,
        remove_stopwords: false,
    };

    #[test]
    fn tokenizer_lowercases_and_drops_stopwords() {
        assert_eq!(tokenize("The Vaccine, and THE mask!", true), vec!["vaccine", "mask"]);
        assert_eq!(tokenize("The mask", false), vec!["the", "mask"]);
    }

    #[test]
    fn bigrams_follow_unigrams() {
        let cfg = TextConfig {
            ngram_max: 2,
            remove_stopwords: true,
        };
        assert_eq!(
            terms("vaccine mask test", &cfg),
            vec!["vaccine", "mask", "test", "vaccine mask", "mask test"]
        );
    }

    #[test]
    fn identical_documents_identical_rows() {
        let (_, rows) = Vectorizer::fit_transform(&["mask mandate news", "mask mandate news", "other"], RAW).unwrap();
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn single_document_has_flat_idf_and_unit_norm() {
        let (v, rows) = Vectorizer::fit_transform(&["alpha beta beta gamma"], RAW).unwrap();
        for t in ["alpha", "beta", "gamma"] {
            assert_eq!(v.idf(t), Some(1.0));
        }
        assert!((rows[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shared_term_gets_lower_idf() {
        // N = 2: df(b) = 2 -> ln(3/3) + 1 = 1; df(a) = df(c) = 1 -> ln(3/2) + 1.
        let (v, _) = Vectorizer::fit_transform(&["a b", "b c"], RAW).unwrap();
        let rare = (3.0f64 / 2.0).ln() + 1.0;
        assert!((v.idf("b").unwrap() - 1.0).abs() < 1e-15);
        assert!((v.idf("a").unwrap() - rare).abs() < 1e-15);
        assert!((v.idf("c").unwrap() - rare).abs() < 1e-15);
    }

    #[test]
    fn all_empty_is_no_vocabulary() {
        assert_eq!(
            Vectorizer::fit_transform(&["", "the and of"], TextConfig::default()).unwrap_err(),
            TextError::NoVocabulary
        );
    }

    #[test]
    fn transform_ignores_unknown_terms() {
        let (v, rows) = Vectorizer::fit_transform(&["alpha beta", "gamma"], RAW).unwrap();
        assert_eq!(v.transform("alpha beta zeta"), rows[0]);
        assert!(v.transform("zeta").is_zero());
    }
}
