//! Multinomial logistic regression over word 1–2-gram TF-IDF features.
//!
//! A deterministic stand-in for a fine-tuned transformer classifier: plain
//! SGD with a seeded per-epoch shuffle and L2 shrinkage on touched weights.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Class, VeracityError};
use crate::text::{SparseVec, TextConfig, Vectorizer};

pub const MODEL_FORMAT: &str = "iol-veracity-baseline";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.5,
            l2: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    format: String,
    version: u32,
    /// Classes seen in training, in `F < T < U` order.
    classes: Vec<Class>,
    /// Training count per class, aligned with `classes`.
    prior: Vec<usize>,
    vectorizer: Vectorizer,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

/// Train on `(text, class)` pairs.
pub fn train_baseline(labeled: &[(String, Class)], cfg: &TrainConfig) -> Result<BaselineModel, VeracityError> {
    let mut classes: Vec<Class> = labeled.iter().map(|(_, c)| *c).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(VeracityError::SingleClass);
    }
    let prior: Vec<usize> = classes
        .iter()
        .map(|c| labeled.iter().filter(|(_, l)| l == c).count())
        .collect();
    let texts: Vec<&str> = labeled.iter().map(|(t, _)| t.as_str()).collect();
    let text_cfg = TextConfig {
        ngram_max: 2,
        remove_stopwords: true,
    };
    let (vectorizer, rows) = Vectorizer::fit_transform(&texts, text_cfg)?;
    let targets: Vec<usize> = labeled
        .iter()
        .map(|(_, c)| classes.iter().position(|k| k == c).unwrap())
        .collect();

    let nc = classes.len();
    let mut weights = vec![vec![0.0; vectorizer.vocab_size()]; nc];
    // Start from the log prior so featureless documents follow the class balance.
    let mut bias: Vec<f64> = prior.iter().map(|&n| (n as f64 / labeled.len() as f64).ln()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut z = vec![0.0; nc];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.learning_rate / (1.0 + epoch as f64 * 0.1);
        for &i in &order {
            let row = &rows[i];
            for (c, zc) in z.iter_mut().enumerate() {
                *zc = row.dot_dense(&weights[c]) + bias[c];
            }
            softmax_in_place(&mut z);
            for c in 0..nc {
                let g = z[c] - if c == targets[i] { 1.0 } else { 0.0 };
                let w = &mut weights[c];
                for (j, v) in row.iter() {
                    w[j] -= lr * (g * v + cfg.l2 * w[j]);
                }
                bias[c] -= lr * g * 0.1;
            }
        }
    }
    Ok(BaselineModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        classes,
        prior,
        vectorizer,
        weights,
        bias,
    })
}

impl BaselineModel {
    pub fn classes(&self) -> &[Class] {
        &self.classes
    }

    /// Class with the most training examples (ties to the earlier class).
    pub fn prior_class(&self) -> Class {
        let mut best = 0;
        for (i, &n) in self.prior.iter().enumerate() {
            if n > self.prior[best] {
                best = i;
            }
        }
        self.classes[best]
    }

    fn scores(&self, row: &SparseVec) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| row.dot_dense(&self.weights[c]) + self.bias[c])
            .collect()
    }

    /// Arg-max class; ties go to the earlier class in `F < T < U`. Text with
    /// no known terms gets [`Self::prior_class`].
    pub fn classify(&self, text: &str) -> Class {
        let row = self.vectorizer.transform(text);
        if row.is_zero() {
            return self.prior_class();
        }
        let s = self.scores(&row);
        let mut best = 0;
        for c in 1..s.len() {
            if s[c] > s[best] {
                best = c;
            }
        }
        self.classes[best]
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), VeracityError> {
        serde_json::to_writer(w, self).map_err(|e| VeracityError::Model(e.to_string()))
    }

    pub fn load<R: Read>(r: R) -> Result<Self, VeracityError> {
        let mut m: BaselineModel = serde_json::from_reader(r).map_err(|e| VeracityError::Model(e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(VeracityError::Model(format!("unexpected model format `{}`", m.format)));
        }
        if m.version != MODEL_VERSION {
            return Err(VeracityError::Model(format!("unsupported model version {}", m.version)));
        }
        m.vectorizer.rebuild_index();
        Ok(m)
    }
}
