//! Per-class precision / recall / F1 / support.

use std::collections::{BTreeMap, BTreeSet};

use super::VeracityError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow<L> {
    pub label: L,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Number of times the label was predicted.
    pub predicted: usize,
    pub true_positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport<L> {
    pub rows: Vec<ClassRow<L>>,
    pub accuracy: f64,
    pub total: usize,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Report over every label seen in either sequence, in label order.
pub fn classification_report<L: Ord + Clone>(predictions: &[L], golds: &[L]) -> Result<ClassReport<L>, VeracityError> {
    if predictions.len() != golds.len() {
        return Err(VeracityError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let labels: BTreeSet<&L> = predictions.iter().chain(golds).collect();
    let mut tp: BTreeMap<&L, usize> = BTreeMap::new();
    let mut pred: BTreeMap<&L, usize> = BTreeMap::new();
    let mut support: BTreeMap<&L, usize> = BTreeMap::new();
    let mut correct = 0;
    for (p, g) in predictions.iter().zip(golds) {
        *pred.entry(p).or_default() += 1;
        *support.entry(g).or_default() += 1;
        if p == g {
            *tp.entry(p).or_default() += 1;
            correct += 1;
        }
    }
    let rows = labels
        .into_iter()
        .map(|l| {
            let t = tp.get(l).copied().unwrap_or(0);
            let np = pred.get(l).copied().unwrap_or(0);
            let ns = support.get(l).copied().unwrap_or(0);
            let precision = ratio(t, np);
            let recall = ratio(t, ns);
            ClassRow {
                label: l.clone(),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: ns,
                predicted: np,
                true_positives: t,
            }
        })
        .collect();
    Ok(ClassReport {
        rows,
        accuracy: ratio(correct, golds.len()),
        total: golds.len(),
    })
}

impl<L: PartialEq> ClassReport<L> {
    pub fn row(&self, label: &L) -> Option<&ClassRow<L>> {
        self.rows.iter().find(|r| &r.label == label)
    }

    /// Pooled recall: total true positives over total support.
    pub fn micro_recall(&self) -> f64 {
        let tp: usize = self.rows.iter().map(|r| r.true_positives).sum();
        let s: usize = self.rows.iter().map(|r| r.support).sum();
        ratio(tp, s)
    }

    pub fn macro_f1(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.f1).sum::<f64>() / self.rows.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fake_row_f1() {
        assert!((f1_score(0.8551, 0.8969) - 0.8755).abs() <= 1e-4);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn perfect_predictions() {
        let g = ['F', 'F', 'T', 'U', 'U', 'U'];
        let r = classification_report(&g, &g).unwrap();
        for row in &r.rows {
            assert_eq!((row.precision, row.recall, row.f1), (1.0, 1.0, 1.0));
        }
        let supports: Vec<usize> = r.rows.iter().map(|x| x.support).collect();
        assert_eq!(supports, vec![2, 1, 3]);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn all_predicted_class_zero() {
        // confusion [[5,0],[5,0]]: rows gold, columns predicted.
        let golds: Vec<u8> = [0; 5].into_iter().chain([1; 5]).collect();
        let preds = vec![0u8; 10];
        let r = classification_report(&preds, &golds).unwrap();
        let c0 = r.row(&0).unwrap();
        assert_eq!((c0.precision, c0.recall), (0.5, 1.0));
        assert!((c0.f1 - 2.0 / 3.0).abs() < 1e-15);
        let c1 = r.row(&1).unwrap();
        assert_eq!((c1.precision, c1.recall, c1.f1, c1.support), (0.0, 0.0, 0.0, 5));
    }

    #[test]
    fn length_mismatch() {
        assert!(classification_report(&[1, 2], &[1]).is_err());
    }
}
