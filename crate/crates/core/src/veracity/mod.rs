//! Three-class veracity labels (fake / true / unverified), the baseline
//! classifier, classification reports and weekly class fractions.

pub mod baseline;
pub mod report;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{train_baseline, BaselineModel, TrainConfig};
pub use report::{classification_report, f1_score, ClassReport, ClassRow};

use crate::ingest::{BinSeries, Scope, WeekKey};
use crate::text::TextError;

#[derive(Debug, Error)]
pub enum VeracityError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("line {line}: unknown class `{token}` (expected F, T or U)")]
    BadClass { line: usize, token: String },
    #[error("line {line}: unknown post id `{id}`")]
    UnknownPost { line: usize, id: String },
    #[error("line {line}: duplicate post id `{id}`")]
    DuplicatePost { line: usize, id: String },
    #[error("line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error("post `{0}` has no veracity class")]
    MissingClass(String),
    #[error("training data has fewer than two classes")]
    SingleClass,
    #[error("{predictions} predictions vs {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("model artifact: {0}")]
    Model(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Veracity class. Declaration order (`F < T < U`) is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    F,
    T,
    U,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::F, Class::T, Class::U];

    pub fn as_str(self) -> &'static str {
        match self {
            Class::F => "F",
            Class::T => "T",
            Class::U => "U",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "F" => Ok(Class::F),
            "T" => Ok(Class::T),
            "U" => Ok(Class::U),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VeracitySource {
    Builtin,
    External(PathBuf),
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VeracityAssignment {
    pub source: VeracitySource,
    labels: BTreeMap<String, Class>,
}

impl VeracityAssignment {
    pub fn new(source: VeracitySource, labels: impl IntoIterator<Item = (String, Class)>) -> Self {
        Self {
            source,
            labels: labels.into_iter().collect(),
        }
    }

    pub fn get(&self, post_id: &str) -> Option<Class> {
        self.labels.get(post_id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Class)> {
        self.labels.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn labels(&self) -> &BTreeMap<String, Class> {
        &self.labels
    }
}

/// Write `post_id,class`, rows ordered by post id.
pub fn write_veracity_labels<W: Write>(w: W, a: &VeracityAssignment) -> Result<(), VeracityError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["post_id", "class"])?;
    for (id, c) in a.iter() {
        out.write_record([id, c.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: [&str; 2]) -> Result<(), VeracityError> {
    let h = rdr.headers()?;
    if h.len() != 2 || h[0] != *expected[0] || h[1] != *expected[1] {
        return Err(VeracityError::BadRecord {
            line: 1,
            msg: format!("expected header `{},{}`", expected[0], expected[1]),
        });
    }
    Ok(())
}

/// Read `post_id,class`; `is_known` rejects ids missing from the dataset.
pub fn read_veracity_labels<R: Read>(
    r: R,
    source: VeracitySource,
    is_known: &dyn Fn(&str) -> bool,
) -> Result<VeracityAssignment, VeracityError> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, ["post_id", "class"])?;
    let mut labels = BTreeMap::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let id = rec[0].to_string();
        let class: Class = rec[1].parse().map_err(|_| VeracityError::BadClass {
            line,
            token: rec[1].to_string(),
        })?;
        if !is_known(&id) {
            return Err(VeracityError::UnknownPost { line, id });
        }
        if !seen.insert(id.clone()) {
            return Err(VeracityError::DuplicatePost { line, id });
        }
        labels.insert(id, class);
    }
    Ok(VeracityAssignment { source, labels })
}

pub fn load_veracity_labels(path: &Path, is_known: &dyn Fn(&str) -> bool) -> Result<VeracityAssignment, VeracityError> {
    let f = std::fs::File::open(path)?;
    read_veracity_labels(f, VeracitySource::External(path.to_path_buf()), is_known)
}

/// Read labeled training data, `text,class`.
pub fn read_training_csv<R: Read>(r: R) -> Result<Vec<(String, Class)>, VeracityError> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, ["text", "class"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let class: Class = rec[1].parse().map_err(|_| VeracityError::BadClass {
            line: i + 2,
            token: rec[1].to_string(),
        })?;
        out.push((rec[0].to_string(), class));
    }
    Ok(out)
}

pub fn write_training_csv<W: Write>(w: W, rows: &[(String, Class)]) -> Result<(), VeracityError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["text", "class"])?;
    for (t, c) in rows {
        out.write_record([t.as_str(), c.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

/// Class shares among all posts of one week.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassFractions {
    pub posts: usize,
    pub fake: f64,
    pub true_: f64,
    pub unverified: f64,
}

/// Weekly class fractions; `None` marks a week with no posts.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeFractionSeries {
    pub scope: Scope,
    pub weeks: BTreeMap<WeekKey, Option<ClassFractions>>,
}

impl FakeFractionSeries {
    pub fn fake(&self) -> BTreeMap<WeekKey, Option<f64>> {
        self.weeks.iter().map(|(w, f)| (*w, f.map(|x| x.fake))).collect()
    }
}

/// Per-week fractions of F, T and U among all binned posts.
pub fn fake_fraction(assignment: &VeracityAssignment, bins: &BinSeries) -> Result<FakeFractionSeries, VeracityError> {
    let mut weeks = BTreeMap::new();
    for (week, ids) in &bins.bins {
        if ids.is_empty() {
            weeks.insert(*week, None);
            continue;
        }
        let mut n = [0usize; 3];
        for id in ids {
            let c = assignment
                .get(id)
                .ok_or_else(|| VeracityError::MissingClass(id.clone()))?;
            n[c as usize] += 1;
        }
        let total = ids.len() as f64;
        weeks.insert(
            *week,
            Some(ClassFractions {
                posts: ids.len(),
                fake: n[0] as f64 / total,
                true_: n[1] as f64 / total,
                unverified: n[2] as f64 / total,
            }),
        );
    }
    Ok(FakeFractionSeries {
        scope: bins.scope.clone(),
        weeks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn week_series(ids: &[&str]) -> BinSeries {
        let mut s = BinSeries::empty(Scope::Global);
        s.bins.insert(
            WeekKey::new(2020, 12).unwrap(),
            ids.iter().map(|s| s.to_string()).collect(),
        );
        s.bins.insert(WeekKey::new(2020, 13).unwrap(), vec![]);
        s
    }

    fn assign(pairs: &[(&str, Class)]) -> VeracityAssignment {
        VeracityAssignment::new(
            VeracitySource::GroundTruth,
            pairs.iter().map(|(a, c)| (a.to_string(), *c)),
        )
    }

    #[test]
    fn fractions_of_one_week() {
        let a = assign(&[("a", Class::F), ("b", Class::F), ("c", Class::T), ("d", Class::U)]);
        let s = fake_fraction(&a, &week_series(&["a", "b", "c", "d"])).unwrap();
        let f = s.weeks[&WeekKey::new(2020, 12).unwrap()].unwrap();
        assert_eq!((f.fake, f.true_, f.unverified), (0.5, 0.25, 0.25));
        assert_eq!(s.weeks[&WeekKey::new(2020, 13).unwrap()], None);
    }

    #[test]
    fn all_true_week() {
        let a = assign(&[("a", Class::T), ("b", Class::T)]);
        let s = fake_fraction(&a, &week_series(&["a", "b"])).unwrap();
        assert_eq!(s.weeks[&WeekKey::new(2020, 12).unwrap()].unwrap().fake, 0.0);
    }

    #[test]
    fn counting_oracle_317_of_1000() {
        let ids: Vec<String> = (0..1000).map(|i| format!("p{i}")).collect();
        let a = VeracityAssignment::new(
            VeracitySource::GroundTruth,
            ids.iter()
                .enumerate()
                .map(|(i, id)| (id.clone(), if i < 317 { Class::F } else { Class::T })),
        );
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let s = fake_fraction(&a, &week_series(&refs)).unwrap();
        assert_eq!(s.weeks[&WeekKey::new(2020, 12).unwrap()].unwrap().fake, 0.317);
    }

    #[test]
    fn missing_class_names_post() {
        let a = assign(&[("a", Class::T)]);
        match fake_fraction(&a, &week_series(&["a", "zz"])) {
            Err(VeracityError::MissingClass(id)) => assert_eq!(id, "zz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_file_strict_alphabet() {
        let known = |_: &str| true;
        let ok = read_veracity_labels(
            "post_id,class\na,F\nb,F\nc,T\nd,U\n".as_bytes(),
            VeracitySource::Builtin,
            &known,
        )
        .unwrap();
        assert_eq!(ok.len(), 4);
        let bad = read_veracity_labels("post_id,class\na,fake\n".as_bytes(), VeracitySource::Builtin, &known);
        assert!(matches!(bad, Err(VeracityError::BadClass { line: 2, .. })));
        let dup = read_veracity_labels("post_id,class\na,F\na,T\n".as_bytes(), VeracitySource::Builtin, &known);
        assert!(matches!(dup, Err(VeracityError::DuplicatePost { line: 3, .. })));
        let unknown = read_veracity_labels("post_id,class\na,F\n".as_bytes(), VeracitySource::Builtin, &|id| {
            id != "a"
        });
        assert!(matches!(unknown, Err(VeracityError::UnknownPost { line: 2, .. })));
    }

    #[test]
    fn label_round_trip() {
        let a = assign(&[("x", Class::U), ("a", Class::F)]);
        let mut buf = Vec::new();
        write_veracity_labels(&mut buf, &a).unwrap();
        let back = read_veracity_labels(&buf[..], VeracitySource::GroundTruth, &|_| true).unwrap();
        assert_eq!(back, a);
    }
}
