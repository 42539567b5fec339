use std::collections::HashMap;

use iol_core::ingest::{bin_weekly, BinMode, Post};
use iol_core::topic_model::{
    read_topic_labels, topic_histogram, write_topic_labels, TopicError, TopicMethod, TopicScope, OUTLIER,
};
use iol_core::veracity::{
    fake_fraction, read_veracity_labels, write_veracity_labels, Class, VeracityError, VeracitySource,
};

fn posts() -> Vec<Post> {
    ["a1", "a2", "a3", "b1", "b2"]
        .iter()
        .map(|id| Post {
            id: id.to_string(),
            community: if id.starts_with('a') { "Alpha" } else { "Beta" }.into(),
            created_utc: 1_600_000_000,
            text: String::new(),
        })
        .collect()
}

fn lookup(posts: &[Post]) -> HashMap<String, String> {
    posts.iter().map(|p| (p.id.clone(), p.community.clone())).collect()
}

fn topics(csv: &str, scope: TopicScope) -> Result<iol_core::TopicAssignment, TopicError> {
    let map = lookup(&posts());
    read_topic_labels(csv.as_bytes(), scope, TopicMethod::GroundTruth, &|id| {
        map.get(id).cloned()
    })
}

fn classes(csv: &str) -> Result<iol_core::VeracityAssignment, VeracityError> {
    let map = lookup(&posts());
    read_veracity_labels(csv.as_bytes(), VeracitySource::GroundTruth, &|id| map.contains_key(id))
}

#[test]
fn annotator_topic_file_with_outliers() {
    let a = topics("post_id,topic_id\na1,0\na2,-1\na3,0\nb1,0\nb2,3\n", TopicScope::Global).unwrap();
    assert_eq!(a.len(), 5);
    assert_eq!(a.get("a2"), Some(OUTLIER));
    assert_eq!(a.outlier_count(), 1);
    assert_eq!(a.topic_count(), 2);
    assert_eq!(a.get("a1"), a.get("b1"));
}

#[test]
fn per_community_ids_are_namespaced() {
    let csv = "post_id,topic_id\na1,0\na2,1\na3,0\nb1,0\nb2,1\n";
    let ds = topics(csv, TopicScope::PerCommunity).unwrap();
    let f = topics(csv, TopicScope::Global).unwrap();
    assert_eq!(ds.topic_count(), 4);
    assert_eq!(f.topic_count(), 2);
    assert_ne!(ds.get("a1"), ds.get("b1"));
    assert_eq!(ds.get("a1"), ds.get("a3"));
}

#[test]
fn topic_file_errors_carry_line_numbers() {
    let cases = [
        ("post_id,topic_id\na1,0\nzz,1\n", "line 3"),
        ("post_id,topic_id\na1,0\na1,1\n", "line 3"),
        ("post_id,topic_id\na1,-2\n", "line 2"),
        ("post_id,topic_id\na1,x\n", "line 2"),
        ("post,topic\na1,0\n", "line 1"),
    ];
    for (csv, line) in cases {
        let err = topics(csv, TopicScope::Global).unwrap_err().to_string();
        assert!(err.contains(line), "{csv:?}: {err}");
    }
}

#[test]
fn annotator_veracity_file() {
    let v = classes("post_id,class\na1,F\na2,F\nb1,T\nb2,U\n").unwrap();
    assert_eq!(v.len(), 4);
    assert_eq!(v.get("a2"), Some(Class::F));
    assert_eq!(v.get("b2"), Some(Class::U));
}

#[test]
fn veracity_file_errors() {
    assert!(matches!(
        classes("post_id,class\na1,fake\n"),
        Err(VeracityError::BadClass { line: 2, .. })
    ));
    assert!(matches!(
        classes("post_id,class\na1,F\nzz,T\n"),
        Err(VeracityError::UnknownPost { line: 3, .. })
    ));
    assert!(matches!(
        classes("post_id,class\na1,F\na1,T\n"),
        Err(VeracityError::DuplicatePost { line: 3, .. })
    ));
    assert!(matches!(
        classes("id,label\na1,F\n"),
        Err(VeracityError::BadRecord { line: 1, .. })
    ));
}

#[test]
fn incomplete_coverage_fails_at_use() {
    let p = posts();
    let bins = bin_weekly(&p, BinMode::Global).remove(0);
    let ids = bins.bins.values().next().unwrap();

    let t = topics("post_id,topic_id\na1,0\na2,0\na3,1\nb1,1\n", TopicScope::Global).unwrap();
    let err = topic_histogram(&t, ids, false).unwrap_err();
    assert!(matches!(&err, TopicError::MissingLabel(id) if id == "b2"), "{err}");

    let v = classes("post_id,class\na1,F\na2,F\na3,T\nb2,U\n").unwrap();
    let err = fake_fraction(&v, &bins).unwrap_err();
    assert!(matches!(&err, VeracityError::MissingClass(id) if id == "b1"), "{err}");
}

#[test]
fn write_then_read_is_identity() {
    let csv = "post_id,topic_id\na1,0\na2,-1\na3,1\nb1,0\nb2,1\n";
    let t = topics(csv, TopicScope::Global).unwrap();
    let mut buf = Vec::new();
    write_topic_labels(&mut buf, &t).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), csv);
    let back = topics(std::str::from_utf8(&buf).unwrap(), TopicScope::Global).unwrap();
    assert_eq!(back.labels(), t.labels());

    let csv = "post_id,class\na1,F\na2,T\na3,U\nb1,F\nb2,T\n";
    let v = classes(csv).unwrap();
    let mut buf = Vec::new();
    write_veracity_labels(&mut buf, &v).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), csv);
    assert_eq!(
        classes(std::str::from_utf8(&buf).unwrap()).unwrap().labels(),
        v.labels()
    );
}
