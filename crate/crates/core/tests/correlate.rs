use iol_core::correlate::{run_scheme, write_correlation_csv, CorrelateError, Scheme, SchemeInputs, SkipReason};
use iol_core::ingest::{bin_weekly, BinMode, Post, WeekKey};
use iol_core::metrics::OverloadFlags;
use iol_core::topic_model::{TopicAssignment, TopicMethod, TopicScope};
use iol_core::veracity::{Class, VeracityAssignment, VeracitySource};

const WEEK: i64 = 7 * 86_400;

struct Corpus {
    posts: Vec<Post>,
    topics: Vec<(String, i32)>,
    classes: Vec<(String, Class)>,
}

impl Corpus {
    fn new() -> Self {
        Corpus {
            posts: Vec::new(),
            topics: Vec::new(),
            classes: Vec::new(),
        }
    }

    /// One week of a community: `topics[i]` posts on topic `i`, the first
    /// `fake` of them fake.
    fn week(&mut self, community: &str, week: i64, topics: &[usize], fake: usize) {
        let start = WeekKey::new(2021, 1).unwrap().start_epoch() + week * WEEK + 3600;
        let mut n = 0;
        for (t, &count) in topics.iter().enumerate() {
            for _ in 0..count {
                let id = format!("{community}-{week}-{n}");
                self.posts.push(Post {
                    id: id.clone(),
                    community: community.into(),
                    created_utc: start,
                    text: String::new(),
                });
                self.topics.push((id.clone(), t as i32));
                self.classes.push((id, if n < fake { Class::F } else { Class::T }));
                n += 1;
            }
        }
    }

    fn assignment(&self, scope: TopicScope) -> TopicAssignment {
        let community: std::collections::HashMap<&str, &str> = self
            .posts
            .iter()
            .map(|p| (p.id.as_str(), p.community.as_str()))
            .collect();
        TopicAssignment::from_raw(scope, TopicMethod::GroundTruth, self.topics.clone(), &|id| {
            community.get(id).map(|c| c.to_string())
        })
        .unwrap()
    }

    fn veracity(&self) -> VeracityAssignment {
        VeracityAssignment::new(VeracitySource::GroundTruth, self.classes.clone())
    }
}

fn run_all(c: &Corpus, schemes: &[Scheme]) -> Vec<Vec<iol_core::CorrelationResult>> {
    let global = bin_weekly(&c.posts, BinMode::Global).remove(0);
    let per = bin_weekly(&c.posts, BinMode::PerCommunity);
    let f = c.assignment(TopicScope::Global);
    let ds = c.assignment(TopicScope::PerCommunity);
    let v = c.veracity();
    let inputs = SchemeInputs {
        global_bins: &global,
        community_bins: &per,
        global_topics: Some(&f),
        community_topics: Some(&ds),
        veracity: &v,
        flags: OverloadFlags::default(),
    };
    schemes.iter().map(|&s| run_scheme(s, &inputs).unwrap()).collect()
}

fn concentrating(c: &mut Corpus, community: &str, weeks: i64) {
    for w in 0..weeks {
        let w_us = w as usize;
        c.week(
            community,
            w,
            &[10, 1 + 3 * w_us, 2 + (w_us * 7) % 5],
            1 + w_us + (w_us % 3),
        );
    }
}

#[test]
fn single_community_schemes_coincide() {
    let mut c = Corpus::new();
    concentrating(&mut c, "only", 8);
    let r = run_all(&c, &Scheme::ALL);
    let rho: Vec<f64> = r.iter().map(|x| x[0].rho.unwrap()).collect();
    assert_eq!(rho[0], rho[1]);
    assert_eq!(rho[1], rho[2]);
    assert_eq!(r[0][0].t_len, 8);
    assert!(rho[0].abs() <= 1.0);
}

#[test]
fn scheme_a_shares_the_global_fake_series() {
    let mut c = Corpus::new();
    concentrating(&mut c, "alpha", 6);
    for w in 0..6 {
        c.week("beta", w, &[4, 4, 4], 6 - w as usize);
    }
    let r = run_all(&c, &[Scheme::A, Scheme::B]);
    let beta_a = r[0].iter().find(|x| x.community == "beta").unwrap();
    let beta_b = r[1].iter().find(|x| x.community == "beta").unwrap();
    // Beta's spread is even every week, so G is constant under both schemes.
    assert_eq!(beta_a.skipped, Some(SkipReason::ZeroVariance));
    assert_eq!(beta_b.skipped, Some(SkipReason::ZeroVariance));
    let alpha_a = r[0].iter().find(|x| x.community == "alpha").unwrap();
    let alpha_b = r[1].iter().find(|x| x.community == "alpha").unwrap();
    assert_ne!(alpha_a.rho, alpha_b.rho);
    assert_eq!(alpha_a.community_size, alpha_b.community_size);
}

#[test]
fn short_and_gap_series_are_skipped() {
    let mut c = Corpus::new();
    concentrating(&mut c, "long", 6);
    c.week("short", 0, &[3, 1], 1);
    c.week("short", 1, &[2, 2], 2);
    // Weeks 1..4 are gaps, so only two weeks pair up.
    c.week("gappy", 0, &[5, 1], 2);
    c.week("gappy", 5, &[1, 1, 4], 3);
    let r = run_all(&c, &[Scheme::C]).remove(0);
    let get = |name: &str| r.iter().find(|x| x.community == name).unwrap();
    assert!(get("long").rho.is_some());
    for name in ["short", "gappy"] {
        let x = get(name);
        assert_eq!(x.skipped, Some(SkipReason::InsufficientData), "{name}");
        assert_eq!(x.t_len, 2);
        assert!(x.rho.is_none() && x.p_value.is_none() && !x.significant);
    }
}

#[test]
fn missing_inputs_are_errors() {
    let mut c = Corpus::new();
    concentrating(&mut c, "x", 4);
    let global = bin_weekly(&c.posts, BinMode::Global).remove(0);
    let per = bin_weekly(&c.posts, BinMode::PerCommunity);
    let f = c.assignment(TopicScope::Global);
    let mut partial = c.classes.clone();
    let dropped = partial.pop().unwrap().0;
    let v = VeracityAssignment::new(VeracitySource::GroundTruth, partial);
    let mut inputs = SchemeInputs {
        global_bins: &global,
        community_bins: &per,
        global_topics: Some(&f),
        community_topics: None,
        veracity: &v,
        flags: OverloadFlags::default(),
    };
    assert!(matches!(
        run_scheme(Scheme::C, &inputs),
        Err(CorrelateError::MissingTopics { .. })
    ));
    let err = run_scheme(Scheme::B, &inputs).unwrap_err();
    assert!(err.to_string().contains(&dropped), "{err}");
    let full = c.veracity();
    inputs.veracity = &full;
    assert!(run_scheme(Scheme::B, &inputs).is_ok());
}

#[test]
fn csv_layout() {
    let mut c = Corpus::new();
    concentrating(&mut c, "long", 5);
    c.week("short", 0, &[3, 1], 1);
    let r = run_all(&c, &[Scheme::C]).remove(0);
    let mut buf = Vec::new();
    write_correlation_csv(&mut buf, &r).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scheme,community,community_size,T,rho,p_value,significant,skipped_reason"
    );
    assert_eq!(lines.len(), 3);
    assert!(
        lines
            .iter()
            .any(|l| l.starts_with("c,short,4,1,,,false,insufficient_data")),
        "{text}"
    );
}
