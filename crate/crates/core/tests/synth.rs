use iol_core::correlate::pearson;
use iol_core::ingest::{bin_weekly, read_posts, BinMode, IngestOptions, WeekKey};
use iol_core::metrics::gini;
use iol_core::synth::{gen_stream, gen_topic_counts, plant_correlation, PostsPerWeek, SynthConfig, SynthError};
use iol_core::topic_model::topic_histogram;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        communities: 3,
        weeks: 8,
        posts_per_week: PostsPerWeek::Poisson(30.0),
        seed,
        ..SynthConfig::default()
    }
}

fn oracle() -> std::collections::HashMap<String, f64> {
    include_str!("fixtures/dirichlet_gini_oracle.txt")
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.parse().unwrap()))
        .collect()
}

/// Gini over all `tc` topics, zero-count ones included.
fn padded_gini(counts: &[u64], tc: usize) -> f64 {
    let mut x: Vec<f64> = vec![0.0; tc - counts.len()];
    x.extend(counts.iter().map(|&c| c as f64));
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let total: f64 = x.iter().sum();
    let weighted: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    2.0 * weighted / (n * total) - (n + 1.0) / n
}

#[test]
fn concentrated_alpha_matches_monte_carlo_oracle() {
    let o = oracle();
    let draws = 2000;
    let above = (0..draws)
        .filter(|&s| gini(gen_topic_counts(50, 100_000, 0.01, s).counts()).unwrap().value > o["threshold"])
        .count();
    let frac = above as f64 / draws as f64;
    let p = o["frac_above_nonzero"];
    let se = (p * (1.0 - p) / draws as f64).sqrt() + (p * (1.0 - p) / o["draws"]).sqrt();
    assert!((frac - p).abs() <= 4.0 * se, "{frac} vs oracle {p}");
}

#[test]
fn concentrated_alpha_over_all_topics_exceeds_point_seven() {
    let high = (0..100)
        .filter(|&s| padded_gini(gen_topic_counts(50, 100_000, 0.01, s).counts(), 50) > 0.7)
        .count();
    assert!(high >= 95, "{high}/100 draws above 0.7");
}

#[test]
fn huge_alpha_gives_near_uniform_spread() {
    for s in 0..20 {
        let h = gen_topic_counts(50, 100_000, 1e6, s);
        assert_eq!(h.topic_count(), 50);
        assert!(gini(h.counts()).unwrap().value < 0.05);
    }
}

#[test]
fn planted_point_nine_over_500_weeks() {
    let g: Vec<f64> = (0..500)
        .map(|t| ((t as f64) * 0.37).sin() + (t as f64 * 0.011).cos())
        .collect();
    let inside = (0..100)
        .filter(|&s| {
            let f = plant_correlation(&g, 0.9, 0.35, 0.08, s).unwrap();
            let r = pearson(&f.values, &g).unwrap();
            (0.8..=0.97).contains(&r)
        })
        .count();
    assert!(inside >= 95, "{inside}/100 seeds in range");
}

#[test]
fn constant_series_cannot_be_planted() {
    assert!(matches!(
        plant_correlation(&[0.3; 10], 0.5, 0.3, 0.1, 0),
        Err(SynthError::ConstantSeries)
    ));
    assert!(matches!(
        plant_correlation(&[0.1, 0.2], 1.5, 0.3, 0.1, 0),
        Err(SynthError::Invalid(_))
    ));
}

#[test]
fn fifty_two_weeks_per_community() {
    let data = gen_stream(&SynthConfig {
        communities: 10,
        weeks: 52,
        posts_per_week: PostsPerWeek::Fixed(12),
        ..SynthConfig::default()
    })
    .unwrap();
    let series = bin_weekly(&data.posts, BinMode::PerCommunity);
    assert_eq!(series.len(), 10);
    let first = WeekKey::new(2020, 1).unwrap();
    for s in &series {
        let weeks: Vec<WeekKey> = s.weeks().copied().collect();
        assert_eq!(weeks.len(), 52);
        assert_eq!(weeks[0], first);
        assert_eq!(weeks, first.range_inclusive(weeks[51]));
    }
}

#[test]
fn same_seed_same_bytes() {
    let dump = |seed| {
        let mut buf = Vec::new();
        gen_stream(&small(seed)).unwrap().write_dump(&mut buf).unwrap();
        buf
    };
    assert_eq!(dump(4), dump(4));
    assert_ne!(dump(4), dump(5));
}

#[test]
fn dump_parses_back_to_the_same_posts() {
    let data = gen_stream(&small(2)).unwrap();
    let mut buf = Vec::new();
    data.write_dump(&mut buf).unwrap();
    let (posts, stats) = read_posts(&buf[..], &IngestOptions::default()).unwrap();
    assert_eq!(stats.kept, data.posts.len());
    assert_eq!(stats.malformed, 0);
    assert_eq!(posts, data.posts);
}

#[test]
fn truth_histograms_match_counting() {
    let data = gen_stream(&small(8)).unwrap();
    let series = bin_weekly(&data.posts, BinMode::PerCommunity);
    let mut checked = 0;
    for t in &data.truth {
        let s = series
            .iter()
            .find(|s| s.scope.community() == Some(t.community.as_str()))
            .unwrap();
        let h = topic_histogram(&data.topics, &s.bins[&t.week], false).unwrap();
        assert_eq!(h, t.histogram, "{} {}", t.community, t.week);
        checked += 1;
    }
    assert_eq!(checked, 3 * 8);
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        SynthConfig {
            weeks: 0,
            ..SynthConfig::default()
        },
        SynthConfig {
            communities: 0,
            ..SynthConfig::default()
        },
        SynthConfig {
            alpha: 0.0,
            ..SynthConfig::default()
        },
        SynthConfig {
            target_rho: 1.5,
            ..SynthConfig::default()
        },
    ] {
        assert!(gen_stream(&cfg).is_err(), "{cfg:?}");
    }
}
