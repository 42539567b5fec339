use iol_core::ingest::Post;
use iol_core::synth::{gen_stream, PostsPerWeek, SynthConfig};
use iol_core::topic_model::{cluster_purity, fit_topics, FitConfig, KChoice, OutlierReduction, TopicScope, OUTLIER};

fn small_synth(communities: usize) -> iol_core::synth::SynthDataset {
    gen_stream(&SynthConfig {
        communities,
        weeks: 6,
        posts_per_week: PostsPerWeek::Fixed(60),
        topics_per_community: 5,
        seed: 11,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn purity_against_truth(data: &iol_core::synth::SynthDataset, cfg: &FitConfig) -> f64 {
    let fitted = fit_topics(&data.posts, cfg).unwrap();
    let labels = fitted.reduce_outliers(OutlierReduction::Distribution);
    cluster_purity(
        data.posts
            .iter()
            .map(|p| (labels.get(&p.id).unwrap(), data.topics.get(&p.id).unwrap())),
    )
}

#[test]
fn builtin_fit_recovers_disjoint_vocabularies() {
    let data = small_synth(3);
    for scope in [TopicScope::PerCommunity, TopicScope::Global] {
        for k in [
            KChoice::Auto,
            KChoice::Fixed(if scope == TopicScope::Global { 15 } else { 5 }),
        ] {
            let cfg = FitConfig {
                scope,
                k,
                ..FitConfig::default()
            };
            let purity = purity_against_truth(&data, &cfg);
            assert!(purity >= 0.95, "{scope} {k:?}: purity {purity}");
        }
    }
}

#[test]
fn single_community_scopes_coincide() {
    let data = small_synth(1);
    let fit = |scope| {
        fit_topics(
            &data.posts,
            &FitConfig {
                scope,
                seed: 5,
                ..FitConfig::default()
            },
        )
        .unwrap()
        .assignment
        .labels()
        .clone()
    };
    assert_eq!(fit(TopicScope::PerCommunity), fit(TopicScope::Global));
}

fn noisy_corpus() -> Vec<Post> {
    let themes = [
        ["vaccine", "dose", "booster", "pfizer", "moderna"],
        ["lockdown", "curfew", "closure", "restriction", "quarantine"],
        ["symptom", "fever", "cough", "fatigue", "smell"],
    ];
    let mut posts = Vec::new();
    for i in 0..90 {
        let t = &themes[i % 3];
        let text = format!("{} {} {} {}", t[i % 5], t[(i + 1) % 5], t[(i + 2) % 5], t[(i + 3) % 5]);
        posts.push(Post {
            id: format!("p{i:03}"),
            community: "Coronavirus".into(),
            created_utc: 1_584_316_800,
            text,
        });
    }
    // 10% noise: empty or off-theme text.
    let noise = [
        "",
        "zebra",
        "[deleted]",
        "qwerty",
        "",
        "violin",
        "",
        "cactus",
        "",
        "glacier",
    ];
    for (i, text) in noise.iter().enumerate() {
        posts.push(Post {
            id: format!("n{i:03}"),
            community: "Coronavirus".into(),
            created_utc: 1_584_316_800,
            text: text.to_string(),
        });
    }
    posts
}

#[test]
fn outlier_reduction_reassigns_only_noise() {
    let posts = noisy_corpus();
    let model = fit_topics(
        &posts,
        &FitConfig {
            k: KChoice::Fixed(3),
            ..FitConfig::default()
        },
    )
    .unwrap();
    let before = &model.assignment;
    assert!(before.outlier_count() >= 5, "{} outliers", before.outlier_count());
    for p in posts.iter().filter(|p| p.id.starts_with('p')) {
        assert_ne!(before.get(&p.id), Some(OUTLIER), "{} is on-theme", p.id);
    }
    for method in [OutlierReduction::Distribution, OutlierReduction::Centroid] {
        let after = model.reduce_outliers(method);
        assert_eq!(after.outlier_count(), 0, "{method}");
        assert_eq!(after.topic_count(), before.topic_count());
        for (id, t) in before.iter() {
            if t != OUTLIER {
                assert_eq!(after.get(id), Some(t), "{method} moved {id}");
            }
        }
    }
    assert_eq!(model.reduce_outliers(OutlierReduction::None).labels(), before.labels());
}

#[test]
fn fit_is_deterministic_per_seed() {
    let data = small_synth(2);
    let cfg = FitConfig {
        scope: TopicScope::Global,
        seed: 9,
        ..FitConfig::default()
    };
    let a = fit_topics(&data.posts, &cfg).unwrap().assignment;
    let b = fit_topics(&data.posts, &cfg).unwrap().assignment;
    assert_eq!(a.labels(), b.labels());
}
