use iol_core::correlate::{p_value, pearson};
use iol_core::ingest::{bin_weekly, community_census, BinMode, Post};
use iol_core::metrics::{gini, gini_bias_corrected, gini_rewritten, shannon_entropy};
use iol_core::stats::{inc_beta, ln_gamma};
use proptest::prelude::*;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma as statrs_ln_gamma;

fn histogram() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..5_000, 1..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gini_within_bounds(x in histogram()) {
        let g = gini(&x).unwrap().value;
        prop_assert!(g >= 0.0);
        prop_assert!(g <= 1.0 - 1.0 / x.len() as f64);
    }

    #[test]
    fn rewritten_form_agrees(x in histogram()) {
        let a = gini(&x).unwrap().value;
        let b = gini_rewritten(&x).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn bias_correction_scales(x in prop::collection::vec(1u64..5_000, 2..300)) {
        let g = gini(&x).unwrap().value;
        let n = x.len() as f64;
        prop_assert!((gini_bias_corrected(&x).unwrap().value - g * n / (n - 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn entropy_bounded_by_log_topics(x in histogram()) {
        let h = shannon_entropy(&x).unwrap();
        prop_assert!(h >= -1e-12);
        prop_assert!(h <= (x.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn pearson_symmetric(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60)) {
        let (f, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let (Ok(a), Ok(b)) = (pearson(&f, &g), pearson(&g, &f)) {
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(a.abs() <= 1.0);
        }
    }

    #[test]
    fn pearson_affine(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60),
        a in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        b in -1e3f64..1e3,
    ) {
        let (f, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let scaled: Vec<f64> = f.iter().map(|v| a * v + b).collect();
        if let (Ok(r), Ok(s)) = (pearson(&f, &g), pearson(&scaled, &g)) {
            prop_assert!((s - a.signum() * r).abs() <= 1e-9, "{} vs {}", s, r);
        }
    }

    #[test]
    fn p_value_decreases_in_rho(r1 in 0.0f64..0.999, r2 in 0.0f64..0.999, t in 3usize..2000) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(p_value(hi, t).unwrap() <= p_value(lo, t).unwrap() + 1e-15);
        prop_assert_eq!(p_value(-lo, t).unwrap(), p_value(lo, t).unwrap());
    }

    #[test]
    fn p_value_decreases_in_length(r in 0.01f64..0.99, t1 in 3usize..2000, t2 in 3usize..2000) {
        let (short, long) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(p_value(r, long).unwrap() <= p_value(r, short).unwrap() + 1e-15);
    }

    #[test]
    fn inc_beta_matches_reference(a in 0.05f64..200.0, b in 0.05f64..200.0, x in 0.0f64..=1.0) {
        let ours = inc_beta(a, b, x);
        let reference = beta_reg(a, b, x);
        prop_assert!((ours - reference).abs() <= 1e-10, "I_{}({}, {}) = {} vs {}", x, a, b, ours, reference);
    }

    #[test]
    fn ln_gamma_matches_reference(x in 0.01f64..500.0) {
        let ours = ln_gamma(x);
        let reference = statrs_ln_gamma(x);
        prop_assert!((ours - reference).abs() <= 1e-10 * reference.abs().max(1.0));
    }

    #[test]
    fn binning_partitions_posts(
        raw in prop::collection::vec((0usize..4, -1_000_000_000i64..3_000_000_000), 0..300),
    ) {
        let posts: Vec<Post> = raw
            .iter()
            .enumerate()
            .map(|(i, (c, t))| Post {
                id: format!("p{i}"),
                community: format!("c{c}"),
                created_utc: *t,
                text: String::new(),
            })
            .collect();
        let global = bin_weekly(&posts, BinMode::Global);
        let per = bin_weekly(&posts, BinMode::PerCommunity);
        let census = community_census(&posts);
        prop_assert_eq!(global.iter().map(|s| s.total_posts()).sum::<usize>(), posts.len());
        prop_assert_eq!(per.iter().map(|s| s.total_posts()).sum::<usize>(), posts.len());
        prop_assert_eq!(census.iter().map(|c| c.1).sum::<usize>(), posts.len());
        for s in &per {
            for (w, ids) in &s.bins {
                for id in ids {
                    let i: usize = id[1..].parse().unwrap();
                    prop_assert_eq!(posts[i].week(), *w);
                }
            }
            // Gap weeks are materialized: consecutive keys are consecutive weeks.
            let weeks: Vec<_> = s.bins.keys().collect();
            for pair in weeks.windows(2) {
                prop_assert_eq!(pair[0].next(), *pair[1]);
            }
        }
    }
}
