//! Synthetic post streams with known topic histograms, veracity labels and a
//! planted correlation between the weekly Gini index and the fake fraction.
//!
//! Each community has `topics_per_community` topics with disjoint
//! vocabularies. Weekly topic sizes are a Dirichlet(α)-multinomial draw, the
//! weekly fake fraction is a noisy linear function of that week's Gini
//! index, and exactly `round(f_t * PC_t)` posts of the week are labeled fake.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::ingest::{Post, WeekKey};
use crate::metrics::gini;
use crate::topic_model::{TopicAssignment, TopicHistogram, TopicMethod, TopicScope};
use crate::veracity::{Class, VeracityAssignment, VeracitySource};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("constant Gini series; cannot plant a correlation")]
    ConstantSeries,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PostsPerWeek {
    Fixed(usize),
    Poisson(f64),
}

impl PostsPerWeek {
    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        match *self {
            PostsPerWeek::Fixed(n) => n,
            PostsPerWeek::Poisson(mean) => Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0),
        }
    }
}

impl fmt::Display for PostsPerWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PostsPerWeek::Fixed(n) => write!(f, "{n}"),
            PostsPerWeek::Poisson(m) => write!(f, "poisson:{m}"),
        }
    }
}

impl FromStr for PostsPerWeek {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(m) = s.strip_prefix("poisson:") {
            let m: f64 = m.trim().parse().map_err(|_| format!("bad Poisson mean `{m}`"))?;
            if m.is_nan() || m <= 0.0 {
                return Err("Poisson mean must be positive".into());
            }
            Ok(PostsPerWeek::Poisson(m))
        } else {
            s.trim()
                .parse()
                .map(PostsPerWeek::Fixed)
                .map_err(|_| format!("expected N or poisson:MEAN, got `{s}`"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub communities: usize,
    pub weeks: usize,
    /// Drawn per week, then raised to at least `topics_per_community`.
    pub posts_per_week: PostsPerWeek,
    pub topics_per_community: usize,
    /// Symmetric Dirichlet concentration over topics.
    pub alpha: f64,
    /// Planted correlation between weekly Gini index and fake fraction.
    pub target_rho: f64,
    pub base_fake_rate: f64,
    /// Standard deviation of the planted fake fraction around the base rate.
    pub fake_spread: f64,
    /// Share of non-fake posts labeled unverified.
    pub unverified_share: f64,
    pub start_week: WeekKey,
    pub words_per_post: usize,
    pub vocab_per_topic: usize,
    /// Labeled `text,class` documents for training the baseline classifier.
    pub training_docs: usize,
    pub community_prefix: String,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            communities: 10,
            weeks: 52,
            posts_per_week: PostsPerWeek::Poisson(96.0),
            topics_per_community: 10,
            alpha: 0.5,
            target_rho: 0.9,
            base_fake_rate: 0.35,
            fake_spread: 0.08,
            unverified_share: 0.3,
            start_week: WeekKey {
                iso_year: 2020,
                iso_week: 1,
            },
            words_per_post: 8,
            vocab_per_topic: 20,
            training_docs: 600,
            community_prefix: "CovidSynth".into(),
            seed: 0,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "communities",
    "weeks",
    "posts_per_week",
    "topics_per_community",
    "alpha",
    "target_rho",
    "base_fake_rate",
    "fake_spread",
    "unverified_share",
    "start_week",
    "words_per_post",
    "vocab_per_topic",
    "training_docs",
    "community_prefix",
    "seed",
];

fn parse_week(s: &str) -> Result<WeekKey, String> {
    let (y, w) = s
        .split_once("-W")
        .ok_or_else(|| format!("expected YYYY-Www, got `{s}`"))?;
    let y: i32 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
    let w: u32 = w.parse().map_err(|_| format!("bad week in `{s}`"))?;
    WeekKey::new(y, w).ok_or_else(|| format!("no ISO week {s}"))
}

impl SynthConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, SynthError> {
        kv.check_keys(CONFIG_KEYS)?;
        let d = Self::default();
        let start_week = match kv.get("start_week") {
            Some(s) => parse_week(s).map_err(SynthError::Invalid)?,
            None => d.start_week,
        };
        let cfg = Self {
            communities: kv.parse_or("communities", d.communities)?,
            weeks: kv.parse_or("weeks", d.weeks)?,
            posts_per_week: kv.parse_or("posts_per_week", d.posts_per_week)?,
            topics_per_community: kv.parse_or("topics_per_community", d.topics_per_community)?,
            alpha: kv.parse_or("alpha", d.alpha)?,
            target_rho: kv.parse_or("target_rho", d.target_rho)?,
            base_fake_rate: kv.parse_or("base_fake_rate", d.base_fake_rate)?,
            fake_spread: kv.parse_or("fake_spread", d.fake_spread)?,
            unverified_share: kv.parse_or("unverified_share", d.unverified_share)?,
            start_week,
            words_per_post: kv.parse_or("words_per_post", d.words_per_post)?,
            vocab_per_topic: kv.parse_or("vocab_per_topic", d.vocab_per_topic)?,
            training_docs: kv.parse_or("training_docs", d.training_docs)?,
            community_prefix: kv.get("community_prefix").map_or(d.community_prefix, String::from),
            seed: kv.parse_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::default();
        kv.set("communities", self.communities.to_string());
        kv.set("weeks", self.weeks.to_string());
        kv.set("posts_per_week", self.posts_per_week.to_string());
        kv.set("topics_per_community", self.topics_per_community.to_string());
        kv.set("alpha", self.alpha.to_string());
        kv.set("target_rho", self.target_rho.to_string());
        kv.set("base_fake_rate", self.base_fake_rate.to_string());
        kv.set("fake_spread", self.fake_spread.to_string());
        kv.set("unverified_share", self.unverified_share.to_string());
        kv.set("start_week", self.start_week.to_string());
        kv.set("words_per_post", self.words_per_post.to_string());
        kv.set("vocab_per_topic", self.vocab_per_topic.to_string());
        kv.set("training_docs", self.training_docs.to_string());
        kv.set("community_prefix", self.community_prefix.clone());
        kv.set("seed", self.seed.to_string());
        kv
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.communities == 0 || self.weeks == 0 || self.topics_per_community == 0 {
            return bad("communities, weeks and topics_per_community must be >= 1");
        }
        if self.vocab_per_topic == 0 {
            return bad("vocab_per_topic must be >= 1");
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return bad("alpha must be a positive finite number");
        }
        if self.target_rho.is_nan() || self.target_rho.abs() > 1.0 {
            return bad("target_rho must lie in [-1, 1]");
        }
        for (name, v) in [
            ("base_fake_rate", self.base_fake_rate),
            ("unverified_share", self.unverified_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::Invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.fake_spread.is_nan() || self.fake_spread < 0.0 {
            return bad("fake_spread must be >= 0");
        }
        Ok(())
    }

    pub fn community_name(&self, c: usize) -> String {
        format!("{}{:02}", self.community_prefix, c)
    }
}

/// `ln X` for `X ~ Gamma(shape, 1)`, stable for very small shapes.
fn ln_gamma_sample(shape: f64, rng: &mut ChaCha8Rng) -> f64 {
    if shape < 1.0 {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).unwrap().sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.ln() + u.ln() / shape
    } else {
        Gamma::new(shape, 1.0).unwrap().sample(rng).ln()
    }
}

/// Unsorted multinomial counts with Dirichlet(α) probabilities.
fn dirichlet_multinomial(tc: usize, pc: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let logs: Vec<f64> = (0..tc).map(|_| ln_gamma_sample(alpha, rng)).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let mut rest_mass: f64 = w.iter().sum();
    let mut rest = pc as u64;
    let mut counts = vec![0u64; tc];
    for i in 0..tc {
        if rest == 0 {
            break;
        }
        if i == tc - 1 {
            counts[i] = rest;
            break;
        }
        let p = (w[i] / rest_mass).clamp(0.0, 1.0);
        let k = Binomial::new(rest, p).unwrap().sample(rng);
        counts[i] = k;
        rest -= k;
        rest_mass -= w[i];
        if rest_mass <= 0.0 {
            // Remaining topics carry no mass; leftovers go to the heaviest.
            let heaviest = (0..tc).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
            counts[heaviest] += rest;
            break;
        }
    }
    counts
}

/// Dirichlet(α)-multinomial topic sizes over `pc` posts, zeros dropped.
pub fn gen_topic_counts(tc: usize, pc: usize, alpha: f64, seed: u64) -> TopicHistogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TopicHistogram::from_counts(dirichlet_multinomial(tc.max(1), pc.max(1), alpha, &mut rng))
        .expect("at least one post drawn")
}

/// A planted fake-fraction series.
#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub values: Vec<f64>,
    pub clipped: usize,
}

impl Planted {
    pub fn clip_rate(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.clipped as f64 / self.values.len() as f64
        }
    }
}

fn plant_with(g: &[f64], rho: f64, base: f64, spread: f64, rng: &mut ChaCha8Rng) -> Result<Planted, SynthError> {
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if g.len() < 2 || g.iter().all(|&v| v == g[0]) {
        return Err(SynthError::ConstantSeries);
    }
    let sd = var.sqrt();
    let noise_w = (1.0 - rho * rho).max(0.0).sqrt();
    let mut clipped = 0;
    let values = g
        .iter()
        .map(|v| {
            let eps: f64 = if noise_w > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            let f = base + spread * (rho * (v - mean) / sd + noise_w * eps);
            if !(0.0..=1.0).contains(&f) {
                clipped += 1;
            }
            f.clamp(0.0, 1.0)
        })
        .collect();
    Ok(Planted { values, clipped })
}

/// Fake-fraction series whose population correlation with `g` is `rho`:
/// `f = base + spread (rho z + sqrt(1 - rho^2) eps)` with `z` the
/// standardized `g`, clipped to `[0, 1]`.
pub fn plant_correlation(g: &[f64], rho: f64, base: f64, spread: f64, seed: u64) -> Result<Planted, SynthError> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(SynthError::Invalid("target correlation outside [-1, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    plant_with(g, rho, base, spread, &mut rng)
}

/// Ground truth for one community-week.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthWeek {
    pub community: String,
    pub week: WeekKey,
    pub histogram: TopicHistogram,
    /// Posts per local topic id, zeros included.
    pub topic_counts: Vec<u64>,
    pub gini: f64,
    pub planted_fake: f64,
    pub fake_posts: usize,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub posts: Vec<Post>,
    pub topics: TopicAssignment,
    pub veracity: VeracityAssignment,
    pub truth: Vec<TruthWeek>,
    /// Clipped planted values per community.
    pub clipped: BTreeMap<String, usize>,
    pub training: Vec<(String, Class)>,
}

fn topic_word(c: usize, t: usize, j: usize) -> String {
    format!("c{c}t{t}w{j}")
}

fn class_word(class: Class, j: usize) -> String {
    let stem = match class {
        Class::F => "hoaxword",
        Class::T => "factword",
        Class::U => "rumorword",
    };
    format!("{stem}{j}")
}

const CLASS_VOCAB: usize = 10;

fn post_text(c: usize, topic: usize, class: Class, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (String, String) {
    let mut words: Vec<String> = (0..cfg.words_per_post)
        .map(|_| topic_word(c, topic, rng.random_range(0..cfg.vocab_per_topic)))
        .collect();
    if cfg.words_per_post > 0 {
        words.push(class_word(class, rng.random_range(0..CLASS_VOCAB)));
    }
    let split = words.len().div_ceil(2);
    let body = words.split_off(split);
    (words.join(" "), body.join(" "))
}

fn join_text(title: String, body: String) -> String {
    match (title.is_empty(), body.is_empty()) {
        (false, false) => format!("{title} {body}"),
        (false, true) => title,
        (true, _) => body,
    }
}

fn nonzero(c: &[u64]) -> Vec<u64> {
    c.iter().copied().filter(|&x| x > 0).collect()
}

/// Week-level draws for one community: histograms, Gini and planted fake
/// fractions. Everything post-level is drawn afterwards from the same `rng`.
fn community_truth(c: usize, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Vec<TruthWeek>, usize) {
    let name = cfg.community_name(c);
    let tc = cfg.topics_per_community;

    let mut weeks = Vec::with_capacity(cfg.weeks);
    let mut w = cfg.start_week;
    for _ in 0..cfg.weeks {
        let pc = cfg.posts_per_week.draw(rng).max(tc);
        let counts = dirichlet_multinomial(tc, pc, cfg.alpha, rng);
        weeks.push((w, counts));
        w = w.next();
    }
    let g: Vec<f64> = weeks.iter().map(|(_, c)| gini(&nonzero(c)).unwrap().value).collect();
    let planted = match plant_with(&g, cfg.target_rho, cfg.base_fake_rate, cfg.fake_spread, rng) {
        Ok(p) => p,
        // Constant Gini series (one topic, or one week): nothing to correlate with.
        Err(_) => Planted {
            values: vec![cfg.base_fake_rate; g.len()],
            clipped: 0,
        },
    };
    let truth = weeks
        .into_iter()
        .enumerate()
        .map(|(wi, (week, counts))| {
            let pc = counts.iter().sum::<u64>() as usize;
            let f = planted.values[wi];
            TruthWeek {
                community: name.clone(),
                week,
                histogram: TopicHistogram::from_counts(counts.iter().copied()).unwrap(),
                topic_counts: counts,
                gini: g[wi],
                planted_fake: f,
                fake_posts: ((f * pc as f64).round() as usize).min(pc),
            }
        })
        .collect();
    (truth, planted.clipped)
}

/// One community's posts and truth; independent of every other community.
fn gen_community(c: usize, cfg: &SynthConfig) -> (Vec<(Post, usize, Class)>, Vec<TruthWeek>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(c as u64 + 1);
    let name = cfg.community_name(c);
    let (truth, clipped) = community_truth(c, cfg, &mut rng);

    let mut posts = Vec::new();
    for (wi, t) in truth.iter().enumerate() {
        let pc = t.histogram.post_count() as usize;
        let n_fake = t.fake_posts;
        let n_unver = (((pc - n_fake) as f64) * cfg.unverified_share).round() as usize;
        let mut classes: Vec<Class> = std::iter::repeat_n(Class::F, n_fake)
            .chain(std::iter::repeat_n(Class::U, n_unver))
            .chain(std::iter::repeat_n(Class::T, pc - n_fake - n_unver))
            .collect();
        classes.shuffle(&mut rng);
        let mut topics: Vec<usize> = t
            .topic_counts
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize))
            .collect();
        topics.shuffle(&mut rng);

        let start = t.week.start_epoch();
        let mut week_posts: Vec<(Post, usize, Class)> = topics
            .into_iter()
            .zip(classes)
            .enumerate()
            .map(|(i, (k, class))| {
                let (title, body) = post_text(c, k, class, cfg, &mut rng);
                let post = Post {
                    id: format!("{name}-{wi:04}-{i:05}"),
                    community: name.clone(),
                    created_utc: start + rng.random_range(0..7 * 86_400),
                    text: join_text(title, body),
                };
                (post, k, class)
            })
            .collect();
        week_posts.sort_by(|a, b| a.0.created_utc.cmp(&b.0.created_utc).then(a.0.id.cmp(&b.0.id)));
        posts.extend(week_posts);
    }
    (posts, truth, clipped)
}

/// Generate a full synthetic dataset. Deterministic per config.
pub fn gen_stream(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    cfg.validate()?;
    use rayon::prelude::*;
    let parts: Vec<_> = (0..cfg.communities)
        .into_par_iter()
        .map(|c| gen_community(c, cfg))
        .collect();

    let mut posts = Vec::new();
    let mut raw_topics = Vec::new();
    let mut classes = Vec::new();
    let mut truth = Vec::new();
    let mut clipped = BTreeMap::new();
    let mut community_of: BTreeMap<String, String> = BTreeMap::new();
    for (c, (ps, tw, clip)) in parts.into_iter().enumerate() {
        clipped.insert(cfg.community_name(c), clip);
        truth.extend(tw);
        for (p, t, class) in ps {
            raw_topics.push((p.id.clone(), t as i32));
            classes.push((p.id.clone(), class));
            community_of.insert(p.id.clone(), p.community.clone());
            posts.push(p);
        }
    }
    let topics = TopicAssignment::from_raw(TopicScope::PerCommunity, TopicMethod::GroundTruth, raw_topics, &|id| {
        community_of.get(id).cloned()
    })
    .expect("every synthetic post has a community");
    let veracity = VeracityAssignment::new(VeracitySource::GroundTruth, classes);
    let training = gen_training(cfg);
    Ok(SynthDataset {
        posts,
        topics,
        veracity,
        truth,
        clipped,
        training,
    })
}

/// Ground truth only, without generating posts. Identical to the `truth`
/// and `clipped` fields of [`gen_stream`] for the same config.
pub fn gen_truth(cfg: &SynthConfig) -> Result<(Vec<TruthWeek>, BTreeMap<String, usize>), SynthError> {
    cfg.validate()?;
    use rayon::prelude::*;
    let parts: Vec<_> = (0..cfg.communities)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64 + 1);
            community_truth(c, cfg, &mut rng)
        })
        .collect();
    let mut truth = Vec::new();
    let mut clipped = BTreeMap::new();
    for (c, (tw, clip)) in parts.into_iter().enumerate() {
        clipped.insert(cfg.community_name(c), clip);
        truth.extend(tw);
    }
    Ok((truth, clipped))
}

/// Balanced labeled documents drawn like posts from random communities/topics.
fn gen_training(cfg: &SynthConfig) -> Vec<(String, Class)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    (0..cfg.training_docs)
        .map(|i| {
            let class = Class::ALL[i % 3];
            let c = rng.random_range(0..cfg.communities);
            let t = rng.random_range(0..cfg.topics_per_community);
            let (title, body) = post_text(c, t, class, cfg, &mut rng);
            (join_text(title, body), class)
        })
        .collect()
}

impl SynthDataset {
    /// Write the posts in the ingest dump format.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.posts {
            let words: Vec<&str> = p.text.split(' ').filter(|s| !s.is_empty()).collect();
            let split = words.len().div_ceil(2);
            crate::ingest::write_dump_line(&mut w, p, &words[..split].join(" "), &words[split..].join(" "))?;
        }
        w.flush()
    }

    /// `community,iso_year,iso_week,post_count,topic_count,gini,planted_fake,fake_posts,histogram`
    pub fn write_truth_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "community",
            "iso_year",
            "iso_week",
            "post_count",
            "topic_count",
            "gini",
            "planted_fake",
            "fake_posts",
            "histogram",
        ])?;
        for t in &self.truth {
            let hist: Vec<String> = t.histogram.counts().iter().map(u64::to_string).collect();
            out.write_record([
                t.community.clone(),
                t.week.iso_year.to_string(),
                t.week.iso_week.to_string(),
                t.histogram.post_count().to_string(),
                t.histogram.topic_count().to_string(),
                t.gini.to_string(),
                t.planted_fake.to_string(),
                t.fake_posts.to_string(),
                hist.join(" "),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlate::pearson;

    #[test]
    fn single_topic_histogram() {
        let h = gen_topic_counts(1, 500, 0.5, 3);
        assert_eq!(h.counts(), &[500]);
        assert_eq!(gini(h.counts()).unwrap().value, 0.0);
    }

    #[test]
    fn counts_sum_to_posts() {
        for seed in 0..20 {
            let h = gen_topic_counts(50, 1000, 0.3, seed);
            assert_eq!(h.post_count(), 1000);
            assert!(h.topic_count() <= 50);
        }
    }

    #[test]
    fn large_alpha_is_near_uniform() {
        let h = gen_topic_counts(50, 100_000, 1e6, 11);
        assert!(gini(h.counts()).unwrap().value < 0.05);
    }

    #[test]
    fn truth_only_path_matches_full_generation() {
        let cfg = SynthConfig {
            communities: 3,
            weeks: 6,
            posts_per_week: PostsPerWeek::Poisson(30.0),
            ..SynthConfig::default()
        };
        let full = gen_stream(&cfg).unwrap();
        let (truth, clipped) = gen_truth(&cfg).unwrap();
        assert_eq!(full.truth, truth);
        assert_eq!(full.clipped, clipped);
    }

    #[test]
    fn plant_noise_free_limit() {
        let g: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 / 20.0).collect();
        let p = plant_correlation(&g, 1.0, 0.4, 0.05, 1).unwrap();
        assert_eq!(p.clipped, 0);
        assert!((pearson(&p.values, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!(plant_correlation(&[0.2; 5], 0.5, 0.4, 0.05, 1).is_err());
    }

    #[test]
    fn plant_zero_within_standard_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let p = plant_correlation(&g, 0.0, 0.5, 0.05, 8).unwrap();
        let r = pearson(&p.values, &g).unwrap();
        assert!(r.abs() <= 2.0 / (10_000f64).sqrt(), "rho = {r}");
    }

    #[test]
    fn stream_is_deterministic() {
        let cfg = SynthConfig {
            communities: 2,
            weeks: 4,
            posts_per_week: PostsPerWeek::Poisson(20.0),
            ..Default::default()
        };
        let a = gen_stream(&cfg).unwrap();
        let b = gen_stream(&cfg).unwrap();
        assert_eq!(a.posts, b.posts);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_dump(&mut x).unwrap();
        b.write_dump(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn fake_counts_match_truth() {
        let cfg = SynthConfig {
            communities: 1,
            weeks: 6,
            ..Default::default()
        };
        let d = gen_stream(&cfg).unwrap();
        for t in &d.truth {
            let n = d
                .posts
                .iter()
                .filter(|p| p.week() == t.week && d.veracity.get(&p.id) == Some(Class::F))
                .count();
            assert_eq!(n, t.fake_posts);
        }
    }

    #[test]
    fn config_round_trips_through_kv() {
        let cfg = SynthConfig {
            posts_per_week: PostsPerWeek::Fixed(33),
            seed: 9,
            ..Default::default()
        };
        assert_eq!(SynthConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
        let mut kv = cfg.to_kv();
        kv.set("alpha", "0");
        assert!(SynthConfig::from_kv(&kv).is_err());
        kv.set("bogus", "1");
        assert!(SynthConfig::from_kv(&kv).is_err());
    }
}
