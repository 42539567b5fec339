use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iol_core::config::KvConfig;
use iol_core::manifest::Manifest;
use iol_core::pipeline::{self, PipelineError};

#[derive(Parser)]
#[command(
    name = "iol",
    version,
    about = "Weekly information-overload and fake-news statistics for online communities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// -v for debug, -vv for trace; RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, value_name = "DIR")]
    out_dir: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Filter dumps by community keyword and stage weekly bins.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Dump file (NDJSON, optionally gzip); repeatable.
        #[arg(long)]
        input: Vec<String>,
        /// Comma-separated community keywords.
        #[arg(long)]
        keywords: Option<String>,
        /// Drop posts whose text is empty, `[deleted]` or `[removed]`.
        #[arg(long)]
        drop_empty: bool,
    },
    /// Fit the built-in topic model.
    Topics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        posts: Option<String>,
        /// `ds` (per community) or `f` (whole dataset).
        #[arg(long)]
        scope: Option<String>,
        /// `none`, `distribution` or `centroid`.
        #[arg(long)]
        outlier: Option<String>,
        /// `auto` or a topic count.
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        tau: Option<String>,
        /// 2-means trials per bisection.
        #[arg(long)]
        n_init: Option<String>,
        #[arg(long)]
        ngram_max: Option<String>,
    },
    /// Assign F/T/U veracity classes with the baseline classifier.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        posts: Option<String>,
        /// `text,class` CSV to train on.
        #[arg(long)]
        training: Option<String>,
        /// Saved model artifact to load instead of training.
        #[arg(long)]
        model: Option<String>,
        /// `text,class` CSV to score into a classification report.
        #[arg(long)]
        holdout: Option<String>,
        #[arg(long)]
        save_model: bool,
        #[arg(long)]
        epochs: Option<String>,
        #[arg(long)]
        learning_rate: Option<String>,
        #[arg(long)]
        l2: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Weekly panel series per scope plus the across-community aggregate.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ingest_dir: Option<String>,
        /// `post_id,topic_id` labels.
        #[arg(long)]
        topics: Option<String>,
        /// `post_id,class` labels.
        #[arg(long)]
        veracity: Option<String>,
        /// Scope of the topic labels: `ds` or `f`.
        #[arg(long)]
        topic_scope: Option<String>,
        #[arg(long)]
        include_outliers: bool,
        /// `exact`, `rewritten`, `degenerate` or `bias-corrected`.
        #[arg(long)]
        gini_variant: Option<String>,
    },
    /// Correlate fake fraction with Gini per community.
    Correlate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ingest_dir: Option<String>,
        #[arg(long)]
        topics_f: Option<String>,
        #[arg(long)]
        topics_ds: Option<String>,
        #[arg(long)]
        veracity: Option<String>,
        /// Comma-separated subset of `a,b,c`.
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        include_outliers: bool,
        #[arg(long)]
        gini_variant: Option<String>,
    },
    /// Generate a synthetic corpus with ground-truth labels.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        communities: Option<String>,
        #[arg(long)]
        weeks: Option<String>,
        /// `N` or `poisson:MEAN`.
        #[arg(long)]
        posts_per_week: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        target_rho: Option<String>,
    },
}

fn base(common: &Common) -> Result<KvConfig, PipelineError> {
    let mut kv = match &common.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::default(),
    };
    kv.set_opt("out_dir", common.out_dir.clone());
    Ok(kv)
}

fn flag(kv: &mut KvConfig, key: &str, on: bool) {
    if on {
        kv.set(key, "true");
    }
}

fn run(command: Command) -> Result<Manifest, PipelineError> {
    match command {
        Command::Ingest {
            common,
            input,
            keywords,
            drop_empty,
        } => {
            let mut kv = base(&common)?;
            if !input.is_empty() {
                kv.set("input", input.join(","));
            }
            kv.set_opt("keywords", keywords);
            flag(&mut kv, "drop_empty", drop_empty);
            pipeline::cmd_ingest(&kv)
        }
        Command::Topics {
            common,
            posts,
            scope,
            outlier,
            k,
            seed,
            tau,
            n_init,
            ngram_max,
        } => {
            let mut kv = base(&common)?;
            kv.set_opt("posts", posts);
            kv.set_opt("scope", scope);
            kv.set_opt("outlier", outlier);
            kv.set_opt("k", k);
            kv.set_opt("seed", seed);
            kv.set_opt("tau", tau);
            kv.set_opt("n_init", n_init);
            kv.set_opt("ngram_max", ngram_max);
            pipeline::cmd_topics(&kv)
        }
        Command::Classify {
            common,
            posts,
            training,
            model,
            holdout,
            save_model,
            epochs,
            learning_rate,
            l2,
            seed,
        } => {
            let mut kv = base(&common)?;
            kv.set_opt("posts", posts);
            kv.set_opt("training", training);
            kv.set_opt("model", model);
            kv.set_opt("holdout", holdout);
            flag(&mut kv, "save_model", save_model);
            kv.set_opt("epochs", epochs);
            kv.set_opt("learning_rate", learning_rate);
            kv.set_opt("l2", l2);
            kv.set_opt("seed", seed);
            pipeline::cmd_classify(&kv)
        }
        Command::Metrics {
            common,
            ingest_dir,
            topics,
            veracity,
            topic_scope,
            include_outliers,
            gini_variant,
        } => {
            let mut kv = base(&common)?;
            kv.set_opt("ingest_dir", ingest_dir);
            kv.set_opt("topics", topics);
            kv.set_opt("veracity", veracity);
            kv.set_opt("topic_scope", topic_scope);
            flag(&mut kv, "include_outliers", include_outliers);
            kv.set_opt("gini_variant", gini_variant);
            pipeline::cmd_metrics(&kv)
        }
        Command::Correlate {
            common,
            ingest_dir,
            topics_f,
            topics_ds,
            veracity,
            schemes,
            include_outliers,
            gini_variant,
        } => {
            let mut kv = base(&common)?;
            kv.set_opt("ingest_dir", ingest_dir);
            kv.set_opt("topics_f", topics_f);
            kv.set_opt("topics_ds", topics_ds);
            kv.set_opt("veracity", veracity);
            kv.set_opt("schemes", schemes);
            flag(&mut kv, "include_outliers", include_outliers);
            kv.set_opt("gini_variant", gini_variant);
            pipeline::cmd_correlate(&kv)
        }
        Command::Synth {
            common,
            seed,
            communities,
            weeks,
            posts_per_week,
            alpha,
            target_rho,
        } => {
            let mut kv = base(&common)?;
            kv.set_opt("seed", seed);
            kv.set_opt("communities", communities);
            kv.set_opt("weeks", weeks);
            kv.set_opt("posts_per_week", posts_per_week);
            kv.set_opt("alpha", alpha);
            kv.set_opt("target_rho", target_rho);
            pipeline::cmd_synth(&kv)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli.command) {
        Ok(m) => {
            for (name, _) in &m.outputs {
                println!("{name}");
            }
            println!("{}", m.file_name());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("iol: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
