use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use salfold::image::{generate_synthetic_corpus, SynthSpec};

use crate::bench::run_bench;
use crate::config::{FoldMode, PipelineConfig};
use crate::error::CliError;
use crate::pipeline::{evaluate, preprocess, read_query_list, train, Classifier};

#[derive(Debug, Parser)]
#[command(name = "salfold", version, about = "Saliency-folded LBP/SVM image classification")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["saliency", "fixed", "off"])]
    pub fold: Option<String>,
    /// Block grid before folding.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Extra `key=value` config override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the saliency template and folding plan, fold training images.
    Preprocess,
    /// Extract features and train the classifier.
    Train,
    /// Classify query images.
    Classify {
        images: Vec<PathBuf>,
        /// File listing one query path per line.
        #[arg(long)]
        list: Option<PathBuf>,
        /// Classify each query this many times and report latency spread.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
    /// Classify the test split and report error scores.
    Evaluate,
    /// Compare the folded and unfolded pipelines.
    Bench {
        /// Timed passes over the test split; the fastest is reported.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Write a synthetic labelled corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        train: usize,
        #[arg(long, default_value_t = 20)]
        test: usize,
        /// Side length in pixels.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.set {
            cfg.apply_override(kv)?;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = &self.fold {
            cfg.fold = FoldMode::parse(f).ok_or_else(|| CliError::usage(format!("unknown fold mode {f}")))?;
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(m.clone());
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        Ok(cfg)
    }
}

/// Runs a parsed command line; output goes to stdout.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.global.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::internal(format!("cannot start worker threads: {e}")))?;
    pool.install(|| execute(&cli.command, &cfg))
}

fn execute(command: &Command, cfg: &PipelineConfig) -> Result<(), CliError> {
    let threads = rayon::current_num_threads();
    match command {
        Command::Preprocess => {
            let out = preprocess(cfg)?;
            if let Some(plan) = &out.plan {
                println!(
                    "plan: column {} -> {}, row {} -> {}{}",
                    plan.column.source,
                    plan.column.target,
                    plan.row.source,
                    plan.row.target,
                    if plan.degenerate { " (degenerate template)" } else { "" }
                );
            } else {
                println!("fold mode off: nothing to preprocess");
            }
            println!(
                "folded {} training images in {:.3} s ({threads} threads)",
                out.folded,
                out.elapsed.as_secs_f64()
            );
        }
        Command::Train => {
            let out = train(cfg)?;
            println!(
                "trained {} pairwise models on {} samples, {} dims, in {:.3} s ({threads} threads)",
                out.model.pairs.len(),
                out.samples,
                out.dimension,
                out.elapsed.as_secs_f64()
            );
        }
        Command::Classify { images, list, repeat } => {
            let mut queries = images.clone();
            if let Some(l) = list {
                queries.extend(read_query_list(l)?);
            }
            if queries.is_empty() {
                return Err(CliError::usage("no query images given"));
            }
            let classifier = Classifier::load(cfg)?;
            for q in &queries {
                let img = salfold::image::load_image_checked(q)?;
                let mut times = Vec::with_capacity(*repeat);
                let mut result = None;
                for _ in 0..(*repeat).max(1) {
                    let r = classifier.classify(&img)?;
                    times.push(r.latency.as_secs_f64() * 1e3);
                    result = Some(r);
                }
                let r = result.unwrap();
                if times.len() > 1 {
                    let min = times.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = times.iter().cloned().fold(0.0, f64::max);
                    times.sort_by(f64::total_cmp);
                    let median = times[times.len() / 2];
                    println!(
                        "{}\t{}\t{median:.3} ms median ({min:.3}..{max:.3} over {})",
                        q.display(),
                        r.code,
                        times.len()
                    );
                } else {
                    println!("{}\t{}\t{:.3} ms", q.display(), r.code, times[0]);
                }
            }
        }
        Command::Evaluate => {
            let out = evaluate(cfg)?;
            println!("{}", out.summary.summary_line());
            println!(
                "accuracy {:.2}% ({} of {}), {:.3} ms per query ({threads} threads)",
                out.accuracy * 100.0,
                out.correct,
                out.predictions.len(),
                out.test_time.as_secs_f64() * 1e3 / out.predictions.len() as f64
            );
        }
        Command::Bench { repeats } => {
            let report = run_bench(cfg, *repeats)?;
            print!("{}", report.table());
        }
        Command::Synth {
            out,
            classes,
            train,
            test,
            size,
            noise,
        } => {
            let spec = SynthSpec {
                classes: *classes,
                train_per_class: *train,
                test_per_class: *test,
                width: *size,
                height: *size,
                noise: *noise,
                seed: cfg.seed,
                ..SynthSpec::default()
            };
            let corpus = generate_synthetic_corpus(&spec)?;
            let manifest = corpus.write_to(out)?;
            println!("wrote {} images, manifest {}", corpus.images.len(), manifest.display());
        }
    }
    Ok(())
}
