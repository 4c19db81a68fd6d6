//! The pipeline stages: preprocess, train, classify and evaluate.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use salfold::folding::{apply_folding, plan_folding};
use salfold::image::{load_image_checked, ManifestEntry};
use salfold::irma::{evaluate_run, RunSummary};
use salfold::lbp::{extract_features, FeatureMatrix};
use salfold::saliency::{compute_saliency, TemplateBuilder};
use salfold::svm::train_multiclass;
use salfold::{
    DatasetManifest, FoldingPlan, GrayImage, IrmaCode, LbpParams, MultiClassModel, PositionVocabulary,
    SaliencyTemplate, Split, Superposition,
};

use crate::artifacts::*;
use crate::config::{FoldMode, PipelineConfig};
use crate::error::CliError;

/// Images are processed in chunks of this size to bound memory.
const CHUNK: usize = 256;

pub fn load_manifest(cfg: &PipelineConfig) -> Result<DatasetManifest, CliError> {
    Ok(DatasetManifest::read(cfg.manifest_path()?)?)
}

/// Training entries with their manifest index and class index.
fn training_set(manifest: &DatasetManifest) -> Result<(Vec<IrmaCode>, Vec<(usize, usize)>), CliError> {
    let classes = manifest.class_table();
    let entries: Vec<(usize, usize)> = manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Split::Train)
        .map(|(i, e)| (i, classes.binary_search(&e.code).unwrap()))
        .collect();
    if entries.is_empty() {
        return Err(CliError::data("manifest has no training images"));
    }
    Ok((classes, entries))
}

fn load_entry(manifest: &DatasetManifest, entry: &ManifestEntry) -> Result<GrayImage, CliError> {
    Ok(load_image_checked(&manifest.resolve(entry))?)
}

#[derive(Debug)]
pub struct PreprocessOutcome {
    pub template: Option<SaliencyTemplate>,
    pub plan: Option<FoldingPlan>,
    pub folded: usize,
    pub elapsed: Duration,
}

/// Builds the saliency template and folding plan from the training split
/// and writes the folded training images to the cache.
pub fn preprocess(cfg: &PipelineConfig) -> Result<PreprocessOutcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let manifest = load_manifest(cfg)?;
    let (_, train) = training_set(&manifest)?;
    ensure_dir(&cfg.output)?;
    let mut outputs = Outputs::new();
    outputs.write(cfg.output.join(CONFIG_FILE), &cfg.to_text())?;

    let mut template = None;
    let plan = match cfg.fold {
        FoldMode::Off => None,
        FoldMode::Fixed => Some(FoldingPlan::fixed(cfg.grid)),
        FoldMode::Saliency => {
            let mut builder = TemplateBuilder::new();
            for chunk in train.chunks(CHUNK) {
                let maps = chunk
                    .par_iter()
                    .map(|&(i, _)| {
                        let img = load_entry(&manifest, &manifest.entries[i])?;
                        Ok(compute_saliency(&img, &cfg.saliency)?)
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                for (&(_, class), map) in chunk.iter().zip(&maps) {
                    builder.add(class, map)?;
                }
            }
            let t = builder.finish()?;
            let path = outputs.track(cfg.output.join(TEMPLATE_FILE));
            t.save(&path)?;
            let plan = plan_folding(&t, cfg.grid, cfg.candidates)?;
            template = Some(t);
            Some(plan)
        }
    };

    let mut folded = 0;
    if let Some(plan) = &plan {
        let path = outputs.track(cfg.output.join(PLAN_FILE));
        plan.save(&path)?;
        let dir = cfg.output.join(FOLDED_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir)
                .map_err(|e| CliError::internal(format!("cannot clear {}: {e}", dir.display())))?;
        }
        ensure_dir(&dir)?;
        outputs.track(dir);
        for chunk in train.chunks(CHUNK) {
            chunk.par_iter().try_for_each(|&(i, _)| -> Result<(), CliError> {
                let img = load_entry(&manifest, &manifest.entries[i])?;
                let f = apply_folding(&img, plan, cfg.superposition)?;
                let path = folded_path(&cfg.output, i);
                fs::write(&path, encode_folded(&f))
                    .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
            })?;
            folded += chunk.len();
        }
    }
    outputs.commit();
    Ok(PreprocessOutcome {
        template,
        plan,
        folded,
        elapsed: start.elapsed(),
    })
}

fn load_plan(cfg: &PipelineConfig) -> Result<Option<FoldingPlan>, CliError> {
    if cfg.fold == FoldMode::Off {
        return Ok(None);
    }
    let path = cfg.output.join(PLAN_FILE);
    require(&path, "folding plan")?;
    Ok(Some(FoldingPlan::load(&path, cfg.grid)?))
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: MultiClassModel,
    pub samples: usize,
    pub dimension: usize,
    pub elapsed: Duration,
}

/// Extracts features from the (folded) training images and trains the
/// classifier.
pub fn train(cfg: &PipelineConfig) -> Result<TrainOutcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let manifest = load_manifest(cfg)?;
    let (classes, train) = training_set(&manifest)?;
    let lbp = cfg.lbp_params();
    if cfg.fold != FoldMode::Off {
        require(&cfg.output.join(PLAN_FILE), "folding plan")?;
    }
    ensure_dir(&cfg.output)?;

    let rows = train
        .par_iter()
        .map(|&(i, _)| {
            let img = if cfg.fold == FoldMode::Off {
                load_entry(&manifest, &manifest.entries[i])?
            } else {
                let path = folded_path(&cfg.output, i);
                require(&path, "folded image")?;
                read_folded(&path)?
            };
            Ok(extract_features(&img, &lbp)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let labels: Vec<usize> = train.iter().map(|&(_, c)| c).collect();

    let mut features = FeatureMatrix::new(&lbp);
    for (row, &label) in rows.iter().zip(&labels) {
        features.push(label, row.clone());
    }
    let names = classes.iter().map(|c| c.to_string()).collect();
    let x: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let model = train_multiclass(&x, &labels, names, &cfg.svm, &lbp.fingerprint())?;

    let mut outputs = Outputs::new();
    let path = outputs.track(cfg.output.join(FEATURES_FILE));
    features.save(&path)?;
    let path = outputs.track(cfg.output.join(MODEL_FILE));
    model.save(&path)?;
    outputs.commit();
    Ok(TrainOutcome {
        samples: rows.len(),
        dimension: lbp.dimension(),
        model,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: usize,
    pub code: String,
    /// Fold, feature extraction and prediction; decoding is excluded.
    pub latency: Duration,
}

/// Loaded online-stage artifacts.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub plan: Option<FoldingPlan>,
    pub superposition: Superposition,
    pub lbp: LbpParams,
    pub model: MultiClassModel,
}

impl Classifier {
    pub fn load(cfg: &PipelineConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let plan = load_plan(cfg)?;
        let path = cfg.output.join(MODEL_FILE);
        require(&path, "model")?;
        let model = MultiClassModel::load(&path)?;
        let lbp = cfg.lbp_params();
        model.check_fingerprint(&lbp.fingerprint())?;
        Ok(Classifier {
            plan,
            superposition: cfg.superposition,
            lbp,
            model,
        })
    }

    pub fn classify(&self, img: &GrayImage) -> Result<Classification, CliError> {
        img.ensure_min_size()?;
        let start = Instant::now();
        let features = match &self.plan {
            Some(plan) => extract_features(&apply_folding(img, plan, self.superposition)?, &self.lbp)?,
            None => extract_features(img, &self.lbp)?,
        };
        let class = self.model.predict(features.as_slice())?.class;
        let latency = start.elapsed();
        Ok(Classification {
            class,
            code: self.model.class_names[class].clone(),
            latency,
        })
    }

    pub fn classify_path(&self, path: &Path) -> Result<Classification, CliError> {
        let img = load_image_checked(path)?;
        self.classify(&img)
    }
}

#[derive(Debug)]
pub struct EvaluationOutcome {
    pub summary: RunSummary,
    pub correct: usize,
    pub accuracy: f64,
    pub predictions: Vec<String>,
    /// Per-query online time, in test-split order.
    pub latencies: Vec<Duration>,
    /// Wall time of the sequential query loop.
    pub test_time: Duration,
}

/// Classifies the test split one query at a time and scores the codes.
pub fn evaluate(cfg: &PipelineConfig) -> Result<EvaluationOutcome, CliError> {
    let classifier = Classifier::load(cfg)?;
    let manifest = load_manifest(cfg)?;
    let test: Vec<&ManifestEntry> = manifest.split(Split::Test).collect();
    if test.is_empty() {
        return Err(CliError::data("manifest has no test images"));
    }
    let images = test
        .par_iter()
        .map(|e| load_entry(&manifest, e))
        .collect::<Result<Vec<_>, CliError>>()?;

    let start = Instant::now();
    let mut results = Vec::with_capacity(images.len());
    for img in &images {
        results.push(classifier.classify(img)?);
    }
    let test_time = start.elapsed();

    let truths: Vec<IrmaCode> = test.iter().map(|e| e.code).collect();
    let predicted = results
        .iter()
        .map(|r| IrmaCode::parse(&r.code))
        .collect::<Result<Vec<_>, _>>()?;
    let classes = manifest.class_table();
    let vocab = PositionVocabulary::build(classes.iter())?;
    let summary = evaluate_run(&truths, &predicted, &vocab, cfg.rule)?;
    let correct = summary.exact_matches;

    let mut listing = String::new();
    for (e, p) in test.iter().zip(&predicted) {
        let _ = writeln!(listing, "{}\t{}", e.path.display(), p);
    }
    let accuracy = correct as f64 / test.len() as f64;
    let mut report = String::new();
    let width = test.iter().map(|e| e.path.as_os_str().len()).max().unwrap_or(5).max(5);
    let _ = writeln!(
        report,
        "{:<width$}  {:<16}  {:<16}  {:>7} {:>7} {:>7} {:>7}  {:>7}  flags",
        "image", "truth", "predicted", "T", "D", "A", "B", "total"
    );
    for ((e, p), s) in test.iter().zip(&predicted).zip(&summary.scores) {
        let mut flags = Vec::new();
        if !s.gaps.is_empty() {
            flags.push("vocabulary-gap");
        }
        if s.wildcards {
            flags.push("wildcard");
        }
        let _ = writeln!(
            report,
            "{:<width$}  {:<16}  {:<16}  {:>7.4} {:>7.4} {:>7.4} {:>7.4}  {:>7.4}  {}",
            e.path.display(),
            e.code.to_string(),
            p.to_string(),
            s.axes[0],
            s.axes[1],
            s.axes[2],
            s.axes[3],
            s.total,
            if flags.is_empty() { "-".to_string() } else { flags.join(",") }
        );
    }
    let _ = writeln!(report, "{}", summary.summary_line());
    let _ = writeln!(report, "CORRECT {} OF {} ACCURACY {:.6}", correct, test.len(), accuracy);
    let mut outputs = Outputs::new();
    outputs.write(cfg.output.join(PREDICTIONS_FILE), &listing)?;
    outputs.write(cfg.output.join(EVALUATION_FILE), &report)?;
    outputs.commit();

    Ok(EvaluationOutcome {
        correct,
        accuracy,
        latencies: results.iter().map(|r| r.latency).collect(),
        predictions: results.into_iter().map(|r| r.code).collect(),
        test_time,
        summary,
    })
}

/// Paths listed one per line in `list`, relative to the list's directory.
pub fn read_query_list(list: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(list).map_err(|e| CliError::data(format!("cannot read {}: {e}", list.display())))?;
    let base = list.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}
