use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use salfold::folding::{candidates, strip_masses, CandidateMode};
use salfold::image::{generate_synthetic_corpus, SynthSpec};
use salfold::{FoldingPlan, GrayImage, MultiClassModel, SaliencyTemplate};
use salfold_cli::pipeline::Classifier;
use salfold_cli::PipelineConfig;

fn salfold(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salfold"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn small_corpus(dir: &Path, spec: SynthSpec) -> PathBuf {
    let corpus = generate_synthetic_corpus(&spec).unwrap();
    corpus.write_to(&dir.join("corpus")).unwrap();
    let conf = dir.join("run.conf");
    fs::write(
        &conf,
        "manifest = corpus/manifest.tsv\noutput = out\nsaliency.resolution = 24x24\nsaliency.k = 32\n",
    )
    .unwrap();
    conf
}

fn small_spec() -> SynthSpec {
    SynthSpec {
        classes: 4,
        train_per_class: 10,
        test_per_class: 3,
        width: 48,
        height: 48,
        ..SynthSpec::default()
    }
}

#[test]
fn commands_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d, small_spec());

    let out = salfold(&["--config", "run.conf", "preprocess"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let plan = FoldingPlan::load(&d.join("out/plan.txt"), 4).unwrap();
    assert_eq!(plan.column.source.abs_diff(plan.column.target), 1);
    assert_eq!(plan.row.source.abs_diff(plan.row.target), 1);
    assert!(d.join("out/template.txt").is_file());
    let first = fs::read(d.join("out/plan.txt")).unwrap();
    let template = fs::read(d.join("out/template.txt")).unwrap();

    let out = salfold(&["--config", "run.conf", "train"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = MultiClassModel::load(&d.join("out/model.txt")).unwrap();
    assert_eq!(model.pairs.len(), 6);
    assert!(model.fingerprint.ends_with("d1062"));
    let model_bytes = fs::read(d.join("out/model.txt")).unwrap();

    let out = salfold(&["--config", "run.conf", "classify", "corpus/images/train_c002_0003.png"], d);
    assert_eq!(code(&out), 0);
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.contains("1121-120-002-700"), "{line}");

    let out = salfold(&["--config", "run.conf", "evaluate"], d);
    assert_eq!(code(&out), 0);
    let report = fs::read_to_string(d.join("out/evaluation.txt")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("TOTAL ") && l.ends_with(" N 12")), "{report}");
    let listing = fs::read_to_string(d.join("out/predictions.tsv")).unwrap();
    assert_eq!(listing.lines().count(), 12);
    assert!(listing.lines().all(|l| l.split('\t').count() == 2));

    // Reruns reproduce every artifact byte for byte.
    assert_eq!(code(&salfold(&["--config", "run.conf", "--threads", "2", "preprocess"], d)), 0);
    assert_eq!(code(&salfold(&["--config", "run.conf", "--threads", "3", "train"], d)), 0);
    assert_eq!(fs::read(d.join("out/plan.txt")).unwrap(), first);
    assert_eq!(fs::read(d.join("out/template.txt")).unwrap(), template);
    assert_eq!(fs::read(d.join("out/model.txt")).unwrap(), model_bytes);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d, small_spec());
    assert_eq!(code(&salfold(&["--help"], d)), 0);
    assert_eq!(code(&salfold(&["--bogus", "train"], d)), 1);
    assert_eq!(code(&salfold(&["--config", "run.conf", "--set", "nope=1", "train"], d)), 1);
    assert_eq!(code(&salfold(&["--config", "missing.conf", "train"], d)), 1);
    // No preprocess artifacts yet.
    assert_eq!(code(&salfold(&["--config", "run.conf", "train"], d)), 2);
    assert_eq!(code(&salfold(&["--config", "run.conf", "--fold", "off", "train"], d)), 0);

    GrayImage::filled(4, 4, 100.0).save(&d.join("tiny.png")).unwrap();
    let out = salfold(&["--config", "run.conf", "--fold", "off", "classify", "tiny.png"], d);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 8"));

    // A 4x4 model queried with 3x3 features.
    fs::write(d.join("out/plan.txt"), FoldingPlan::fixed(4).to_text()).unwrap();
    let out = salfold(&["--config", "run.conf", "--fold", "fixed", "classify", "corpus/images/test_c000_0000.png"], d);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("d1888"));
}

#[test]
fn failed_preprocess_leaves_no_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d, small_spec());
    let manifest = d.join("corpus/manifest.tsv");
    let mut text = fs::read_to_string(&manifest).unwrap();
    text.push_str("images/broken.png\t1121-120-000-700\ttrain\n");
    fs::write(&manifest, text).unwrap();
    fs::write(d.join("corpus/images/broken.png"), b"not an image").unwrap();

    let out = salfold(&["--config", "run.conf", "--fold", "fixed", "preprocess"], d);
    assert_eq!(code(&out), 2);
    assert!(!d.join("out/plan.txt").exists());
    assert!(!d.join("out/folded").exists());
    assert!(!d.join("out/config.txt").exists());
}

#[test]
fn left_weighted_saliency_folds_a_right_column() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(
        d,
        SynthSpec {
            disc_center: (0.28, 0.5),
            disc_radius: 0.25,
            ..small_spec()
        },
    );
    assert_eq!(code(&salfold(&["--config", "run.conf", "preprocess"], d)), 0);
    let plan = FoldingPlan::load(&d.join("out/plan.txt"), 4).unwrap();
    assert!(plan.column.source >= 2, "{:?}", plan.column);

    let template = SaliencyTemplate::load(&d.join("out/template.txt")).unwrap();
    let (cols, _) = strip_masses(&template, 4).unwrap();
    let scored = candidates(&cols, CandidateMode::Adjacent);
    let best = scored.iter().map(|c| c.score).fold(f64::INFINITY, f64::min);
    assert_eq!(cols[plan.column.source], best);
}

#[test]
fn query_latency_is_positive_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let conf = small_corpus(d, small_spec());
    assert_eq!(code(&salfold(&["--config", "run.conf", "preprocess"], d)), 0);
    assert_eq!(code(&salfold(&["--config", "run.conf", "train"], d)), 0);

    let cfg = PipelineConfig::from_file(&conf).unwrap();
    let classifier = Classifier::load(&cfg).unwrap();
    let query = d.join("corpus/images/test_c001_0001.png");
    classifier.classify_path(&query).unwrap();
    let mut ms: Vec<f64> = (0..20)
        .map(|_| classifier.classify_path(&query).unwrap().latency.as_secs_f64() * 1e3)
        .collect();
    assert!(ms.iter().all(|&t| t > 0.0));
    ms.sort_by(f64::total_cmp);
    let (q1, median, q3) = (ms[5], ms[10], ms[15]);
    assert!((q3 - q1) / median < 0.5, "{ms:?}");
}
