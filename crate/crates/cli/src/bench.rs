//! Folded against unfolded comparison on identical splits.

use std::fmt::Write as _;
use std::fs;
use std::time::{Duration, Instant};

use salfold::image::load_image_checked;
use salfold::Split;

use crate::artifacts::{ensure_dir, Outputs, BENCH_SUMMARY_FILE, BENCH_TABLE_FILE};
use crate::config::{FoldMode, PipelineConfig};
use crate::error::CliError;
use crate::pipeline::{evaluate, load_manifest, preprocess, train, Classifier};

/// Error-score sums of other systems on the full IRMA benchmark, quoted
/// as published; they are not recomputed here.
pub const LITERATURE: [(&str, f64); 2] = [("TAU", 169.5), ("VPASabanci", 261.2)];

pub const TIMING_SCOPE: &str = "online time per query = fold + features + predict, image decode excluded";

#[derive(Debug, Clone, PartialEq)]
pub struct ArmReport {
    pub name: String,
    pub fold: FoldMode,
    pub grid: usize,
    pub dimension: usize,
    pub preprocess_time: Duration,
    pub train_time: Duration,
    /// Fastest of the repeated sequential passes over the test split.
    pub test_time: Duration,
    pub test_count: usize,
    pub error_sum: f64,
    pub accuracy: f64,
}

impl ArmReport {
    pub fn per_image_ms(&self) -> f64 {
        self.test_time.as_secs_f64() * 1e3 / self.test_count as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub unfolded: ArmReport,
    pub folded: ArmReport,
    pub threads: usize,
    pub host: String,
}

impl BenchReport {
    /// `1 - folded / unfolded` feature dimension.
    pub fn dimension_reduction(&self) -> f64 {
        1.0 - self.folded.dimension as f64 / self.unfolded.dimension as f64
    }

    /// `1 - folded / unfolded` per-query time.
    pub fn time_reduction(&self) -> f64 {
        1.0 - self.folded.per_image_ms() / self.unfolded.per_image_ms()
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {TIMING_SCOPE}");
        let _ = writeln!(out, "# threads = {}, host = {}", self.threads, self.host);
        let _ = writeln!(
            out,
            "{:<24} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10} {:>9}",
            "arm", "grid", "dims", "train s", "test s", "ms/query", "error sum", "accuracy"
        );
        for arm in [&self.unfolded, &self.folded] {
            let _ = writeln!(
                out,
                "{:<24} {:>5} {:>6} {:>10.3} {:>10.3} {:>10.3} {:>10.4} {:>8.2}%",
                format!("{} ({})", arm.name, arm.fold.name()),
                format!("{0}x{0}", arm.grid),
                arm.dimension,
                (arm.preprocess_time + arm.train_time).as_secs_f64(),
                arm.test_time.as_secs_f64(),
                arm.per_image_ms(),
                arm.error_sum,
                arm.accuracy * 100.0
            );
        }
        for (name, err) in LITERATURE {
            let _ = writeln!(
                out,
                "{:<24} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10.2} {:>9}",
                format!("{name} (reported)"),
                "-",
                "-",
                "-",
                "-",
                "-",
                err,
                "-"
            );
        }
        let _ = writeln!(
            out,
            "feature dimension {} -> {}: {:.2}% smaller; query time {:.2}% lower",
            self.unfolded.dimension,
            self.folded.dimension,
            self.dimension_reduction() * 100.0,
            self.time_reduction() * 100.0
        );
        out
    }

    /// Machine-readable `key = value` lines.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "timing_scope = {TIMING_SCOPE}");
        let _ = writeln!(out, "threads = {}", self.threads);
        let _ = writeln!(out, "host = {}", self.host);
        for arm in [&self.unfolded, &self.folded] {
            let p = &arm.name;
            let _ = writeln!(out, "{p}.fold = {}", arm.fold.name());
            let _ = writeln!(out, "{p}.grid = {}", arm.grid);
            let _ = writeln!(out, "{p}.dimension = {}", arm.dimension);
            let _ = writeln!(out, "{p}.preprocess_seconds = {:.6}", arm.preprocess_time.as_secs_f64());
            let _ = writeln!(out, "{p}.train_seconds = {:.6}", arm.train_time.as_secs_f64());
            let _ = writeln!(out, "{p}.test_seconds = {:.6}", arm.test_time.as_secs_f64());
            let _ = writeln!(out, "{p}.test_count = {}", arm.test_count);
            let _ = writeln!(out, "{p}.per_image_ms = {:.6}", arm.per_image_ms());
            let _ = writeln!(out, "{p}.error_sum = {:.6}", arm.error_sum);
            let _ = writeln!(out, "{p}.accuracy = {:.6}", arm.accuracy);
        }
        let _ = writeln!(out, "dimension_reduction = {}", self.dimension_reduction());
        let _ = writeln!(out, "dimension_reduction_percent = {:.2}", self.dimension_reduction() * 100.0);
        let _ = writeln!(out, "time_reduction_percent = {:.2}", self.time_reduction() * 100.0);
        for (name, err) in LITERATURE {
            let _ = writeln!(out, "literature.{name}.error_sum = {err} (reported)");
        }
        out
    }
}

fn host_description() -> String {
    let name = std::env::var("HOSTNAME")
        .ok()
        .or_else(|| fs::read_to_string("/etc/hostname").ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into());
    format!("{name} ({}-{})", std::env::consts::OS, std::env::consts::ARCH)
}

fn run_arm(cfg: &PipelineConfig, name: &str, repeats: usize) -> Result<ArmReport, CliError> {
    let pre = preprocess(cfg)?;
    let trained = train(cfg)?;
    let eval = evaluate(cfg)?;

    let manifest = load_manifest(cfg)?;
    let images = manifest
        .split(Split::Test)
        .map(|e| load_image_checked(&manifest.resolve(e)))
        .collect::<Result<Vec<_>, _>>()?;
    let classifier = Classifier::load(cfg)?;
    let mut best = eval.test_time;
    for _ in 1..repeats.max(1) {
        let start = Instant::now();
        for img in &images {
            classifier.classify(img)?;
        }
        best = best.min(start.elapsed());
    }
    Ok(ArmReport {
        name: name.to_string(),
        fold: cfg.fold,
        grid: cfg.feature_grid(),
        dimension: trained.dimension,
        preprocess_time: pre.elapsed,
        train_time: trained.elapsed,
        test_time: best,
        test_count: images.len(),
        error_sum: eval.summary.sum,
        accuracy: eval.accuracy,
    })
}

/// Runs both arms under `output/unfolded` and `output/folded` and writes
/// the report files to `output`.
pub fn run_bench(cfg: &PipelineConfig, repeats: usize) -> Result<BenchReport, CliError> {
    cfg.validate()?;
    ensure_dir(&cfg.output)?;
    let mut unfolded_cfg = cfg.clone();
    unfolded_cfg.fold = FoldMode::Off;
    unfolded_cfg.output = cfg.output.join("unfolded");
    let mut folded_cfg = cfg.clone();
    if folded_cfg.fold == FoldMode::Off {
        folded_cfg.fold = FoldMode::Saliency;
    }
    folded_cfg.output = cfg.output.join("folded");

    let unfolded = run_arm(&unfolded_cfg, "unfolded", repeats)?;
    let folded = run_arm(&folded_cfg, "folded", repeats)?;
    let report = BenchReport {
        unfolded,
        folded,
        threads: rayon::current_num_threads(),
        host: host_description(),
    };
    let mut outputs = Outputs::new();
    outputs.write(cfg.output.join(BENCH_TABLE_FILE), &report.table())?;
    outputs.write(cfg.output.join(BENCH_SUMMARY_FILE), &report.summary())?;
    outputs.commit();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(name: &str, grid: usize, dimension: usize, ms: u64) -> ArmReport {
        ArmReport {
            name: name.into(),
            fold: if grid == 4 { FoldMode::Off } else { FoldMode::Saliency },
            grid,
            dimension,
            preprocess_time: Duration::ZERO,
            train_time: Duration::from_millis(5),
            test_time: Duration::from_millis(ms * 10),
            test_count: 10,
            error_sum: 1.5,
            accuracy: 0.95,
        }
    }

    #[test]
    fn report_derives_reductions() {
        let r = BenchReport {
            unfolded: arm("unfolded", 4, 1888, 53),
            folded: arm("folded", 3, 1062, 30),
            threads: 1,
            host: "test".into(),
        };
        assert_eq!(r.dimension_reduction(), 0.4375);
        assert!((r.unfolded.per_image_ms() - 53.0).abs() < 1e-9);
        assert!((r.time_reduction() - 23.0 / 53.0).abs() < 1e-12);
        let summary = r.summary();
        assert!(summary.contains("dimension_reduction_percent = 43.75"));
        assert!(summary.contains("literature.TAU.error_sum = 169.5 (reported)"));
        assert!(summary.contains("literature.VPASabanci.error_sum = 261.2 (reported)"));
        let table = r.table();
        assert!(table.contains("TAU (reported)"));
        assert!(table.contains("1888") && table.contains("1062"));
        assert!(table.contains("43.75% smaller"));
    }
}
