//! Run configuration: a `key = value` file plus command-line overrides.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use salfold::folding::CandidateMode;
use salfold::irma::MismatchRule;
use salfold::lbp::Sampling;
use salfold::svm::KernelKind;
use salfold::{LbpParams, SaliencyParams, Superposition, SvmParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FoldMode {
    /// Plan derived from the training saliency template.
    #[default]
    Saliency,
    /// Outermost strips folded inward, no saliency.
    Fixed,
    /// No folding; features on the full grid.
    Off,
}

impl FoldMode {
    pub fn name(self) -> &'static str {
        match self {
            FoldMode::Saliency => "saliency",
            FoldMode::Fixed => "fixed",
            FoldMode::Off => "off",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "saliency" => Some(FoldMode::Saliency),
            "fixed" => Some(FoldMode::Fixed),
            "off" => Some(FoldMode::Off),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub output: PathBuf,
    /// Block grid before folding; the folded grid is one smaller.
    pub grid: usize,
    pub fold: FoldMode,
    pub superposition: Superposition,
    pub candidates: CandidateMode,
    pub saliency: SaliencyParams,
    pub lbp_radii: Vec<u32>,
    pub lbp_uniform: bool,
    pub lbp_sampling: Sampling,
    pub svm: SvmParams,
    pub rule: MismatchRule,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lbp = LbpParams::default();
        PipelineConfig {
            manifest: None,
            output: PathBuf::from("salfold-out"),
            grid: 4,
            fold: FoldMode::Saliency,
            superposition: Superposition::Mean,
            candidates: CandidateMode::Adjacent,
            saliency: SaliencyParams::default(),
            lbp_radii: lbp.radii,
            lbp_uniform: lbp.uniform,
            lbp_sampling: lbp.sampling,
            svm: SvmParams::default(),
            rule: MismatchRule::Independent,
            seed: 1,
            threads: 0,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|s| s.trim().parse().ok()).collect()
}

impl PipelineConfig {
    /// Defaults overridden by the lines of a config file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = PipelineConfig::default();
        let base = path.parent().unwrap_or(Path::new(""));
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("{} line {}: expected key = value", path.display(), n + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::usage(format!("{} line {}: {}", path.display(), n + 1, e.message)))?;
            // Relative paths in a config file are relative to the file.
            if matches!(key.trim(), "manifest" | "output") {
                let p = if key.trim() == "manifest" {
                    cfg.manifest.as_mut().unwrap()
                } else {
                    &mut cfg.output
                };
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = || CliError::usage(format!("invalid value {value:?} for {key}"));
        match key {
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "output" => self.output = PathBuf::from(value),
            "grid" => self.grid = value.parse().map_err(|_| bad())?,
            "fold" => self.fold = FoldMode::parse(value).ok_or_else(bad)?,
            "superposition" => self.superposition = Superposition::parse(value).ok_or_else(bad)?,
            "candidates" => self.candidates = CandidateMode::parse(value).ok_or_else(bad)?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "threads" => self.threads = value.parse().map_err(|_| bad())?,
            "saliency.patch_size" => self.saliency.patch_size = value.parse().map_err(|_| bad())?,
            "saliency.k" => self.saliency.k = value.parse().map_err(|_| bad())?,
            "saliency.c" => self.saliency.c = value.parse().map_err(|_| bad())?,
            "saliency.scales" => self.saliency.scales = parse_list(value).ok_or_else(bad)?,
            "saliency.resolution" => {
                let (w, h) = value.split_once('x').ok_or_else(bad)?;
                self.saliency.resolution = (w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?);
            }
            "saliency.attention" => self.saliency.attention = parse_bool(value).ok_or_else(bad)?,
            "saliency.attention_threshold" => {
                self.saliency.attention_threshold = value.parse().map_err(|_| bad())?
            }
            "lbp.radii" => self.lbp_radii = parse_list(value).ok_or_else(bad)?,
            "lbp.uniform" => self.lbp_uniform = parse_bool(value).ok_or_else(bad)?,
            "lbp.sampling" => {
                self.lbp_sampling = match value {
                    "circular" => Sampling::Circular,
                    "square" => Sampling::Square,
                    _ => return Err(bad()),
                }
            }
            "svm.c" => self.svm.c = value.parse().map_err(|_| bad())?,
            "svm.gamma" => {
                self.svm.gamma = match value {
                    "auto" => None,
                    v => Some(v.parse().map_err(|_| bad())?),
                }
            }
            "svm.tolerance" => self.svm.tolerance = value.parse().map_err(|_| bad())?,
            "svm.kernel" => self.svm.kernel = KernelKind::parse(value).ok_or_else(bad)?,
            "svm.max_iter" => {
                self.svm.max_iter = match value {
                    "auto" => None,
                    v => Some(v.parse().map_err(|_| bad())?),
                }
            }
            "svm.cache_mb" => self.svm.cache_bytes = value.parse::<usize>().map_err(|_| bad())? << 20,
            "eval.rule" => {
                self.rule = match value {
                    "independent" => MismatchRule::Independent,
                    "hierarchical" => MismatchRule::Hierarchical,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(CliError::usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// `key=value` override as given on the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid < 2 {
            return Err(CliError::usage(format!("grid {} leaves nothing to fold", self.grid)));
        }
        self.saliency.validate()?;
        self.svm.validate()?;
        self.lbp_params().validate()?;
        Ok(())
    }

    /// Grid the features are computed on.
    pub fn feature_grid(&self) -> usize {
        match self.fold {
            FoldMode::Off => self.grid,
            _ => self.grid - 1,
        }
    }

    pub fn lbp_params(&self) -> LbpParams {
        LbpParams {
            radii: self.lbp_radii.clone(),
            grid: self.feature_grid(),
            uniform: self.lbp_uniform,
            sampling: self.lbp_sampling,
        }
    }

    pub fn manifest_path(&self) -> Result<&Path, CliError> {
        self.manifest
            .as_deref()
            .ok_or_else(|| CliError::usage("no manifest given (set `manifest` or pass --manifest)"))
    }

    /// The effective configuration in the file format.
    pub fn to_text(&self) -> String {
        let s = &self.saliency;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        if let Some(m) = &self.manifest {
            let _ = writeln!(out, "manifest = {}", m.display());
        }
        let _ = writeln!(out, "output = {}", self.output.display());
        let _ = writeln!(out, "grid = {}", self.grid);
        let _ = writeln!(out, "fold = {}", self.fold.name());
        let _ = writeln!(out, "superposition = {}", self.superposition.name());
        let _ = writeln!(out, "candidates = {}", self.candidates.name());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "saliency.patch_size = {}", s.patch_size);
        let _ = writeln!(out, "saliency.k = {}", s.k);
        let _ = writeln!(out, "saliency.c = {}", s.c);
        let _ = writeln!(out, "saliency.scales = {}", list(&s.scales));
        let _ = writeln!(out, "saliency.resolution = {}x{}", s.resolution.0, s.resolution.1);
        let _ = writeln!(out, "saliency.attention = {}", s.attention);
        let _ = writeln!(out, "saliency.attention_threshold = {}", s.attention_threshold);
        let radii: Vec<String> = self.lbp_radii.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "lbp.radii = {}", radii.join(","));
        let _ = writeln!(out, "lbp.uniform = {}", self.lbp_uniform);
        let _ = writeln!(out, "lbp.sampling = {}", self.lbp_sampling.name());
        let _ = writeln!(out, "svm.c = {}", self.svm.c);
        match self.svm.gamma {
            Some(g) => {
                let _ = writeln!(out, "svm.gamma = {g}");
            }
            None => out.push_str("svm.gamma = auto\n"),
        }
        let _ = writeln!(out, "svm.tolerance = {}", self.svm.tolerance);
        let _ = writeln!(out, "svm.kernel = {}", self.svm.kernel.name());
        match self.svm.max_iter {
            Some(m) => {
                let _ = writeln!(out, "svm.max_iter = {m}");
            }
            None => out.push_str("svm.max_iter = auto\n"),
        }
        let _ = writeln!(out, "svm.cache_mb = {}", self.svm.cache_bytes >> 20);
        let rule = match self.rule {
            MismatchRule::Independent => "independent",
            MismatchRule::Hierarchical => "hierarchical",
        };
        let _ = writeln!(out, "eval.rule = {rule}");
        out
    }
}
