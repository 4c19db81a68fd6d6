//! Soft-margin SVM trained with sequential minimal optimisation, combined
//! one-vs-one for multi-class problems.

mod io;
mod kernel;
mod multiclass;
mod smo;

pub use kernel::Kernel;
pub use multiclass::{train_multiclass, MultiClassModel, PairModel, Prediction};
pub use smo::{train_binary, BinaryModel, TrainReport};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training data holds only one class")]
    SingleClassInput,
    #[error("no training samples")]
    EmptyInput,
    #[error("feature {index} of sample {sample} is not finite")]
    NonFiniteFeature { sample: usize, index: usize },
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid SVM parameters: {0}")]
    InvalidParams(String),
    #[error("invalid label {0}")]
    InvalidLabel(String),
    #[error("corrupt model file {path}: {reason}")]
    CorruptModelFile { path: PathBuf, reason: String },
    #[error("model was trained on {model}, query features are {query}")]
    FingerprintMismatch { model: String, query: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    #[default]
    Rbf,
    Linear,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rbf" => Some(KernelKind::Rbf),
            "linear" => Some(KernelKind::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    /// Penalty on slack.
    pub c: f64,
    /// RBF width; `None` means `1 / dimension`.
    pub gamma: Option<f64>,
    /// Stopping threshold on the maximal KKT violation.
    pub tolerance: f64,
    /// Iteration cap; `None` means `max(10^7, 100 * samples)`.
    pub max_iter: Option<usize>,
    pub kernel: KernelKind,
    /// Largest Gram matrix (in bytes) kept in memory; above it kernel rows
    /// are recomputed on demand.
    pub cache_bytes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_iter: None,
            kernel: KernelKind::Rbf,
            cache_bytes: 512 << 20,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::InvalidParams(format!("C = {} must be positive", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(SvmError::InvalidParams(format!("gamma = {g} must be positive")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(SvmError::InvalidParams("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn kernel_for(&self, dimension: usize) -> Kernel {
        match self.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf {
                gamma: self.gamma.unwrap_or(1.0 / dimension.max(1) as f64),
            },
        }
    }
}

/// Checks a sample matrix for shape and finiteness; returns its dimension.
pub(crate) fn check_samples<R: AsRef<[f64]>>(x: &[R]) -> Result<usize, SvmError> {
    let first = x.first().ok_or(SvmError::EmptyInput)?;
    let dim = first.as_ref().len();
    for (s, row) in x.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if let Some(index) = row.iter().position(|v| !v.is_finite()) {
            return Err(SvmError::NonFiniteFeature { sample: s, index });
        }
    }
    Ok(dim)
}
