//! Saliency-guided image folding for compact multi-block LBP features,
//! classified with an SMO-trained one-vs-one RBF SVM and scored with the
//! hierarchical IRMA error measure.
//!
//! The usual flow is:
//!
//! 1. compute a [`saliency::SaliencyMap`] per training image and average
//!    them into a [`saliency::SaliencyTemplate`] (class means first);
//! 2. derive one global [`folding::FoldingPlan`] from the template and fold
//!    every image from a 4x4 to a 3x3 block grid;
//! 3. extract [`lbp::FeatureVector`]s and train a [`svm::MultiClassModel`];
//! 4. score predictions with [`irma::error_score`].

pub mod folding;
pub mod image;
pub mod irma;
pub mod lbp;
pub mod saliency;
pub mod svm;

pub use crate::image::{BlockGrid, DatasetManifest, GrayImage, ImageError, Split};
pub use irma::{IrmaCode, IrmaError, PositionVocabulary};
pub use lbp::{FeatureVector, LbpError, LbpParams};
pub use saliency::{SaliencyError, SaliencyMap, SaliencyParams, SaliencyTemplate};
pub use folding::{FoldError, FoldingPlan, Superposition};
pub use svm::{MultiClassModel, SvmError, SvmParams};
