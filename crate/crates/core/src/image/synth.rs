//! Procedural stand-in for an x-ray corpus: each class is a striped texture
//! with its own orientation, period and brightness, drawn inside a disc on a
//! dark background.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetManifest, GrayImage, ImageError, ManifestEntry, Split};
use crate::irma::IrmaCode;

const BACKGROUND: f64 = 20.0;
const STRIPE_AMPLITUDE: f64 = 60.0;
const BASE36: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub width: usize,
    pub height: usize,
    /// Uniform noise amplitude as a fraction of the 8-bit range.
    pub noise: f64,
    pub seed: u64,
    /// Disc centre as a fraction of width and height.
    pub disc_center: (f64, f64),
    /// Disc radius as a fraction of the shorter side.
    pub disc_radius: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 4,
            train_per_class: 50,
            test_per_class: 20,
            width: 64,
            height: 64,
            noise: 0.05,
            seed: 1,
            disc_center: (0.5, 0.5),
            disc_radius: 0.36,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), ImageError> {
        let bad = |m: &str| Err(ImageError::InvalidSpec(m.to_string()));
        if self.classes < 2 {
            return bad("at least two classes are required");
        }
        if self.classes > 36 * 36 * 36 {
            return bad("too many classes for the anatomical code axis");
        }
        if self.train_per_class == 0 {
            return bad("train_per_class must be positive");
        }
        if self.width < super::MIN_SIDE || self.height < super::MIN_SIDE {
            return bad("images must be at least 8x8");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1]");
        }
        if !(self.disc_radius > 0.0 && self.disc_radius <= 1.0) {
            return bad("disc_radius must lie in (0, 1]");
        }
        Ok(())
    }
}

/// In-memory corpus; `images[i]` belongs to `manifest.entries[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub manifest: DatasetManifest,
    pub images: Vec<GrayImage>,
}

impl SyntheticCorpus {
    /// Writes every image as PNG under `dir/images` and the manifest as
    /// `dir/manifest.tsv`; returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, ImageError> {
        let images = dir.join("images");
        fs::create_dir_all(&images).map_err(|source| ImageError::WriteFailed {
            path: images.clone(),
            source,
        })?;
        for (entry, img) in self.manifest.entries.iter().zip(&self.images) {
            img.save(&dir.join(&entry.path))?;
        }
        let path = dir.join("manifest.tsv");
        self.manifest.write(&path)?;
        Ok(path)
    }
}

/// Code of synthetic class `k`: the class index in base 36 on the
/// anatomical axis, everything else fixed.
pub fn synthetic_code(k: usize) -> IrmaCode {
    let a = [BASE36[k / 1296 % 36], BASE36[k / 36 % 36], BASE36[k % 36]];
    let s = format!("1121-120-{}-700", std::str::from_utf8(&a).unwrap());
    IrmaCode::parse(&s).expect("synthetic codes are well formed")
}

struct ClassStyle {
    orientation: f64,
    period: f64,
    level: f64,
}

fn class_style(k: usize, classes: usize, width: usize) -> ClassStyle {
    let scale = width as f64 / 64.0;
    ClassStyle {
        orientation: PI * k as f64 / classes as f64,
        period: (4.0 + 3.0 * (k % 3) as f64) * scale,
        level: 110.0 + 25.0 * (k % 3) as f64,
    }
}

fn render(spec: &SynthSpec, style: &ClassStyle, rng: &mut ChaCha8Rng) -> GrayImage {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let jitter = 0.03 * w.min(h);
    let cx = spec.disc_center.0 * w + rng.gen_range(-jitter..=jitter);
    let cy = spec.disc_center.1 * h + rng.gen_range(-jitter..=jitter);
    let radius = spec.disc_radius * w.min(h);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let (dx, dy) = (style.orientation.cos(), style.orientation.sin());
    let amp = spec.noise * 255.0;
    GrayImage::from_fn(spec.width, spec.height, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let inside = (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius;
        let base = if inside {
            let t = (px * dx + py * dy) / style.period;
            style.level + STRIPE_AMPLITUDE * (2.0 * PI * t + phase).sin()
        } else {
            BACKGROUND
        };
        let n = if amp > 0.0 {
            rng.gen_range(-amp..=amp)
        } else {
            0.0
        };
        (base + n).round().clamp(0.0, 255.0)
    })
}

/// Generates the corpus deterministically from `spec.seed`. Training
/// entries come first, class by class, followed by test entries.
pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<SyntheticCorpus, ImageError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::new();
    let mut images = Vec::new();
    for (split, per_class) in [(Split::Train, spec.train_per_class), (Split::Test, spec.test_per_class)] {
        for k in 0..spec.classes {
            let style = class_style(k, spec.classes, spec.width);
            let code = synthetic_code(k);
            for i in 0..per_class {
                images.push(render(spec, &style, &mut rng));
                entries.push(ManifestEntry {
                    path: PathBuf::from(format!("images/{split}_c{k:03}_{i:04}.png")),
                    code,
                    split,
                });
            }
        }
    }
    Ok(SyntheticCorpus {
        manifest: DatasetManifest {
            entries,
            root: PathBuf::new(),
        },
        images,
    })
}
