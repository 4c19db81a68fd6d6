//! Grayscale images, decoding, block grids, dataset manifests and the
//! synthetic corpus generator.

mod grid;
mod manifest;
mod synth;

pub use grid::{make_grid, BlockGrid, Cell};
pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use synth::{generate_synthetic_corpus, synthetic_code, SynthSpec, SyntheticCorpus};

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use ::image::{DynamicImage, ImageFormat, ImageReader};
use thiserror::Error;

/// Smallest accepted side length: one radius-2 LBP neighbourhood per block
/// of the 4x4 grid.
pub const MIN_SIDE: usize = 8;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported image format ({reason})")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("image is {width}x{height}, both sides must be at least {MIN_SIDE}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("cannot split a {width}x{height} image into a {n}x{n} grid")]
    GridTooFine { width: usize, height: usize, n: usize },
    #[error("cannot write {path}: {source}")]
    WriteFailed {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path} line {line}: {reason}")]
    BadManifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSpec(String),
}

/// Row-major grayscale image with real-valued intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "pixel buffer size mismatch");
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn ensure_min_size(&self) -> Result<(), ImageError> {
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return Err(ImageError::ImageTooSmall {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Rectangular copy of `[x0, x0 + w) x [y0, y0 + h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> GrayImage {
        assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        GrayImage::new(w, h, data)
    }

    /// Bilinear resampling with pixel-centre alignment and edge clamping.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> GrayImage {
        assert!(width > 0 && height > 0);
        if width == self.width && height == self.height {
            return self.clone();
        }
        let xs = sample_positions(self.width, width);
        let ys = sample_positions(self.height, height);
        let mut data = Vec::with_capacity(width * height);
        for &(y0, y1, fy) in &ys {
            let r0 = self.row(y0);
            let r1 = self.row(y1);
            for &(x0, x1, fx) in &xs {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
                data.push(top + (bottom - top) * fy);
            }
        }
        GrayImage::new(width, height, data)
    }

    /// Intensities rounded and clamped to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Writes an 8-bit PNG or binary PGM, chosen by file extension.
    pub fn save(&self, path: &Path) -> Result<(), ImageError> {
        let bytes = self.to_u8();
        let format = match extension(path).as_deref() {
            Some("png") => ImageFormat::Png,
            Some("pgm") => ImageFormat::Pnm,
            other => {
                return Err(ImageError::UnsupportedFormat {
                    path: path.to_path_buf(),
                    reason: format!("cannot save with extension {other:?}"),
                })
            }
        };
        let buffer = ::image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer size matches dimensions");
        let mut encoded = Vec::new();
        if format == ImageFormat::Pnm {
            use ::image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
            use ::image::ImageEncoder;
            PnmEncoder::new(&mut encoded)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(
                    buffer.as_raw(),
                    buffer.width(),
                    buffer.height(),
                    ::image::ExtendedColorType::L8,
                )
                .map_err(|e| encode_error(path, e))?;
        } else {
            buffer
                .write_to(&mut Cursor::new(&mut encoded), format)
                .map_err(|e| encode_error(path, e))?;
        }
        fs::write(path, encoded).map_err(|source| ImageError::WriteFailed {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn encode_error(path: &Path, e: ::image::ImageError) -> ImageError {
    ImageError::WriteFailed {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// For each destination index, the two source indices and the blend factor.
fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Decodes an 8-bit PNG or PGM file. Colour inputs are converted with the
/// unweighted channel mean; alpha is ignored.
///
/// Images smaller than [`MIN_SIDE`] load fine and are rejected by the
/// operations that need a minimum size; see [`load_image_checked`].
pub fn load_image(path: &Path) -> Result<GrayImage, ImageError> {
    let bytes = fs::read(path).map_err(|source| ImageError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes, path)
}

/// [`load_image`] followed by the minimum-size check.
pub fn load_image_checked(path: &Path) -> Result<GrayImage, ImageError> {
    let img = load_image(path)?;
    img.ensure_min_size()?;
    Ok(img)
}

pub fn decode_image(bytes: &[u8], path: &Path) -> Result<GrayImage, ImageError> {
    let unsupported = |reason: String| ImageError::UnsupportedFormat {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| unsupported(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => return Err(unsupported(format!("detected {other:?}"))),
    }
    let decoded = reader.decode().map_err(|e| unsupported(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| f64::from(p.0[0])).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| channel_mean(&p.0)).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| channel_mean(&p.0[..3])).collect(),
        other => {
            return Err(unsupported(format!(
                "only 8-bit gray or RGB supported, got {:?}",
                other.color()
            )))
        }
    };
    Ok(GrayImage::new(w, h, data))
}

fn channel_mean(channels: &[u8]) -> f64 {
    channels.iter().map(|&c| f64::from(c)).sum::<f64>() / channels.len() as f64
}
