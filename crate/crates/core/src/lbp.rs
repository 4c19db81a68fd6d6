//! Multi-block, multi-radius uniform local binary pattern histograms.
//!
//! Each pixel is compared against `P = 8` neighbours on a circle; the
//! resulting 8-bit code is mapped to one of 59 bins (58 uniform patterns and
//! one catch-all). Histograms are built per grid cell and per radius,
//! L1-normalised and concatenated, so a 3x3 grid with radii {1, 2} yields
//! 9 * 59 * 2 = 1062 values and a 4x4 grid yields 1888.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::image::{make_grid, GrayImage, ImageError};

/// Number of neighbours; the 59-bin uniform table is defined for 8.
pub const NEIGHBORS: usize = 8;
pub const UNIFORM_BINS: usize = 59;
/// Number of codes with at most two circular 0/1 transitions.
pub const UNIFORM_CODES: usize = 58;

#[derive(Debug, Error)]
pub enum LbpError {
    #[error("neighbourhood of radius {radius} around ({x}, {y}) leaves the {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        radius: u32,
        width: usize,
        height: usize,
    },
    #[error("grid cell {width}x{height} is smaller than the {min}-pixel minimum for radius {radius}")]
    BlockTooSmall {
        width: usize,
        height: usize,
        min: usize,
        radius: u32,
    },
    #[error("invalid LBP parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("feature file {path}: {reason}")]
    CorruptFeatureFile { path: PathBuf, reason: String },
    #[error("feature file was extracted with {found}, expected {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where neighbours are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// On the circle of the given radius, bilinearly interpolated.
    #[default]
    Circular,
    /// On the square ring of the given radius, integer positions only.
    Square,
}

impl Sampling {
    pub fn name(self) -> &'static str {
        match self {
            Sampling::Circular => "circular",
            Sampling::Square => "square",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbpParams {
    pub radii: Vec<u32>,
    /// Blocks per side.
    pub grid: usize,
    pub uniform: bool,
    pub sampling: Sampling,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams::with_grid(3)
    }
}

impl LbpParams {
    pub fn with_grid(grid: usize) -> Self {
        LbpParams {
            radii: vec![1, 2],
            grid,
            uniform: true,
            sampling: Sampling::Circular,
        }
    }

    pub fn validate(&self) -> Result<(), LbpError> {
        if self.radii.is_empty() || self.radii.contains(&0) {
            return Err(LbpError::InvalidParams(
                "radii must be a non-empty list of positive values".into(),
            ));
        }
        if self.grid == 0 {
            return Err(LbpError::InvalidParams("grid must be positive".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        if self.uniform {
            UNIFORM_BINS
        } else {
            256
        }
    }

    pub fn dimension(&self) -> usize {
        self.grid * self.grid * self.bins() * self.radii.len()
    }

    pub fn max_radius(&self) -> u32 {
        self.radii.iter().copied().max().unwrap_or(0)
    }

    /// Compact identifier of everything that affects the feature layout.
    pub fn fingerprint(&self) -> String {
        let radii: Vec<String> = self.radii.iter().map(|r| r.to_string()).collect();
        format!(
            "lbp-p{}-{}-r{}-g{}-{}-d{}",
            NEIGHBORS,
            if self.uniform { "u2" } else { "raw" },
            radii.join(","),
            self.grid,
            self.sampling.name(),
            self.dimension()
        )
    }
}

const fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

const fn build_uniform_table() -> [u8; 256] {
    let mut table = [UNIFORM_CODES as u8; 256];
    let mut next = 0u8;
    let mut code = 0usize;
    while code < 256 {
        if transitions(code as u8) <= 2 {
            table[code] = next;
            next += 1;
        }
        code += 1;
    }
    table
}

static UNIFORM_TABLE: [u8; 256] = build_uniform_table();

/// Bin of a pattern code: uniform codes get bins 0..=57 in ascending code
/// order, every other code gets bin 58.
#[inline]
pub fn uniform_map(code: u8) -> usize {
    UNIFORM_TABLE[code as usize] as usize
}

/// Sub-pixel offset of one neighbour, with precomputed bilinear weights.
#[derive(Debug, Clone, Copy)]
struct Tap {
    dx: isize,
    dy: isize,
    /// Weights of (x0,y0), (x0+1,y0), (x0,y0+1), (x0+1,y0+1).
    w: [f64; 4],
    exact: bool,
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn neighbour_offsets(radius: u32, sampling: Sampling) -> [(f64, f64); NEIGHBORS] {
    let r = radius as f64;
    let mut out = [(0.0, 0.0); NEIGHBORS];
    for (k, o) in out.iter_mut().enumerate() {
        let theta = 2.0 * PI * k as f64 / NEIGHBORS as f64;
        // Counterclockwise on screen, starting east; image y grows downward.
        *o = match sampling {
            Sampling::Circular => (snap(r * theta.cos()), snap(-r * theta.sin())),
            Sampling::Square => (r * theta.cos().round(), -r * theta.sin().round()),
        };
    }
    out
}

fn taps(radius: u32, sampling: Sampling) -> [Tap; NEIGHBORS] {
    neighbour_offsets(radius, sampling).map(|(ox, oy)| {
        let (fx0, fy0) = (ox.floor(), oy.floor());
        let (fx, fy) = (ox - fx0, oy - fy0);
        Tap {
            dx: fx0 as isize,
            dy: fy0 as isize,
            w: [
                (1.0 - fx) * (1.0 - fy),
                fx * (1.0 - fy),
                (1.0 - fx) * fy,
                fx * fy,
            ],
            exact: fx == 0.0 && fy == 0.0,
        }
    })
}

/// Whether the radius-`radius` neighbourhood of `(x, y)` lies inside an
/// image of the given size.
#[inline]
pub fn neighbourhood_fits(x: usize, y: usize, radius: u32, width: usize, height: usize) -> bool {
    let r = radius as usize;
    x >= r && y >= r && x + r < width && y + r < height
}

#[inline]
fn sample(data: &[f64], width: usize, idx: usize, tap: &Tap) -> f64 {
    let base = (idx as isize + tap.dy * width as isize + tap.dx) as usize;
    if tap.exact {
        return data[base];
    }
    tap.w[0] * data[base]
        + tap.w[1] * data[base + 1]
        + tap.w[2] * data[base + width]
        + tap.w[3] * data[base + width + 1]
}

#[inline]
fn code_at(data: &[f64], width: usize, idx: usize, taps: &[Tap; NEIGHBORS]) -> u8 {
    let center = data[idx];
    let mut code = 0u8;
    for (k, tap) in taps.iter().enumerate() {
        if sample(data, width, idx, tap) >= center {
            code |= 1 << k;
        }
    }
    code
}

/// LBP code of the pixel at `(x, y)` with circular sampling.
pub fn lbp_code(img: &GrayImage, x: usize, y: usize, radius: u32) -> Result<u8, LbpError> {
    lbp_code_with(img, x, y, radius, Sampling::Circular)
}

pub fn lbp_code_with(
    img: &GrayImage,
    x: usize,
    y: usize,
    radius: u32,
    sampling: Sampling,
) -> Result<u8, LbpError> {
    let (w, h) = (img.width(), img.height());
    if radius == 0 || !neighbourhood_fits(x, y, radius, w, h) {
        return Err(LbpError::OutOfBounds {
            x,
            y,
            radius,
            width: w,
            height: h,
        });
    }
    Ok(code_at(img.data(), w, y * w + x, &taps(radius, sampling)))
}

/// Concatenated per-cell, per-radius LBP histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Builds the feature vector. Neighbourhoods are not clipped at cell
/// borders; pixels whose neighbourhood leaves the image are skipped.
pub fn extract_features(img: &GrayImage, params: &LbpParams) -> Result<FeatureVector, LbpError> {
    params.validate()?;
    let grid = make_grid(img, params.grid)?;
    let max_r = params.max_radius();
    let min_side = 2 * max_r as usize + 1;
    for c in grid.cells() {
        if c.width < min_side || c.height < min_side {
            return Err(LbpError::BlockTooSmall {
                width: c.width,
                height: c.height,
                min: min_side,
                radius: max_r,
            });
        }
    }

    let (w, h) = (img.width(), img.height());
    let data = img.data();
    let bins = params.bins();
    let nr = params.radii.len();
    let mut values = vec![0.0; params.dimension()];
    let mut counts = vec![0u32; bins];

    // Bin of every pixel for each radius, or u16::MAX where the neighbourhood
    // leaves the image.
    let bin_maps: Vec<Vec<u16>> = params
        .radii
        .iter()
        .map(|&r| {
            let t = taps(r, params.sampling);
            let ru = r as usize;
            let mut map = vec![u16::MAX; w * h];
            for y in ru..h - ru {
                for x in ru..w - ru {
                    let idx = y * w + x;
                    let code = code_at(data, w, idx, &t);
                    map[idx] = if params.uniform {
                        uniform_map(code) as u16
                    } else {
                        code as u16
                    };
                }
            }
            map
        })
        .collect();

    for (ci, cell) in grid.cells().enumerate() {
        for (ri, map) in bin_maps.iter().enumerate() {
            counts.iter_mut().for_each(|c| *c = 0);
            let mut total = 0u32;
            for y in cell.y..cell.y + cell.height {
                let row = &map[y * w + cell.x..y * w + cell.x + cell.width];
                for &b in row {
                    if b != u16::MAX {
                        counts[b as usize] += 1;
                        total += 1;
                    }
                }
            }
            let offset = (ci * nr + ri) * bins;
            if total > 0 {
                let norm = total as f64;
                for (v, &c) in values[offset..offset + bins].iter_mut().zip(&counts) {
                    *v = c as f64 / norm;
                }
            }
        }
    }
    Ok(FeatureVector(values))
}

/// Labelled feature rows tied to the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub fingerprint: String,
    pub dimension: usize,
    pub labels: Vec<usize>,
    pub rows: Vec<FeatureVector>,
}

const FEATURE_MAGIC: &str = "SALFOLD-FEATURES 1";

impl FeatureMatrix {
    pub fn new(params: &LbpParams) -> Self {
        FeatureMatrix {
            fingerprint: params.fingerprint(),
            dimension: params.dimension(),
            labels: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: usize, row: FeatureVector) {
        assert_eq!(row.dimension(), self.dimension, "feature dimension mismatch");
        self.labels.push(label);
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{FEATURE_MAGIC}\nrows {} dims {} params {}\n",
            self.rows.len(),
            self.dimension,
            self.fingerprint
        );
        for (label, row) in self.labels.iter().zip(&self.rows) {
            let _ = write!(out, "{label}");
            for v in &row.0 {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), LbpError> {
        fs::write(path, self.to_text()).map_err(|source| LbpError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Parses a feature file; when `expected` is given the stored parameter
    /// fingerprint must match it.
    pub fn parse(text: &str, path: &Path, expected: Option<&LbpParams>) -> Result<Self, LbpError> {
        let corrupt = |reason: &str| LbpError::CorruptFeatureFile {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        if lines.next() != Some(FEATURE_MAGIC) {
            return Err(corrupt("missing header"));
        }
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| corrupt("missing shape line"))?
            .split_whitespace()
            .collect();
        if header.len() != 6 || header[0] != "rows" || header[2] != "dims" || header[4] != "params" {
            return Err(corrupt("malformed shape line"));
        }
        let n: usize = header[1].parse().map_err(|_| corrupt("bad row count"))?;
        let dimension: usize = header[3].parse().map_err(|_| corrupt("bad dimension"))?;
        let fingerprint = header[5].to_string();
        if let Some(p) = expected {
            if p.fingerprint() != fingerprint {
                return Err(LbpError::FingerprintMismatch {
                    expected: p.fingerprint(),
                    found: fingerprint,
                });
            }
        }
        let mut labels = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for line in lines.by_ref().take(n) {
            let mut fields = line.split_whitespace();
            let label = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| corrupt("bad label"))?;
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| corrupt("bad feature value"))?;
            if values.len() != dimension {
                return Err(corrupt("row length differs from declared dimension"));
            }
            labels.push(label);
            rows.push(FeatureVector(values));
        }
        if rows.len() != n {
            return Err(corrupt("fewer rows than declared"));
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(corrupt("trailing data after declared rows"));
        }
        Ok(FeatureMatrix {
            fingerprint,
            dimension,
            labels,
            rows,
        })
    }

    pub fn load(path: &Path, expected: Option<&LbpParams>) -> Result<Self, LbpError> {
        let text = fs::read_to_string(path).map_err(|source| LbpError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        FeatureMatrix::parse(&text, path, expected)
    }
}
