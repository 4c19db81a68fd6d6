//! Context-aware saliency maps and the corpus saliency template.
//!
//! A pixel is salient when the patch around it is unlike the patches it
//! most resembles elsewhere in the image, with nearby look-alikes counting
//! as more similar than distant ones. For every pixel `i` and scale:
//!
//! ```text
//! d(p_i, q_k) = d_intensity(p_i, q_k) / (1 + c * d_position(p_i, q_k))
//! S_i = 1 - exp(-(1/K) * sum over the K most similar q_k of d(p_i, q_k))
//! ```
//!
//! Scales are averaged, the map is rescaled to `[0, 1]`, and pixels are
//! attenuated by their distance to the attended area (values above 0.8 of
//! the maximum).
//!
//! The template averages maps within each class first and then across
//! classes, so large classes do not dominate.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::image::GrayImage;

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("invalid saliency parameters: {0}")]
    InvalidParams(String),
    #[error("no saliency maps to average")]
    EmptyInput,
    #[error("saliency map is {found:?}, expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("corrupt template file {path}: {reason}")]
    CorruptTemplateFile { path: PathBuf, reason: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyParams {
    /// Odd patch side length.
    pub patch_size: usize,
    /// Number of most similar patches averaged per pixel.
    pub k: usize,
    /// Weight of positional distance.
    pub c: f64,
    /// Relative scales in `(0, 1]`.
    pub scales: Vec<f64>,
    /// Working resolution `(width, height)`; every image is resized to it.
    pub resolution: (usize, usize),
    /// Attenuate pixels far from the attended area.
    pub attention: bool,
    /// Fraction of the maximum above which a pixel is attended.
    pub attention_threshold: f64,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        SaliencyParams {
            patch_size: 7,
            k: 64,
            c: 3.0,
            scales: vec![1.0, 0.8, 0.5, 0.3],
            resolution: (128, 128),
            attention: true,
            attention_threshold: 0.8,
        }
    }
}

impl SaliencyParams {
    pub fn validate(&self) -> Result<(), SaliencyError> {
        let bad = |m: String| Err(SaliencyError::InvalidParams(m));
        if self.patch_size < 3 || self.patch_size % 2 == 0 {
            return bad(format!("patch size {} must be odd and >= 3", self.patch_size));
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad(format!("position weight {} must be non-negative", self.c));
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
            return bad("scales must be a non-empty list in (0, 1]".into());
        }
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return bad("working resolution must be at least 2x2".into());
        }
        if !(self.attention_threshold > 0.0 && self.attention_threshold <= 1.0) {
            return bad("attention threshold must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// Per-pixel saliency in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height);
        SaliencyMap {
            width,
            height,
            values,
        }
    }

    pub fn constant(width: usize, height: usize, v: f64) -> Self {
        SaliencyMap::new(width, height, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Row-major index of the largest value (first one on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

/// Pluggable saliency detector.
pub trait SaliencyDetector: Sync {
    fn detect(&self, img: &GrayImage) -> Result<SaliencyMap, SaliencyError>;
}

/// The default patch-based context-aware detector.
#[derive(Debug, Clone, Default)]
pub struct ContextAwareDetector {
    pub params: SaliencyParams,
}

impl SaliencyDetector for ContextAwareDetector {
    fn detect(&self, img: &GrayImage) -> Result<SaliencyMap, SaliencyError> {
        compute_saliency(img, &self.params)
    }
}

/// Patch vectors of every pixel (edge-clamped), row-major.
fn patch_vectors(img: &GrayImage, patch: usize) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let half = (patch / 2) as isize;
    let mut out = Vec::with_capacity(img.area() * patch * patch);
    for y in 0..h {
        for x in 0..w {
            for dy in -half..=half {
                let yy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -half..=half {
                    let xx = (x + dx).clamp(0, w - 1) as usize;
                    out.push(img.get(xx, yy));
                }
            }
        }
    }
    out
}

/// Distances from patch `i` to every other patch of a single-scale image,
/// as `(distance, index)` pairs in index order.
fn patch_distances(
    patches: &[f64],
    len: usize,
    width: usize,
    height: usize,
    c: f64,
    i: usize,
) -> Vec<(f64, usize)> {
    let n = width * height;
    let int_norm = 255.0 * (len as f64).sqrt();
    let pos_norm = width.max(height) as f64;
    let p = &patches[i * len..(i + 1) * len];
    let (xi, yi) = ((i % width) as f64, (i / width) as f64);
    let mut out = Vec::with_capacity(n - 1);
    for j in 0..n {
        if j == i {
            continue;
        }
        let q = &patches[j * len..(j + 1) * len];
        let sq: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
        let d_int = sq.sqrt() / int_norm;
        let (xj, yj) = ((j % width) as f64, (j / width) as f64);
        let d_pos = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt() / pos_norm;
        out.push((d_int / (1.0 + c * d_pos), j));
    }
    out
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` most similar patches to patch `i` of `img` at a single scale,
/// ordered by distance with lower row-major index winning ties.
pub fn nearest_patches(img: &GrayImage, params: &SaliencyParams, i: usize) -> Vec<(f64, usize)> {
    let len = params.patch_size * params.patch_size;
    let patches = patch_vectors(img, params.patch_size);
    let mut d = patch_distances(&patches, len, img.width(), img.height(), params.c, i);
    select_k(&mut d, params.k)
}

fn select_k(d: &mut Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, by_distance_then_index);
        d.truncate(k);
    }
    d.sort_unstable_by(by_distance_then_index);
    std::mem::take(d)
}

/// Unnormalised saliency of every pixel at the image's own scale.
pub fn single_scale_saliency(img: &GrayImage, params: &SaliencyParams) -> Vec<f64> {
    let len = params.patch_size * params.patch_size;
    let patches = patch_vectors(img, params.patch_size);
    let (w, h) = (img.width(), img.height());
    (0..w * h)
        .into_par_iter()
        .map(|i| {
            let mut d = patch_distances(&patches, len, w, h, params.c, i);
            let nearest = select_k(&mut d, params.k);
            if nearest.is_empty() {
                return 0.0;
            }
            let mean = nearest.iter().map(|(v, _)| v).sum::<f64>() / nearest.len() as f64;
            1.0 - (-mean).exp()
        })
        .collect()
}

fn rescale_unit(values: &mut [f64]) -> bool {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > 1e-12) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return false;
    }
    values.iter_mut().for_each(|v| *v = (*v - lo) / span);
    true
}

/// Multiplies each pixel by `1 - d`, where `d` is its distance to the
/// nearest attended pixel divided by the largest such distance.
fn attend(values: &mut [f64], width: usize, height: usize, threshold: f64) {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let foci: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold * max)
        .map(|(i, _)| ((i % width) as f64, (i / width) as f64))
        .collect();
    if foci.is_empty() {
        return;
    }
    let dist: Vec<f64> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            foci.iter()
                .map(|(fx, fy)| (x - fx).powi(2) + (y - fy).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let dmax = dist.iter().cloned().fold(0.0, f64::max);
    if dmax <= 0.0 {
        return;
    }
    for (v, d) in values.iter_mut().zip(dist) {
        *v *= 1.0 - d / dmax;
    }
}

/// Saliency map of `img` at the configured working resolution. A constant
/// image has no contrast and yields the all-zeros map.
pub fn compute_saliency(img: &GrayImage, params: &SaliencyParams) -> Result<SaliencyMap, SaliencyError> {
    params.validate()?;
    let (w, h) = params.resolution;
    let work = img.resize_bilinear(w, h);
    let mut acc = vec![0.0; w * h];
    for &s in &params.scales {
        let sw = ((w as f64 * s).round() as usize).max(2);
        let sh = ((h as f64 * s).round() as usize).max(2);
        let scaled = work.resize_bilinear(sw, sh);
        let sal = single_scale_saliency(&scaled, params);
        let back = GrayImage::new(sw, sh, sal).resize_bilinear(w, h);
        for (a, v) in acc.iter_mut().zip(back.data()) {
            *a += v;
        }
    }
    let n = params.scales.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    if !rescale_unit(&mut acc) {
        return Ok(SaliencyMap::new(w, h, acc));
    }
    if params.attention {
        attend(&mut acc, w, h, params.attention_threshold);
        rescale_unit(&mut acc);
    }
    Ok(SaliencyMap::new(w, h, acc))
}

/// Corpus saliency template: the unweighted mean of per-class mean maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyTemplate {
    pub map: SaliencyMap,
    pub images: usize,
    pub classes: usize,
}

/// Streaming two-level average: per-class sums are kept in insertion order
/// so the result is bit-stable for a fixed input order.
#[derive(Debug, Clone, Default)]
pub struct TemplateBuilder {
    shape: Option<(usize, usize)>,
    classes: Vec<(Vec<f64>, usize)>,
}

impl TemplateBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a map to class `class` (classes are dense indices).
    pub fn add(&mut self, class: usize, map: &SaliencyMap) -> Result<(), SaliencyError> {
        match self.shape {
            None => self.shape = Some(map.shape()),
            Some(s) if s != map.shape() => {
                return Err(SaliencyError::ShapeMismatch {
                    expected: s,
                    found: map.shape(),
                })
            }
            _ => {}
        }
        if self.classes.len() <= class {
            self.classes.resize(class + 1, (Vec::new(), 0));
        }
        let (sum, count) = &mut self.classes[class];
        if sum.is_empty() {
            *sum = vec![0.0; map.values.len()];
        }
        for (a, v) in sum.iter_mut().zip(&map.values) {
            *a += v;
        }
        *count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<SaliencyTemplate, SaliencyError> {
        let (w, h) = self.shape.ok_or(SaliencyError::EmptyInput)?;
        let present: Vec<&(Vec<f64>, usize)> = self.classes.iter().filter(|(_, n)| *n > 0).collect();
        let mut values = vec![0.0; w * h];
        for (sum, count) in &present {
            for (a, s) in values.iter_mut().zip(sum) {
                *a += s / *count as f64;
            }
        }
        let nc = present.len() as f64;
        values.iter_mut().for_each(|v| *v = (*v / nc).clamp(0.0, 1.0));
        Ok(SaliencyTemplate {
            map: SaliencyMap::new(w, h, values),
            images: present.iter().map(|(_, n)| n).sum(),
            classes: present.len(),
        })
    }
}

/// Builds the template from maps grouped by class.
pub fn build_template(groups: &[Vec<SaliencyMap>]) -> Result<SaliencyTemplate, SaliencyError> {
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
        return Err(SaliencyError::EmptyInput);
    }
    let mut builder = TemplateBuilder::new();
    for (class, maps) in groups.iter().enumerate() {
        for m in maps {
            builder.add(class, m)?;
        }
    }
    builder.finish()
}

const TEMPLATE_MAGIC: &str = "SALFOLD-TEMPLATE";

impl SaliencyTemplate {
    pub fn to_text(&self) -> String {
        let m = &self.map;
        let mut out = format!(
            "{TEMPLATE_MAGIC} 1 {} {} {} {}\n",
            m.width, m.height, self.images, self.classes
        );
        for row in m.values.chunks(m.width) {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, SaliencyError> {
        let corrupt = |reason: &str| SaliencyError::CorruptTemplateFile {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let (header, body) = text.split_once('\n').ok_or_else(|| corrupt("missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != TEMPLATE_MAGIC || fields[1] != "1" {
            return Err(corrupt("bad magic or header"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| corrupt("bad header number"));
        let (w, h, images, classes) = (num(fields[2])?, num(fields[3])?, num(fields[4])?, num(fields[5])?);
        if w == 0 || h == 0 || images == 0 || classes == 0 {
            return Err(corrupt("zero dimension or count"));
        }
        let values: Vec<f64> = body
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| corrupt("bad value"))?;
        if values.len() != w * h {
            return Err(corrupt(&format!(
                "declared {}x{} = {} values, found {}",
                w,
                h,
                w * h,
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(corrupt("value outside [0, 1]"));
        }
        Ok(SaliencyTemplate {
            map: SaliencyMap::new(w, h, values),
            images,
            classes,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SaliencyError> {
        fs::write(path, self.to_text()).map_err(|source| SaliencyError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SaliencyError> {
        let text = fs::read_to_string(path).map_err(|source| SaliencyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        SaliencyTemplate::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_params() -> SaliencyParams {
        SaliencyParams {
            resolution: (32, 32),
            ..SaliencyParams::default()
        }
    }

    fn square_image() -> GrayImage {
        GrayImage::from_fn(32, 32, |x, y| {
            if (8..24).contains(&x) && (8..24).contains(&y) {
                255.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn constant_image_gives_zero_map() {
        let params = SaliencyParams {
            resolution: (24, 24),
            ..SaliencyParams::default()
        };
        let m = compute_saliency(&GrayImage::filled(40, 40, 128.0), &params).unwrap();
        assert_eq!(m.shape(), (24, 24));
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bright_square_peaks_inside_footprint() {
        let m = compute_saliency(&square_image(), &small_params()).unwrap();
        let (x, y) = m.argmax();
        assert!((8..24).contains(&x) && (8..24).contains(&y), "argmax at ({x}, {y})");
        assert!(m.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn invariant_to_intensity_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = GrayImage::from_fn(40, 40, |_, _| rng.gen_range(0.0..200.0));
        let shifted = GrayImage::from_fn(40, 40, |x, y| img.get(x, y) + 50.0);
        let params = SaliencyParams {
            resolution: (20, 20),
            ..SaliencyParams::default()
        };
        let a = compute_saliency(&img, &params).unwrap();
        let b = compute_saliency(&shifted, &params).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_patches_break_ties_by_index() {
        let params = SaliencyParams {
            k: 5,
            ..small_params()
        };
        let img = GrayImage::filled(10, 10, 3.0);
        let near = nearest_patches(&img, &params, 0);
        // Constant image: every distance is zero, so the lowest indices win.
        assert_eq!(near.iter().map(|p| p.1).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);
    }

    #[test]
    fn invalid_params() {
        for p in [
            SaliencyParams { patch_size: 4, ..SaliencyParams::default() },
            SaliencyParams { k: 0, ..SaliencyParams::default() },
            SaliencyParams { scales: vec![1.5], ..SaliencyParams::default() },
        ] {
            assert!(matches!(
                compute_saliency(&square_image(), &p),
                Err(SaliencyError::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn template_examples() {
        let m = SaliencyMap::new(2, 1, vec![0.1, 0.9]);
        assert_eq!(build_template(&[vec![m.clone()]]).unwrap().map, m);

        let t = build_template(&[
            vec![SaliencyMap::constant(3, 3, 0.2)],
            vec![SaliencyMap::constant(3, 3, 0.6)],
        ])
        .unwrap();
        assert!(t.map.values().iter().all(|&v| (v - 0.4).abs() < 1e-15));

        let t = build_template(&[
            vec![SaliencyMap::constant(2, 2, 0.0), SaliencyMap::constant(2, 2, 1.0)],
            vec![SaliencyMap::constant(2, 2, 0.5)],
        ])
        .unwrap();
        assert!(t.map.values().iter().all(|&v| v == 0.5));
        assert_eq!((t.images, t.classes), (3, 2));
    }

    #[test]
    fn template_errors() {
        assert!(matches!(build_template(&[]), Err(SaliencyError::EmptyInput)));
        assert!(matches!(build_template(&[vec![]]), Err(SaliencyError::EmptyInput)));
        assert!(matches!(
            build_template(&[vec![SaliencyMap::constant(2, 2, 0.0), SaliencyMap::constant(3, 2, 0.0)]]),
            Err(SaliencyError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn template_file_round_trip_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let values: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
        let t = SaliencyTemplate {
            map: SaliencyMap::new(4, 3, values),
            images: 7,
            classes: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        t.save(&path).unwrap();
        assert_eq!(SaliencyTemplate::load(&path).unwrap(), t);

        let text = t.to_text();
        let truncated = &text[..text.len() - 30];
        assert!(matches!(
            SaliencyTemplate::parse(truncated, &path),
            Err(SaliencyError::CorruptTemplateFile { .. })
        ));
        let lying = text.replacen(" 4 3 ", " 4 4 ", 1);
        assert!(matches!(
            SaliencyTemplate::parse(&lying, &path),
            Err(SaliencyError::CorruptTemplateFile { .. })
        ));
        assert!(matches!(
            SaliencyTemplate::parse("NOT-A-TEMPLATE 1 1 1 1 1\n0.5\n", &path),
            Err(SaliencyError::CorruptTemplateFile { .. })
        ));
    }

    fn random_groups(seed: u64) -> Vec<Vec<SaliencyMap>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = rng.gen_range(1..5);
        (0..classes)
            .map(|_| {
                (0..rng.gen_range(1..6))
                    .map(|_| SaliencyMap::new(3, 2, (0..6).map(|_| rng.gen::<f64>()).collect()))
                    .collect()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn two_level_average_matches_direct_mean(seed in any::<u64>()) {
            let groups = random_groups(seed);
            let t = build_template(&groups).unwrap();
            for px in 0..6 {
                let class_means: Vec<f64> = groups
                    .iter()
                    .map(|g| g.iter().map(|m| m.values()[px]).sum::<f64>() / g.len() as f64)
                    .collect();
                let direct = class_means.iter().sum::<f64>() / class_means.len() as f64;
                prop_assert!((t.map.values()[px] - direct).abs() < 1e-12);
            }
        }

        #[test]
        fn template_is_permutation_invariant(seed in any::<u64>()) {
            let groups = random_groups(seed);
            let t = build_template(&groups).unwrap();
            let mut shuffled: Vec<Vec<SaliencyMap>> = groups.iter().rev().cloned().collect();
            for g in shuffled.iter_mut() {
                g.reverse();
            }
            let u = build_template(&shuffled).unwrap();
            for (a, b) in t.map.values().iter().zip(u.map.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
