//! Output bookkeeping and the folded-image cache.

use std::fs;
use std::path::{Path, PathBuf};

use salfold::GrayImage;

use crate::error::CliError;

pub const TEMPLATE_FILE: &str = "template.txt";
pub const PLAN_FILE: &str = "plan.txt";
pub const FOLDED_DIR: &str = "folded";
pub const FEATURES_FILE: &str = "features.txt";
pub const MODEL_FILE: &str = "model.txt";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";
pub const EVALUATION_FILE: &str = "evaluation.txt";
pub const CONFIG_FILE: &str = "config.txt";
pub const BENCH_SUMMARY_FILE: &str = "bench_summary.txt";
pub const BENCH_TABLE_FILE: &str = "bench_table.txt";

/// Files written by one command. Unless [`Outputs::commit`] is called they
/// are deleted when the value is dropped, so a failed run leaves no
/// half-written artifacts behind.
#[derive(Debug, Default)]
pub struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs::default()
    }

    /// Registers `path` for cleanup and returns it.
    pub fn track(&mut self, path: PathBuf) -> PathBuf {
        self.paths.push(path.clone());
        path
    }

    pub fn write(&mut self, path: PathBuf, contents: &str) -> Result<(), CliError> {
        let path = self.track(path);
        fs::write(&path, contents).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in self.paths.iter().rev() {
            if p.is_dir() {
                let _ = fs::remove_dir_all(p);
            } else {
                let _ = fs::remove_file(p);
            }
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))
}

pub fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "missing {what} {} (run the earlier pipeline stage first)",
            path.display()
        )))
    }
}

const CACHE_MAGIC: &[u8; 8] = b"SFIMG01\n";

/// Cache file of manifest entry `index`.
pub fn folded_path(output: &Path, index: usize) -> PathBuf {
    output.join(FOLDED_DIR).join(format!("{index:06}.img"))
}

/// Raw cache layout: magic, width and height as little-endian `u32`, then
/// the pixels as little-endian `f64` in row-major order.
pub fn encode_folded(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.area() * 8);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_folded(bytes: &[u8], path: &Path) -> Result<GrayImage, CliError> {
    let corrupt = |why: &str| CliError::data(format!("corrupt folded image {}: {why}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
        return Err(corrupt("bad header"));
    }
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if w == 0 || h == 0 || body.len() != w * h * 8 {
        return Err(corrupt("size does not match header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GrayImage::new(w, h, data))
}

pub fn read_folded(path: &Path) -> Result<GrayImage, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    decode_folded(&bytes, path)
}
