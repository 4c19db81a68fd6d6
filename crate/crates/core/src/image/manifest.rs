use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ImageError;
use crate::irma::IrmaCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path as written in the manifest (relative paths resolve against the
    /// manifest's directory).
    pub path: PathBuf,
    pub code: IrmaCode,
    pub split: Split,
}

/// Tab-separated `path<TAB>irma_code<TAB>split` listing. Lines starting
/// with `#` and blank lines are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn parse(text: &str, root: &Path, source: &Path) -> Result<Self, ImageError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |reason: String| ImageError::BadManifest {
                path: source.to_path_buf(),
                line: idx + 1,
                reason,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
            }
            let code = IrmaCode::parse(fields[1]).map_err(|e| bad(e.to_string()))?;
            let split = fields[2].parse::<Split>().map_err(bad)?;
            entries.push(ManifestEntry {
                path: PathBuf::from(fields[0]),
                code,
                split,
            });
        }
        Ok(DatasetManifest {
            entries,
            root: root.to_path_buf(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, ImageError> {
        let text = fs::read_to_string(path).map_err(|source| ImageError::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        let root = path.parent().unwrap_or_else(|| Path::new("."));
        DatasetManifest::parse(&text, root, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# path\tirma_code\tsplit\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.path.display(), e.code, e.split));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), ImageError> {
        fs::write(path, self.to_text()).map_err(|source| ImageError::WriteFailed {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Distinct training codes in ascending order; the index of a code in
    /// this list is its class index.
    pub fn class_table(&self) -> Vec<IrmaCode> {
        self.split(Split::Train)
            .map(|e| e.code)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn class_count(&self) -> usize {
        self.class_table().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_skips_comments() {
        let text = "# header\n\na.png\t1121-127-700-500\ttrain\nb.pgm\t1121120918700\tTEST\n";
        let m = DatasetManifest::parse(text, Path::new("/data"), Path::new("m.tsv")).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[1].split, Split::Test);
        assert_eq!(m.resolve(&m.entries[0]), PathBuf::from("/data/a.png"));
        assert_eq!(m.class_count(), 1);
        let again =
            DatasetManifest::parse(&m.to_text(), Path::new("/data"), Path::new("m.tsv")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn reports_bad_lines() {
        let err = DatasetManifest::parse(
            "a.png\t1121-127-700\ttrain\n",
            Path::new("."),
            Path::new("m.tsv"),
        )
        .unwrap_err();
        assert!(matches!(err, ImageError::BadManifest { line: 1, .. }));
        let err = DatasetManifest::parse("a.png 1121-127-700-500 train\n", Path::new("."), Path::new("m"))
            .unwrap_err();
        assert!(matches!(err, ImageError::BadManifest { .. }));
        let err = DatasetManifest::parse(
            "a.png\t1121-127-700-500\tvalidation\n",
            Path::new("."),
            Path::new("m"),
        )
        .unwrap_err();
        assert!(matches!(err, ImageError::BadManifest { .. }));
    }
}
