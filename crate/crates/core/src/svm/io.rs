//! Text model format:
//!
//! ```text
//! SALFOLD-MODEL 1
//! kernel rbf
//! gamma <g>            (`-` for linear)
//! C <c>
//! dims <d>
//! fingerprint <fp>
//! classes <n>
//! <class name>         (n lines)
//! pairs <p>
//! pair <a> <b> bias <bias> nsv <k>
//! <coef> <v_1> ... <v_d>   (k lines)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Kernel, KernelKind, MultiClassModel, PairModel, SvmError};

const MAGIC: &str = "SALFOLD-MODEL 1";

impl MultiClassModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        match self.kernel {
            Kernel::Linear => {
                let _ = writeln!(out, "kernel {}\ngamma -", KernelKind::Linear.name());
            }
            Kernel::Rbf { gamma } => {
                let _ = writeln!(out, "kernel {}\ngamma {gamma:?}", KernelKind::Rbf.name());
            }
        }
        let _ = writeln!(out, "C {:?}", self.c);
        let _ = writeln!(out, "dims {}", self.dimension);
        let _ = writeln!(out, "fingerprint {}", self.fingerprint);
        let _ = writeln!(out, "classes {}", self.class_names.len());
        for name in &self.class_names {
            let _ = writeln!(out, "{name}");
        }
        let _ = writeln!(out, "pairs {}", self.pairs.len());
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "pair {} {} bias {:?} nsv {}",
                p.positive,
                p.negative,
                p.bias,
                p.support.len()
            );
            for (&s, c) in p.support.iter().zip(&p.coef) {
                let _ = write!(out, "{c:?}");
                for v in &self.vectors[s] {
                    let _ = write!(out, " {v:?}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), SvmError> {
        fs::write(path, self.to_text()).map_err(|source| SvmError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, SvmError> {
        let corrupt = |reason: String| SvmError::CorruptModelFile {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| corrupt(format!("missing {what}")));
        if next("header")? != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
            line.strip_prefix(key)?.strip_prefix(' ')
        }
        let kernel_line = next("kernel")?;
        let kind = field(kernel_line, "kernel")
            .and_then(KernelKind::parse)
            .ok_or_else(|| corrupt("bad kernel".into()))?;
        let gamma_line = next("gamma")?;
        let gamma = field(gamma_line, "gamma").ok_or_else(|| corrupt("bad gamma".into()))?;
        let kernel = match kind {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf {
                gamma: gamma.parse().map_err(|_| corrupt("bad gamma".into()))?,
            },
        };
        let c: f64 = field(next("C")?, "C")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt("bad C".into()))?;
        let dimension: usize = field(next("dims")?, "dims")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt("bad dims".into()))?;
        let fingerprint = field(next("fingerprint")?, "fingerprint")
            .ok_or_else(|| corrupt("bad fingerprint".into()))?
            .to_string();
        let nc: usize = field(next("classes")?, "classes")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt("bad class count".into()))?;
        let mut class_names = Vec::with_capacity(nc);
        for _ in 0..nc {
            class_names.push(next("class name")?.to_string());
        }
        let np: usize = field(next("pairs")?, "pairs")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| corrupt("bad pair count".into()))?;
        if np != nc * nc.saturating_sub(1) / 2 {
            return Err(corrupt(format!("{np} pairs for {nc} classes")));
        }

        let mut pool: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        let mut pairs = Vec::with_capacity(np);
        for _ in 0..np {
            let head: Vec<&str> = next("pair")?.split_whitespace().collect();
            if head.len() != 7 || head[0] != "pair" || head[3] != "bias" || head[5] != "nsv" {
                return Err(corrupt("malformed pair line".into()));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| corrupt("bad pair number".into()));
            let (positive, negative, k) = (num(head[1])?, num(head[2])?, num(head[6])?);
            if positive >= nc || negative >= nc || positive == negative {
                return Err(corrupt("pair names an unknown class".into()));
            }
            let bias: f64 = head[4].parse().map_err(|_| corrupt("bad bias".into()))?;
            let mut support = Vec::with_capacity(k);
            let mut coef = Vec::with_capacity(k);
            for _ in 0..k {
                let values: Vec<f64> = next("support vector")?
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| corrupt("bad support vector value".into()))?;
                if values.len() != dimension + 1 {
                    return Err(corrupt("support vector length differs from dims".into()));
                }
                coef.push(values[0]);
                let v = values[1..].to_vec();
                let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
                let id = *pool.entry(key).or_insert_with(|| {
                    vectors.push(v);
                    vectors.len() - 1
                });
                support.push(id);
            }
            pairs.push(PairModel {
                positive,
                negative,
                bias,
                support,
                coef,
            });
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(corrupt("trailing data".into()));
        }
        Ok(MultiClassModel {
            kernel,
            c,
            dimension,
            fingerprint,
            class_names,
            vectors,
            pairs,
            reports: Vec::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SvmError> {
        let text = fs::read_to_string(path).map_err(|source| SvmError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        MultiClassModel::parse(&text, path)
    }
}
