//! Saliency-guided folding of an `n x n` block grid down to `(n-1) x (n-1)`.
//!
//! The template's saliency mass is summed per block column and block row.
//! For every candidate pair of strips the less salient member is the one
//! that would be moved; the pair whose moved strip carries the least mass
//! wins. The moved strip is superimposed onto its partner and the remaining
//! strips close the gap. One column fold and one row fold are applied,
//! columns first.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::image::{BlockGrid, GrayImage, ImageError};
use crate::saliency::SaliencyTemplate;

#[derive(Debug, Error)]
pub enum FoldError {
    #[error(transparent)]
    Grid(#[from] ImageError),
    #[error("folding plan is for a {plan}x{plan} grid, expected {expected}x{expected}")]
    PlanShapeMismatch { plan: usize, expected: usize },
    #[error("invalid folding plan: {0}")]
    InvalidPlan(String),
    #[error("corrupt plan file {path}: {reason}")]
    CorruptPlanFile { path: PathBuf, reason: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Which strip pairs may be folded together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateMode {
    #[default]
    Adjacent,
    AllPairs,
}

impl CandidateMode {
    pub fn name(self) -> &'static str {
        match self {
            CandidateMode::Adjacent => "adjacent",
            CandidateMode::AllPairs => "all-pairs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adjacent" => Some(CandidateMode::Adjacent),
            "all-pairs" => Some(CandidateMode::AllPairs),
            _ => None,
        }
    }
}

/// How a moved strip is combined with the strip it lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Superposition {
    #[default]
    Mean,
    Max,
    SumClipped,
}

impl Superposition {
    #[inline]
    fn combine(self, target: f64, source: f64) -> f64 {
        match self {
            Superposition::Mean => 0.5 * (target + source),
            Superposition::Max => target.max(source),
            Superposition::SumClipped => (target + source).min(255.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Superposition::Mean => "mean",
            Superposition::Max => "max",
            Superposition::SumClipped => "sum-clipped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Superposition::Mean),
            "max" => Some(Superposition::Max),
            "sum-clipped" => Some(Superposition::SumClipped),
            _ => None,
        }
    }
}

/// Strip `source` is superimposed onto strip `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fold {
    pub source: usize,
    pub target: usize,
}

/// Score of one candidate strip pair `(first, second)`, `first < second`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub first: usize,
    pub second: usize,
    /// The strip that would be moved.
    pub moved: usize,
    /// Saliency mass of the moved strip.
    pub score: f64,
}

impl Candidate {
    pub fn fold(&self) -> Fold {
        let target = if self.moved == self.first {
            self.second
        } else {
            self.first
        };
        Fold {
            source: self.moved,
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldingPlan {
    pub n: usize,
    pub mode: CandidateMode,
    pub column: Fold,
    pub row: Fold,
    pub column_candidates: Vec<Candidate>,
    pub row_candidates: Vec<Candidate>,
    /// The template carried no saliency; the fold is the fixed convention.
    pub degenerate: bool,
}

/// Saliency mass of each block column and block row of the template.
pub fn strip_masses(template: &SaliencyTemplate, n: usize) -> Result<(Vec<f64>, Vec<f64>), FoldError> {
    let m = &template.map;
    let grid = BlockGrid::for_dims(m.width(), m.height(), n)?;
    let mut cols = vec![0.0; n];
    let mut rows = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let cell = grid.cell(i, j);
            let mut mass = 0.0;
            for y in cell.y..cell.y + cell.height {
                for x in cell.x..cell.x + cell.width {
                    mass += m.get(x, y);
                }
            }
            cols[j] += mass;
            rows[i] += mass;
        }
    }
    Ok((cols, rows))
}

/// Which member of the pair moves: the less salient one; on equal mass the
/// one farther from the grid centre, and if still tied the higher index.
fn moved_member(masses: &[f64], a: usize, b: usize) -> usize {
    if masses[a] < masses[b] {
        return a;
    }
    if masses[b] < masses[a] {
        return b;
    }
    let n = masses.len();
    // Twice the distance from the centre keeps the comparison integral.
    let off = |i: usize| (2 * i).abs_diff(n - 1);
    if off(a) > off(b) {
        a
    } else {
        b
    }
}

/// Candidate pairs in ascending order, each with its moved-strip score.
pub fn candidates(masses: &[f64], mode: CandidateMode) -> Vec<Candidate> {
    let n = masses.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if mode == CandidateMode::Adjacent && b != a + 1 {
                continue;
            }
            let moved = moved_member(masses, a, b);
            out.push(Candidate {
                first: a,
                second: b,
                moved,
                score: masses[moved],
            });
        }
    }
    out
}

/// The first candidate with the smallest score.
fn best(cands: &[Candidate]) -> Candidate {
    let mut best = cands[0];
    for c in &cands[1..] {
        if c.score < best.score {
            best = *c;
        }
    }
    best
}

pub fn plan_folding(
    template: &SaliencyTemplate,
    n: usize,
    mode: CandidateMode,
) -> Result<FoldingPlan, FoldError> {
    if n < 2 {
        return Err(FoldError::InvalidPlan(format!("grid {n} cannot be folded")));
    }
    let (cols, rows) = strip_masses(template, n)?;
    let column_candidates = candidates(&cols, mode);
    let row_candidates = candidates(&rows, mode);
    Ok(FoldingPlan {
        n,
        mode,
        column: best(&column_candidates).fold(),
        row: best(&row_candidates).fold(),
        degenerate: template.map.values().iter().all(|&v| v == 0.0),
        column_candidates,
        row_candidates,
    })
}

impl FoldingPlan {
    /// Saliency-free plan: the outermost strip 0 folds onto strip 1 on both
    /// axes.
    pub fn fixed(n: usize) -> Self {
        FoldingPlan {
            n,
            mode: CandidateMode::Adjacent,
            column: Fold { source: 0, target: 1 },
            row: Fold { source: 0, target: 1 },
            column_candidates: Vec::new(),
            row_candidates: Vec::new(),
            degenerate: false,
        }
    }

    pub fn validate(&self) -> Result<(), FoldError> {
        for (axis, f) in [("column", self.column), ("row", self.row)] {
            if f.source == f.target || f.source >= self.n || f.target >= self.n {
                return Err(FoldError::InvalidPlan(format!(
                    "{axis} fold {} -> {} on a {} grid",
                    f.source, f.target, self.n
                )));
            }
            if self.mode == CandidateMode::Adjacent && f.source.abs_diff(f.target) != 1 {
                return Err(FoldError::InvalidPlan(format!(
                    "{axis} fold {} -> {} is not adjacent",
                    f.source, f.target
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("SALFOLD-PLAN 1\n");
        let _ = writeln!(out, "grid {}", self.n);
        let _ = writeln!(out, "mode {}", self.mode.name());
        let _ = writeln!(out, "column {} {}", self.column.source, self.column.target);
        let _ = writeln!(out, "row {} {}", self.row.source, self.row.target);
        let _ = writeln!(out, "degenerate {}", u8::from(self.degenerate));
        for (axis, cands) in [("column", &self.column_candidates), ("row", &self.row_candidates)] {
            for c in cands {
                let _ = writeln!(
                    out,
                    "candidate {axis} {} {} {} {:?}",
                    c.first, c.second, c.moved, c.score
                );
            }
        }
        out
    }

    /// Parses a plan record and checks it against the configured grid size.
    pub fn parse(text: &str, path: &Path, expected_n: usize) -> Result<Self, FoldError> {
        let corrupt = |reason: String| FoldError::CorruptPlanFile {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        if lines.next() != Some("SALFOLD-PLAN 1") {
            return Err(corrupt("missing header".into()));
        }
        let mut n = None;
        let mut mode = None;
        let mut column = None;
        let mut row = None;
        let mut degenerate = false;
        let mut column_candidates = Vec::new();
        let mut row_candidates = Vec::new();
        let num = |s: Option<&str>| -> Result<usize, FoldError> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| corrupt("bad number".into()))
        };
        for line in lines {
            let mut f = line.split_whitespace();
            match f.next() {
                None => continue,
                Some("grid") => n = Some(num(f.next())?),
                Some("mode") => {
                    mode = Some(
                        f.next()
                            .and_then(CandidateMode::parse)
                            .ok_or_else(|| corrupt("bad mode".into()))?,
                    )
                }
                Some("column") => {
                    column = Some(Fold {
                        source: num(f.next())?,
                        target: num(f.next())?,
                    })
                }
                Some("row") => {
                    row = Some(Fold {
                        source: num(f.next())?,
                        target: num(f.next())?,
                    })
                }
                Some("degenerate") => degenerate = num(f.next())? != 0,
                Some("candidate") => {
                    let axis = f.next();
                    let c = Candidate {
                        first: num(f.next())?,
                        second: num(f.next())?,
                        moved: num(f.next())?,
                        score: f
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| corrupt("bad score".into()))?,
                    };
                    match axis {
                        Some("column") => column_candidates.push(c),
                        Some("row") => row_candidates.push(c),
                        _ => return Err(corrupt("bad candidate axis".into())),
                    }
                }
                Some(other) => return Err(corrupt(format!("unknown key {other:?}"))),
            }
        }
        let plan = FoldingPlan {
            n: n.ok_or_else(|| corrupt("missing grid".into()))?,
            mode: mode.ok_or_else(|| corrupt("missing mode".into()))?,
            column: column.ok_or_else(|| corrupt("missing column fold".into()))?,
            row: row.ok_or_else(|| corrupt("missing row fold".into()))?,
            column_candidates,
            row_candidates,
            degenerate,
        };
        if plan.n != expected_n {
            return Err(FoldError::PlanShapeMismatch {
                plan: plan.n,
                expected: expected_n,
            });
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: &Path) -> Result<(), FoldError> {
        fs::write(path, self.to_text()).map_err(|source| FoldError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path, expected_n: usize) -> Result<Self, FoldError> {
        let text = fs::read_to_string(path).map_err(|source| FoldError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        FoldingPlan::parse(&text, path, expected_n)
    }
}

fn transpose(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.height(), img.width(), |x, y| img.get(y, x))
}

/// Superimposes column strip `fold.source` onto `fold.target` and drops the
/// source strip. `bounds` are the `n + 1` column boundaries.
fn fold_columns(img: &GrayImage, bounds: &[usize], fold: Fold, op: Superposition) -> GrayImage {
    let h = img.height();
    let (s0, s1) = (bounds[fold.source], bounds[fold.source + 1]);
    let (t0, t1) = (bounds[fold.target], bounds[fold.target + 1]);
    let source = img.crop(s0, 0, s1 - s0, h).resize_bilinear(t1 - t0, h);
    let out_w = img.width() - (s1 - s0);
    let mut data = Vec::with_capacity(out_w * h);
    for y in 0..h {
        let row = img.row(y);
        for (x, &v) in row.iter().enumerate() {
            if (s0..s1).contains(&x) {
                continue;
            }
            if (t0..t1).contains(&x) {
                data.push(op.combine(v, source.get(x - t0, y)));
            } else {
                data.push(v);
            }
        }
    }
    GrayImage::new(out_w, h, data)
}

/// Folds an image with a plan. The output has an `(n-1) x (n-1)` balanced
/// block grid made of the surviving strips.
pub fn apply_folding(img: &GrayImage, plan: &FoldingPlan, op: Superposition) -> Result<GrayImage, FoldError> {
    plan.validate()?;
    let grid = BlockGrid::for_dims(img.width(), img.height(), plan.n)?;
    let folded = fold_columns(img, grid.col_bounds(), plan.column, op);
    let t = transpose(&folded);
    let t = fold_columns(&t, grid.row_bounds(), plan.row, op);
    Ok(transpose(&t))
}
