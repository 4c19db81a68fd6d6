//! IRMA code parsing and the hierarchical, position-weighted error score
//! used by the ImageCLEF medical annotation task.
//!
//! A code has four axes: technical (T, 4 positions), directional (D, 3),
//! anatomical (A, 3) and biological (B, 3), written `TTTT-DDD-AAA-BBB`.
//! Each wrong position `i` (1-based within its axis) costs `1 / (b_i * i)`,
//! where `b_i` is the number of labels seen at that position in training.
//! Every axis is then rescaled so that its maximal error is 0.25, which makes
//! a code that is wrong everywhere score exactly 1.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Axis lengths in canonical order T, D, A, B.
pub const AXIS_LENGTHS: [usize; 4] = [4, 3, 3, 3];
/// Total number of code characters.
pub const CODE_LENGTH: usize = 13;
/// Placeholder for an unspecified position in some IRMA releases.
pub const WILDCARD: u8 = b'*';

const AXIS_NAMES: [&str; 4] = ["T", "D", "A", "B"];
const AXIS_WEIGHT: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrmaError {
    #[error("IRMA code {0:?} must have 13 characters")]
    BadLength(String),
    #[error("IRMA code {code:?} has invalid character {ch:?}")]
    BadCharacter { code: String, ch: char },
    #[error("IRMA code {0:?} does not split into TTTT-DDD-AAA-BBB")]
    BadAxisStructure(String),
    #[error("cannot build a vocabulary from an empty code list")]
    EmptyInput,
    #[error("truth and prediction lists differ in length ({truths} vs {predictions})")]
    LengthMismatch { truths: usize, predictions: usize },
}

/// The four code axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Technical,
    Directional,
    Anatomical,
    Biological,
}

impl Axis {
    pub const ALL: [Axis; 4] = [
        Axis::Technical,
        Axis::Directional,
        Axis::Anatomical,
        Axis::Biological,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn len(self) -> usize {
        AXIS_LENGTHS[self.index()]
    }

    /// Offset of the axis's first character within the 13-character code.
    pub fn offset(self) -> usize {
        AXIS_LENGTHS[..self.index()].iter().sum()
    }

    pub fn name(self) -> &'static str {
        AXIS_NAMES[self.index()]
    }
}

/// A 13-character IRMA code. Letters are stored lowercase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IrmaCode {
    chars: [u8; CODE_LENGTH],
}

fn valid_char(c: u8) -> bool {
    c.is_ascii_digit() || c.is_ascii_lowercase() || c == WILDCARD
}

impl IrmaCode {
    /// Parses either the hyphenated `TTTT-DDD-AAA-BBB` form or the bare
    /// 13-character form.
    pub fn parse(s: &str) -> Result<Self, IrmaError> {
        let s = s.trim();
        let lowered = s.to_ascii_lowercase();
        let bytes = lowered.as_bytes();

        let body: Vec<u8> = if bytes.contains(&b'-') {
            let parts: Vec<&str> = lowered.split('-').collect();
            if parts.len() != 4 {
                return Err(IrmaError::BadAxisStructure(s.to_string()));
            }
            let total: usize = parts.iter().map(|p| p.len()).sum();
            if total != CODE_LENGTH {
                return Err(IrmaError::BadLength(s.to_string()));
            }
            if parts.iter().zip(AXIS_LENGTHS).any(|(p, n)| p.len() != n) {
                return Err(IrmaError::BadAxisStructure(s.to_string()));
            }
            parts.concat().into_bytes()
        } else {
            if bytes.len() != CODE_LENGTH {
                return Err(IrmaError::BadLength(s.to_string()));
            }
            bytes.to_vec()
        };

        if let Some(&bad) = body.iter().find(|&&c| !valid_char(c)) {
            return Err(IrmaError::BadCharacter {
                code: s.to_string(),
                ch: bad as char,
            });
        }
        let mut chars = [0u8; CODE_LENGTH];
        chars.copy_from_slice(&body);
        Ok(IrmaCode { chars })
    }

    pub fn chars(&self) -> &[u8; CODE_LENGTH] {
        &self.chars
    }

    pub fn axis(&self, axis: Axis) -> &[u8] {
        let start = axis.offset();
        &self.chars[start..start + axis.len()]
    }

    pub fn has_wildcard(&self) -> bool {
        self.chars.contains(&WILDCARD)
    }
}

impl fmt::Display for IrmaCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, axis) in Axis::ALL.iter().enumerate() {
            if k > 0 {
                f.write_str("-")?;
            }
            // Characters are validated ASCII.
            f.write_str(std::str::from_utf8(self.axis(*axis)).unwrap())?;
        }
        Ok(())
    }
}

impl FromStr for IrmaCode {
    type Err = IrmaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IrmaCode::parse(s)
    }
}

/// Characters observed at every code position in a reference (training) set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionVocabulary {
    labels: Vec<BTreeSet<u8>>,
}

impl PositionVocabulary {
    pub fn build<'a, I>(codes: I) -> Result<Self, IrmaError>
    where
        I: IntoIterator<Item = &'a IrmaCode>,
    {
        let mut labels = vec![BTreeSet::new(); CODE_LENGTH];
        let mut seen = false;
        for code in codes {
            seen = true;
            for (set, &c) in labels.iter_mut().zip(code.chars.iter()) {
                set.insert(c);
            }
        }
        if !seen {
            return Err(IrmaError::EmptyInput);
        }
        Ok(PositionVocabulary { labels })
    }

    /// `b_i` for a 1-based position within an axis.
    pub fn label_count(&self, axis: Axis, position: usize) -> usize {
        assert!(position >= 1 && position <= axis.len());
        self.labels[axis.offset() + position - 1].len()
    }

    pub fn contains(&self, axis: Axis, position: usize, c: u8) -> bool {
        self.labels[axis.offset() + position - 1].contains(&c)
    }
}

/// How a mismatch at one position affects deeper positions of the same axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MismatchRule {
    /// Every position is compared on its own.
    #[default]
    Independent,
    /// Once a position is wrong, all deeper positions in that axis count as wrong.
    Hierarchical,
}

/// A position where the prediction used a character absent from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabularyGap {
    pub axis: Axis,
    pub position: usize,
    pub character: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorScore {
    /// Per-axis error in `[0, 0.25]`, ordered T, D, A, B.
    pub axes: [f64; 4],
    pub total: f64,
    pub gaps: Vec<VocabularyGap>,
    pub wildcards: bool,
}

/// Scores a predicted code against the ground truth.
pub fn error_score(
    truth: &IrmaCode,
    predicted: &IrmaCode,
    vocab: &PositionVocabulary,
    rule: MismatchRule,
) -> ErrorScore {
    let mut axes = [0.0; 4];
    let mut gaps = Vec::new();
    for axis in Axis::ALL {
        let t = truth.axis(axis);
        let p = predicted.axis(axis);
        let mut raw = 0.0;
        let mut raw_max = 0.0;
        let mut wrong_above = false;
        for i in 1..=axis.len() {
            let weight = 1.0 / (vocab.label_count(axis, i).max(1) as f64 * i as f64);
            raw_max += weight;
            let (tc, pc) = (t[i - 1], p[i - 1]);
            if pc != WILDCARD && !vocab.contains(axis, i, pc) {
                gaps.push(VocabularyGap {
                    axis,
                    position: i,
                    character: pc,
                });
            }
            let mut wrong = tc != pc || tc == WILDCARD;
            if rule == MismatchRule::Hierarchical && wrong_above {
                wrong = true;
            }
            if wrong {
                raw += weight;
                wrong_above = true;
            }
        }
        axes[axis.index()] = AXIS_WEIGHT * raw / raw_max;
    }
    ErrorScore {
        axes,
        total: axes.iter().sum(),
        gaps,
        wildcards: truth.has_wildcard() || predicted.has_wildcard(),
    }
}

/// Aggregate of per-image scores over a test run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scores: Vec<ErrorScore>,
    /// Sum of per-image totals, the scale ImageCLEF results are reported on.
    pub sum: f64,
    pub mean: f64,
    /// Per-axis sums, ordered T, D, A, B.
    pub axis_sums: [f64; 4],
    pub exact_matches: usize,
}

impl RunSummary {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Machine-readable `TOTAL <sum> MEAN <mean> N <count>` line.
    pub fn summary_line(&self) -> String {
        format!("TOTAL {:.4} MEAN {:.6} N {}", self.sum, self.mean, self.len())
    }
}

pub fn evaluate_run(
    truths: &[IrmaCode],
    predictions: &[IrmaCode],
    vocab: &PositionVocabulary,
    rule: MismatchRule,
) -> Result<RunSummary, IrmaError> {
    if truths.len() != predictions.len() {
        return Err(IrmaError::LengthMismatch {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    let scores: Vec<ErrorScore> = truths
        .iter()
        .zip(predictions)
        .map(|(t, p)| error_score(t, p, vocab, rule))
        .collect();
    // Index-order summation keeps the total bit-stable.
    let mut sum = 0.0;
    let mut axis_sums = [0.0; 4];
    for s in &scores {
        sum += s.total;
        for (acc, v) in axis_sums.iter_mut().zip(s.axes) {
            *acc += v;
        }
    }
    let exact_matches = truths.iter().zip(predictions).filter(|(t, p)| t == p).count();
    let mean = if scores.is_empty() {
        0.0
    } else {
        sum / scores.len() as f64
    };
    Ok(RunSummary {
        scores,
        sum,
        mean,
        axis_sums,
        exact_matches,
    })
}
