use rayon::prelude::*;

use super::{check_samples, train_binary, BinaryModel, Kernel, SvmError, SvmParams, TrainReport};

/// One pairwise classifier; positive decisions vote for `positive`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    pub bias: f64,
    /// Indices into [`MultiClassModel::vectors`].
    pub support: Vec<usize>,
    /// `a_i * y_i` per support vector.
    pub coef: Vec<f64>,
}

/// One-vs-one ensemble over a shared pool of support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassModel {
    pub kernel: Kernel,
    pub c: f64,
    pub dimension: usize,
    /// Identifies the feature extractor the model was trained with.
    pub fingerprint: String,
    /// Display name of each class index.
    pub class_names: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub pairs: Vec<PairModel>,
    /// Solver diagnostics per pair; empty for models loaded from disk.
    pub reports: Vec<TrainReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub votes: Vec<usize>,
    /// Sum of `|f(x)|` over the pairwise decisions each class won.
    pub margins: Vec<f64>,
}

/// Trains one binary model per unordered class pair on that pair's samples.
pub fn train_multiclass<R: AsRef<[f64]> + Sync>(
    x: &[R],
    labels: &[usize],
    class_names: Vec<String>,
    params: &SvmParams,
    fingerprint: &str,
) -> Result<MultiClassModel, SvmError> {
    params.validate()?;
    let dim = check_samples(x)?;
    if labels.len() != x.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: labels.len(),
        });
    }
    let nc = class_names.len();
    if let Some(bad) = labels.iter().find(|&&l| l >= nc) {
        return Err(SvmError::InvalidLabel(format!("class index {bad} of {nc}")));
    }
    let mut members = vec![Vec::new(); nc];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if members.iter().filter(|m| !m.is_empty()).count() < 2 {
        return Err(SvmError::SingleClassInput);
    }
    if let Some(empty) = members.iter().position(|m| m.is_empty()) {
        return Err(SvmError::InvalidLabel(format!(
            "class {} has no training samples",
            class_names[empty]
        )));
    }

    let pairs: Vec<(usize, usize)> = (0..nc).flat_map(|a| (a + 1..nc).map(move |b| (a, b))).collect();
    let kernel = params.kernel_for(dim);
    let fixed = SvmParams {
        gamma: kernel.gamma(),
        ..params.clone()
    };
    let trained: Vec<(Vec<usize>, BinaryModel)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut idx: Vec<usize> = members[a].iter().chain(&members[b]).copied().collect();
            idx.sort_unstable();
            let rows: Vec<&[f64]> = idx.iter().map(|&i| x[i].as_ref()).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            train_binary(&rows, &y, &fixed).map(|m| (idx, m))
        })
        .collect::<Result<_, _>>()?;

    // Pool every sample that is a support vector anywhere, in input order.
    let mut pool_of = vec![usize::MAX; x.len()];
    for (idx, m) in &trained {
        for &s in &m.support_indices {
            pool_of[idx[s]] = 0;
        }
    }
    let mut vectors = Vec::new();
    for (i, slot) in pool_of.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = vectors.len();
            vectors.push(x[i].as_ref().to_vec());
        }
    }
    let mut models = Vec::with_capacity(pairs.len());
    let mut reports = Vec::with_capacity(pairs.len());
    for (&(a, b), (idx, m)) in pairs.iter().zip(trained) {
        models.push(PairModel {
            positive: a,
            negative: b,
            bias: m.bias,
            support: m.support_indices.iter().map(|&s| pool_of[idx[s]]).collect(),
            coef: m.coef,
        });
        reports.push(m.report);
    }
    Ok(MultiClassModel {
        kernel,
        c: params.c,
        dimension: dim,
        fingerprint: fingerprint.to_string(),
        class_names,
        vectors,
        pairs: models,
        reports,
    })
}

impl MultiClassModel {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn check_fingerprint(&self, fingerprint: &str) -> Result<(), SvmError> {
        if self.fingerprint != fingerprint {
            return Err(SvmError::FingerprintMismatch {
                model: self.fingerprint.clone(),
                query: fingerprint.to_string(),
            });
        }
        Ok(())
    }

    /// Decision value of every pair, in pair order.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>, SvmError> {
        if x.len() != self.dimension {
            return Err(SvmError::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        let k: Vec<f64> = self.vectors.iter().map(|v| self.kernel.eval(v, x)).collect();
        Ok(self
            .pairs
            .iter()
            .map(|p| {
                let mut f = 0.0;
                for (&s, c) in p.support.iter().zip(&p.coef) {
                    f += c * k[s];
                }
                f + p.bias
            })
            .collect())
    }

    /// Majority vote; ties go to the largest summed margin, then the lowest
    /// class index.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, SvmError> {
        let decisions = self.decision_values(x)?;
        Ok(self.vote(&decisions))
    }

    pub fn vote(&self, decisions: &[f64]) -> Prediction {
        let nc = self.class_count();
        let mut votes = vec![0usize; nc];
        let mut margins = vec![0.0; nc];
        for (p, &f) in self.pairs.iter().zip(decisions) {
            let winner = if f > 0.0 { p.positive } else { p.negative };
            votes[winner] += 1;
            margins[winner] += f.abs();
        }
        let mut class = 0;
        for k in 1..nc {
            if votes[k] > votes[class] || (votes[k] == votes[class] && margins[k] > margins[class]) {
                class = k;
            }
        }
        Prediction {
            class,
            votes,
            margins,
        }
    }

    /// The pairwise model `k` as a standalone binary model.
    pub fn binary(&self, k: usize) -> BinaryModel {
        let p = &self.pairs[k];
        BinaryModel {
            kernel: self.kernel,
            support: p.support.iter().map(|&s| self.vectors[s].clone()).collect(),
            coef: p.coef.clone(),
            bias: p.bias,
            support_indices: p.support.clone(),
            report: self.reports.get(k).cloned().unwrap_or(TrainReport {
                iterations: 0,
                converged: true,
                objective: f64::NAN,
                violation: 0.0,
                alphas: Vec::new(),
            }),
        }
    }
}
