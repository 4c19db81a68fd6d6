//! Binary C-SVC dual solver.
//!
//! Maximises `sum(a) - 1/2 a^T Q a` subject to `0 <= a_i <= C` and
//! `sum(a_i y_i) = 0`, where `Q_ij = y_i y_j K(x_i, x_j)`. Each iteration
//! picks the maximal violating index `i` and the partner `j` with the best
//! second-order gain, solves the two-variable subproblem in closed form and
//! updates the gradient. Iteration stops once the gap between the largest
//! and smallest `-y_t G_t` over the feasible directions drops below the
//! tolerance.

use std::borrow::Cow;

use super::{check_samples, Kernel, SvmError, SvmParams};

const TAU: f64 = 1e-12;

/// Diagnostics of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective `sum(a) - 1/2 a^T Q a` at the solution.
    pub objective: f64,
    /// KKT gap `m(a) - M(a)` at exit.
    pub violation: f64,
    /// Multipliers of every training sample, in input order.
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    pub kernel: Kernel,
    pub support: Vec<Vec<f64>>,
    /// `a_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Index of each support vector in the training input.
    pub support_indices: Vec<usize>,
    pub report: TrainReport,
}

impl BinaryModel {
    /// `f(x) = sum(a_i y_i K(s_i, x)) + b`
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        for (s, c) in self.support.iter().zip(&self.coef) {
            f += c * self.kernel.eval(s, x);
        }
        f + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Kernel rows, either fully precomputed or evaluated on demand.
enum Gram<'a, R> {
    Full { n: usize, k: Vec<f64> },
    OnDemand { x: &'a [R], kernel: Kernel },
}

impl<'a, R: AsRef<[f64]>> Gram<'a, R> {
    fn new(x: &'a [R], kernel: Kernel, budget: usize) -> Self {
        let n = x.len();
        if n.saturating_mul(n).saturating_mul(8) > budget {
            return Gram::OnDemand { x, kernel };
        }
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(x[i].as_ref(), x[j].as_ref());
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Gram::Full { n, k }
    }

    fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            Gram::Full { n, k } => Cow::Borrowed(&k[i * n..(i + 1) * n]),
            Gram::OnDemand { x, kernel } => {
                let xi = x[i].as_ref();
                Cow::Owned(x.iter().map(|r| kernel.eval(xi, r.as_ref())).collect())
            }
        }
    }

    fn diag(&self, i: usize) -> f64 {
        match self {
            Gram::Full { n, k } => k[i * n + i],
            Gram::OnDemand { x, kernel } => kernel.eval(x[i].as_ref(), x[i].as_ref()),
        }
    }
}

struct Solution {
    alpha: Vec<f64>,
    grad: Vec<f64>,
    iterations: usize,
    converged: bool,
    violation: f64,
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

fn solve<R: AsRef<[f64]>>(gram: &Gram<'_, R>, y: &[f64], c: f64, eps: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let diag: Vec<f64> = (0..n).map(|i| gram.diag(i)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;

    loop {
        // i: maximal -y_t G_t over I_up; lowest index wins ties.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(y[t], alpha[t], c) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // j: best second-order gain over I_low; also track max of y_t G_t.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_gain = f64::INFINITY;
        let ki = if i != usize::MAX { Some(gram.row(i)) } else { None };
        for t in 0..n {
            if !in_low(y[t], alpha[t], c) {
                continue;
            }
            let v = y[t] * grad[t];
            if v > gmax2 {
                gmax2 = v;
            }
            if let Some(ki) = &ki {
                let diff = gmax + v;
                if diff > 0.0 {
                    let mut quad = diag[i] + diag[t] - 2.0 * ki[t];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let gain = -(diff * diff) / quad;
                    if gain < best_gain {
                        best_gain = gain;
                        j = t;
                    }
                }
            }
        }
        let violation = gmax + gmax2;
        if i == usize::MAX || j == usize::MAX || violation < eps {
            return Solution {
                alpha,
                grad,
                iterations,
                converged: true,
                violation: violation.max(0.0),
            };
        }
        if iterations >= max_iter {
            return Solution {
                alpha,
                grad,
                iterations,
                converged: false,
                violation,
            };
        }
        iterations += 1;

        let ki = ki.expect("i was selected");
        let kj = gram.row(j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_ai, old_aj);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (dai, daj) = (ai - old_ai, aj - old_aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
        }
    }
}

/// Offset `rho` with `f(x) = sum(a_i y_i K) - rho`: the mean of `y_i G_i`
/// over free vectors, or the midpoint of the feasible interval when every
/// multiplier sits at a bound.
fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Trains a binary model on labels in `{-1, +1}`.
pub fn train_binary<R: AsRef<[f64]>>(x: &[R], y: &[f64], params: &SvmParams) -> Result<BinaryModel, SvmError> {
    params.validate()?;
    let dim = check_samples(x)?;
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::InvalidLabel(bad.to_string()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(SvmError::SingleClassInput);
    }
    let kernel = params.kernel_for(dim);
    let gram = Gram::new(x, kernel, params.cache_bytes);
    let max_iter = params.max_iter.unwrap_or_else(|| 10_000_000usize.max(100 * x.len()));
    let sol = solve(&gram, y, params.c, params.tolerance, max_iter);

    let rho = offset(&sol.alpha, &sol.grad, y, params.c);
    // sum(a) - 1/2 a^T Q a = -1/2 sum(a_i (G_i - 1))
    let objective = -0.5 * sol.alpha.iter().zip(&sol.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();

    let mut support = Vec::new();
    let mut coef = Vec::new();
    let mut support_indices = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.push(x[t].as_ref().to_vec());
            coef.push(a * y[t]);
            support_indices.push(t);
        }
    }
    Ok(BinaryModel {
        kernel,
        support,
        coef,
        bias: -rho,
        support_indices,
        report: TrainReport {
            iterations: sol.iterations,
            converged: sol.converged,
            objective,
            violation: sol.violation,
            alphas: sol.alpha,
        },
    })
}
