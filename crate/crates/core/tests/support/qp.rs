//! Dense oracle for the SVM dual: accelerated projected gradient ascent on
//! `sum(a) - 1/2 a^T Q a` over `0 <= a <= C`, `sum(a_i y_i) = 0`.
#![allow(dead_code)]

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

pub fn objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * q[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto the box intersected with the hyperplane,
/// found by bisection on the hyperplane multiplier.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter().zip(y).map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c)).collect()
    };
    let residual = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let spread = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-spread, spread);
    // The residual is non-increasing in lambda.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

/// Gershgorin bound on the largest eigenvalue of `q`, so `1 / L` is a
/// safe ascent step.
fn lipschitz_bound(q: &[Vec<f64>]) -> f64 {
    q.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solves the dual to a step change below `1e-13` (or the iteration cap).
pub fn solve(q: &[Vec<f64>], y: &[f64], c: f64) -> QpSolution {
    let n = y.len();
    let step = 1.0 / (lipschitz_bound(q) + 1e-12);
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).collect() };
    let mut a = project(&vec![0.0; n], y, c);
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = objective(q, &a);
    let mut plain = true;
    for _ in 0..400_000 {
        let g = grad(&z);
        let moved: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + step * gi).collect();
        let next = project(&moved, y, c);
        let f = objective(q, &next);
        let change = next.iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        // Only a plain step from the best point certifies convergence; an
        // extrapolated step may land back on it without saying anything.
        if change < 1e-13 || f < best {
            if plain {
                if f >= best {
                    a = next;
                }
                break;
            }
            t = 1.0;
            z = a.clone();
            plain = true;
            continue;
        }
        plain = false;
        best = f;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(p, q)| p + (t - 1.0) / t_next * (p - q)).collect();
        a = next;
        t = t_next;
    }
    let g = grad(&a);
    QpSolution {
        bias: bias(&a, &g, y, c),
        objective: objective(q, &a),
        alpha: a,
    }
}

/// Bias from the stationarity conditions: the mean over free multipliers,
/// or the midpoint of the feasible interval when none are free.
fn bias(a: &[f64], g: &[f64], y: &[f64], c: f64) -> f64 {
    let eps = 1e-8 * c.max(1.0);
    // With G_i = 1 - (Qa)_i, y_i f(x_i) = 1 - G_i + y_i b, so b = y_i G_i on free i.
    let free: Vec<f64> = (0..a.len())
        .filter(|&i| a[i] > eps && a[i] < c - eps)
        .map(|i| y[i] * g[i])
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..a.len() {
        let v = y[i] * g[i];
        let at_lower = a[i] <= eps;
        // b >= v when y=+1 at the lower bound or y=-1 at the upper bound.
        if (y[i] > 0.0) == at_lower {
            lo = lo.max(v);
        } else {
            hi = hi.min(v);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        _ => 0.0,
    }
}
