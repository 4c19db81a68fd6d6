#[path = "support/qp.rs"]
mod qp;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salfold::svm::{train_binary, Kernel, KernelKind};
use salfold::SvmParams;

struct Problem {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    params: SvmParams,
}

fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let n = rng.gen_range(2..=12);
    let dim = rng.gen_range(1..=4);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let mut y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let c = [0.1, 1.0, 10.0][rng.gen_range(0..3)];
    let params = if rng.gen_bool(0.75) {
        SvmParams {
            c,
            gamma: Some(rng.gen_range(0.1..2.0)),
            ..SvmParams::default()
        }
    } else {
        SvmParams {
            c,
            kernel: KernelKind::Linear,
            ..SvmParams::default()
        }
    };
    Problem { x, y, params }
}

fn q_matrix(k: Kernel, x: &[Vec<f64>], y: &[f64]) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| (0..x.len()).map(|j| y[i] * y[j] * k.eval(&x[i], &x[j])).collect())
        .collect()
}

#[test]
fn smo_matches_dense_qp_and_satisfies_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for p in 0..200 {
        let Problem { x, y, params } = random_problem(&mut rng);
        let model = train_binary(&x, &y, &params).unwrap();
        let kernel = params.kernel_for(x[0].len());
        let q = q_matrix(kernel, &x, &y);
        let oracle = qp::solve(&q, &y, params.c);
        let r = &model.report;
        assert!(r.converged, "problem {p}");
        assert!((qp::objective(&q, &r.alphas) - r.objective).abs() < 1e-9);
        // A gap of 1e-3 can leave the objective a few 1e-6 short; compare
        // the optimum itself with a tight stopping threshold.
        let tight = SvmParams { tolerance: 1e-9, ..params.clone() };
        let precise = train_binary(&x, &y, &tight).unwrap().report.objective;
        assert!(
            (precise - oracle.objective).abs() < 1e-6,
            "problem {p}: smo {precise} oracle {}",
            oracle.objective
        );
        assert!(r.objective <= oracle.objective + 1e-6);

        let c = params.c;
        let balance: f64 = r.alphas.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        assert!(balance.abs() <= 1e-9);
        for (i, &a) in r.alphas.iter().enumerate() {
            assert!((0.0..=c).contains(&a));
            let margin = y[i] * model.decision(&x[i]);
            let tol = 1e-3;
            if a == 0.0 {
                assert!(margin >= 1.0 - tol, "problem {p} sample {i}: {margin}");
            } else if a == c {
                assert!(margin <= 1.0 + tol, "problem {p} sample {i}: {margin}");
            } else {
                assert!((margin - 1.0).abs() <= tol, "problem {p} sample {i}: {margin}");
            }
        }

        // Decision signs agree with the oracle away from the boundary.
        let oracle_f = |z: &[f64]| {
            (0..x.len()).map(|i| oracle.alpha[i] * y[i] * kernel.eval(&x[i], z)).sum::<f64>() + oracle.bias
        };
        for gx in -4..=4 {
            for gy in -4..=4 {
                let mut z = vec![0.0; x[0].len()];
                z[0] = gx as f64 * 0.5;
                if z.len() > 1 {
                    z[1] = gy as f64 * 0.5;
                }
                let (a, b) = (model.decision(&z), oracle_f(&z));
                if a.abs() > 1e-3 && b.abs() > 1e-3 {
                    assert_eq!(a > 0.0, b > 0.0, "problem {p} at {z:?}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn rbf_gram_matrices_are_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..50 {
        let n = rng.gen_range(2..=20);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let k = Kernel::Rbf { gamma: rng.gen_range(0.05..3.0) };
        let g = DMatrix::from_fn(n, n, |i, j| k.eval(&x[i], &x[j]));
        let min = g.symmetric_eigenvalues().min();
        assert!(min >= -1e-8, "smallest eigenvalue {min}");
    }
}

#[test]
fn xor_objective_matches_oracle() {
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    let y = vec![-1.0, -1.0, 1.0, 1.0];
    let params = SvmParams { c: 10.0, gamma: Some(1.0), ..SvmParams::default() };
    let model = train_binary(&x, &y, &params).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert_eq!(model.predict(xi), *yi);
    }
    let q = q_matrix(Kernel::Rbf { gamma: 1.0 }, &x, &y);
    let oracle = qp::solve(&q, &y, 10.0);
    let tight = SvmParams { tolerance: 1e-9, ..params };
    let precise = train_binary(&x, &y, &tight).unwrap().report.objective;
    assert!((precise - oracle.objective).abs() < 1e-6);
}

#[test]
fn duplicating_samples_keeps_decision_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..30 {
        let n = rng.gen_range(4..=10);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            x.push(vec![s * 1.5 + rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)]);
            y.push(s);
        }
        // Large C keeps every multiplier off its upper bound, where doubling
        // the data leaves the separating surface in place.
        let params = SvmParams { c: 1e4, gamma: Some(0.5), tolerance: 1e-6, ..SvmParams::default() };
        let once = train_binary(&x, &y, &params).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let twice = train_binary(&x2, &y2, &params).unwrap();
        for _ in 0..100 {
            let z = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0)];
            let (a, b) = (once.decision(&z), twice.decision(&z));
            if a.abs() > 1e-3 {
                assert_eq!(a > 0.0, b > 0.0, "{z:?}: {a} vs {b}");
            }
        }
    }
}
