//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use esn_fractal::svm::rbf_kernel;
use esn_fractal::KernelParams;
use nalgebra::DMatrix;

pub fn gram(rows: &[Vec<f64>], sigma: f64) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rbf_kernel(&rows[i], &rows[j], sigma).unwrap())
}

/// Projection onto `{0 <= a <= c, y.a = 0}` by bisection on the multiplier.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> {
        v.iter().zip(y).map(|(vi, yi)| (vi - nu * yi).clamp(0.0, c)).collect()
    };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn dual(a: &[f64], q: &DMatrix<f64>) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * q[(i, j)];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Accelerated projected gradient ascent on the dual.
pub fn qp_oracle(rows: &[Vec<f64>], y: &[f64], p: KernelParams) -> (Vec<f64>, f64) {
    let n = rows.len();
    let k = gram(rows, p.sigma);
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let lip = q.symmetric_eigenvalues().max().max(1e-12);
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..40_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[(i, j)] * z[j]).sum::<f64>())
            .collect();
        let v: Vec<f64> = (0..n).map(|i| z[i] + grad[i] / lip).collect();
        let next = project(&v, y, p.c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i])).collect();
        a = next;
        t = t_next;
    }
    let obj = dual(&a, &q);
    (a, obj)
}

/// Occupied cells found by locating each coordinate with interval
/// comparisons against explicit cell edges (no floor or division).
pub fn brute_force_boxes(points: &[Vec<f64>], eps: u32, bounds: &[(f64, f64)]) -> usize {
    let mut cells = BTreeSet::new();
    for p in points {
        let idx: Vec<u32> = p
            .iter()
            .zip(bounds)
            .map(|(&x, &(lo, hi))| {
                let w = (hi - lo) / f64::from(eps);
                (0..eps)
                    .find(|&k| {
                        let a = lo + f64::from(k) * w;
                        let b = lo + f64::from(k + 1) * w;
                        x >= a && (x < b || k + 1 == eps)
                    })
                    .expect("point inside bounds")
            })
            .collect();
        cells.insert(idx);
    }
    cells.len()
}
