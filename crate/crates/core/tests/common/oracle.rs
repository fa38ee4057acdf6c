//! Independent Fréchet distance evaluation with a hand-written Jacobi solver.

#![allow(clippy::needless_range_loop)]

use rand::Rng;

/// Cyclic Jacobi eigenvalue iteration on a symmetric matrix stored row-major.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn sqrt_psd(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (vals, v) = jacobi_eigen(a);
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| v[i][k] * vals[k].max(0.0).sqrt() * v[j][k]).sum())
                .collect()
        })
        .collect()
}

/// d computed with the square root taken on the second covariance.
pub fn oracle_distance(ma: &[f64], ca: &[Vec<f64>], mb: &[f64], cb: &[Vec<f64>]) -> f64 {
    let sb = sqrt_psd(cb);
    let inner = matmul(&matmul(&sb, ca), &sb);
    let sym: Vec<Vec<f64>> = (0..inner.len())
        .map(|i| (0..inner.len()).map(|j| 0.5 * (inner[i][j] + inner[j][i])).collect())
        .collect();
    let (vals, _) = jacobi_eigen(&sym);
    let cross: f64 = vals.iter().map(|l| l.max(0.0).sqrt()).sum();
    let mean: f64 = ma.iter().zip(mb).map(|(a, b)| (a - b) * (a - b)).sum();
    let tr = |c: &[Vec<f64>]| (0..c.len()).map(|i| c[i][i]).sum::<f64>();
    (mean + tr(ca) + tr(cb) - 2.0 * cross).max(0.0).sqrt()
}

/// `M M^T + 0.05 I` for a random `M`.
pub fn random_spd<R: Rng>(rng: &mut R, d: usize) -> Vec<Vec<f64>> {
    let m: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..d).map(|k| m[i][k] * m[j][k]).sum::<f64>() + if i == j { 0.05 } else { 0.0 })
                .collect()
        })
        .collect()
}

