//! Shared helpers for the integration tests.
#![allow(dead_code)]

use coop_secrecy::model::{sample_general_position, ChannelSet, SystemParams, TrialSeed};
use num_complex::Complex64;

/// Dense `n x n` Hermitian matrix, row major.
pub type Dense = Vec<Vec<Complex64>>;

/// `Σ c_k h_k h_k*` as a dense matrix.
pub fn dense_sum(terms: &[(f64, &[Complex64])]) -> Dense {
    let n = terms[0].1.len();
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (c, h) in terms {
        for i in 0..n {
            for j in 0..n {
                m[i][j] += h[i] * h[j].conj() * *c;
            }
        }
    }
    m
}

/// Largest eigenvalue of a Hermitian matrix through its real symmetric
/// embedding `[[A, -B], [B, A]]`, diagonalized by cyclic Jacobi. Each
/// eigenvalue appears twice in the embedding, which does not affect the max.
pub fn dense_max_eigenvalue(m: &Dense) -> f64 {
    let n = m.len();
    let k = 2 * n;
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = m[i][j].re;
            a[i + n][j + n] = m[i][j].re;
            a[i][j + n] = -m[i][j].im;
            a[i + n][j] = m[i][j].im;
        }
    }
    for _ in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let total: f64 = a.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (x, y) = (a[r][p], a[r][q]);
                    a[r][p] = c * x - s * y;
                    a[r][q] = s * x + c * y;
                }
                for r in 0..k {
                    let (x, y) = (a[p][r], a[q][r]);
                    a[p][r] = c * x - s * y;
                    a[q][r] = s * x + c * y;
                }
            }
        }
    }
    (0..k).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

/// `|| M v - value v ||`.
pub fn residual(m: &Dense, v: &[Complex64], value: f64) -> f64 {
    let n = m.len();
    (0..n)
        .map(|i| {
            let mv: Complex64 = (0..n).map(|j| m[i][j] * v[j]).sum();
            (mv - v[i] * value).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Channel draw in general position.
pub fn channels(n_t: usize, snr_db: f64, master: u64, trial: u64) -> (ChannelSet, SystemParams) {
    let p = SystemParams::from_snr_db(snr_db, 0.0, n_t).unwrap();
    let (ch, _) = sample_general_position(&p, TrialSeed::new(master, trial)).unwrap();
    (ch, p)
}
