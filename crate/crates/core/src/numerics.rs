//! Complex vector arithmetic and the largest eigenpair of Hermitian matrices
//! built from at most three rank-one terms.
//!
//! A matrix `Z = Σ c_k h_k h_k*` acts as zero on the orthogonal complement of
//! `span{h_k}`, so its spectrum is the spectrum of the small projected matrix
//! `Q* Z Q` (with `Q` an orthonormal basis of the span) plus, when the span is
//! a proper subspace, the eigenvalue 0. The solver below works in that span,
//! which keeps the cost of an eigen-solve independent of the antenna count.

use std::ops::Index;

use num_complex::Complex64;
use thiserror::Error;

/// Default relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Jacobi sweeps stop once the off-diagonal Frobenius norm falls below this
/// fraction of the full Frobenius norm.
const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

/// In-span and complement eigenvalues closer than this are treated as tied.
const TIE_TOL: f64 = 1e-12;
/// Relative eigenvalue separation below which the closed-form eigenvector
/// gives way to Jacobi.
const CLOSED_FORM_GAP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("a rank-one sum needs between 1 and 3 terms, got {0}")]
    TermCount(usize),
    #[error("non-finite coefficient in rank-one sum")]
    NonFiniteCoefficient,
}

/// Dense complex vector with at least one entry, all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVec(Vec<Complex64>);

impl ComplexVec {
    pub fn new(entries: Vec<Complex64>) -> Result<Self, NumericsError> {
        if entries.is_empty() {
            return Err(NumericsError::Empty);
        }
        if let Some(i) = entries.iter().position(|z| !z.is_finite()) {
            return Err(NumericsError::NonFinite(i));
        }
        Ok(ComplexVec(entries))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self, NumericsError> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// All-zero vector of length `n`.
    ///
    /// # Panics
    ///
    /// Panics if `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "vector length must be at least 1");
        ComplexVec(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Standard basis vector `e_i` of length `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ComplexVec(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn scaled_by(&self, factor: Complex64) -> Self {
        ComplexVec(self.0.iter().map(|z| z * factor).collect())
    }
}

impl Index<usize> for ComplexVec {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Inner product `a* b = Σ conj(a_i) b_i`.
pub fn inner(a: &ComplexVec, b: &ComplexVec) -> Result<Complex64, NumericsError> {
    if a.len() != b.len() {
        return Err(NumericsError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(dot(a.as_slice(), b.as_slice()))
}

/// Unchecked `Σ conj(a_i) b_i`; callers guarantee equal lengths.
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

fn subtract_projection(r: &mut [Complex64], q: &[Complex64]) {
    let c = dot(q, r);
    for (ri, qi) in r.iter_mut().zip(q) {
        *ri -= c * qi;
    }
}

/// Orthonormal basis of `span{vectors}` by modified Gram-Schmidt with one
/// re-orthogonalization pass. A vector whose residual norm after projection
/// is below `tol` times its own norm contributes nothing.
pub fn orthonormal_span_basis(
    vectors: &[ComplexVec],
    tol: f64,
) -> Result<Vec<ComplexVec>, NumericsError> {
    let refs: Vec<&ComplexVec> = vectors.iter().collect();
    span_basis_of(&refs, tol)
}

fn span_basis_of(vectors: &[&ComplexVec], tol: f64) -> Result<Vec<ComplexVec>, NumericsError> {
    let first = vectors.first().ok_or(NumericsError::Empty)?;
    let n = first.len();
    for v in vectors {
        if v.len() != n {
            return Err(NumericsError::DimensionMismatch {
                left: n,
                right: v.len(),
            });
        }
    }
    let mut basis: Vec<ComplexVec> = Vec::with_capacity(vectors.len().min(n));
    for v in vectors {
        if basis.len() == n {
            break;
        }
        let own = v.norm();
        if own == 0.0 {
            continue;
        }
        let mut r = v.as_slice().to_vec();
        for _ in 0..2 {
            for q in &basis {
                subtract_projection(&mut r, q.as_slice());
            }
        }
        let res: f64 = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if res < tol * own {
            continue;
        }
        basis.push(ComplexVec(r.into_iter().map(|z| z / res).collect()));
    }
    Ok(basis)
}

/// `Σ c_k h_k h_k*` with one to three terms of equal length.
#[derive(Clone, Debug)]
pub struct RankTermSum<'a> {
    terms: Vec<(f64, &'a ComplexVec)>,
}

impl<'a> RankTermSum<'a> {
    pub fn new(terms: Vec<(f64, &'a ComplexVec)>) -> Result<Self, NumericsError> {
        if terms.is_empty() || terms.len() > 3 {
            return Err(NumericsError::TermCount(terms.len()));
        }
        let n = terms[0].1.len();
        for (c, h) in &terms {
            if !c.is_finite() {
                return Err(NumericsError::NonFiniteCoefficient);
            }
            if h.len() != n {
                return Err(NumericsError::DimensionMismatch {
                    left: n,
                    right: h.len(),
                });
            }
        }
        Ok(RankTermSum { terms })
    }

    pub fn dim(&self) -> usize {
        self.terms[0].1.len()
    }

    pub fn terms(&self) -> &[(f64, &'a ComplexVec)] {
        &self.terms
    }

    /// `Z v` without forming `Z`.
    pub fn apply(&self, v: &ComplexVec) -> ComplexVec {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (c, h) in &self.terms {
            let s = dot(h.as_slice(), v.as_slice()) * *c;
            for (o, hi) in out.iter_mut().zip(h.iter()) {
                *o += hi * s;
            }
        }
        ComplexVec(out)
    }

    /// `Σ |c_k| ‖h_k‖²`, the natural scale of the matrix.
    pub fn scale(&self) -> f64 {
        self.terms.iter().map(|(c, h)| c.abs() * h.norm_sqr()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit-norm eigenvector, phase-normalized so that its largest-magnitude
    /// entry is real and nonnegative.
    pub vector: ComplexVec,
    /// Set when `Z` is identically zero; `vector` is then arbitrary.
    pub degenerate: bool,
}

/// Largest eigenpair of `Z`, computed in the span of its term vectors.
pub fn max_eigpair(z: &RankTermSum<'_>, tol: f64) -> Result<Eigenpair, NumericsError> {
    let vectors: Vec<&ComplexVec> = z.terms.iter().map(|(_, h)| *h).collect();
    let coeffs: Vec<f64> = z.terms.iter().map(|(c, _)| *c).collect();
    Ok(LowRankHermitian::new(&vectors, tol)?.max_eigpair(&coeffs))
}

/// The span of a fixed set of (up to three) vectors, prepared for repeated
/// eigen-solves of `Σ c_k h_k h_k*` with varying coefficients.
#[derive(Clone, Debug)]
pub struct LowRankHermitian {
    dim: usize,
    basis: Vec<ComplexVec>,
    /// `coords[k][i] = q_i* h_k`.
    coords: Vec<[Complex64; 3]>,
    scales: Vec<f64>,
    complement: Option<ComplexVec>,
}

impl LowRankHermitian {
    pub fn new(vectors: &[&ComplexVec], tol: f64) -> Result<Self, NumericsError> {
        if vectors.len() > 3 {
            return Err(NumericsError::TermCount(vectors.len()));
        }
        let basis = span_basis_of(vectors, tol)?;
        let dim = vectors[0].len();
        let zero = Complex64::new(0.0, 0.0);
        let coords = vectors
            .iter()
            .map(|h| {
                let mut g = [zero; 3];
                for (gi, q) in g.iter_mut().zip(&basis) {
                    *gi = dot(q.as_slice(), h.as_slice());
                }
                g
            })
            .collect();
        let scales = vectors.iter().map(|h| h.norm_sqr()).collect();
        let complement = (basis.len() < dim).then(|| complement_vector(&basis, dim));
        Ok(LowRankHermitian {
            dim,
            basis,
            coords,
            scales,
            complement,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the span.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Coefficients are matched positionally with the vectors given to `new`.
    ///
    /// # Panics
    ///
    /// Panics if `coeffs.len()` differs from the number of vectors.
    pub fn max_eigpair(&self, coeffs: &[f64]) -> Eigenpair {
        let (value, y, degenerate) = self.small_max_eigpair(coeffs);
        if degenerate {
            let vector = self
                .complement
                .clone()
                .unwrap_or_else(|| ComplexVec::unit(self.dim, 0));
            return Eigenpair {
                value: 0.0,
                vector,
                degenerate: true,
            };
        }
        if let Some(comp) = &self.complement {
            if value < -TIE_TOL {
                return Eigenpair {
                    value: 0.0,
                    vector: comp.clone(),
                    degenerate: false,
                };
            }
        }
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
        for (yi, q) in y.iter().zip(&self.basis) {
            for (vj, qj) in v.iter_mut().zip(q.iter()) {
                *vj += yi * qj;
            }
        }
        let mut v = ComplexVec(v);
        normalize_phase(&mut v);
        Eigenpair {
            value,
            vector: v,
            degenerate: false,
        }
    }

    /// Largest eigenvalue of the full matrix, without building the vector.
    /// Spans of dimension one or two use the closed form.
    pub fn max_eigenvalue(&self, coeffs: &[f64]) -> f64 {
        let Some((m, r)) = self.small_matrix(coeffs) else {
            return 0.0;
        };
        let value = match r {
            1 => m[0][0].re,
            2 => {
                let half_sum = 0.5 * (m[0][0].re + m[1][1].re);
                let half_diff = 0.5 * (m[0][0].re - m[1][1].re);
                half_sum + (half_diff * half_diff + m[0][1].norm_sqr()).sqrt()
            }
            _ => {
                let (vals, _) = jacobi_hermitian(m, r);
                vals[..r].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        };
        if self.complement.is_some() && value < -TIE_TOL {
            0.0
        } else {
            value
        }
    }

    /// `Q* Z Q` and its size, or `None` when `Z` vanishes.
    fn small_matrix(&self, coeffs: &[f64]) -> Option<([[Complex64; 3]; 3], usize)> {
        assert_eq!(coeffs.len(), self.coords.len(), "coefficient count");
        let zero = Complex64::new(0.0, 0.0);
        let r = self.basis.len();
        let scale: f64 = coeffs
            .iter()
            .zip(&self.scales)
            .map(|(c, s)| c.abs() * s)
            .sum();
        if r == 0 || scale == 0.0 {
            return None;
        }
        let mut m = [[zero; 3]; 3];
        for (c, g) in coeffs.iter().zip(&self.coords) {
            if *c == 0.0 {
                continue;
            }
            for i in 0..r {
                for j in 0..r {
                    m[i][j] += g[i] * g[j].conj() * *c;
                }
            }
        }
        Some((m, r))
    }

    fn small_max_eigpair(&self, coeffs: &[f64]) -> (f64, [Complex64; 3], bool) {
        let zero = Complex64::new(0.0, 0.0);
        let Some((m, r)) = self.small_matrix(coeffs) else {
            return (0.0, [zero; 3], true);
        };
        if let Some((value, y)) = closed_form_max_eigpair(&m, r) {
            return (value, y, false);
        }
        let (vals, vecs) = jacobi_hermitian(m, r);
        let mut best = 0;
        for i in 1..r {
            if vals[i] > vals[best] {
                best = i;
            }
        }
        let mut y = [zero; 3];
        for (i, yi) in y.iter_mut().enumerate().take(r) {
            *yi = vecs[i][best];
        }
        (vals[best], y, false)
    }
}

/// Largest eigenpair of a Hermitian matrix of size `n <= 3` in closed form.
/// `None` when the top eigenvalue is too close to the next one for the
/// null-vector construction to be accurate; Jacobi handles those.
fn closed_form_max_eigpair(m: &[[Complex64; 3]; 3], n: usize) -> Option<(f64, [Complex64; 3])> {
    let zero = Complex64::new(0.0, 0.0);
    let mut y = [zero; 3];
    match n {
        1 => {
            y[0] = Complex64::new(1.0, 0.0);
            Some((m[0][0].re, y))
        }
        2 => {
            let (a, d, b) = (m[0][0].re, m[1][1].re, m[0][1]);
            let half_diff = 0.5 * (a - d);
            let root = (half_diff * half_diff + b.norm_sqr()).sqrt();
            let value = 0.5 * (a + d) + root;
            if 2.0 * root <= CLOSED_FORM_GAP * (a.abs() + d.abs() + b.norm()) {
                return None;
            }
            // Null vectors of either row of `M - value I`.
            let u = [b, Complex64::new(value - a, 0.0)];
            let w = [Complex64::new(value - d, 0.0), b.conj()];
            let nu = u[0].norm_sqr() + u[1].norm_sqr();
            let nw = w[0].norm_sqr() + w[1].norm_sqr();
            let (v, nv) = if nu >= nw { (u, nu) } else { (w, nw) };
            let s = nv.sqrt();
            y[0] = v[0] / s;
            y[1] = v[1] / s;
            Some((value, y))
        }
        3 => {
            let off = m[0][1].norm_sqr() + m[0][2].norm_sqr() + m[1][2].norm_sqr();
            let q = (m[0][0].re + m[1][1].re + m[2][2].re) / 3.0;
            let d = [m[0][0].re - q, m[1][1].re - q, m[2][2].re - q];
            let p2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + 2.0 * off;
            if p2 == 0.0 {
                return None;
            }
            let p = (p2 / 6.0).sqrt();
            // det((A - qI) / p) / 2, real for Hermitian input.
            let det = d[0] * d[1] * d[2] + 2.0 * (m[0][1] * m[1][2] * m[2][0]).re
                - d[0] * m[1][2].norm_sqr()
                - d[1] * m[0][2].norm_sqr()
                - d[2] * m[0][1].norm_sqr();
            let half_det = (det / (p * p * p) / 2.0).clamp(-1.0, 1.0);
            let value = q + 2.0 * p * (half_det.acos() / 3.0).cos();
            let mut rows = *m;
            for (i, row) in rows.iter_mut().enumerate() {
                row[i] -= value;
            }
            let cross = |a: &[Complex64; 3], b: &[Complex64; 3]| {
                [
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                ]
            };
            let norm2 = |v: &[Complex64; 3]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let mut best = ([zero; 3], -1.0);
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let c = cross(&rows[i], &rows[j]);
                let n = norm2(&c);
                if n > best.1 {
                    best = (c, n);
                }
            }
            // Near-parallel rows mean a near-repeated top eigenvalue.
            let scale = norm2(&rows[0]).max(norm2(&rows[1])).max(norm2(&rows[2]));
            if !(best.1 > CLOSED_FORM_GAP * CLOSED_FORM_GAP * scale * scale) {
                return None;
            }
            let s = best.1.sqrt();
            for (yi, c) in y.iter_mut().zip(best.0) {
                *yi = c / s;
            }
            Some((value, y))
        }
        _ => None,
    }
}

/// Unit vector orthogonal to every basis vector: the standard basis vector
/// with the largest residual after projection, normalized.
fn complement_vector(basis: &[ComplexVec], dim: usize) -> ComplexVec {
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for i in 0..dim {
        let mut r = ComplexVec::unit(dim, i).0;
        for _ in 0..2 {
            for q in basis {
                subtract_projection(&mut r, q.as_slice());
            }
        }
        let n: f64 = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, r));
        }
    }
    let (n, r) = best.expect("dim >= 1");
    let mut v = ComplexVec(r.into_iter().map(|z| z / n).collect());
    normalize_phase(&mut v);
    v
}

/// Rotates `v` so that its largest-magnitude entry is real and nonnegative.
pub fn normalize_phase(v: &mut ComplexVec) {
    let mut idx = 0;
    let mut mag = -1.0;
    for (i, z) in v.0.iter().enumerate() {
        let m = z.norm();
        if m > mag {
            mag = m;
            idx = i;
        }
    }
    if mag > 0.0 {
        let rot = v.0[idx].conj() / mag;
        for z in v.0.iter_mut() {
            *z *= rot;
        }
        v.0[idx] = Complex64::new(v.0[idx].re, 0.0);
    }
}

/// Cyclic Jacobi for a Hermitian matrix held in the leading `n x n` block
/// (`n <= 3`). Returns eigenvalues and the eigenvector matrix, eigenvectors
/// stored as columns.
fn jacobi_hermitian(
    mut a: [[Complex64; 3]; 3],
    n: usize,
) -> ([f64; 3], [[Complex64; 3]; 3]) {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut v = [[zero; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = one;
    }
    for i in 0..n {
        a[i][i] = Complex64::new(a[i][i].re, 0.0);
    }

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s = a[i][j].norm_sqr();
                total += s;
                if i != j {
                    off += s;
                }
            }
        }
        if off == 0.0 || off.sqrt() <= JACOBI_OFF_TOL * total.sqrt() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                // Phase-rotate column q so that the (p, q) entry is real, then
                // apply the classical real rotation.
                let phase = apq / r;
                let tau = (a[q][q].re - a[p][p].re) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * c;

                for row in a.iter_mut().take(n) {
                    let (xp, xq) = (row[p], row[q]);
                    row[p] = xp * u_pp + xq * u_qp;
                    row[q] = xp * u_pq + xq * u_qq;
                }
                for k in 0..n {
                    let (xp, xq) = (a[p][k], a[q][k]);
                    a[p][k] = u_pp.conj() * xp + u_qp.conj() * xq;
                    a[q][k] = u_pq.conj() * xp + u_qq.conj() * xq;
                }
                a[p][q] = zero;
                a[q][p] = zero;
                a[p][p] = Complex64::new(a[p][p].re, 0.0);
                a[q][q] = Complex64::new(a[q][q].re, 0.0);
                for row in v.iter_mut().take(n) {
                    let (xp, xq) = (row[p], row[q]);
                    row[p] = xp * u_pp + xq * u_qp;
                    row[q] = xp * u_pq + xq * u_qq;
                }
            }
        }
    }
    let mut vals = [0.0; 3];
    for (i, val) in vals.iter_mut().enumerate().take(n) {
        *val = a[i][i].re;
    }
    (vals, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_product_conventions() {
        let e0 = ComplexVec::from_real(&[1.0, 0.0]).unwrap();
        let e1 = ComplexVec::from_real(&[0.0, 1.0]).unwrap();
        let ie0 = ComplexVec::new(vec![c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(inner(&e0, &e0).unwrap(), c(1.0, 0.0));
        assert_eq!(inner(&e0, &e1).unwrap(), c(0.0, 0.0));
        assert_eq!(inner(&ie0, &e0).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn closed_form_agrees_with_jacobi() {
        // Fixed pseudo-random entries; a tiny LCG keeps this free of rand.
        let mut state = 0x2545_F491_4F6C_DD1Du64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut checked = 0;
        for n in [2usize, 3] {
            for _ in 0..500 {
                let mut m = [[c(0.0, 0.0); 3]; 3];
                for i in 0..n {
                    m[i][i] = c(next(), 0.0);
                    for j in (i + 1)..n {
                        m[i][j] = c(next(), next());
                        m[j][i] = m[i][j].conj();
                    }
                }
                let Some((value, y)) = closed_form_max_eigpair(&m, n) else {
                    continue;
                };
                checked += 1;
                let (vals, _) = jacobi_hermitian(m, n);
                let top = vals[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!((value - top).abs() < 1e-12, "{value} vs {top}");
                for i in 0..n {
                    let mut r = c(0.0, 0.0);
                    for j in 0..n {
                        r += m[i][j] * y[j];
                    }
                    assert!((r - y[i] * value).norm() < 1e-11);
                }
                let norm: f64 = y[..n].iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
        assert!(checked > 900);
        let scalar = [[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0); 3]];
        assert!(closed_form_max_eigpair(&scalar, 2).is_none());
    }

    #[test]
    fn inner_rejects_length_mismatch() {
        let a = ComplexVec::zeros(2);
        let b = ComplexVec::zeros(3);
        assert_eq!(
            inner(&a, &b),
            Err(NumericsError::DimensionMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn vector_construction_validates() {
        assert_eq!(ComplexVec::new(vec![]), Err(NumericsError::Empty));
        assert_eq!(
            ComplexVec::new(vec![c(0.0, 0.0), c(f64::NAN, 0.0)]),
            Err(NumericsError::NonFinite(1))
        );
    }

    #[test]
    fn span_basis_of_plane() {
        let vs = [
            ComplexVec::from_real(&[1.0, 0.0]).unwrap(),
            ComplexVec::from_real(&[0.0, 2.0]).unwrap(),
        ];
        let b = orthonormal_span_basis(&vs, RANK_TOL).unwrap();
        assert_eq!(b.len(), 2);
        assert!((inner(&b[0], &b[1]).unwrap()).norm() < 1e-15);
        assert!((b[0].norm() - 1.0).abs() < 1e-15);
        assert!((b[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn span_basis_collapses_collinear() {
        let vs = [
            ComplexVec::from_real(&[1.0, 0.0]).unwrap(),
            ComplexVec::from_real(&[2.0, 0.0]).unwrap(),
        ];
        let b = orthonormal_span_basis(&vs, RANK_TOL).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0][0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn span_basis_of_zeros_is_empty() {
        let vs = [ComplexVec::zeros(3), ComplexVec::zeros(3)];
        assert!(orthonormal_span_basis(&vs, RANK_TOL).unwrap().is_empty());
        assert_eq!(orthonormal_span_basis(&[], RANK_TOL), Err(NumericsError::Empty));
    }

    #[test]
    fn rank_one_positive_term() {
        let h = ComplexVec::from_real(&[3.0, 4.0]).unwrap();
        let z = RankTermSum::new(vec![(1.0, &h)]).unwrap();
        let ep = max_eigpair(&z, RANK_TOL).unwrap();
        assert!((ep.value - 25.0).abs() < 1e-12);
        assert!((ep.vector[0] - c(0.6, 0.0)).norm() < 1e-12);
        assert!((ep.vector[1] - c(0.8, 0.0)).norm() < 1e-12);
        assert!(!ep.degenerate);
    }

    #[test]
    fn rank_one_negative_term_uses_complement() {
        let h = ComplexVec::new(vec![c(0.3, -1.2), c(0.7, 0.4)]).unwrap();
        let z = RankTermSum::new(vec![(-1.0, &h)]).unwrap();
        let ep = max_eigpair(&z, RANK_TOL).unwrap();
        assert_eq!(ep.value, 0.0);
        assert!(inner(&ep.vector, &h).unwrap().norm() <= 1e-10 * h.norm());
        assert!((ep.vector.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn all_zero_matrix_is_degenerate() {
        let h = ComplexVec::zeros(3);
        let z = RankTermSum::new(vec![(1.0, &h)]).unwrap();
        let ep = max_eigpair(&z, RANK_TOL).unwrap();
        assert!(ep.degenerate);
        assert_eq!(ep.value, 0.0);
        assert!((ep.vector.norm() - 1.0).abs() < 1e-15);

        let g = ComplexVec::from_real(&[1.0, 2.0, 3.0]).unwrap();
        let z = RankTermSum::new(vec![(0.0, &g)]).unwrap();
        assert!(max_eigpair(&z, RANK_TOL).unwrap().degenerate);
    }

    #[test]
    fn term_count_is_checked() {
        let h = ComplexVec::zeros(2);
        assert_eq!(
            RankTermSum::new(vec![]).unwrap_err(),
            NumericsError::TermCount(0)
        );
        assert_eq!(
            RankTermSum::new(vec![(1.0, &h); 4]).unwrap_err(),
            NumericsError::TermCount(4)
        );
    }

    #[test]
    fn phase_is_normalized() {
        let h = ComplexVec::new(vec![c(0.0, 3.0), c(0.0, 4.0)]).unwrap();
        let z = RankTermSum::new(vec![(2.0, &h)]).unwrap();
        let ep = max_eigpair(&z, RANK_TOL).unwrap();
        assert_eq!(ep.vector[1].im, 0.0);
        assert!(ep.vector[1].re > 0.0);
        assert!((ep.value - 50.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_two_by_two_matches_closed_form() {
        let zero = c(0.0, 0.0);
        let mut m = [[zero; 3]; 3];
        m[0][0] = c(2.0, 0.0);
        m[1][1] = c(-1.0, 0.0);
        m[0][1] = c(1.0, 1.0);
        m[1][0] = c(1.0, -1.0);
        let (vals, _) = jacobi_hermitian(m, 2);
        let mean = 0.5;
        let rad = (1.5f64 * 1.5 + 2.0).sqrt();
        let (hi, lo) = (vals[0].max(vals[1]), vals[0].min(vals[1]));
        assert!((hi - (mean + rad)).abs() < 1e-13);
        assert!((lo - (mean - rad)).abs() < 1e-13);
    }
}
