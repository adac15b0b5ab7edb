//! Dense kernels: thin SVD, rank truncation, thin QR, symmetric eigen, and a
//! matrix-free spectral-radius estimate.
//!
//! Factorizations come from nalgebra. This module pins down ordering and sign
//! conventions so every factor is deterministic.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::manifold::FixedRankPoint;

pub type DenseMatrix = DMatrix<f64>;

/// A singular or eigen value is treated as zero when it is at most this
/// fraction of the largest one.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub s: DVector<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> DenseMatrix {
        scale_columns(&self.u, &self.s) * self.v.transpose()
    }

    /// Number of singular values above `ZERO_TOL` times the largest.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(self.s.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DenseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub radius: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn numerical_rank(values: &[f64]) -> usize {
    let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0;
    }
    values.iter().filter(|v| v.abs() > ZERO_TOL * top).count()
}

pub fn ensure_finite(a: &DenseMatrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return invalid("matrix must have at least one row and one column");
    }
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        invalid("matrix has non-finite entries")
    }
}

/// `A · diag(s)`.
pub fn scale_columns(a: &DenseMatrix, s: &DVector<f64>) -> DenseMatrix {
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= s[j];
    }
    out
}

pub fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_error(q: &DenseMatrix) -> f64 {
    let g = q.transpose() * q;
    (g - DMatrix::identity(q.ncols(), q.ncols())).norm()
}

/// Column-major vectorization, the convention used for every Kronecker
/// identity in this crate.
pub fn vec_of(a: &DenseMatrix) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvec(x: &DVector<f64>, rows: usize, cols: usize) -> DenseMatrix {
    DMatrix::from_column_slice(rows, cols, x.as_slice())
}

/// Flip signs so the largest-magnitude entry of each column of `u` is
/// nonnegative, mirroring the flip onto the same column of `v`.
pub(crate) fn fix_signs(u: &mut DenseMatrix, mut v: Option<&mut DenseMatrix>) {
    for j in 0..u.ncols() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for x in u.column(j).iter() {
            if x.abs() > best {
                best = x.abs();
                sign = if *x < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if sign < 0.0 {
            u.column_mut(j).neg_mut();
            if let Some(v) = v.as_deref_mut() {
                v.column_mut(j).neg_mut();
            }
        }
    }
}

/// Thin SVD with singular values in descending order. The LAPACK-style
/// bidiagonal result is checked for reconstruction and orthonormality; on
/// some rank-deficient inputs it is badly wrong, and one-sided Jacobi is used
/// instead.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdTriple> {
    ensure_finite(a)?;
    let triple = match bidiagonal_svd(a) {
        Some(t) if svd_is_accurate(a, &t) => t,
        _ => jacobi_svd(a)?,
    };
    Ok(triple)
}

fn bidiagonal_svd(a: &DenseMatrix) -> Option<SvdTriple> {
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 0)?;
    let (u0, vt0) = (svd.u?, svd.v_t?);
    let s0 = svd.singular_values;
    let k = s0.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s0[j].total_cmp(&s0[i]));
    let mut u = DMatrix::zeros(a.nrows(), k);
    let mut v = DMatrix::zeros(a.ncols(), k);
    let mut s = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u0.column(src));
        v.set_column(dst, &vt0.row(src).transpose());
        s[dst] = s0[src];
    }
    fix_signs(&mut u, Some(&mut v));
    Some(SvdTriple { u, s, v })
}

fn svd_is_accurate(a: &DenseMatrix, t: &SvdTriple) -> bool {
    let k = t.s.len() as f64;
    let tol = 64.0 * f64::EPSILON * k.max(1.0).sqrt();
    t.s.iter().all(|&x| x >= 0.0)
        && orthonormality_error(&t.u) <= tol * k.max(1.0)
        && orthonormality_error(&t.v) <= tol * k.max(1.0)
        && (scale_columns(&t.u, &t.s) * t.v.transpose() - a).norm() <= tol * a.norm().max(f64::MIN_POSITIVE)
}

/// One-sided (Hestenes) Jacobi SVD.
fn jacobi_svd(a: &DenseMatrix) -> Result<SvdTriple> {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose())?;
        return Ok(SvdTriple { u: t.v, s: t.s, v: t.u });
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    for _ in 0..80 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for row in 0..mat.nrows() {
                        let (p, q) = (mat[(row, i)], mat[(row, j)]);
                        mat[(row, i)] = c * p - s * q;
                        mat[(row, j)] = s * p + c * q;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("one-sided Jacobi SVD".into()));
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let cutoff = f64::EPSILON * norms[order[0]] * (m as f64);
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    let mut filled = 0;
    for (dst, &src) in order.iter().enumerate() {
        vs.set_column(dst, &v.column(src));
        s[dst] = norms[src];
        if norms[src] > cutoff {
            u.set_column(dst, &(w.column(src) / norms[src]));
            filled = dst + 1;
        }
    }
    // Orthonormal completion for the numerically zero singular values.
    let mut candidate = 0;
    for dst in filled..n {
        loop {
            let mut e = DVector::zeros(m);
            e[candidate % m] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                let proj = u.columns(0, dst).transpose() * &e;
                e -= u.columns(0, dst) * proj;
            }
            let norm = e.norm();
            if norm > 0.5 {
                u.set_column(dst, &(e / norm));
                break;
            }
        }
        s[dst] = 0.0;
    }
    fix_signs(&mut u, Some(&mut vs));
    Ok(SvdTriple { u, s, v: vs })
}

/// Leading-`r` singular triplets of `a`: the Frobenius-nearest matrix of rank
/// at most `r`. Fails with `RankDeficient` when `σ_r` is numerically zero,
/// because the result would not lie on the rank-`r` manifold.
pub fn truncate_rank(a: &DenseMatrix, r: usize) -> Result<FixedRankPoint> {
    if r == 0 || r > a.nrows().min(a.ncols()) {
        return invalid(format!(
            "rank {r} outside 1..={} for a {}x{} matrix",
            a.nrows().min(a.ncols()),
            a.nrows(),
            a.ncols()
        ));
    }
    let svd = thin_svd(a)?;
    let top = svd.s[0];
    if !(svd.s[r - 1] > ZERO_TOL * top) {
        return Err(Error::RankDeficient(format!(
            "sigma_{r} = {:e} with sigma_1 = {:e}",
            svd.s[r - 1],
            top
        )));
    }
    Ok(FixedRankPoint::from_parts_unchecked(
        svd.u.columns(0, r).into_owned(),
        svd.s.rows(0, r).into_owned(),
        svd.v.columns(0, r).into_owned(),
    ))
}

/// Thin QR with a nonnegative diagonal in `R`.
pub fn qr_thin(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    ensure_finite(a)?;
    if a.nrows() < a.ncols() {
        return invalid(format!(
            "thin QR needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        ));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows() {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).neg_mut();
            q.column_mut(j).neg_mut();
        }
    }
    Ok((q, r))
}

/// Orthonormal basis of the orthogonal complement of the column space of a
/// column-orthonormal `q`, from the full Householder QR of `[q | I]`.
pub fn orthogonal_complement(q: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_finite(q)?;
    let (n, k) = q.shape();
    if k > n {
        return invalid(format!("cannot complement {k} columns in dimension {n}"));
    }
    let mut aug = DMatrix::zeros(n, k + n);
    aug.columns_mut(0, k).copy_from(q);
    aug.columns_mut(k, n).fill_with_identity();
    let full = aug.qr().q();
    Ok(full.columns(k, n - k).into_owned())
}

pub fn sym_eig(a: &DenseMatrix) -> Result<SymEig> {
    ensure_finite(a)?;
    let n = a.nrows();
    if n != a.ncols() {
        return invalid(format!("symmetric eigen needs a square matrix, got {}x{}", n, a.ncols()));
    }
    let scale = a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let asym = (a - a.transpose()).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if asym > 1e-10 * scale {
        return invalid(format!("matrix is not symmetric (max asymmetry {asym:e})"));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::NoConvergence("symmetric eigendecomposition".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_signs(&mut vectors, None);
    Ok(SymEig { values, vectors })
}

/// Largest-modulus eigenvalue of a matrix-free map by two-vector subspace
/// iteration with `2 × 2` Rayleigh-Ritz values, so dominant conjugate pairs
/// and `±λ` pairs are handled as well as a single real eigenvalue.
/// Converged once three consecutive estimates move by at most `tol`.
pub fn power_spectral_radius<F>(mut apply: F, dim: usize, iters: usize, tol: f64) -> PowerEstimate
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    assert!(dim >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let width = dim.min(2);
    let start = DMatrix::from_fn(dim, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = start.qr().q();
    let mut estimate = f64::NAN;
    let mut stable = 0;
    for k in 1..=iters {
        let mut y = DMatrix::zeros(dim, width);
        for j in 0..width {
            y.set_column(j, &apply(&q.column(j).into_owned()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            break;
        }
        if y.norm() == 0.0 {
            return PowerEstimate { radius: 0.0, converged: true, iterations: k };
        }
        let next = ritz_radius(&(q.transpose() * &y));
        if (next - estimate).abs() <= tol {
            stable += 1;
        } else {
            stable = 0;
        }
        estimate = next;
        if stable >= 3 {
            return PowerEstimate { radius: estimate, converged: true, iterations: k };
        }
        q = y.qr().q();
    }
    PowerEstimate { radius: estimate, converged: false, iterations: iters }
}

fn ritz_radius(b: &DenseMatrix) -> f64 {
    if b.nrows() == 1 {
        return b[(0, 0)].abs();
    }
    let tr = b[(0, 0)] + b[(1, 1)];
    let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) * 0.5).abs().max(((tr - s) * 0.5).abs())
    } else {
        det.max(0.0).sqrt()
    }
}
