//! Brute-force references for tests and validation runs.
//!
//! Nothing here calls the factorization routines in [`crate::linalg`]: the
//! eigen, QR and inverse kernels are written out by hand so that agreement
//! with the production paths means something. Every entry point has a hard
//! size guard.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::DenseMatrix;
use crate::operators::{loss_gradient, ProblemInstance, SensingOperator};

const MAX_KRON_DIM: usize = 1024;
const MAX_EIG_DIM: usize = 2048;
const MAX_KRYLOV_DIM: usize = 4096;
const MAX_JACOBI_DIM: usize = 256;

fn guard(what: &str, size: usize, limit: usize) -> Result<()> {
    if size > limit {
        Err(Error::ResourceLimit(format!("{what}: size {size} exceeds oracle limit {limit}")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DenseProjectors {
    pub p_u: DenseMatrix,
    pub p_v: DenseMatrix,
    pub p_u_perp: DenseMatrix,
    pub p_v_perp: DenseMatrix,
}

impl DenseProjectors {
    pub fn new(u: &DenseMatrix, v: &DenseMatrix) -> Result<Self> {
        guard("projector", u.nrows().max(v.nrows()), MAX_KRON_DIM)?;
        let p_u = u * u.transpose();
        let p_v = v * v.transpose();
        let p_u_perp = DMatrix::identity(u.nrows(), u.nrows()) - &p_u;
        let p_v_perp = DMatrix::identity(v.nrows(), v.nrows()) - &p_v;
        Ok(Self { p_u, p_v, p_u_perp, p_v_perp })
    }

    /// `I − P⊥_V ⊗ P⊥_U` acting on column-major `vec`.
    pub fn kron_projector(&self) -> Result<DenseMatrix> {
        let n1 = self.p_u.nrows();
        let n2 = self.p_v.nrows();
        let n = n1 * n2;
        guard("Kronecker projector", n, MAX_KRON_DIM)?;
        let mut p = DMatrix::identity(n, n);
        for j1 in 0..n2 {
            for j2 in 0..n2 {
                let b = self.p_v_perp[(j1, j2)];
                if b == 0.0 {
                    continue;
                }
                for i1 in 0..n1 {
                    for i2 in 0..n1 {
                        p[(i1 + j1 * n1, i2 + j2 * n1)] -= b * self.p_u_perp[(i1, i2)];
                    }
                }
            }
        }
        Ok(p)
    }
}

/// `P_U Z + Z P_V − P_U Z P_V`, evaluated literally.
pub fn naive_tangent_project(p: &DenseProjectors, z: &DenseMatrix) -> Result<DenseMatrix> {
    if z.shape() != (p.p_u.nrows(), p.p_v.nrows()) {
        return Err(Error::DimensionMismatch { expected: (p.p_u.nrows(), p.p_v.nrows()), got: z.shape() });
    }
    Ok(&p.p_u * z + z * &p.p_v - &p.p_u * z * &p.p_v)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.nrows();
    if n != a.ncols() {
        return invalid("inverse of a non-square matrix");
    }
    guard("inverse", n, MAX_JACOBI_DIM)?;
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut m = a.clone();
    let mut inv = DMatrix::identity(n, n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs())).unwrap();
        if m[(pivot, col)].abs() <= 1e-14 * scale {
            return Err(Error::SingularCore { sigma_min: m[(pivot, col)].abs() });
        }
        m.swap_rows(pivot, col);
        inv.swap_rows(pivot, col);
        let d = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        m[(i, j)] -= f * m[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// `(X+N) V [Uᵀ (X+N) V]⁻¹ Uᵀ (X+N)` with the inverse formed explicitly.
pub fn naive_orthographic(
    x: &DenseMatrix,
    u: &DenseMatrix,
    s: &DVector<f64>,
    v: &DenseMatrix,
    n: &DenseMatrix,
) -> Result<DenseMatrix> {
    if u.ncols() != s.len() || v.ncols() != s.len() || x.shape() != n.shape() {
        return invalid("inconsistent shapes");
    }
    let y = x + n;
    let core = u.transpose() * &y * v;
    let inv = gauss_jordan_inverse(&core)?;
    Ok(&y * v * inv * u.transpose() * &y)
}

/// Modified Gram–Schmidt QR with `R` diagonal ≥ 0.
pub fn gram_schmidt(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, n) = a.shape();
    if m < n {
        return invalid("Gram-Schmidt needs rows >= cols");
    }
    let mut q = a.clone();
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let c: f64 = (0..m).map(|k| q[(k, i)] * q[(k, j)]).sum();
            r[(i, j)] += c;
            for k in 0..m {
                q[(k, j)] -= c * q[(k, i)];
            }
        }
        let norm = (0..m).map(|k| q[(k, j)] * q[(k, j)]).sum::<f64>().sqrt();
        r[(j, j)] = norm;
        if norm > 0.0 {
            for k in 0..m {
                q[(k, j)] /= norm;
            }
        }
    }
    Ok((q, r))
}

/// Orthonormal completion: columns of `u` followed by a basis of their
/// orthogonal complement, built by Gram–Schmidt against the identity.
pub fn complete_basis(u: &DenseMatrix) -> Result<DenseMatrix> {
    let n = u.nrows();
    guard("basis completion", n, MAX_KRON_DIM)?;
    let mut cols: Vec<DVector<f64>> = u.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut w = DVector::zeros(n);
        w[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&w);
                w -= c * d;
            }
        }
        let norm = w.norm();
        if norm > 1e-8 {
            cols.push(w / norm);
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
pub fn jacobi_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return invalid("Jacobi needs a square matrix");
    }
    guard("Jacobi", n, MAX_JACOBI_DIM)?;
    let mut m = a.clone();
    let total = m.norm().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total {
            return Ok((0..n).map(|i| m[(i, i)]).collect());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(Error::NoConvergence("Jacobi sweeps".into()))
}

/// Row-major copy, the layout the Hessenberg routines below work in.
fn row_major(a: &DenseMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = a[(i, j)];
        }
    }
    out
}

/// Diagonal similarity scaling by powers of two so rows and columns have
/// comparable norms.
fn balance(a: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i * n + j] *= g;
                    }
                    for j in 0..n {
                        a[j * n + i] *= f;
                    }
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(a: &mut [f64], n: usize) {
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let mut alpha = (0..len).map(|i| a[(k + 1 + i) * n + k].powi(2)).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        if a[(k + 1) * n + k] > 0.0 {
            alpha = -alpha;
        }
        for i in 0..len {
            v[i] = a[(k + 1 + i) * n + k];
        }
        v[0] -= alpha;
        let vv: f64 = v[..len].iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in 0..n {
            let s: f64 = (0..len).map(|i| v[i] * a[(k + 1 + i) * n + j]).sum();
            let f = 2.0 * s / vv;
            for i in 0..len {
                a[(k + 1 + i) * n + j] -= f * v[i];
            }
        }
        for i in 0..n {
            let s: f64 = (0..len).map(|j| a[i * n + k + 1 + j] * v[j]).sum();
            let f = 2.0 * s / vv;
            for j in 0..len {
                a[i * n + k + 1 + j] -= f * v[j];
            }
        }
        for i in 1..len {
            a[(k + 1 + i) * n + k] = 0.0;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration with deflation. `h` is row-major and is destroyed.
fn hessenberg_qr(h: &mut [f64], n: usize) -> Result<Vec<Complex64>> {
    // 1-based access keeps the index arithmetic of the classic formulation.
    macro_rules! a {
        ($i:expr, $j:expr) => {
            h[($i - 1) * n + ($j - 1)]
        };
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a!(i, j).abs();
        }
    }
    let fnorm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    let max_its = 30 * n.max(10);
    let mut nn = n as isize;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        let mut l: isize;
        loop {
            let nu = nn as usize;
            l = nn;
            while l >= 2 {
                let lu = l as usize;
                let sub = a!(lu, lu - 1).abs();
                let mut s = a!(lu - 1, lu - 1).abs() + a!(lu, lu).abs();
                if s == 0.0 {
                    s = anorm;
                }
                // Normwise floor, then the Ahues-Tisseur test, which also
                // deflates clusters of tiny or defective eigenvalues.
                let ab = sub.max(a!(lu - 1, lu).abs());
                let ba = sub.min(a!(lu - 1, lu).abs());
                let gap = (a!(lu - 1, lu - 1) - a!(lu, lu)).abs();
                let aa = a!(lu, lu).abs().max(gap);
                let bb = a!(lu, lu).abs().min(gap);
                let st = aa + ab;
                if sub + s == s
                    || sub <= f64::EPSILON * fnorm
                    || (sub <= f64::EPSILON * s && ba * (ab / st) <= f64::EPSILON * (bb * (aa / st)))
                {
                    a!(lu, lu - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            if l < 1 {
                l = 1;
            }
            let mut x = a!(nu, nu);
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
            } else {
                let mut y = a!(nu - 1, nu - 1);
                let mut w = a!(nu, nu - 1) * a!(nu - 1, nu);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + if p >= 0.0 { z.abs() } else { -z.abs() };
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != 0.0 {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = 0.0;
                        wi[nu] = 0.0;
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == max_its {
                        return Err(Error::NoConvergence(format!(
                            "Hessenberg QR stalled with {} eigenvalues left",
                            nn
                        )));
                    }
                    if its > 0 && its % 10 == 0 {
                        t += x;
                        for i in 1..=nu {
                            a!(i, i) -= x;
                        }
                        let s = a!(nu, nu - 1).abs() + a!(nu - 1, nu - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let lu = l as usize;
                    let mut m = nu - 2;
                    let (mut p, mut q, mut r);
                    loop {
                        let z = a!(m, m);
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a!(m + 1, m) + a!(m, m + 1);
                        q = a!(m + 1, m + 1) - z - rr - ss;
                        r = a!(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == lu {
                            break;
                        }
                        let u = a!(m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a!(m - 1, m - 1).abs() + z.abs() + a!(m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nu {
                        a!(i, i - 2) = 0.0;
                        if i != m + 2 {
                            a!(i, i - 3) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nu {
                        if k != m {
                            p = a!(k, k - 1);
                            q = a!(k + 1, k - 1);
                            r = 0.0;
                            if k != nu - 1 {
                                r = a!(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let norm = (p * p + q * q + r * r).sqrt();
                        let s = if p >= 0.0 { norm } else { -norm };
                        if s != 0.0 {
                            if k == m {
                                if lu != m {
                                    a!(k, k - 1) = -a!(k, k - 1);
                                }
                            } else {
                                a!(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                let mut pp = a!(k, j) + q * a!(k + 1, j);
                                if k != nu - 1 {
                                    pp += r * a!(k + 2, j);
                                    a!(k + 2, j) -= pp * z;
                                }
                                a!(k + 1, j) -= pp * y;
                                a!(k, j) -= pp * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for i in lu..=mmin {
                                let mut pp = x * a!(i, k) + y * a!(i, k + 1);
                                if k != nu - 1 {
                                    pp += z * a!(i, k + 2);
                                    a!(i, k + 2) -= pp * r;
                                }
                                a!(i, k + 1) -= pp * q;
                                a!(i, k) -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// All eigenvalues of a general real square matrix: balancing, Householder
/// Hessenberg reduction, then shifted QR.
pub fn dense_eig_general(a: &DenseMatrix) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return invalid("eigenvalues need a non-empty square matrix");
    }
    guard("general eigensolver", n, MAX_EIG_DIM)?;
    if !a.iter().all(|x| x.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let mut h = row_major(a);
    balance(&mut h, n);
    hessenberg(&mut h, n);
    hessenberg_qr(&mut h, n)
}

pub fn spectral_radius_dense(a: &DenseMatrix) -> Result<f64> {
    Ok(dense_eig_general(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Spectral radius from the Arnoldi process run until the Krylov space of a
/// random start vector becomes invariant, followed by shifted QR on the
/// resulting Hessenberg matrix. Exact (to rounding) for matrices whose
/// minimal polynomial has low degree, such as the momentum iteration matrix
/// of a low-rank problem; it then costs far less than a full eigensolve.
pub fn krylov_spectral_radius(a: &DenseMatrix, seed: u64) -> Result<f64> {
    Ok(krylov_eigenvalues(a, seed)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn krylov_eigenvalues(a: &DenseMatrix, seed: u64) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return invalid("eigenvalues need a non-empty square matrix");
    }
    guard("Krylov eigensolver", n, MAX_KRYLOV_DIM)?;
    let anorm = a.norm();
    if anorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0)]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::<f64>::zeros(n, n + 1);
    let mut start = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    start /= start.norm();
    q.set_column(0, &start);
    let mut h = DMatrix::<f64>::zeros(n + 1, n);
    let mut dim = n;
    for k in 0..n {
        let mut w = a * q.column(k);
        for _ in 0..2 {
            let basis = q.columns(0, k + 1);
            let c = basis.transpose() * &w;
            w -= &basis * &c;
            for j in 0..=k {
                h[(j, k)] += c[j];
            }
        }
        let beta = w.norm();
        if beta <= 1e-12 * anorm || k + 1 == n {
            dim = k + 1;
            break;
        }
        h[(k + 1, k)] = beta;
        q.set_column(k + 1, &(w / beta));
    }
    let mut small = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            small[i * dim + j] = h[(i, j)];
        }
    }
    hessenberg_qr(&mut small, dim)
}

/// Central finite differences of `½‖A(X) − y‖²`, evaluated by a direct loop
/// over the measurements, against the analytic gradient. Returns the largest
/// entrywise deviation relative to `max(1, |g_ij|)`.
pub fn fd_gradient_check(inst: &ProblemInstance, x: &DenseMatrix, h: f64) -> Result<f64> {
    if !(1e-8..=1e-3).contains(&h) {
        return invalid(format!("step {h:e} outside [1e-8, 1e-3]"));
    }
    let (n1, n2) = inst.shape();
    if x.shape() != (n1, n2) {
        return Err(Error::DimensionMismatch { expected: (n1, n2), got: x.shape() });
    }
    guard("finite differences", n1 * n2, MAX_KRON_DIM)?;
    let g = loss_gradient(inst, x)?;
    let mut worst = 0.0_f64;
    let mut xp = x.clone();
    for j in 0..n2 {
        for i in 0..n1 {
            let orig = xp[(i, j)];
            xp[(i, j)] = orig + h;
            let fp = direct_loss(inst, &xp);
            xp[(i, j)] = orig - h;
            let fm = direct_loss(inst, &xp);
            xp[(i, j)] = orig;
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[(i, j)]).abs() / g[(i, j)].abs().max(1.0));
        }
    }
    Ok(worst)
}

fn direct_loss(inst: &ProblemInstance, x: &DenseMatrix) -> f64 {
    let y = inst.observations();
    match inst.operator() {
        SensingOperator::Completion(mc) => {
            mc.observed().iter().zip(y.iter()).map(|(&(i, j), yk)| 0.5 * (x[(i, j)] - yk).powi(2)).sum()
        }
        SensingOperator::Sensing(ms) => (0..ms.len())
            .map(|k| {
                let a = ms.matrix(k);
                let inner: f64 = (0..x.ncols())
                    .flat_map(|j| (0..x.nrows()).map(move |i| (i, j)))
                    .map(|(i, j)| a[(i, j)] * x[(i, j)])
                    .sum();
                0.5 * (inner - y[k]).powi(2)
            })
            .sum(),
    }
}

/// `(S_Ω, S_Ω̄)`: columns are the standard basis vectors of the observed and
/// unobserved positions in column-major `vec` order.
pub fn selection_matrices(mask: &DMatrix<bool>) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = mask.len();
    guard("selection matrices", n, MAX_KRON_DIM)?;
    let observed: Vec<usize> = (0..n).filter(|&k| mask.as_slice()[k]).collect();
    let hidden: Vec<usize> = (0..n).filter(|&k| !mask.as_slice()[k]).collect();
    let build = |idx: &[usize]| {
        let mut s = DMatrix::zeros(n, idx.len());
        for (c, &k) in idx.iter().enumerate() {
            s[(k, c)] = 1.0;
        }
        s
    };
    Ok((build(&observed), build(&hidden)))
}

/// Orthonormal basis of the tangent space at `(U, V)` as columns of `vec`
/// matrices: `vec(u_i v_jᵀ)` for every pair with `i < r` or `j < r` in
/// completed bases.
pub fn tangent_basis(u: &DenseMatrix, v: &DenseMatrix) -> Result<DenseMatrix> {
    let (n1, n2, r) = (u.nrows(), v.nrows(), u.ncols());
    guard("tangent basis", n1 * n2, MAX_KRON_DIM)?;
    let uf = complete_basis(u)?;
    let vf = complete_basis(v)?;
    let mut cols = Vec::new();
    for j in 0..n2 {
        for i in 0..n1 {
            if i < r || j < r {
                let outer = uf.column(i) * vf.column(j).transpose();
                cols.push(DVector::from_column_slice(outer.as_slice()));
            }
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Sorted moduli, for multiset comparison of complex spectra.
pub fn sorted_moduli(values: &[Complex64]) -> Vec<f64> {
    let mut m: Vec<f64> = values.iter().map(|z| z.norm()).collect();
    m.sort_by(|a, b| b.total_cmp(a));
    m
}
