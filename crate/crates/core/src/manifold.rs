//! Geometry of the manifold of `n1 × n2` matrices of rank exactly `r`.
//!
//! Points are compact SVD triples and tangent vectors are factored as
//! `U M Vᵀ + Up Vᵀ + U Vpᵀ` with `Upᵀ U = 0` and `Vpᵀ V = 0`. Every operation
//! here costs `O((n1 + n2) r²)` apart from the dense helpers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{fix_signs, orthonormality_error, qr_thin, scale_columns, thin_svd, DenseMatrix, ZERO_TOL};

const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedRankPoint {
    u: DenseMatrix,
    s: DVector<f64>,
    v: DenseMatrix,
}

impl FixedRankPoint {
    pub fn new(u: DenseMatrix, s: DVector<f64>, v: DenseMatrix) -> Result<Self> {
        let r = s.len();
        if r == 0 || u.ncols() != r || v.ncols() != r {
            return invalid(format!(
                "factor shapes disagree: U {:?}, S {}, V {:?}",
                u.shape(),
                r,
                v.shape()
            ));
        }
        if u.nrows() < r || v.nrows() < r {
            return invalid("rank exceeds matrix dimensions");
        }
        if orthonormality_error(&u) > ORTHO_TOL || orthonormality_error(&v) > ORTHO_TOL {
            return invalid("factors are not column-orthonormal");
        }
        if !s.iter().all(|x| x.is_finite() && *x > 0.0) {
            return invalid("singular values must be finite and strictly positive");
        }
        if s.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return invalid("singular values must be sorted in descending order");
        }
        Ok(Self { u, s, v })
    }

    pub(crate) fn from_parts_unchecked(u: DenseMatrix, s: DVector<f64>, v: DenseMatrix) -> Self {
        Self { u, s, v }
    }

    /// The point `G1 G2ᵀ`, factored through two thin QRs and an `r × r` SVD.
    pub fn from_factors(g1: &DenseMatrix, g2: &DenseMatrix) -> Result<Self> {
        if g1.ncols() != g2.ncols() {
            return invalid("factor column counts differ");
        }
        let (q1, r1) = qr_thin(g1)?;
        let (q2, r2) = qr_thin(g2)?;
        svd_through_bases(&q1, &(r1 * r2.transpose()), &q2, g1.ncols())
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    pub fn sigma_min(&self) -> f64 {
        self.s[self.s.len() - 1]
    }

    /// `U Σ`.
    pub fn u_sigma(&self) -> DenseMatrix {
        scale_columns(&self.u, &self.s)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.u_sigma() * self.v.transpose()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.s.norm()
    }

    /// `‖X − Y‖_F` without forming either matrix.
    pub fn distance(&self, other: &FixedRankPoint) -> f64 {
        let (r1, r2) = (self.rank(), other.rank());
        let mut ucat = DMatrix::zeros(self.u.nrows(), r1 + r2);
        ucat.columns_mut(0, r1).copy_from(&self.u);
        ucat.columns_mut(r1, r2).copy_from(&other.u);
        let mut vcat = DMatrix::zeros(self.v.nrows(), r1 + r2);
        vcat.columns_mut(0, r1).copy_from(&self.v);
        vcat.columns_mut(r1, r2).copy_from(&other.v);
        let mut d = DVector::zeros(r1 + r2);
        d.rows_mut(0, r1).copy_from(&self.s);
        d.rows_mut(r1, r2).copy_from(&(-&other.s));
        // Wide factors (n < 2r) cannot be QR-compressed; fall back to dense.
        if ucat.nrows() < ucat.ncols() || vcat.nrows() < vcat.ncols() {
            return (self.to_dense() - other.to_dense()).norm();
        }
        let (_, ru) = qr_thin(&ucat).expect("finite factors");
        let (_, rv) = qr_thin(&vcat).expect("finite factors");
        (scale_columns(&ru, &d) * rv.transpose()).norm()
    }
}

/// Point with left basis `qu`, right basis `qv` and small core `core`.
fn svd_through_bases(qu: &DenseMatrix, core: &DenseMatrix, qv: &DenseMatrix, r: usize) -> Result<FixedRankPoint> {
    let svd = thin_svd(core)?;
    if !(svd.s[r - 1] > ZERO_TOL * svd.s[0]) {
        return Err(Error::RankDeficient(format!(
            "sigma_{r} = {:e} with sigma_1 = {:e}",
            svd.s[r - 1],
            svd.s[0]
        )));
    }
    let mut u = qu * svd.u.columns(0, r);
    let mut v = qv * svd.v.columns(0, r);
    fix_signs(&mut u, Some(&mut v));
    Ok(FixedRankPoint::from_parts_unchecked(u, svd.s.rows(0, r).into_owned(), v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: FixedRankPoint,
    m: DenseMatrix,
    up: DenseMatrix,
    vp: DenseMatrix,
}

impl TangentVector {
    pub fn new(base: &FixedRankPoint, m: DenseMatrix, up: DenseMatrix, vp: DenseMatrix) -> Result<Self> {
        let (n1, n2) = base.shape();
        let r = base.rank();
        if m.shape() != (r, r) || up.shape() != (n1, r) || vp.shape() != (n2, r) {
            return invalid(format!(
                "tangent factor shapes {:?}, {:?}, {:?} do not fit a rank-{r} point in {n1}x{n2}",
                m.shape(),
                up.shape(),
                vp.shape()
            ));
        }
        let scale = up.norm().max(vp.norm()).max(1.0);
        if (up.transpose() * base.u()).norm() > ORTHO_TOL * scale
            || (vp.transpose() * base.v()).norm() > ORTHO_TOL * scale
        {
            return invalid("Up and Vp must be orthogonal to the base factors");
        }
        Ok(Self { base: base.clone(), m, up, vp })
    }

    pub fn zero(base: &FixedRankPoint) -> Self {
        let (n1, n2) = base.shape();
        let r = base.rank();
        Self {
            base: base.clone(),
            m: DMatrix::zeros(r, r),
            up: DMatrix::zeros(n1, r),
            vp: DMatrix::zeros(n2, r),
        }
    }

    pub fn base(&self) -> &FixedRankPoint {
        &self.base
    }

    pub fn m(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn up(&self) -> &DenseMatrix {
        &self.up
    }

    pub fn vp(&self) -> &DenseMatrix {
        &self.vp
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Frobenius inner product of the embeddings. Both vectors must share a base.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        debug_assert_eq!(self.base.shape(), other.base.shape());
        self.m.dot(&other.m) + self.up.dot(&other.up) + self.vp.dot(&other.vp)
    }

    pub fn scaled(&self, alpha: f64) -> TangentVector {
        Self {
            base: self.base.clone(),
            m: &self.m * alpha,
            up: &self.up * alpha,
            vp: &self.vp * alpha,
        }
    }

    /// `self + alpha · other` at the shared base.
    pub fn axpy(&self, alpha: f64, other: &TangentVector) -> TangentVector {
        Self {
            base: self.base.clone(),
            m: &self.m + &other.m * alpha,
            up: &self.up + &other.up * alpha,
            vp: &self.vp + &other.vp * alpha,
        }
    }

    /// `(U M + Up)`, the left factor in `embed = (U M + Up) Vᵀ + U Vpᵀ`.
    pub fn left_factor(&self) -> DenseMatrix {
        self.base.u() * &self.m + &self.up
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retraction {
    Projective,
    Orthographic,
}

fn check_shape(x: &FixedRankPoint, z: &DenseMatrix) -> Result<()> {
    if x.shape() != z.shape() {
        return Err(Error::DimensionMismatch { expected: x.shape(), got: z.shape() });
    }
    Ok(())
}

/// Tangent vector from the products `Z V` and `Zᵀ U`, which is all the
/// projection needs. Lets sparse gradients skip the dense `Z`.
pub fn tangent_from_products(x: &FixedRankPoint, zv: DenseMatrix, ztu: DenseMatrix) -> Result<TangentVector> {
    let (n1, n2) = x.shape();
    let r = x.rank();
    if zv.shape() != (n1, r) || ztu.shape() != (n2, r) {
        return invalid(format!(
            "products have shapes {:?} and {:?}, expected ({n1}, {r}) and ({n2}, {r})",
            zv.shape(),
            ztu.shape()
        ));
    }
    let m = x.u().transpose() * &zv;
    let up = zv - x.u() * &m;
    let vp = ztu - x.v() * m.transpose();
    Ok(TangentVector { base: x.clone(), m, up, vp })
}

pub fn tangent_project(x: &FixedRankPoint, z: &DenseMatrix) -> Result<TangentVector> {
    check_shape(x, z)?;
    tangent_from_products(x, z * x.v(), z.transpose() * x.u())
}

pub fn embed(t: &TangentVector) -> DenseMatrix {
    t.left_factor() * t.base.v().transpose() + t.base.u() * t.vp.transpose()
}

pub fn riemannian_gradient(x: &FixedRankPoint, g: &DenseMatrix) -> Result<TangentVector> {
    tangent_project(x, g)
}

/// `P_r(X + δ)` from the `2r × 2r` block form
/// `[U Q1] [[Σ + M, R2ᵀ], [R1, 0]] [V Q2]ᵀ` with `Up = Q1 R1`, `Vp = Q2 R2`.
pub fn retract_projective(x: &FixedRankPoint, t: &TangentVector) -> Result<FixedRankPoint> {
    let r = x.rank();
    let (n1, n2) = x.shape();
    if t.base.shape() != x.shape() || t.base.rank() != r {
        return invalid("tangent vector is based at a different point");
    }
    if n1 < 2 * r || n2 < 2 * r {
        let dense = x.to_dense() + embed(t);
        return crate::linalg::truncate_rank(&dense, r);
    }
    let (q1, r1) = qr_thin(&t.up)?;
    let (q2, r2) = qr_thin(&t.vp)?;
    let mut core = DMatrix::zeros(2 * r, 2 * r);
    let mut top_left = t.m.clone();
    for i in 0..r {
        top_left[(i, i)] += x.s()[i];
    }
    core.view_mut((0, 0), (r, r)).copy_from(&top_left);
    core.view_mut((0, r), (r, r)).copy_from(&r2.transpose());
    core.view_mut((r, 0), (r, r)).copy_from(&r1);
    let mut left = DMatrix::zeros(n1, 2 * r);
    left.columns_mut(0, r).copy_from(x.u());
    left.columns_mut(r, r).copy_from(&q1);
    let mut right = DMatrix::zeros(n2, 2 * r);
    right.columns_mut(0, r).copy_from(x.v());
    right.columns_mut(r, r).copy_from(&q2);
    svd_through_bases(&left, &core, &right, r)
}

/// `(X+δ) V [Uᵀ (X+δ) V]⁻¹ Uᵀ (X+δ)`, returned in SVD form through QR of
/// `(X+δ) V` and `(X+δ)ᵀ U` and an `r × r` SVD.
pub fn retract_orthographic(x: &FixedRankPoint, t: &TangentVector) -> Result<FixedRankPoint> {
    let r = x.rank();
    if t.base.shape() != x.shape() || t.base.rank() != r {
        return invalid("tangent vector is based at a different point");
    }
    let mut c = t.m.clone();
    for i in 0..r {
        c[(i, i)] += x.s()[i];
    }
    let cs = thin_svd(&c)?;
    if !(cs.s[r - 1] > ZERO_TOL * cs.s[0]) {
        return Err(Error::SingularCore { sigma_min: cs.s[r - 1] });
    }
    let a1 = x.u() * &c + &t.up;
    let a2 = x.v() * c.transpose() + &t.vp;
    let (q1, r1) = qr_thin(&a1)?;
    let (q2, r2) = qr_thin(&a2)?;
    let w = c
        .clone()
        .qr()
        .solve(&r2.transpose())
        .ok_or(Error::SingularCore { sigma_min: cs.s[r - 1] })?;
    svd_through_bases(&q1, &(r1 * w), &q2, r)
}

pub fn retract(kind: Retraction, x: &FixedRankPoint, t: &TangentVector) -> Result<FixedRankPoint> {
    match kind {
        Retraction::Projective => retract_projective(x, t),
        Retraction::Orthographic => retract_orthographic(x, t),
    }
}

/// `P_T(Y − X)` at `X`, evaluated from the factors of both points.
pub fn inverse_orthographic(x: &FixedRankPoint, y: &FixedRankPoint) -> Result<TangentVector> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch { expected: x.shape(), got: y.shape() });
    }
    let a = x.u().transpose() * y.u();
    let b = y.v().transpose() * x.v();
    let ys = y.u_sigma();
    let zv = &ys * &b - x.u_sigma();
    let ztu = scale_columns(y.v(), y.s()) * a.transpose() - scale_columns(x.v(), x.s());
    tangent_from_products(x, zv, ztu)
}
