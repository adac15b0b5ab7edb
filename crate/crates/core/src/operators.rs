//! Measurement operators, the explicit `Θ` matrix, and problem instances.
//!
//! Matrix completion samples entries on a mask `Ω`; matrix sensing takes
//! Frobenius inner products with Gaussian matrices. Observations of a
//! completion operator are listed row-major over `Ω`. `vec` is column-major
//! throughout.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{truncate_rank, unvec, vec_of, DenseMatrix};
use crate::manifold::{FixedRankPoint, TangentVector};

pub const MAX_THETA_DIM: usize = 4096;
const MAX_GENERATION_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasurementKind {
    #[serde(rename = "MC")]
    Completion,
    #[serde(rename = "MS")]
    Sensing,
}

/// Sampling level: an entry-observation probability for completion, a
/// measurement count for sensing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Rate(f64),
    Count(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionMask {
    n1: usize,
    n2: usize,
    observed: Vec<(usize, usize)>,
}

impl CompletionMask {
    pub fn new(mask: &DMatrix<bool>) -> Result<Self> {
        let observed = (0..mask.nrows())
            .flat_map(|i| (0..mask.ncols()).map(move |j| (i, j)))
            .filter(|&(i, j)| mask[(i, j)])
            .collect();
        Self::from_observed(mask.nrows(), mask.ncols(), observed)
    }

    pub fn from_observed(n1: usize, n2: usize, mut observed: Vec<(usize, usize)>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return invalid("mask dimensions must be positive");
        }
        observed.sort_unstable();
        observed.dedup();
        if observed.is_empty() {
            return invalid("mask has no observed entries");
        }
        if observed.iter().any(|&(i, j)| i >= n1 || j >= n2) {
            return invalid("observed index outside the matrix");
        }
        Ok(Self { n1, n2, observed })
    }

    /// Observed positions, row-major.
    pub fn observed(&self) -> &[(usize, usize)] {
        &self.observed
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// `|Ω| / (n1 n2)`.
    pub fn fraction(&self) -> f64 {
        self.observed.len() as f64 / (self.n1 * self.n2) as f64
    }

    pub fn mask(&self) -> DMatrix<bool> {
        let mut m = DMatrix::from_element(self.n1, self.n2, false);
        for &(i, j) in &self.observed {
            m[(i, j)] = true;
        }
        m
    }
}

/// Sensing matrices stored as the rows of an `m × n1n2` matrix of `vec(A_i)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrices {
    n1: usize,
    n2: usize,
    stacked: DenseMatrix,
}

impl SensingMatrices {
    pub fn new(matrices: &[DenseMatrix]) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| Error::InvalidInput("no sensing matrices".into()))?;
        let (n1, n2) = first.shape();
        let mut stacked = DMatrix::zeros(matrices.len(), n1 * n2);
        for (k, a) in matrices.iter().enumerate() {
            if a.shape() != (n1, n2) {
                return Err(Error::DimensionMismatch { expected: (n1, n2), got: a.shape() });
            }
            if !a.iter().all(|x| x.is_finite()) {
                return invalid(format!("sensing matrix {k} has non-finite entries"));
            }
            stacked.row_mut(k).copy_from_slice(a.as_slice());
        }
        Ok(Self { n1, n2, stacked })
    }

    pub fn from_stacked(n1: usize, n2: usize, stacked: DenseMatrix) -> Result<Self> {
        if stacked.ncols() != n1 * n2 || stacked.nrows() == 0 {
            return invalid("stacked sensing matrix has the wrong shape");
        }
        if !stacked.iter().all(|x| x.is_finite()) {
            return invalid("sensing matrices have non-finite entries");
        }
        Ok(Self { n1, n2, stacked })
    }

    pub fn len(&self) -> usize {
        self.stacked.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.stacked.nrows() == 0
    }

    pub fn matrix(&self, k: usize) -> DenseMatrix {
        DMatrix::from_iterator(self.n1, self.n2, self.stacked.row(k).iter().cloned())
    }

    pub fn stacked(&self) -> &DenseMatrix {
        &self.stacked
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensingOperator {
    Completion(CompletionMask),
    Sensing(SensingMatrices),
}

/// `Θ` with `vec(A*(A(E))) = Θ vec(E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMatrix(pub DenseMatrix);

impl ThetaMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

fn row_major_copy(a: &DenseMatrix) -> Vec<f64> {
    let (n, r) = a.shape();
    let mut out = vec![0.0; n * r];
    for j in 0..r {
        for i in 0..n {
            out[i * r + j] = a[(i, j)];
        }
    }
    out
}

fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix {
    DMatrix::from_row_slice(rows, cols, data)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SensingOperator {
    pub fn kind(&self) -> MeasurementKind {
        match self {
            SensingOperator::Completion(_) => MeasurementKind::Completion,
            SensingOperator::Sensing(_) => MeasurementKind::Sensing,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            SensingOperator::Completion(m) => (m.n1, m.n2),
            SensingOperator::Sensing(s) => (s.n1, s.n2),
        }
    }

    pub fn measurement_count(&self) -> usize {
        match self {
            SensingOperator::Completion(m) => m.len(),
            SensingOperator::Sensing(s) => s.len(),
        }
    }

    fn check_matrix(&self, x: &DenseMatrix) -> Result<()> {
        if x.shape() != self.shape() {
            return Err(Error::DimensionMismatch { expected: self.shape(), got: x.shape() });
        }
        Ok(())
    }

    fn check_vector(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.measurement_count() {
            return Err(Error::DimensionMismatch { expected: (self.measurement_count(), 1), got: (y.len(), 1) });
        }
        Ok(())
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DVector<f64>> {
        self.check_matrix(x)?;
        Ok(match self {
            SensingOperator::Completion(m) => DVector::from_iterator(m.len(), m.observed.iter().map(|&(i, j)| x[(i, j)])),
            SensingOperator::Sensing(s) => &s.stacked * vec_of(x),
        })
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DenseMatrix> {
        self.check_vector(y)?;
        Ok(match self {
            SensingOperator::Completion(m) => {
                let mut out = DMatrix::zeros(m.n1, m.n2);
                for (&(i, j), v) in m.observed.iter().zip(y.iter()) {
                    out[(i, j)] = *v;
                }
                out
            }
            SensingOperator::Sensing(s) => unvec(&(s.stacked.transpose() * y), s.n1, s.n2),
        })
    }

    /// `A(X)` for a point in factored form; `O(|Ω| r)` for completion.
    pub fn apply_point(&self, x: &FixedRankPoint) -> DVector<f64> {
        match self {
            SensingOperator::Completion(m) => {
                let r = x.rank();
                let left = row_major_copy(&x.u_sigma());
                let right = row_major_copy(x.v());
                DVector::from_iterator(
                    m.len(),
                    m.observed.iter().map(|&(i, j)| dot(&left[i * r..(i + 1) * r], &right[j * r..(j + 1) * r])),
                )
            }
            SensingOperator::Sensing(s) => &s.stacked * vec_of(&x.to_dense()),
        }
    }

    /// `A(embed(t))` without densifying for completion.
    pub fn apply_tangent(&self, t: &TangentVector) -> DVector<f64> {
        match self {
            SensingOperator::Completion(m) => {
                let base = t.base();
                let r = base.rank();
                let l = row_major_copy(&t.left_factor());
                let v = row_major_copy(base.v());
                let u = row_major_copy(base.u());
                let vp = row_major_copy(t.vp());
                DVector::from_iterator(
                    m.len(),
                    m.observed.iter().map(|&(i, j)| {
                        let (ri, rj) = (i * r..(i + 1) * r, j * r..(j + 1) * r);
                        dot(&l[ri.clone()], &v[rj.clone()]) + dot(&u[ri], &vp[rj])
                    }),
                )
            }
            SensingOperator::Sensing(s) => &s.stacked * vec_of(&crate::manifold::embed(t)),
        }
    }

    /// `(G V, Gᵀ U)` for `G = A*(y)`, the two products a tangent projection
    /// of `G` needs.
    pub fn adjoint_products(&self, y: &DVector<f64>, u: &DenseMatrix, v: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        self.check_vector(y)?;
        let (n1, n2) = self.shape();
        if u.nrows() != n1 || v.nrows() != n2 || u.ncols() != v.ncols() {
            return invalid("basis shapes do not match the operator");
        }
        match self {
            SensingOperator::Completion(m) => {
                let r = u.ncols();
                let ur = row_major_copy(u);
                let vr = row_major_copy(v);
                let mut gv = vec![0.0; n1 * r];
                let mut gtu = vec![0.0; n2 * r];
                for (&(i, j), yk) in m.observed.iter().zip(y.iter()) {
                    for l in 0..r {
                        gv[i * r + l] += yk * vr[j * r + l];
                        gtu[j * r + l] += yk * ur[i * r + l];
                    }
                }
                Ok((from_row_major(n1, r, &gv), from_row_major(n2, r, &gtu)))
            }
            SensingOperator::Sensing(_) => {
                let g = self.adjoint(y)?;
                Ok((&g * v, g.transpose() * u))
            }
        }
    }

    pub fn build_theta(&self) -> Result<ThetaMatrix> {
        let (n1, n2) = self.shape();
        let n = n1 * n2;
        if n > MAX_THETA_DIM {
            return Err(Error::ResourceLimit(format!(
                "explicit theta needs n1*n2 <= {MAX_THETA_DIM}, got {n}"
            )));
        }
        Ok(ThetaMatrix(match self {
            SensingOperator::Completion(m) => {
                let mut d = DVector::zeros(n);
                for &(i, j) in &m.observed {
                    d[i + j * n1] = 1.0;
                }
                DMatrix::from_diagonal(&d)
            }
            SensingOperator::Sensing(s) => s.stacked.transpose() * &s.stacked,
        }))
    }
}

pub fn apply(op: &SensingOperator, x: &DenseMatrix) -> Result<DVector<f64>> {
    op.apply(x)
}

pub fn adjoint(op: &SensingOperator, y: &DVector<f64>) -> Result<DenseMatrix> {
    op.adjoint(y)
}

pub fn build_theta(op: &SensingOperator) -> Result<ThetaMatrix> {
    op.build_theta()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: MeasurementKind,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub sampling: Sampling,
    pub seed: u64,
    /// Requested `σ_1(X★) / σ_r(X★)`; singular values are then spaced
    /// geometrically from `κ` down to 1.
    #[serde(default)]
    pub condition: Option<f64>,
}

impl InstanceSpec {
    pub fn completion(n: usize, r: usize, p: f64, seed: u64) -> Self {
        Self { kind: MeasurementKind::Completion, n1: n, n2: n, r, sampling: Sampling::Rate(p), seed, condition: None }
    }

    pub fn sensing(n: usize, r: usize, m: usize, seed: u64) -> Self {
        Self { kind: MeasurementKind::Sensing, n1: n, n2: n, r, sampling: Sampling::Count(m), seed, condition: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    operator: SensingOperator,
    ground_truth: FixedRankPoint,
    observations: DVector<f64>,
    sampling: Sampling,
    seed: u64,
}

impl ProblemInstance {
    pub fn new(
        operator: SensingOperator,
        ground_truth: FixedRankPoint,
        observations: DVector<f64>,
        sampling: Sampling,
        seed: u64,
    ) -> Result<Self> {
        if operator.shape() != ground_truth.shape() {
            return Err(Error::DimensionMismatch { expected: operator.shape(), got: ground_truth.shape() });
        }
        if observations.len() != operator.measurement_count() {
            return invalid("observation count does not match the operator");
        }
        Ok(Self { operator, ground_truth, observations, sampling, seed })
    }

    pub fn operator(&self) -> &SensingOperator {
        &self.operator
    }

    pub fn ground_truth(&self) -> &FixedRankPoint {
        &self.ground_truth
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.observations
    }

    pub fn rank(&self) -> usize {
        self.ground_truth.rank()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    pub fn kind(&self) -> MeasurementKind {
        self.operator.kind()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.operator.shape()
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn generate_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    let &InstanceSpec { kind, n1, n2, r, sampling, seed, condition } = spec;
    if n1 == 0 || n2 == 0 || r == 0 || r > n1.min(n2) {
        return invalid(format!("rank {r} incompatible with a {n1}x{n2} matrix"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g1 = gaussian_matrix(n1, r, &mut rng);
    let g2 = gaussian_matrix(n2, r, &mut rng);
    let mut truth = FixedRankPoint::from_factors(&g1, &g2)?;
    if let Some(kappa) = condition {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return invalid("condition number must be a finite value >= 1");
        }
        let s = DVector::from_fn(r, |i, _| if r == 1 { 1.0 } else { kappa.powf((r - 1 - i) as f64 / (r - 1) as f64) });
        truth = FixedRankPoint::new(truth.u().clone(), s, truth.v().clone())?;
    }
    let operator = match (kind, sampling) {
        (MeasurementKind::Completion, Sampling::Rate(p)) => {
            if !(p > 0.0 && p <= 1.0) {
                return invalid(format!("sampling rate {p} outside (0, 1]"));
            }
            let mut attempt = 0;
            loop {
                let observed: Vec<(usize, usize)> = (0..n1)
                    .flat_map(|i| (0..n2).map(move |j| (i, j)))
                    .filter(|_| p >= 1.0 || rng.random::<f64>() < p)
                    .collect();
                if !observed.is_empty() {
                    break SensingOperator::Completion(CompletionMask::from_observed(n1, n2, observed)?);
                }
                attempt += 1;
                if attempt >= MAX_GENERATION_ATTEMPTS {
                    return Err(Error::Generation(format!(
                        "no entries observed after {MAX_GENERATION_ATTEMPTS} attempts at p = {p}"
                    )));
                }
            }
        }
        (MeasurementKind::Sensing, Sampling::Count(m)) => {
            if m == 0 {
                return invalid("measurement count must be positive");
            }
            let normal = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("positive variance");
            let stacked = DMatrix::from_fn(m, n1 * n2, |_, _| normal.sample(&mut rng));
            SensingOperator::Sensing(SensingMatrices::from_stacked(n1, n2, stacked)?)
        }
        (MeasurementKind::Completion, Sampling::Count(_)) => {
            return invalid("matrix completion is sampled by rate, not by count")
        }
        (MeasurementKind::Sensing, Sampling::Rate(_)) => {
            return invalid("matrix sensing is sampled by measurement count, not by rate")
        }
    };
    let observations = operator.apply_point(&truth);
    ProblemInstance::new(operator, truth, observations, sampling, seed)
}

/// `½‖A(X) − y‖²`.
pub fn loss(inst: &ProblemInstance, x: &DenseMatrix) -> Result<f64> {
    Ok(0.5 * (inst.operator.apply(x)? - &inst.observations).norm_squared())
}

/// `A*(A(X) − y)`.
pub fn loss_gradient(inst: &ProblemInstance, x: &DenseMatrix) -> Result<DenseMatrix> {
    inst.operator.adjoint(&(inst.operator.apply(x)? - &inst.observations))
}

fn rescaled_adjoint(inst: &ProblemInstance, y: &DVector<f64>) -> Result<DenseMatrix> {
    let g = inst.operator.adjoint(y)?;
    Ok(match &inst.operator {
        SensingOperator::Completion(m) => g / m.fraction(),
        SensingOperator::Sensing(_) => g,
    })
}

/// Spectral initialization as a point: `P_r(A*(y) / p)` for completion with
/// `p = |Ω| / (n1 n2)`, `P_r(A*(y))` for sensing.
pub fn spectral_init_point(inst: &ProblemInstance) -> Result<FixedRankPoint> {
    truncate_rank(&rescaled_adjoint(inst, &inst.observations)?, inst.rank())
}

pub fn spectral_init(inst: &ProblemInstance) -> Result<DenseMatrix> {
    Ok(spectral_init_point(inst)?.to_dense())
}

/// Spectral initialization with Gaussian noise of standard deviation
/// `sigma`: on the unobserved entries for completion, on the measurements
/// for sensing.
pub fn random_init_point(inst: &ProblemInstance, sigma: f64, seed: u64) -> Result<FixedRankPoint> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid("noise level must be finite and nonnegative");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n1, n2) = inst.shape();
    let start = match &inst.operator {
        SensingOperator::Completion(m) => {
            let mut z = rescaled_adjoint(inst, &inst.observations)?;
            let mask = m.mask();
            let noise = gaussian_matrix(n1, n2, &mut rng);
            for j in 0..n2 {
                for i in 0..n1 {
                    if !mask[(i, j)] {
                        z[(i, j)] += sigma * noise[(i, j)];
                    }
                }
            }
            z
        }
        SensingOperator::Sensing(s) => {
            let noise = DVector::from_fn(s.len(), |_, _| sigma * { let z: f64 = StandardNormal.sample(&mut rng); z });
            rescaled_adjoint(inst, &(&inst.observations + noise))?
        }
    };
    truncate_rank(&start, inst.rank())
}

pub fn random_init(inst: &ProblemInstance, sigma: f64, seed: u64) -> Result<DenseMatrix> {
    Ok(random_init_point(inst, sigma, seed)?.to_dense())
}

/// Column-major matrix payload for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn from_matrix(a: &DenseMatrix) -> Self {
        Self { rows: a.nrows(), cols: a.ncols(), data: a.as_slice().to_vec() }
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        if self.data.len() != self.rows * self.cols {
            return invalid("matrix payload length does not match its shape");
        }
        Ok(DMatrix::from_column_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorData {
    pub u: MatrixData,
    pub s: Vec<f64>,
    pub v: MatrixData,
}

/// Serializable form of a [`ProblemInstance`]. Completion instances carry
/// `observed` index pairs, sensing instances carry `matrices` (rows are
/// `vec(A_i)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub kind: MeasurementKind,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub seed: u64,
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<MatrixData>,
    pub ground_truth: FactorData,
    pub observations: Vec<f64>,
}

impl ProblemInstance {
    pub fn to_record(&self) -> InstanceRecord {
        let (n1, n2) = self.shape();
        let (observed, matrices) = match &self.operator {
            SensingOperator::Completion(m) => (Some(m.observed.clone()), None),
            SensingOperator::Sensing(s) => (None, Some(MatrixData::from_matrix(&s.stacked))),
        };
        InstanceRecord {
            kind: self.kind(),
            n1,
            n2,
            r: self.rank(),
            seed: self.seed,
            sampling: self.sampling,
            observed,
            matrices,
            ground_truth: FactorData {
                u: MatrixData::from_matrix(self.ground_truth.u()),
                s: self.ground_truth.s().as_slice().to_vec(),
                v: MatrixData::from_matrix(self.ground_truth.v()),
            },
            observations: self.observations.as_slice().to_vec(),
        }
    }

    pub fn from_record(rec: &InstanceRecord) -> Result<Self> {
        let operator = match (rec.kind, &rec.observed, &rec.matrices) {
            (MeasurementKind::Completion, Some(obs), None) => {
                SensingOperator::Completion(CompletionMask::from_observed(rec.n1, rec.n2, obs.clone())?)
            }
            (MeasurementKind::Sensing, None, Some(m)) => {
                SensingOperator::Sensing(SensingMatrices::from_stacked(rec.n1, rec.n2, m.to_matrix()?)?)
            }
            _ => return invalid("instance must carry `observed` for MC or `matrices` for MS"),
        };
        let truth = FixedRankPoint::new(
            rec.ground_truth.u.to_matrix()?,
            DVector::from_vec(rec.ground_truth.s.clone()),
            rec.ground_truth.v.to_matrix()?,
        )?;
        if truth.rank() != rec.r {
            return invalid("ground-truth rank disagrees with `r`");
        }
        Self::new(operator, truth, DVector::from_vec(rec.observations.clone()), rec.sampling, rec.seed)
    }
}
