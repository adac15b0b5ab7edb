//! Local convergence-rate predictions.
//!
//! Near `X★` every method here is a linear recursion on the error, driven by
//! the projected measurement matrix `P Θ P` with `P = I − P⊥_V ⊗ P⊥_U`. Its
//! extreme nonzero eigenvalues fix the stepsize ranges, the optimal momentum
//! pair, and the predicted rate of each algorithm.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{orthogonal_complement, sym_eig, DenseMatrix, ZERO_TOL};
use crate::manifold::FixedRankPoint;
use crate::operators::{SensingOperator, ThetaMatrix};

const MAX_ITERATION_MATRIX_DIM: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRates {
    /// Hard thresholding at the optimal constant stepsize, `(κ−1)/(κ+1)`.
    pub iht_optimal: f64,
    /// Hard thresholding with unit stepsize, `max(1 − λmin, λmax − 1)`.
    pub iht_unit_step: f64,
    /// Worst case of exact line search, equal to `iht_optimal`.
    pub line_search_worst: f64,
    /// Momentum at `(μ♭, η♭)` and the adaptive-restart limit.
    pub momentum_optimal: f64,
    /// `√(1 − μ♭ λmin)`; the lazy schedule contracts by `√η_t` times this.
    pub lazy_momentum_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda_max: f64,
    /// Smallest eigenvalue above the zero threshold.
    pub lambda_min: f64,
    pub kappa: f64,
    pub mu_dagger: f64,
    pub mu_double_dagger: f64,
    pub mu_flat: f64,
    pub eta_flat: f64,
    pub rho_opt: f64,
    /// `r (n1 + n2 − r)`, zero when built from bare extremes.
    pub tangent_dim: usize,
    /// Tangent directions the measurements cannot see. Nonzero means the
    /// linearized iteration has a unit eigenvalue and no linear rate.
    pub unobservable_dims: usize,
    /// Extreme eigenvalues of the unprojected `Θ`, when known.
    pub theta_lambda_max: Option<f64>,
    pub theta_lambda_min: Option<f64>,
    pub predicted: PredictedRates,
}

impl SpectralReport {
    pub fn from_extremes(lambda_max: f64, lambda_min: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max.is_finite()) {
            return Err(Error::DegenerateSpectrum(format!(
                "need 0 < lambda_min <= lambda_max, got {lambda_min:e}, {lambda_max:e}"
            )));
        }
        let kappa = lambda_max / lambda_min;
        let mu_flat = 4.0 / (lambda_min + 3.0 * lambda_max);
        let root = (mu_flat * lambda_min).sqrt();
        let rho_opt = 1.0 - (4.0 * lambda_min / (lambda_min + 3.0 * lambda_max)).sqrt();
        let iht_optimal = (kappa - 1.0) / (kappa + 1.0);
        Ok(Self {
            lambda_max,
            lambda_min,
            kappa,
            mu_dagger: 2.0 / (lambda_max + lambda_min),
            mu_double_dagger: 2.0 / lambda_max,
            mu_flat,
            eta_flat: (1.0 - root) / (1.0 + root),
            rho_opt,
            tangent_dim: 0,
            unobservable_dims: 0,
            theta_lambda_max: None,
            theta_lambda_min: None,
            predicted: PredictedRates {
                iht_optimal,
                iht_unit_step: (1.0 - lambda_min).max(lambda_max - 1.0),
                line_search_worst: iht_optimal,
                momentum_optimal: rho_opt,
                lazy_momentum_factor: (1.0 - mu_flat * lambda_min).max(0.0).sqrt(),
            },
        })
    }

    /// `‖I − μΘ‖₂`; the linear analysis assumes this is at most one.
    pub fn theta_step_norm(&self, mu: f64) -> Option<f64> {
        Some((1.0 - mu * self.theta_lambda_max?).abs().max((1.0 - mu * self.theta_lambda_min?).abs()))
    }

    pub fn satisfies_step_condition(&self, mu: f64) -> Option<bool> {
        self.theta_step_norm(mu).map(|n| n <= 1.0 + 1e-12)
    }

    pub fn is_identifiable(&self) -> bool {
        self.unobservable_dims == 0
    }
}

/// `I − P⊥_V ⊗ P⊥_U` for column-major `vec`.
pub fn tangent_projector(x: &FixedRankPoint) -> DenseMatrix {
    let (n1, n2) = x.shape();
    let pu = DMatrix::identity(n1, n1) - x.u() * x.u().transpose();
    let pv = DMatrix::identity(n2, n2) - x.v() * x.v().transpose();
    DMatrix::identity(n1 * n2, n1 * n2) - pv.kronecker(&pu)
}

fn is_diagonal(a: &DenseMatrix) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| i == j || a[(i, j)] == 0.0))
}

/// Orthonormal basis of the tangent space at `x` in `vec` coordinates: the
/// columns `v_j ⊗ e_i` followed by `w_k ⊗ u_i`, where `w_k` spans the
/// complement of `V`.
pub fn tangent_basis(x: &FixedRankPoint) -> Result<DenseMatrix> {
    let (n1, n2) = x.shape();
    let r = x.rank();
    let (u, v) = (x.u(), x.v());
    let w = orthogonal_complement(v)?;
    let dim = r * (n1 + n2 - r);
    let mut b = DMatrix::zeros(n1 * n2, dim);
    let mut col = 0;
    for j in 0..r {
        for i in 0..n1 {
            for l in 0..n2 {
                b[(i + l * n1, col)] = v[(l, j)];
            }
            col += 1;
        }
    }
    for k in 0..n2 - r {
        for i in 0..r {
            for l in 0..n2 {
                let wl = w[(l, k)];
                if wl != 0.0 {
                    for a in 0..n1 {
                        b[(a + l * n1, col)] = wl * u[(a, i)];
                    }
                }
            }
            col += 1;
        }
    }
    Ok(b)
}

fn report_from_gram(gram: &DenseMatrix, theta_extremes: (f64, f64)) -> Result<SpectralReport> {
    let sym = (gram + gram.transpose()) * 0.5;
    let eig = sym_eig(&sym)?;
    let lambda_max = eig.values[0];
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateSpectrum("projected theta has no positive eigenvalue".into()));
    }
    let cutoff = ZERO_TOL * lambda_max;
    let nonzero: Vec<f64> = eig.values.iter().cloned().filter(|&v| v > cutoff).collect();
    let lambda_min = *nonzero.last().expect("lambda_max is above the cutoff");
    let mut report = SpectralReport::from_extremes(lambda_max, lambda_min)?;
    report.tangent_dim = gram.nrows();
    report.unobservable_dims = gram.nrows() - nonzero.len();
    report.theta_lambda_max = Some(theta_extremes.0);
    report.theta_lambda_min = Some(theta_extremes.1);
    Ok(report)
}

/// Spectrum of `P Θ P` restricted to the tangent space at `X★`, computed as
/// the eigenvalues of `BᵀΘB` for the orthonormal tangent basis `B`.
pub fn projected_theta_spectrum(theta: &ThetaMatrix, xstar: &FixedRankPoint) -> Result<SpectralReport> {
    let (n1, n2) = xstar.shape();
    let n = n1 * n2;
    if theta.dim() != n {
        return Err(Error::DimensionMismatch { expected: (n, n), got: theta.0.shape() });
    }
    let b = tangent_basis(xstar)?;
    let diagonal = is_diagonal(&theta.0);
    let tb = if diagonal {
        let mut tb = b.clone();
        for i in 0..n {
            tb.row_mut(i).scale_mut(theta.0[(i, i)]);
        }
        tb
    } else {
        &theta.0 * &b
    };
    let extremes = if diagonal {
        let d = theta.0.diagonal();
        (d.max(), d.min())
    } else {
        let e = sym_eig(&theta.0)?;
        (e.values[0], e.values[n - 1])
    };
    report_from_gram(&(b.transpose() * tb), extremes)
}

/// Same report as [`projected_theta_spectrum`] without forming `Θ`: the
/// Gram matrix is `(S B)ᵀ(S B)` with `S` the row selection of the observed
/// entries, or the stacked sensing matrices.
pub fn spectral_report(op: &SensingOperator, xstar: &FixedRankPoint) -> Result<SpectralReport> {
    let (n1, n2) = xstar.shape();
    if op.shape() != (n1, n2) {
        return Err(Error::DimensionMismatch { expected: op.shape(), got: (n1, n2) });
    }
    let b = tangent_basis(xstar)?;
    let (measured, extremes) = match op {
        SensingOperator::Completion(mask) => {
            let rows: Vec<usize> = mask.observed().iter().map(|&(i, j)| i + j * n1).collect();
            let measured = b.select_rows(rows.iter());
            let top = if rows.is_empty() { 0.0 } else { 1.0 };
            let bottom = if rows.len() == n1 * n2 { 1.0 } else { 0.0 };
            (measured, (top, bottom))
        }
        SensingOperator::Sensing(s) => {
            let a = s.stacked();
            let small = if a.nrows() <= a.ncols() { a * a.transpose() } else { a.transpose() * a };
            let e = sym_eig(&small)?;
            let top = e.values[0];
            let bottom = if a.nrows() < a.ncols() { 0.0 } else { e.values[e.values.len() - 1] };
            (a * &b, (top, bottom))
        }
    };
    report_from_gram(&(measured.transpose() * measured), extremes)
}

/// Rate of hard thresholding with constant stepsize `μ`.
pub fn rho_iht(report: &SpectralReport, mu: f64) -> f64 {
    (1.0 - mu * report.lambda_min).max(mu * report.lambda_max - 1.0)
}

fn line_search_rate(lambda_max: f64, lambda_min: f64, mu_tilde: f64) -> Result<f64> {
    let lo = 1.0 / lambda_max;
    let hi = 1.0 / lambda_min;
    if !(mu_tilde >= lo * (1.0 - 1e-12) && mu_tilde <= hi * (1.0 + 1e-12)) {
        return invalid(format!("stepsize {mu_tilde} outside [{lo}, {hi}]"));
    }
    let denom = mu_tilde * (lambda_max + lambda_min) - 1.0;
    let inner = 1.0 - mu_tilde * mu_tilde * lambda_max * lambda_min / denom;
    Ok(inner.max(0.0).sqrt())
}

/// Asymptotic rate of exact line search whose stepsizes settle around `μ̃`.
pub fn rho_exact_line_search(report: &SpectralReport, mu_tilde: f64) -> Result<f64> {
    line_search_rate(report.lambda_max, report.lambda_min, mu_tilde)
}

/// Same formula for a quadratic with Hessian spectrum `(λmax, λmin)`.
pub fn quadratic_line_search_rate(spectrum: (f64, f64), mu_tilde: f64) -> Result<f64> {
    line_search_rate(spectrum.0, spectrum.1, mu_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Overdamped,
    Critical,
    Underdamped,
    Divergent,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Overdamped => "overdamped",
            Regime::Critical => "critical",
            Regime::Underdamped => "underdamped",
            Regime::Divergent => "divergent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub mu: f64,
    pub eta: f64,
    pub rho: f64,
    pub regime: Regime,
}

/// Largest root modulus of `z² − (1+η) a z + η a` with `a = 1 − μλ`.
pub fn momentum_root_modulus(lambda: f64, mu: f64, eta: f64) -> f64 {
    let a = 1.0 - mu * lambda;
    let b = (1.0 + eta) * a;
    let disc = b * b - 4.0 * eta * a;
    // Inside its own rounding error the discriminant is a double root.
    if disc.abs() <= 16.0 * f64::EPSILON * (b * b + 4.0 * (eta * a).abs()) {
        return 0.5 * b.abs();
    }
    if disc < 0.0 {
        (eta * a).sqrt()
    } else {
        let s = disc.sqrt();
        ((b + s) * 0.5).abs().max(((b - s) * 0.5).abs())
    }
}

/// Momentum below which the mode with eigenvalue `λ` is overdamped:
/// `(1 − √(μλ)) / (1 + √(μλ))`.
pub fn critical_eta(mu_lambda: f64) -> f64 {
    let s = mu_lambda.max(0.0).sqrt();
    ((1.0 - s) / (1.0 + s)).max(0.0)
}

pub fn rho_t(report: &SpectralReport, mu: f64, eta: f64) -> LandscapePoint {
    let rho = momentum_root_modulus(report.lambda_min, mu, eta).max(momentum_root_modulus(report.lambda_max, mu, eta));
    let edge = critical_eta(mu * report.lambda_min);
    let regime = if rho >= 1.0 {
        Regime::Divergent
    } else if (eta - edge).abs() <= 1e-12 {
        Regime::Critical
    } else if eta < edge {
        Regime::Overdamped
    } else {
        Regime::Underdamped
    };
    LandscapePoint { mu, eta, rho, regime }
}

pub fn optimal_nag_params(report: &SpectralReport) -> (f64, f64, f64) {
    (report.mu_flat, report.eta_flat, report.rho_opt)
}

/// Average per-iteration rate of the lazy schedule `η_t = (t−1)/(t+d)` over
/// iterations `t0..=tn`.
pub fn nag_lazy_rate(report: &SpectralReport, t0: usize, tn: usize, d: usize) -> Result<f64> {
    if !(1 < t0 && t0 < tn) {
        return invalid(format!("need 1 < t0 < tn, got t0 = {t0}, tn = {tn}"));
    }
    let log_product: f64 = (0..=d)
        .map(|i| (((t0 + i - 1) as f64) / ((tn + i - 1) as f64)).ln())
        .sum();
    let exponent = 1.0 / (2.0 * (tn - t0 + 1) as f64);
    Ok((log_product * exponent).exp() * report.predicted.lazy_momentum_factor)
}

/// Momentum at which the slow mode and the fast mode have equal root
/// modulus for stepsize `μ`, found by bisection on `[0, 1]`.
pub fn crossing_eta(report: &SpectralReport, mu: f64) -> Option<f64> {
    let gap = |eta: f64| {
        momentum_root_modulus(report.lambda_min, mu, eta) - momentum_root_modulus(report.lambda_max, mu, eta)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (glo, ghi) = (gap(lo), gap(hi));
    if glo == 0.0 {
        return Some(lo);
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g == 0.0 || hi - lo < 1e-15 {
            return Some(mid);
        }
        if g.signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `rho_t` over the grid `mus × etas`, row-major in `mu`.
pub fn landscape(report: &SpectralReport, mus: &[f64], etas: &[f64]) -> Vec<LandscapePoint> {
    mus.iter().flat_map(|&mu| etas.iter().map(move |&eta| rho_t(report, mu, eta))).collect()
}

/// Dense linearized iteration maps around `X★`: `H(μ) = P(I − μΘ)` and the
/// momentum companion `T(μ, η)`.
#[derive(Debug, Clone)]
pub struct IterationMatrices {
    projector: DenseMatrix,
    projected_theta: DenseMatrix,
}

impl IterationMatrices {
    pub fn new(theta: &ThetaMatrix, xstar: &FixedRankPoint) -> Result<Self> {
        let (n1, n2) = xstar.shape();
        let n = n1 * n2;
        if theta.dim() != n {
            return Err(Error::DimensionMismatch { expected: (n, n), got: theta.0.shape() });
        }
        if n > MAX_ITERATION_MATRIX_DIM {
            return Err(Error::ResourceLimit(format!(
                "iteration matrices need n1*n2 <= {MAX_ITERATION_MATRIX_DIM}, got {n}"
            )));
        }
        let projector = tangent_projector(xstar);
        let projected_theta = &projector * &theta.0;
        Ok(Self { projector, projected_theta })
    }

    pub fn dim(&self) -> usize {
        self.projector.nrows()
    }

    pub fn h(&self, mu: f64) -> DenseMatrix {
        &self.projector - &self.projected_theta * mu
    }

    /// `[[(1+η)H, −ηH], [I, 0]]`.
    pub fn t(&self, mu: f64, eta: f64) -> DenseMatrix {
        let n = self.dim();
        let h = self.h(mu);
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        t.view_mut((0, 0), (n, n)).copy_from(&(&h * (1.0 + eta)));
        t.view_mut((0, n), (n, n)).copy_from(&(&h * (-eta)));
        t.view_mut((n, 0), (n, n)).fill_diagonal(1.0);
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::power_spectral_radius;
    use crate::operators::{generate_instance, InstanceSpec};
    use crate::oracle::{self, complete_basis, selection_matrices, sorted_moduli, tangent_basis};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    /// A small completion instance whose tangent space is fully observed.
    fn identifiable_mc(n: usize, r: usize, p: f64, first_seed: u64) -> (crate::ProblemInstance, SpectralReport) {
        for seed in first_seed..first_seed + 200 {
            let inst = generate_instance(&InstanceSpec::completion(n, r, p, seed)).unwrap();
            let theta = inst.operator().build_theta().unwrap();
            let report = projected_theta_spectrum(&theta, inst.ground_truth()).unwrap();
            if report.is_identifiable() && report.lambda_min > 1e-3 {
                return (inst, report);
            }
        }
        panic!("no identifiable instance found");
    }

    #[test]
    fn full_observation_report() {
        let inst = generate_instance(&InstanceSpec::completion(5, 2, 1.0, 1)).unwrap();
        let theta = inst.operator().build_theta().unwrap();
        let rep = projected_theta_spectrum(&theta, inst.ground_truth()).unwrap();
        assert!((rep.lambda_max - 1.0).abs() < 1e-12);
        assert!((rep.lambda_min - 1.0).abs() < 1e-12);
        assert!((rep.kappa - 1.0).abs() < 1e-12);
        assert!((rep.mu_dagger - 1.0).abs() < 1e-12);
        assert!(rep.rho_opt.abs() < 1e-6);
        assert_eq!(rep.tangent_dim, 16);
        assert!(rep.is_identifiable());
    }

    #[test]
    fn projected_spectrum_matches_non_symmetric_oracle() {
        let (inst, rep) = identifiable_mc(4, 1, 0.8, 0);
        let theta = inst.operator().build_theta().unwrap();
        let x = inst.ground_truth();
        let p = oracle::DenseProjectors::new(x.u(), x.v()).unwrap().kron_projector().unwrap();
        let eig = oracle::dense_eig_general(&(&p * &theta.0)).unwrap();
        let nonzero: Vec<f64> = sorted_moduli(&eig).into_iter().filter(|&m| m > 1e-9).collect();
        assert!((nonzero[0] - rep.lambda_max).abs() < 1e-8);
        assert!((nonzero.last().unwrap() - rep.lambda_min).abs() < 1e-8);
        assert_eq!(nonzero.len(), rep.tangent_dim);
    }

    #[test]
    fn completion_lambda_min_from_selection_matrices() {
        let (inst, rep) = identifiable_mc(6, 2, 0.7, 10);
        let crate::SensingOperator::Completion(m) = inst.operator() else { unreachable!() };
        let (_, s_hidden) = selection_matrices(&m.mask()).unwrap();
        let x = inst.ground_truth();
        let uf = complete_basis(x.u()).unwrap();
        let vf = complete_basis(x.v()).unwrap();
        let u_perp = uf.columns(2, 4).into_owned();
        let v_perp = vf.columns(2, 4).into_owned();
        let normal = v_perp.kronecker(&u_perp);
        let b = s_hidden.transpose() * normal;
        let gram = &b * b.transpose();
        let smallest = oracle::jacobi_eigenvalues(&gram).unwrap().into_iter().fold(f64::INFINITY, f64::min);
        assert!((smallest - rep.lambda_min).abs() < 1e-8, "{smallest} vs {}", rep.lambda_min);
        let mu = 0.9;
        let h = IterationMatrices::new(&inst.operator().build_theta().unwrap(), x).unwrap().h(mu);
        let top = oracle::dense_eig_general(&h).unwrap().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((top - (1.0 - mu * smallest)).abs() < 1e-8);
    }

    #[test]
    fn compressed_tangent_spectrum_agrees() {
        let inst = generate_instance(&InstanceSpec::sensing(5, 2, 40, 3)).unwrap();
        let theta = inst.operator().build_theta().unwrap();
        let x = inst.ground_truth();
        let rep = projected_theta_spectrum(&theta, x).unwrap();
        let b = tangent_basis(x.u(), x.v()).unwrap();
        let mut ev = oracle::jacobi_eigenvalues(&(b.transpose() * &theta.0 * &b)).unwrap();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!((ev[0] - rep.lambda_max).abs() < 1e-9);
        assert!((ev.last().unwrap() - rep.lambda_min).abs() < 1e-9);
        let norm = rep.theta_step_norm(rep.mu_dagger).unwrap();
        assert_eq!(rep.satisfies_step_condition(rep.mu_dagger), Some(norm <= 1.0 + 1e-12));
    }

    #[test]
    fn production_tangent_basis_spans_the_tangent_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = FixedRankPoint::from_factors(&random_matrix(7, 3, &mut rng), &random_matrix(5, 3, &mut rng)).unwrap();
        let b = super::tangent_basis(&x).unwrap();
        assert_eq!(b.ncols(), 3 * (7 + 5 - 3));
        assert!(crate::linalg::orthonormality_error(&b) < 1e-12);
        let p = oracle::DenseProjectors::new(x.u(), x.v()).unwrap().kron_projector().unwrap();
        assert!((&b * b.transpose() - p).norm() < 1e-11);
    }

    #[test]
    fn unobservable_count_matches_dense_rank() {
        for seed in 0..6 {
            let inst = generate_instance(&InstanceSpec::completion(6, 2, 0.35, seed)).unwrap();
            let theta = inst.operator().build_theta().unwrap();
            let Ok(rep) = projected_theta_spectrum(&theta, inst.ground_truth()) else { continue };
            let x = inst.ground_truth();
            let p = oracle::DenseProjectors::new(x.u(), x.v()).unwrap().kron_projector().unwrap();
            let ev = oracle::jacobi_eigenvalues(&(&p * &theta.0 * &p)).unwrap();
            let top = ev.iter().cloned().fold(0.0, f64::max);
            let rank = ev.iter().filter(|&&v| v > ZERO_TOL * top).count();
            assert_eq!(rep.tangent_dim - rep.unobservable_dims, rank, "seed {seed}");
            assert!((top - rep.lambda_max).abs() < 1e-9);
        }
    }

    #[test]
    fn operator_report_matches_explicit_theta() {
        for (seed, inst) in [
            generate_instance(&InstanceSpec::completion(7, 2, 0.6, 4)).unwrap(),
            generate_instance(&InstanceSpec::sensing(5, 1, 30, 5)).unwrap(),
            generate_instance(&InstanceSpec::sensing(3, 1, 12, 6)).unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let theta = inst.operator().build_theta().unwrap();
            let a = projected_theta_spectrum(&theta, inst.ground_truth()).unwrap();
            let b = spectral_report(inst.operator(), inst.ground_truth()).unwrap();
            assert!((a.lambda_max - b.lambda_max).abs() < 1e-10, "case {seed}");
            assert!((a.lambda_min - b.lambda_min).abs() < 1e-10, "case {seed}");
            assert_eq!(a.unobservable_dims, b.unobservable_dims);
            assert!((a.theta_lambda_max.unwrap() - b.theta_lambda_max.unwrap()).abs() < 1e-9);
            assert!((a.theta_lambda_min.unwrap() - b.theta_lambda_min.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_spectrum_is_rejected() {
        assert!(SpectralReport::from_extremes(1.0, 0.0).is_err());
        let x = FixedRankPoint::from_factors(&DMatrix::from_element(3, 1, 1.0), &DMatrix::from_element(3, 1, 1.0)).unwrap();
        let theta = ThetaMatrix(DMatrix::zeros(9, 9));
        assert!(matches!(projected_theta_spectrum(&theta, &x), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn iht_rate_formulas() {
        let rep = SpectralReport::from_extremes(1.7, 0.3).unwrap();
        assert!((rho_iht(&rep, rep.mu_dagger) - (rep.kappa - 1.0) / (rep.kappa + 1.0)).abs() < 1e-15);
        assert!((rho_iht(&rep, rep.mu_double_dagger) - 1.0).abs() < 1e-15);
        let mc = SpectralReport::from_extremes(1.0, 0.3).unwrap();
        assert!((rho_iht(&mc, 1.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn line_search_rate_cases() {
        let rep = SpectralReport::from_extremes(10.0, 2.0).unwrap();
        let worst = (rep.kappa - 1.0) / (rep.kappa + 1.0);
        assert!((rho_exact_line_search(&rep, rep.mu_dagger).unwrap() - worst).abs() < 1e-14);
        assert!(rho_exact_line_search(&rep, 1.0 / rep.lambda_max).unwrap() < 1e-7);
        assert!(rho_exact_line_search(&rep, 0.01).is_err());
        assert!(rho_exact_line_search(&rep, 0.6).is_err());
        let flat = SpectralReport::from_extremes(3.0, 3.0).unwrap();
        assert!(rho_exact_line_search(&flat, 1.0 / 3.0).unwrap() < 1e-7);
    }

    #[test]
    fn line_search_rate_matches_two_step_power_iteration() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 2.0]));
        let (lmax, lmin) = (10.0, 2.0);
        for mu_hat in [0.11, 0.2, 0.3, 0.45] {
            let mu_check = mu_hat / (mu_hat * (lmax + lmin) - 1.0);
            let id = DMatrix::<f64>::identity(2, 2);
            let two_step = (&id - &q * mu_check) * (&id - &q * mu_hat);
            let est = power_spectral_radius(|x| &two_step * x, 2, 10_000, 1e-14);
            let predicted = quadratic_line_search_rate((lmax, lmin), mu_hat).unwrap();
            assert!((est.radius.sqrt() - predicted).abs() < 1e-8, "{mu_hat}: {} vs {predicted}", est.radius.sqrt());
        }
    }

    #[test]
    fn momentum_rate_reduces_to_iht_without_momentum() {
        let rep = SpectralReport::from_extremes(1.3, 0.2).unwrap();
        for mu in [0.2, 0.7, 1.2, 1.6] {
            assert!((rho_t(&rep, mu, 0.0).rho - rho_iht(&rep, mu).abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn optimal_pair_attains_closed_form() {
        let rep = SpectralReport::from_extremes(10.0, 1.0).unwrap();
        let (mu, eta, rho) = optimal_nag_params(&rep);
        assert!((rho - (1.0 - (4.0_f64 / 31.0).sqrt())).abs() < 1e-15);
        assert!((rho - 0.6407).abs() < 1e-4);
        assert!((rho_t(&rep, mu, eta).rho - rho).abs() < 1e-10);
        let h = 1e-4;
        for dm in [-1.0, 0.0, 1.0] {
            for de in [-1.0, 0.0, 1.0] {
                let p = rho_t(&rep, mu * (1.0 + dm * h), eta + de * h);
                assert!(p.rho >= rho - 1e-10);
            }
        }
        let mut best = f64::INFINITY;
        for i in 0..400 {
            for j in 0..400 {
                let m = 0.2 * rep.mu_double_dagger + i as f64 * 0.8 * rep.mu_double_dagger / 400.0;
                best = best.min(rho_t(&rep, m, j as f64 / 400.0).rho);
            }
        }
        assert!(best >= rho - 1e-10 && best < rho + 1e-2);
        let perfect = SpectralReport::from_extremes(2.0, 2.0).unwrap();
        assert!((perfect.mu_flat - 0.5).abs() < 1e-15);
        assert!(perfect.eta_flat.abs() < 1e-15);
        assert!(perfect.rho_opt.abs() < 1e-15);
        let ill = SpectralReport::from_extremes(1e4, 1.0).unwrap();
        let asymptotic = 1.0 - (4.0_f64 / 3e4).sqrt();
        assert!((ill.rho_opt - asymptotic).abs() < 1e-6);
    }

    #[test]
    fn optimum_is_critically_damped() {
        let rep = SpectralReport::from_extremes(5.0, 0.5).unwrap();
        assert_eq!(rho_t(&rep, rep.mu_flat, rep.eta_flat).regime, Regime::Critical);
        assert_eq!(rho_t(&rep, rep.mu_flat, 0.0).regime, Regime::Overdamped);
        assert_eq!(rho_t(&rep, rep.mu_flat, 0.95).regime, Regime::Underdamped);
        assert_eq!(rho_t(&rep, 1.1 * rep.mu_double_dagger, 0.0).regime, Regime::Divergent);
    }

    #[test]
    fn optimum_rate_is_accurate_at_the_double_root() {
        for k in 0..400 {
            let lmax = 1.0 + 0.37 * k as f64;
            let lmin = 0.05 + (k % 17) as f64 * 0.05;
            let rep = SpectralReport::from_extremes(lmax, lmin.min(lmax)).unwrap();
            let closed = 1.0 - (4.0 * rep.lambda_min / (rep.lambda_min + 3.0 * rep.lambda_max)).sqrt();
            let at = rho_t(&rep, rep.mu_flat, rep.eta_flat);
            assert!((at.rho - closed).abs() <= 1e-12, "{lmax} {lmin}: {} vs {closed}", at.rho);
        }
    }

    #[test]
    fn lazy_rate_cases() {
        let rep = SpectralReport::from_extremes(4.0, 1.0).unwrap();
        let f = (1.0 - rep.mu_flat * rep.lambda_min).sqrt();
        assert!((nag_lazy_rate(&rep, 2, 3, 0).unwrap() - 0.5_f64.powf(0.25) * f).abs() < 1e-15);
        let far = nag_lazy_rate(&rep, 2, 1_000_000, 2).unwrap();
        assert!(far < f && far > f * (1.0 - 1e-4));
        assert!(nag_lazy_rate(&rep, 1, 3, 0).is_err());
        assert!(nag_lazy_rate(&rep, 3, 3, 0).is_err());
    }

    #[test]
    fn crossing_separates_the_two_modes() {
        let rep = SpectralReport::from_extremes(10.0, 1.0).unwrap();
        let mu = 0.5 * (rep.mu_flat + rep.mu_dagger);
        let eta = crossing_eta(&rep, mu).unwrap();
        let a = momentum_root_modulus(rep.lambda_min, mu, eta);
        let b = momentum_root_modulus(rep.lambda_max, mu, eta);
        assert!((a - b).abs() < 1e-12);
        let grid_best = (0..=10_000)
            .map(|i| rho_t(&rep, mu, i as f64 / 10_000.0).rho)
            .fold(f64::INFINITY, f64::min);
        assert!((grid_best - a).abs() < 1e-3);
    }

    #[test]
    fn momentum_radius_matches_dense_companion_matrix() {
        let (inst, rep) = identifiable_mc(2, 1, 0.8, 0);
        let mats = IterationMatrices::new(&inst.operator().build_theta().unwrap(), inst.ground_truth()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mu = rep.mu_double_dagger * rand::Rng::random::<f64>(&mut rng);
            let eta = rand::Rng::random::<f64>(&mut rng);
            let t = mats.t(mu, eta);
            assert_eq!(t.nrows(), 8);
            let oracle = oracle::spectral_radius_dense(&t).unwrap();
            assert!((oracle - rho_t(&rep, mu, eta).rho).abs() < 1e-8);
        }
    }

    #[test]
    fn momentum_radius_matches_power_iteration() {
        let (inst, rep) = identifiable_mc(5, 1, 0.8, 0);
        let mats = IterationMatrices::new(&inst.operator().build_theta().unwrap(), inst.ground_truth()).unwrap();
        let t = mats.t(rep.mu_flat, rep.eta_flat);
        let est = power_spectral_radius(|x| &t * x, t.nrows(), 200_000, 1e-12);
        assert!((est.radius - rep.rho_opt).abs() < 2e-2, "{} vs {}", est.radius, rep.rho_opt);
        let exact = oracle::krylov_spectral_radius(&t, 1).unwrap();
        assert!((exact - rep.rho_opt).abs() < 1e-4);
        let mu = 0.8 * rep.mu_flat;
        let t = mats.t(mu, 0.3);
        let est = power_spectral_radius(|x| &t * x, t.nrows(), 200_000, 1e-13);
        assert!((est.radius - rho_t(&rep, mu, 0.3).rho).abs() < 1e-4);
    }

    #[test]
    fn landscape_shape_along_fixed_stepsize() {
        let rep = SpectralReport::from_extremes(3.0, 0.4).unwrap();
        let etas: Vec<f64> = (0..50).map(|j| j as f64 / 49.0).collect();
        for i in 1..=50 {
            let mu = rep.mu_dagger * i as f64 / 51.0;
            let edge = critical_eta(mu * rep.lambda_min);
            let slow: Vec<f64> = etas.iter().map(|&e| momentum_root_modulus(rep.lambda_min, mu, e)).collect();
            let pts = landscape(&rep, &[mu], &etas);
            for j in 1..etas.len() {
                if etas[j] <= edge {
                    assert!(slow[j] <= slow[j - 1] + 1e-12);
                    if mu * rep.lambda_max <= 1.0 {
                        assert!(pts[j].rho <= pts[j - 1].rho + 1e-12);
                    }
                } else {
                    let expected = (etas[j] * (1.0 - mu * rep.lambda_min)).sqrt();
                    assert!((slow[j] - expected).abs() < 1e-12);
                    if mu * rep.lambda_max <= 1.0 {
                        assert!((pts[j].rho - expected).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rates_degrade_with_condition_number() {
        let mut prev = (-1.0, -1.0);
        for k in 1..200 {
            let rep = SpectralReport::from_extremes(0.5 * (1.0 + k as f64 * 0.1), 0.5).unwrap();
            let now = (rep.rho_opt, (rep.kappa - 1.0) / (rep.kappa + 1.0));
            assert!(now.0 > prev.0 && now.1 > prev.1);
            prev = now;
        }
    }

    fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let g = random_matrix(n, rank, rng);
        &g * g.transpose()
    }

    fn random_projector(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let (q, _) = crate::linalg::qr_thin(&random_matrix(n, k, rng)).unwrap();
        &q * q.transpose()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn eigenvalue_relation_with_complementary_projector(n in 3usize..9, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 1 + (seed as usize) % (n - 1);
            let theta = random_psd(n, n, &mut rng);
            let p = random_projector(n, k, &mut rng);
            let p_perp = DMatrix::identity(n, n) - &p;
            let mu = 0.5 / sym_eig(&theta).unwrap().values[0];
            let lhs = oracle::dense_eig_general(&(&theta * &p_perp * mu + &p)).unwrap();
            let rhs = oracle::dense_eig_general(&((DMatrix::identity(n, n) - &theta * mu) * &p_perp)).unwrap();
            let mut left: Vec<f64> = lhs.iter().map(|z| z.re).collect();
            let mut right: Vec<f64> = rhs.iter().map(|z| 1.0 - z.re).collect();
            left.sort_by(|a, b| a.total_cmp(b));
            right.sort_by(|a, b| a.total_cmp(b));
            // The k zero eigenvalues on the right map to the forced ones.
            for (a, b) in left.iter().zip(&right) {
                prop_assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", left, right);
            }
            prop_assert!(lhs.iter().chain(rhs.iter()).all(|z| z.im.abs() < 1e-8));
        }

        #[test]
        fn symmetric_form_shares_nonzero_spectrum(n in 2usize..10, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 1 + (seed as usize) % n;
            let theta = random_psd(n, 1 + (seed as usize >> 8) % n, &mut rng);
            let p = random_projector(n, k, &mut rng);
            let a = sorted_moduli(&oracle::dense_eig_general(&(&p * &theta)).unwrap());
            let mut b: Vec<f64> = sym_eig(&(&p * &theta * &p)).unwrap().values.iter().map(|v| v.abs()).collect();
            b.sort_by(|x, y| y.total_cmp(x));
            let scale = theta.norm().max(1.0);
            for (x, y) in a.iter().zip(&b) {
                if x.max(*y) > 1e-9 * scale {
                    prop_assert!((x - y).abs() <= 1e-8 * scale);
                }
            }
        }

        #[test]
        fn kantorovich(n in 2usize..10, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..2 {
                let a = random_psd(n, n, &mut rng) + DMatrix::identity(n, n) * 1e-3;
                let e = sym_eig(&a).unwrap();
                let kappa = e.values[0] / e.values[n - 1];
                let inv = &e.vectors * DMatrix::from_diagonal(&e.values.map(|v| 1.0 / v)) * e.vectors.transpose();
                let x = DVector::from_fn(n, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); z });
                let lhs = x.dot(&x).powi(2) / ((x.transpose() * &a * &x)[0] * (x.transpose() * &inv * &x)[0]);
                prop_assert!(lhs >= 4.0 / (kappa + 2.0 + 1.0 / kappa) - 1e-10);
            }
        }

        #[test]
        fn iteration_matrix_spectrum_bracket(n in 3usize..6, seed in 0u64..500, frac in 0.05f64..0.99) {
            let (inst, rep) = identifiable_mc(n, 1, 0.8, seed * 1000);
            let mats = IterationMatrices::new(&inst.operator().build_theta().unwrap(), inst.ground_truth()).unwrap();
            let mu = frac * rep.mu_double_dagger;
            let moduli = sorted_moduli(&oracle::dense_eig_general(&mats.h(mu)).unwrap());
            let predicted = rho_iht(&rep, mu);
            prop_assert!((moduli[0] - predicted).abs() <= 1e-8);
            if mu * rep.lambda_max <= 1.0 {
                let floor = (1.0 - mu * rep.lambda_max).abs().min((1.0 - mu * rep.lambda_min).abs());
                for m in &moduli[..rep.tangent_dim] {
                    prop_assert!(*m >= floor - 1e-8 && *m <= predicted + 1e-8);
                }
            }
        }
    }
}
