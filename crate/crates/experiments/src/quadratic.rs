//! Steepest descent with exact line search on `f(x) = ½ xᵀQx` in two
//! dimensions.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticRun {
    /// `‖x_t‖`, the distance to the minimizer at the origin.
    pub residuals: Vec<f64>,
    /// Stepsize of step `t`, giving `x_{t+1}`.
    pub stepsizes: Vec<f64>,
}

impl QuadraticRun {
    /// Steps taken before the residual first dropped to `tol·‖x_0‖`.
    pub fn steps(&self) -> usize {
        self.residuals.len() - 1
    }

    /// Geometric per-step contraction over the last `window` steps, rounded
    /// down to an even count so both stepsizes of the zigzag are included.
    pub fn fitted_rate(&self, window: usize) -> f64 {
        let end = self.residuals.len() - 1;
        if end == 0 {
            return 0.0;
        }
        let mut span = end.min(window);
        if span >= 2 && span % 2 == 1 {
            span -= 1;
        }
        let start = end - span;
        (self.residuals[end] / self.residuals[start]).powf(1.0 / span as f64)
    }

    /// Last two stepsizes as `(μ̂, μ̌)`, the larger first.
    pub fn stepsize_pair(&self) -> Option<(f64, f64)> {
        let n = self.stepsizes.len();
        if n < 2 {
            return None;
        }
        let (a, b) = (self.stepsizes[n - 1], self.stepsizes[n - 2]);
        Some((a.max(b), a.min(b)))
    }
}

/// Eigenvalues `(λmax, λmin)` and the angle of an eigenvector, folded into
/// `[−π/2, π/2)` and taken as the smaller of the two.
pub fn eigen_frame(q: &Matrix2<f64>) -> (f64, f64, f64) {
    let eig = SymmetricEigen::new(*q);
    let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let fold = |v: Vector2<f64>| {
        let a = v[1].atan2(v[0]).rem_euclid(std::f64::consts::PI);
        if a >= std::f64::consts::FRAC_PI_2 {
            a - std::f64::consts::PI
        } else {
            a
        }
    };
    let alpha = fold(eig.eigenvectors.column(0).into_owned()).min(fold(eig.eigenvectors.column(1).into_owned()));
    (eig.eigenvalues[hi], eig.eigenvalues[lo], alpha)
}

/// `x_0 = Q⁻¹ (cos(α+θ), sin(α+θ))`, so the first gradient is the unit vector
/// at angle `α + θ`.
pub fn start_point(q: &Matrix2<f64>, alpha: f64, theta: f64) -> Vector2<f64> {
    let g = Vector2::new((alpha + theta).cos(), (alpha + theta).sin());
    q.try_inverse().expect("positive definite") * g
}

pub fn exact_line_search_descent(q: &Matrix2<f64>, x0: Vector2<f64>, max_iters: usize, tol: f64) -> QuadraticRun {
    let floor = tol * x0.norm();
    let mut x = x0;
    let mut run = QuadraticRun { residuals: vec![x.norm()], stepsizes: Vec::new() };
    for _ in 0..max_iters {
        if x.norm() <= floor {
            break;
        }
        let g = q * x;
        let curvature = g.dot(&(q * g));
        if curvature <= 0.0 {
            break;
        }
        let mu = g.norm_squared() / curvature;
        x -= g * mu;
        run.stepsizes.push(mu);
        run.residuals.push(x.norm());
    }
    run
}
