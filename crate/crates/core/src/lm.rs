//! Small dense Levenberg–Marquardt solver shared by the camera refinement and
//! the shot fitter.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquaresProblem {
    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;

    /// Pulls a trial point back into the feasible box, if the problem has one.
    fn project(&self, _params: &mut DVector<f64>) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub initial_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    /// Sum of squared residuals at `params`.
    pub sum_sq: f64,
    /// Sum of squared residuals at the starting point.
    pub initial_sum_sq: f64,
    /// Infinity norm of `Jᵀr` at `params`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

fn sum_sq(r: &DVector<f64>) -> f64 {
    let s = r.norm_squared();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Minimizes `Σ rᵢ²` from `x0`. Only steps that lower the cost are accepted, so
/// the returned cost never exceeds the starting cost.
pub fn minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    cfg: &LmConfig,
) -> LmReport {
    let mut x = x0;
    problem.project(&mut x);
    let mut r = problem.residuals(&x);
    let mut cost = sum_sq(&r);
    let initial_sum_sq = cost;
    let mut lambda = cfg.initial_lambda;
    let mut jac = problem.jacobian(&x);
    let mut grad = jac.tr_mul(&r);
    let mut iterations = 0;

    let termination = loop {
        let gnorm = grad.amax();
        if gnorm < cfg.gradient_tolerance {
            break Termination::Gradient;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let jtj = jac.tr_mul(&jac);
        let n = x.len();
        let mut accepted = false;
        let mut tiny_step = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= cfg.lambda_up;
                continue;
            };
            if step.norm() < cfg.step_tolerance * (x.norm() + cfg.step_tolerance) {
                tiny_step = true;
                break;
            }
            let mut trial = &x + &step;
            problem.project(&mut trial);
            let r_trial = problem.residuals(&trial);
            let c_trial = sum_sq(&r_trial);
            if c_trial < cost {
                x = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / cfg.lambda_down).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= cfg.lambda_up;
        }
        if tiny_step || !accepted {
            break Termination::Step;
        }
        jac = problem.jacobian(&x);
        grad = jac.tr_mul(&r);
    };

    LmReport {
        gradient_norm: grad.amax(),
        params: x,
        sum_sq: cost,
        initial_sum_sq,
        iterations,
        termination,
    }
}

/// Central-difference Jacobian of `f` at `x`. Step per parameter is
/// `rel_step * max(1, |xⱼ|)`.
pub fn central_difference<F>(f: F, x: &DVector<f64>, rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock in residual form: r = (10(y − x²), 1 − x).
    struct Rosenbrock;

    impl LeastSquaresProblem for Rosenbrock {
        fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]])
        }
        fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0])
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let rep = minimize(
            &Rosenbrock,
            DVector::from_vec(vec![-1.2, 1.0]),
            &LmConfig::default(),
        );
        assert!(rep.converged());
        assert!((rep.params[0] - 1.0).abs() < 1e-6, "{:?}", rep.params);
        assert!((rep.params[1] - 1.0).abs() < 1e-6);
        assert!(rep.sum_sq <= rep.initial_sum_sq);
    }

    #[test]
    fn central_difference_matches_analytic() {
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let fd = central_difference(|p| Rosenbrock.residuals(p), &x, 1e-6);
        let an = Rosenbrock.jacobian(&x);
        assert!((fd - an).amax() < 1e-6);
    }
}
