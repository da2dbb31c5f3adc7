//! Levenberg–Marquardt for small dense least-squares problems.
//!
//! Cost is `0.5 * |r(x)|^2`. The damped normal equations use Marquardt's
//! diagonal scaling, `(J^T J + mu diag(J^T J)) dx = -J^T r`, and only steps
//! that lower the cost are accepted, so the cost sequence is monotone.

use nalgebra::{DMatrix, DVector};

use super::CalibError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when `max |J^T r|` falls below this.
    pub gradient_tol: f64,
    /// Stop when `|dx| <= step_tol * (|x| + step_tol)`.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ZeroResidual,
    GradientTolerance,
    StepTolerance,
    /// Damping grew without finding a cheaper point.
    NoImprovement,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub gradient_norm: f64,
    pub termination: Termination,
}

impl LmReport {
    /// False only when the iteration cap was hit.
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSolution {
    pub x: DVector<f64>,
    pub residuals: DVector<f64>,
    pub report: LmReport,
}

pub enum Jacobian<'a> {
    Analytic(&'a dyn Fn(&DVector<f64>) -> DMatrix<f64>),
    /// Central differences.
    FiniteDifference,
}

pub fn finite_difference_jacobian(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    m: usize,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = f64::EPSILON.cbrt() * x[j].abs().max(1.0);
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig - h;
        let fm = f(&xp);
        xp[j] = orig;
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Largest entry-wise discrepancy between an analytic Jacobian and central
/// differences, relative to `max(1, |entry|)`.
pub fn max_jacobian_discrepancy(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    jac: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    x: &DVector<f64>,
) -> f64 {
    let a = jac(x);
    let n = finite_difference_jacobian(f, x, a.nrows());
    a.iter()
        .zip(n.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn cost(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

pub fn lm_solve(
    residual: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    jacobian: Jacobian<'_>,
    x0: DVector<f64>,
    opts: &LmOptions,
) -> Result<LmSolution, CalibError> {
    let mut x = x0;
    let mut r = residual(&x);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(CalibError::NonFiniteStart);
    }
    let initial_cost = c;
    let eval_jac = |x: &DVector<f64>, m: usize| match &jacobian {
        Jacobian::Analytic(j) => j(x),
        Jacobian::FiniteDifference => finite_difference_jacobian(residual, x, m),
    };
    let mut mu = opts.initial_damping;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let termination = loop {
        if c <= f64::MIN_POSITIVE {
            break Termination::ZeroResidual;
        }
        let j = eval_jac(&x, r.len());
        let jtj = j.tr_mul(&j);
        let g = j.tr_mul(&r);
        grad_norm = g.amax();
        if grad_norm <= opts.gradient_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }
        iterations += 1;
        let diag_floor = jtj.diagonal().amax() * 1e-15 + f64::MIN_POSITIVE;
        let mut stop = None;
        loop {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += mu * jtj[(i, i)].max(diag_floor);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= 10.0;
                    if mu > 1e32 {
                        stop = Some(Termination::NoImprovement);
                        break;
                    }
                    continue;
                }
            };
            if step.norm() <= opts.step_tol * (x.norm() + opts.step_tol) {
                stop = Some(Termination::StepTolerance);
                break;
            }
            let xn = &x + &step;
            let rn = residual(&xn);
            let cn = cost(&rn);
            if cn.is_finite() && cn < c {
                x = xn;
                r = rn;
                c = cn;
                mu = (mu / 10.0).max(1e-15);
                break;
            }
            mu *= 10.0;
            if mu > 1e32 {
                stop = Some(Termination::NoImprovement);
                break;
            }
        }
        if let Some(t) = stop {
            break t;
        }
    };
    Ok(LmSolution {
        x,
        residuals: r,
        report: LmReport {
            iterations,
            initial_cost,
            final_cost: c,
            gradient_norm: grad_norm,
            termination,
        },
    })
}
