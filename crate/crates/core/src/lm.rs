//! Dense Levenberg-Marquardt for small problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{CalibError, Result};

/// A nonlinear least-squares problem `min_x sum r(x)^2`.
pub trait LeastSquaresProblem {
    fn num_params(&self) -> usize;
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    fn cost(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }
}

/// Central finite-difference Jacobian with step `h`.
pub fn numerical_jacobian<P: LeastSquaresProblem + ?Sized>(problem: &P, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = problem.residuals(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let col = (problem.residuals(&xp) - problem.residuals(&xm)) / (2.0 * h);
        jac.set_column(k, &col);
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 0.3,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
        }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.initial_damping > 0.0
            && self.damping_up > 1.0
            && self.damping_down > 0.0
            && self.damping_down < 1.0
            && self.gradient_tolerance > 0.0
            && self.step_tolerance > 0.0;
        if !ok {
            return Err(CalibError::InvalidInput(format!("invalid LM settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    StepSize,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }

    /// Number of accepted steps whose cost exceeded the previous one.
    pub fn cost_increases(&self) -> usize {
        self.cost_history.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

// Largest damping tried before giving up on a step.
const MAX_DAMPING: f64 = 1e32;

/// Minimizes `problem` from `x0`. Only steps that lower the cost are accepted,
/// so the returned parameters are always the best seen.
pub fn minimize<P: LeastSquaresProblem + ?Sized>(problem: &P, x0: DVector<f64>, settings: &LmSettings) -> Result<LmReport> {
    settings.validate()?;
    if x0.len() != problem.num_params() {
        return Err(CalibError::InvalidInput(format!(
            "expected {} parameters, got {}",
            problem.num_params(),
            x0.len()
        )));
    }
    let mut x = x0;
    let mut r = problem.residuals(&x);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(CalibError::InvalidInput("non-finite initial cost".into()));
    }
    let initial_cost = cost;
    let mut history = vec![cost];
    let mut lambda = settings.initial_damping;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    'outer: while iterations < settings.max_iterations {
        let jac = problem.jacobian(&x);
        let grad = jac.tr_mul(&r);
        if grad.amax() < settings.gradient_tolerance {
            termination = Termination::Gradient;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let diag_max = jtj.diagonal().amax();
        let floor = (diag_max * 1e-12).max(f64::MIN_POSITIVE);
        iterations += 1;

        loop {
            let mut damped = jtj.clone();
            for k in 0..damped.nrows() {
                damped[(k, k)] += lambda * jtj[(k, k)].max(floor);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= settings.damping_up;
                if lambda > MAX_DAMPING {
                    termination = Termination::StepSize;
                    break 'outer;
                }
                continue;
            };
            let step = chol.solve(&(-&grad));
            if step.norm() <= settings.step_tolerance * (x.norm() + settings.step_tolerance) {
                termination = Termination::StepSize;
                break 'outer;
            }
            let x_new = &x + &step;
            let r_new = problem.residuals(&x_new);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                x = x_new;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                lambda = (lambda * settings.damping_down).max(1e-15);
                continue 'outer;
            }
            lambda *= settings.damping_up;
            if lambda > MAX_DAMPING {
                termination = Termination::StepSize;
                break 'outer;
            }
        }
    }

    Ok(LmReport {
        params: x,
        initial_cost,
        final_cost: cost,
        iterations,
        termination,
        cost_history: history,
    })
}
