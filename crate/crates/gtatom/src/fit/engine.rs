//! Damped least-squares (Levenberg-Marquardt) with numeric Jacobians.
//!
//! Deterministic given identical inputs: no internal randomness, fixed
//! evaluation order, and multi-start selection by lowest residual with ties
//! broken by start index.

use nalgebra::{DMatrix, DVector};

use super::FitReport;
use crate::error::{Error, Result};

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative squared-error convergence threshold.
    pub ftol: f64,
    /// Relative step-size convergence threshold.
    pub xtol: f64,
    /// Scaled-gradient convergence threshold.
    pub gtol: f64,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Relative finite-difference step.
    pub fd_rel_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 2000,
            ftol: 1e-10,
            xtol: 1e-10,
            gtol: 1e-8,
            lambda0: 1e-3,
            lambda_up: 8.0,
            lambda_down: 9.0,
            fd_rel_step: 1e-4,
        }
    }
}

/// Worst cosine between a Jacobian column and the residual vector; the
/// scale-free first-order optimality measure (zero at a least-squares
/// stationary point). Directions pinned by an active bound, where the
/// descent direction points outside the feasible box, are projected out.
fn gradient_cosine(
    jac: &DMatrix<f64>,
    g: &DVector<f64>,
    r: &DVector<f64>,
    p: &[f64],
    bounds: Option<&Vec<(f64, f64)>>,
) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for j in 0..jac.ncols() {
        if let Some(bounds) = bounds {
            let (lo, hi) = bounds[j];
            let width = (hi - lo).abs().min(p[j].abs().max(1.0));
            let eps = 1e-12 * width.max(f64::MIN_POSITIVE);
            if (p[j] - lo).abs() <= eps && g[j] > 0.0 {
                continue;
            }
            if (p[j] - hi).abs() <= eps && g[j] < 0.0 {
                continue;
            }
        }
        let cn = jac.column(j).norm();
        if cn > 0.0 {
            worst = worst.max((g[j] / (cn * rn)).abs());
        }
    }
    worst
}

/// Residual map of a least-squares problem.
pub type ResidualFn<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a>;

/// A least-squares problem: a residual map with starting point, per-parameter
/// magnitude scales (used for finite-difference steps), optional box bounds,
/// and parameter names for the report.
pub struct FitProblem<'a> {
    pub residuals: ResidualFn<'a>,
    pub init: Vec<f64>,
    pub scales: Vec<f64>,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub names: Vec<String>,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        residuals: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a,
        init: &[f64],
        scales: &[f64],
        names: &[&str],
    ) -> Self {
        FitProblem {
            residuals: Box::new(residuals),
            init: init.to_vec(),
            scales: scales.to_vec(),
            bounds: None,
            names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    fn clamp(&self, p: &mut [f64]) {
        if let Some(bounds) = &self.bounds {
            for (v, (lo, hi)) in p.iter_mut().zip(bounds) {
                *v = v.clamp(*lo, *hi);
            }
        }
    }

    fn fd_step(&self, j: usize, p: &[f64]) -> f64 {
        // scales keep the step meaningful when a parameter starts at zero
        f64::EPSILON.max(self.fd_rel(j, p))
    }

    fn fd_rel(&self, j: usize, p: &[f64]) -> f64 {
        p[j].abs().max(self.scales[j].abs())
    }
}

fn jacobian(
    problem: &FitProblem,
    p: &[f64],
    n: usize,
    fd_rel_step: f64,
) -> Result<DMatrix<f64>> {
    let k = p.len();
    let mut jac = DMatrix::zeros(n, k);
    let mut work = p.to_vec();
    for j in 0..k {
        let h = fd_rel_step * problem.fd_step(j, p);
        let (lo, hi) = problem
            .bounds
            .as_ref()
            .map(|b| b[j])
            .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let up = (p[j] + h).min(hi);
        let down = (p[j] - h).max(lo);
        if up == down {
            continue; // parameter pinned by the bounds: dead column
        }
        work[j] = up;
        let r_up = (problem.residuals)(&work)?;
        work[j] = down;
        let r_down = (problem.residuals)(&work)?;
        work[j] = p[j];
        let denom = up - down;
        for i in 0..n {
            jac[(i, j)] = (r_up[i] - r_down[i]) / denom;
        }
    }
    Ok(jac)
}

/// Gradient of the squared error by central differences, for validating the
/// solver gradient at the solution.
fn sse_gradient_fd(problem: &FitProblem, p: &[f64], fd_rel_step: f64) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; p.len()];
    let mut work = p.to_vec();
    for j in 0..p.len() {
        let h = fd_rel_step * problem.fd_step(j, p);
        let (lo, hi) = problem
            .bounds
            .as_ref()
            .map(|b| b[j])
            .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let up = (p[j] + h).min(hi);
        let down = (p[j] - h).max(lo);
        if up == down {
            continue;
        }
        work[j] = up;
        let sse_up: f64 = (problem.residuals)(&work)?.iter().map(|r| r * r).sum();
        work[j] = down;
        let sse_down: f64 = (problem.residuals)(&work)?.iter().map(|r| r * r).sum();
        work[j] = p[j];
        grad[j] = (sse_up - sse_down) / (up - down);
    }
    Ok(grad)
}

/// Minimize the sum of squared residuals from the problem's starting point.
///
/// Returns a report at a local minimum; when the iteration budget runs out
/// or the damped normal equations stay singular, the best-so-far report is
/// carried inside the returned error.
pub fn nlls_solve(problem: &FitProblem, opts: &FitOptions) -> Result<FitReport> {
    let k = problem.init.len();
    if k == 0 || problem.scales.len() != k || problem.names.len() != k {
        return Err(Error::invalid_param(
            "fit problem needs matching init/scales/names",
        ));
    }
    if let Some(b) = &problem.bounds {
        if b.len() != k || b.iter().any(|(lo, hi)| lo > hi) {
            return Err(Error::invalid_param("malformed bounds"));
        }
    }
    let mut p = problem.init.clone();
    problem.clamp(&mut p);
    let mut r = DVector::from_vec((problem.residuals)(&p)?);
    let n = r.len();
    if n <= k {
        return Err(Error::invalid_param(format!(
            "need more residuals ({n}) than parameters ({k})"
        )));
    }
    let mut sse = r.norm_squared();
    let mut lambda = opts.lambda0;
    let mut converged = sse == 0.0;
    let mut iterations = 0;

    while iterations < opts.max_iter && !converged {
        iterations += 1;
        let jac = jacobian(problem, &p, n, opts.fd_rel_step)?;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;

        if gradient_cosine(&jac, &g, &r, &p, problem.bounds.as_ref()) <= opts.gtol {
            converged = true;
            break;
        }

        // gradient-projection active set: parameters parked on a bound with
        // an outward gradient are held there, otherwise their column poisons
        // the joint step
        let free: Vec<usize> = (0..k)
            .filter(|&j| {
                let Some(bounds) = &problem.bounds else {
                    return true;
                };
                let (lo, hi) = bounds[j];
                !(p[j] <= lo && g[j] > 0.0) && !(p[j] >= hi && g[j] < 0.0)
            })
            .collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let a_free = DMatrix::from_fn(free.len(), free.len(), |r_, c_| a[(free[r_], free[c_])]);
        let g_free = DVector::from_fn(free.len(), |r_, _| g[free[r_]]);

        let mut accepted = false;
        while lambda < 1e14 {
            let mut m = a_free.clone();
            for j in 0..free.len() {
                let d = a_free[(j, j)];
                m[(j, j)] = d + lambda * if d > 0.0 { d } else { 1.0 };
            }
            let step = match m.lu().solve(&(-&g_free)) {
                Some(step) => step,
                None => {
                    lambda *= opts.lambda_up;
                    continue;
                }
            };
            let mut p_try = p.clone();
            for (idx, &j) in free.iter().enumerate() {
                p_try[j] += step[idx];
            }
            problem.clamp(&mut p_try);
            let r_try = match (problem.residuals)(&p_try) {
                Ok(r_try) if r_try.len() == n => DVector::from_vec(r_try),
                _ => {
                    lambda *= opts.lambda_up;
                    continue;
                }
            };
            let sse_try = r_try.norm_squared();
            if sse_try.is_finite() && sse_try < sse {
                let step_small = (0..k).all(|j| {
                    (p_try[j] - p[j]).abs() <= opts.xtol * problem.fd_rel(j, &p).max(1e-300)
                });
                let f_small = sse - sse_try <= opts.ftol * sse.max(f64::MIN_POSITIVE);
                p = p_try;
                r = r_try;
                sse = sse_try;
                lambda = (lambda / opts.lambda_down).max(1e-12);
                accepted = true;
                if step_small || f_small {
                    converged = true;
                }
                break;
            }
            lambda *= opts.lambda_up;
        }
        if !accepted {
            // Exhausting the damping range without any descent means no
            // step of any magnitude reduces the squared error: the
            // numerically achievable minimum. Very stiff directions can
            // leave a visible residual cosine there, so only an optimality
            // measure of order one marks a genuine failure.
            if gradient_cosine(&jac, &g, &r, &p, problem.bounds.as_ref()) <= 1e6 * opts.gtol {
                converged = true;
            }
            break;
        }
    }

    let report = finish(problem, &p, &r, sse, converged, iterations, opts)?;
    if converged {
        Ok(report)
    } else {
        Err(Error::FitDidNotConverge(Box::new(report)))
    }
}

fn finish(
    problem: &FitProblem,
    p: &[f64],
    r: &DVector<f64>,
    sse: f64,
    converged: bool,
    iterations: usize,
    opts: &FitOptions,
) -> Result<FitReport> {
    let k = p.len();
    let n = r.len();
    let jac = jacobian(problem, p, n, opts.fd_rel_step)?;
    let a = jac.transpose() * &jac;
    let g_internal = jac.transpose() * r * 2.0;
    let g_fd = sse_gradient_fd(problem, p, opts.fd_rel_step)?;

    let diff = (0..k)
        .map(|j| (g_internal[j] - g_fd[j]).abs())
        .fold(0.0, f64::max);
    // curvature floor: the gradient magnitude one finite-difference step
    // away from a minimum, below which the comparison is pure roundoff
    let curvature_floor = (0..k)
        .map(|j| 2.0 * a[(j, j)].abs() * opts.fd_rel_step * problem.fd_step(j, p))
        .fold(0.0, f64::max);
    let g_scale = g_internal
        .iter()
        .chain(g_fd.iter())
        .map(|g| g.abs())
        .fold(0.0, f64::max)
        .max(curvature_floor)
        .max(f64::MIN_POSITIVE);
    let grad_rel_discrepancy = diff / g_scale;

    // covariance from the Jacobian at the solution
    let sigmas: Vec<Option<f64>> = match a.clone().try_inverse() {
        Some(cov) if n > k => {
            let s2 = sse / (n - k) as f64;
            (0..k)
                .map(|j| {
                    let v = s2 * cov[(j, j)];
                    if v.is_finite() && v >= 0.0 {
                        Some(v.sqrt())
                    } else {
                        None
                    }
                })
                .collect()
        }
        _ => vec![None; k],
    };

    Ok(FitReport::assemble(
        &problem.names,
        p,
        &sigmas,
        n,
        sse,
        converged,
        iterations,
        grad_rel_discrepancy,
    ))
}

/// Run the solver from several starting points, returning the lowest-residual
/// converged solution (ties broken by start index). When no start converges,
/// the error carries the best-so-far report.
pub fn nlls_multi_start<'a>(
    starts: &[Vec<f64>],
    make_problem: impl Fn(&[f64]) -> FitProblem<'a>,
    opts: &FitOptions,
) -> Result<FitReport> {
    if starts.is_empty() {
        return Err(Error::invalid_param("multi-start needs at least one start"));
    }
    let mut best: Option<FitReport> = None;
    let mut best_failed: Option<FitReport> = None;
    for start in starts {
        let problem = make_problem(start);
        match nlls_solve(&problem, opts) {
            Ok(report) => {
                if best.as_ref().is_none_or(|b| report.sse < b.sse) {
                    best = Some(report);
                }
            }
            Err(Error::FitDidNotConverge(report)) => {
                if best_failed.as_ref().is_none_or(|b| report.sse < b.sse) {
                    best_failed = Some(*report);
                }
            }
            Err(other) => return Err(other),
        }
    }
    match (best, best_failed) {
        (Some(report), _) => Ok(report),
        (None, Some(report)) => Err(Error::FitDidNotConverge(Box::new(report))),
        (None, None) => Err(Error::IllConditionedFit("no start produced a fit".into())),
    }
}
