//! Vectorized Lindblad superoperators and their stationary states.
//!
//! Density matrices are column-stacked, so `vec(A rho B) = (B^T kron A)
//! vec(rho)` and a `d`-level system produces a `d^2 x d^2` superoperator.
//! The stationary state comes from a dense direct solve of the
//! trace-constrained linear system; the implementation favors determinism
//! over scalability since every system here is tiny.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

type CMat = DMatrix<Complex64>;

/// Basis operator `|i><j|` in a `d`-level system.
pub fn sigma(d: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}

/// Superoperator matrix of `rho -> -i [H, rho] + sum_k rate_k D[X_k] rho`
/// with the dissipator `D[X] rho = X rho X^dag - (X^dag X rho + rho X^dag X)/2`.
pub fn liouvillian(h: &CMat, collapse: &[(f64, CMat)]) -> Result<CMat> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::invalid_param("hamiltonian must be square"));
    }
    let eye = CMat::identity(d, d);
    let minus_i = Complex64::new(0.0, -1.0);
    // -i (I kron H - H^T kron I)
    let mut l = (eye.kronecker(h) - h.transpose().kronecker(&eye)) * minus_i;
    for (rate, x) in collapse {
        if !(*rate >= 0.0) {
            return Err(Error::invalid_param("collapse rates must be nonnegative"));
        }
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::invalid_param("collapse operator dimension mismatch"));
        }
        if *rate == 0.0 {
            continue;
        }
        let xdx = x.adjoint() * x;
        let jump = x.conjugate().kronecker(x);
        let left = eye.kronecker(&xdx);
        let right = xdx.transpose().kronecker(&eye);
        let half = Complex64::new(0.5, 0.0);
        l += (jump - (left + right) * half) * Complex64::new(*rate, 0.0);
    }
    Ok(l)
}

/// Stationary density matrix of a Liouvillian, with the residual of the
/// unconstrained equation recorded.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: CMat,
    /// `|| L vec(rho) ||_2`.
    pub residual: f64,
}

impl SteadyState {
    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Eigenvalues of the (Hermitian) density matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.rho)
    }

    /// Expectation value `tr(op rho)`.
    pub fn expect(&self, op: &CMat) -> Complex64 {
        (op * &self.rho).trace()
    }
}

/// Solve `L vec(rho) = 0` with `tr(rho) = 1` by replacing the first row of
/// the superoperator with the trace functional and solving the dense system,
/// followed by one round of iterative refinement.
///
/// Fails with a non-unique-steady-state error when the constrained system is
/// singular (a degenerate stationary manifold) or the residual exceeds
/// `1e-9 ||L||_F`.
pub fn steady_state(l: &CMat) -> Result<SteadyState> {
    let n = l.nrows();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || l.ncols() != n {
        return Err(Error::invalid_param(
            "superoperator must be square with d^2 rows",
        ));
    }
    let mut a = l.clone();
    for col in 0..n {
        a[(0, col)] = Complex64::default();
    }
    for i in 0..d {
        a[(0, i * d + i)] = Complex64::new(1.0, 0.0);
    }
    let mut b = DVector::<Complex64>::zeros(n);
    b[0] = Complex64::new(1.0, 0.0);

    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(Error::DegenerateSteadyState)?;
    // one refinement pass tightens the residual near ill-conditioned points
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::DegenerateSteadyState);
    }
    let residual = (l * &x).norm();
    let scale = l.norm();
    if scale > 0.0 && residual > 1e-9 * scale {
        return Err(Error::DegenerateSteadyState);
    }
    let rho = CMat::from_column_slice(d, d, x.as_slice());
    Ok(SteadyState { rho, residual })
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}
