//! Shared test utilities: an explicit time-stepping oracle for stationary
//! states and seeded synthetic-noise helpers.
//!
//! The oracle integrates the master equation directly from its operator
//! form with fourth-order steps, staying independent of the vectorized
//! nullspace solve it is used to check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type CMat = DMatrix<Complex64>;

/// Right-hand side of the master equation, assembled from matrix products.
pub fn master_rhs(h: &CMat, collapse: &[(f64, CMat)], rho: &CMat) -> CMat {
    let i = Complex64::new(0.0, 1.0);
    let mut out = (h * rho - rho * h) * (-i);
    for (rate, x) in collapse {
        if *rate == 0.0 {
            continue;
        }
        let xdag = x.adjoint();
        let xdx = &xdag * x;
        let jump = x * rho * &xdag;
        let anti = (&xdx * rho + rho * &xdx) * Complex64::new(0.5, 0.0);
        out += (jump - anti) * Complex64::new(*rate, 0.0);
    }
    out
}

/// Integrate to the stationary state with classic fourth-order steps,
/// starting from the maximally mixed state. Convergence is declared when
/// the estimated remaining transient falls below `tol`.
pub fn evolve_to_steady_state(h: &CMat, collapse: &[(f64, CMat)], tol: f64) -> CMat {
    let d = h.nrows();
    let mut rho = CMat::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);

    let rate_sum: f64 = collapse.iter().map(|(r, _)| r).sum();
    let scale = 2.0 * h.norm() + 2.0 * rate_sum + 1e-30;
    let dt = 0.5 / scale;
    let chunk = 256usize;
    let max_chunks = 40_000usize;

    let mut res_prev = master_rhs(h, collapse, &rho).norm();
    for _ in 0..max_chunks {
        for _ in 0..chunk {
            let k1 = master_rhs(h, collapse, &rho);
            let k2 = master_rhs(h, collapse, &(&rho + &k1 * Complex64::new(0.5 * dt, 0.0)));
            let k3 = master_rhs(h, collapse, &(&rho + &k2 * Complex64::new(0.5 * dt, 0.0)));
            let k4 = master_rhs(h, collapse, &(&rho + &k3 * Complex64::new(dt, 0.0)));
            let two = Complex64::new(2.0, 0.0);
            rho += (k1 + k2 * two + k3 * two + k4) * Complex64::new(dt / 6.0, 0.0);
        }
        let res = master_rhs(h, collapse, &rho).norm();
        if res < 1e-14 * scale {
            break;
        }
        // exponential decay of the residual over the chunk gives the
        // spectral gap, and residual / gap bounds the remaining transient
        if res < res_prev {
            let gap = (res_prev / res).ln() / (chunk as f64 * dt);
            if gap > 0.0 && res / gap < tol {
                break;
            }
        }
        res_prev = res;
    }
    rho
}

/// Standard-normal pair by the Box-Muller transform.
pub fn gauss_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = rng.gen_range(1e-16..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Additive complex Gaussian noise with standard deviation `sigma` per
/// quadrature.
pub fn complex_noise(rng: &mut ChaCha8Rng, sigma: f64) -> Complex64 {
    let (a, b) = gauss_pair(rng);
    Complex64::new(sigma * a, sigma * b)
}
