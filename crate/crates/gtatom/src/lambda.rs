//! Driven three-level lambda system: rotating-frame Hamiltonian, Lindblad
//! steady state, input-output probe transmission, pump-probe maps, and
//! regime classification.
//!
//! Levels are ordered |0>, |1>, |2>. The pump drives |0>-|2> with strength
//! `Omega_c` (the two-photon pump is modeled as a direct single-photon
//! drive) and the probe drives |1>-|2> with strength `Omega_p`. Detunings
//! follow `Delta_c = omega20 - omega_c_effective` and
//! `Delta_p = omega21 - omega_p`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{self, sigma};
use crate::spectrum::EitMap;
use crate::units;

pub use crate::lindblad::{steady_state, SteadyState};

type CMat = DMatrix<Complex64>;

/// Dissipation rates, drive strengths, and detunings of the driven
/// three-level system. All quantities angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelRates {
    /// |2> -> |1> relaxation rate.
    pub gamma21: f64,
    /// |2> -> |0> relaxation rate.
    pub gamma20: f64,
    /// |1> -> |0> relaxation rate.
    pub gamma10: f64,
    /// Pure dephasing rate of |2>.
    pub gamma2_phi: f64,
    /// Pure dephasing rate of |1>.
    pub gamma1_phi: f64,
    /// Pump drive strength on |0>-|2>.
    pub omega_c: f64,
    /// Probe drive strength on |1>-|2>.
    pub omega_p: f64,
    /// Pump detuning.
    pub delta_c: f64,
    /// Probe detuning.
    pub delta_p: f64,
}

/// On-disk schema mirroring the tabulated rate sets; all values in MHz.
#[derive(Debug, serde::Deserialize)]
struct RatesFile {
    gamma21_mhz: f64,
    gamma20_mhz: f64,
    gamma10_mhz: f64,
    gamma2phi_mhz: f64,
    gamma1phi_mhz: f64,
    omega_c_mhz: f64,
    omega_p_mhz: f64,
}

impl ThreeLevelRates {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.gamma21,
            self.gamma20,
            self.gamma10,
            self.gamma2_phi,
            self.gamma1_phi,
        ];
        if rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::invalid_param("dissipation rates must be nonnegative"));
        }
        if !(self.omega_c >= 0.0) || !(self.omega_p >= 0.0) {
            return Err(Error::invalid_param("drive strengths must be nonnegative"));
        }
        Ok(())
    }

    /// Load from a flat JSON document with keys `gamma21_mhz`, `gamma20_mhz`,
    /// `gamma10_mhz`, `gamma2phi_mhz`, `gamma1phi_mhz`, `omega_c_mhz`,
    /// `omega_p_mhz`. Detunings start at zero.
    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: RatesFile = serde_json::from_str(text)
            .map_err(|e| Error::MissingKey(format!("rates file: {e}")))?;
        let r = ThreeLevelRates {
            gamma21: units::angular_from_mhz(file.gamma21_mhz),
            gamma20: units::angular_from_mhz(file.gamma20_mhz),
            gamma10: units::angular_from_mhz(file.gamma10_mhz),
            gamma2_phi: units::angular_from_mhz(file.gamma2phi_mhz),
            gamma1_phi: units::angular_from_mhz(file.gamma1phi_mhz),
            omega_c: units::angular_from_mhz(file.omega_c_mhz),
            omega_p: units::angular_from_mhz(file.omega_p_mhz),
            delta_c: 0.0,
            delta_p: 0.0,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_detunings(&self, delta_c: f64, delta_p: f64) -> Self {
        ThreeLevelRates {
            delta_c,
            delta_p,
            ..*self
        }
    }

    /// Decoherence rate of the |2>-|1> coherence,
    /// `gamma_21 = (G21 + G20 + G10)/2 + G2phi + G1phi`.
    pub fn coherence_decay_21(&self) -> f64 {
        0.5 * (self.gamma21 + self.gamma20 + self.gamma10) + self.gamma2_phi + self.gamma1_phi
    }

    /// Decoherence rate of the |1>-|0> coherence, `gamma_10 = G10/2 + G1phi`.
    pub fn coherence_decay_10(&self) -> f64 {
        0.5 * self.gamma10 + self.gamma1_phi
    }
}

/// Rotating-frame Hamiltonian
/// `H = Dc s22 + (Dc - Dp) s11 + i(Oc/2)(s02 - s20) + i(Op/2)(s12 - s21)`.
///
/// The probe term pairs `s12` with `-s21` so that the drive is the Hermitian
/// counterpart of the pump term.
pub fn hamiltonian(r: &ThreeLevelRates) -> CMat {
    let mut h = CMat::zeros(3, 3);
    h[(2, 2)] = Complex64::new(r.delta_c, 0.0);
    h[(1, 1)] = Complex64::new(r.delta_c - r.delta_p, 0.0);
    h[(0, 2)] = Complex64::new(0.0, 0.5 * r.omega_c);
    h[(2, 0)] = Complex64::new(0.0, -0.5 * r.omega_c);
    h[(1, 2)] = Complex64::new(0.0, 0.5 * r.omega_p);
    h[(2, 1)] = Complex64::new(0.0, -0.5 * r.omega_p);
    h
}

/// Collapse operators with their rates: radiative decay on each transition
/// plus pure dephasing of |1> and |2> (entering with twice the listed rate).
pub fn collapse_ops(r: &ThreeLevelRates) -> Vec<(f64, CMat)> {
    vec![
        (r.gamma20, sigma(3, 0, 2)),
        (r.gamma21, sigma(3, 1, 2)),
        (r.gamma10, sigma(3, 0, 1)),
        (2.0 * r.gamma2_phi, sigma(3, 2, 2)),
        (2.0 * r.gamma1_phi, sigma(3, 1, 1)),
    ]
}

/// 9x9 superoperator of the master equation for the given rate set.
pub fn liouvillian(r: &ThreeLevelRates) -> Result<CMat> {
    r.validate()?;
    lindblad::liouvillian(&hamiltonian(r), &collapse_ops(r))
}

/// Probe amplitude `alpha` for a given probe strength, from the
/// normalization `Omega_p = sqrt(2 Gamma_21) alpha`. This choice makes the
/// two-level reduction of the input-output relation extinguish a lossless
/// resonant scatterer completely.
pub fn probe_amp(omega_p: f64, gamma21: f64) -> Result<f64> {
    if !(gamma21 > 0.0) {
        return Err(Error::invalid_param("gamma21 must be positive"));
    }
    Ok(omega_p / (2.0 * gamma21).sqrt())
}

/// Input-output probe transmission
/// `t = 1 + sqrt(Gamma_21 / 2) <sigma_12> / alpha`.
pub fn probe_transmission(ss: &SteadyState, gamma21: f64, probe_amp: f64) -> Result<Complex64> {
    if !(probe_amp > 0.0) {
        return Err(Error::invalid_param("probe amplitude must be positive"));
    }
    // <sigma_12> = tr(|1><2| rho) = rho_21
    let coherence = ss.rho[(2, 1)];
    Ok(Complex64::new(1.0, 0.0) + coherence * (0.5 * gamma21).sqrt() / probe_amp)
}

/// Steady-state probe transmission for a complete rate set.
pub fn transmission(r: &ThreeLevelRates) -> Result<Complex64> {
    let l = liouvillian(r)?;
    let ss = steady_state(&l)?;
    probe_transmission(&ss, r.gamma21, probe_amp(r.omega_p, r.gamma21)?)
}

/// Steady-state transmission at every point of a `(Delta_c, Delta_p)` grid,
/// multiplied by an optional real scale factor.
pub fn eit_map(r: &ThreeLevelRates, dc_grid: &[f64], dp_grid: &[f64], scale: f64) -> Result<EitMap> {
    if dc_grid.is_empty() || dp_grid.is_empty() {
        return Err(Error::invalid_param("detuning grids must be nonempty"));
    }
    if dc_grid.windows(2).any(|w| w[0] >= w[1]) || dp_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_param("detuning grids must be strictly increasing"));
    }
    let t: Vec<Vec<Complex64>> = dc_grid
        .par_iter()
        .map(|&dc| -> Result<Vec<Complex64>> {
            dp_grid
                .iter()
                .map(|&dp| {
                    let cell = r.with_detunings(dc, dp);
                    Ok(transmission(&cell)? * scale)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(EitMap {
        delta_c: dc_grid.to_vec(),
        delta_p: dp_grid.to_vec(),
        t,
        scale,
    })
}

/// Threshold pump strength separating the transparency regimes:
/// `Omega_t = Gamma_21/2 + Gamma_20/2 + Gamma_2phi`.
pub fn threshold_drive(gamma21: f64, gamma20: f64, gamma2_phi: f64) -> f64 {
    0.5 * gamma21 + 0.5 * gamma20 + gamma2_phi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Regime {
    Eit,
    Ats,
}

/// Regime verdict with a flag marking the exact pole-collision boundary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RegimeClass {
    pub regime: Regime,
    pub boundary: bool,
}

/// Classify a pump strength against the threshold. Exact equality is where
/// the response poles collide; it is reported as the split side with the
/// boundary flag set.
pub fn classify_regime(omega_c: f64, omega_t: f64) -> RegimeClass {
    if omega_c < omega_t {
        RegimeClass {
            regime: Regime::Eit,
            boundary: false,
        }
    } else {
        RegimeClass {
            regime: Regime::Ats,
            boundary: omega_c == omega_t,
        }
    }
}

/// Poles of the weak-probe response in the complex `Delta_p` plane.
#[derive(Debug, Clone)]
pub struct PoleReport {
    pub poles: Vec<Complex64>,
    /// 1 when the poles share a real part (a single resonance), 2 when they
    /// are split into a doublet.
    pub resonances: u8,
    /// Real-part separation of the poles.
    pub split: f64,
}

/// First-order-in-`Omega_p` probe response: a rational function of the probe
/// detuning with a quadratic denominator.
///
/// The pump-only stationary state supplies the linear-response coefficients;
/// the response itself is independent of `Omega_p`.
#[derive(Debug, Clone)]
pub struct WeakProbeResponse {
    gamma21_rad: f64,
    coherence_decay_21: f64,
    coherence_decay_10: f64,
    delta_c: f64,
    omega_c: f64,
    /// Zeroth-order population difference `rho22 - rho11`.
    inversion: Complex64,
    /// Zeroth-order pump coherence `<0|rho|2>`.
    pump_coherence: Complex64,
}

impl WeakProbeResponse {
    /// Transmission at probe detuning `dp`.
    pub fn eval(&self, dp: f64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let ground_factor =
            Complex64::new(self.coherence_decay_10, -(self.delta_c - dp));
        let numerator =
            self.inversion * ground_factor - self.pump_coherence * (0.5 * self.omega_c);
        let denominator = Complex64::new(self.coherence_decay_21, dp) * ground_factor
            + 0.25 * self.omega_c * self.omega_c;
        one + numerator * (0.5 * self.gamma21_rad) / denominator
    }

    /// Roots of the response denominator in the complex `Delta_p` plane.
    ///
    /// With the pump off the denominator's second root is cancelled by the
    /// numerator and a single bare-line pole at `i gamma_21` remains.
    pub fn poles(&self) -> PoleReport {
        let g21 = self.coherence_decay_21;
        let g10 = self.coherence_decay_10;
        if self.omega_c == 0.0 {
            return PoleReport {
                poles: vec![Complex64::new(0.0, g21)],
                resonances: 1,
                split: 0.0,
            };
        }
        // denominator as a quadratic in dp:
        // -dp^2 + (i g21 + i g10 + Dc) dp + (g21 g10 - i g21 Dc + Oc^2/4)
        let b = Complex64::new(self.delta_c, g21 + g10);
        let c = Complex64::new(g21 * g10 + 0.25 * self.omega_c * self.omega_c, -g21 * self.delta_c);
        let disc = (b * b + 4.0 * c).sqrt();
        let p1 = (b + disc) * 0.5;
        let p2 = (b - disc) * 0.5;
        let split = (p1.re - p2.re).abs();
        let scale = g21.max(self.omega_c).max(self.delta_c.abs()).max(f64::MIN_POSITIVE);
        let resonances = if split > 1e-6 * scale { 2 } else { 1 };
        PoleReport {
            poles: vec![p1, p2],
            resonances,
            split,
        }
    }
}

/// Build the weak-probe linear response around the pump-only steady state.
///
/// When the pump is off and `Gamma_10 = 0` the stationary manifold of the
/// pump-only problem is degenerate; the pump-prepared limit `rho = |1><1|`
/// is used, matching `Omega_c -> 0+`.
pub fn weak_probe_response(r: &ThreeLevelRates) -> Result<WeakProbeResponse> {
    r.validate()?;
    if !(r.gamma21 > 0.0) {
        return Err(Error::invalid_param(
            "weak-probe expansion needs gamma21 > 0",
        ));
    }
    let pump_only = ThreeLevelRates {
        omega_p: 0.0,
        ..*r
    };
    let (inversion, pump_coherence) = if pump_only.omega_c == 0.0 && pump_only.gamma10 == 0.0 {
        (Complex64::new(-1.0, 0.0), Complex64::default())
    } else {
        let l = liouvillian(&pump_only)?;
        let ss = steady_state(&l)?;
        (
            ss.rho[(2, 2)] - ss.rho[(1, 1)],
            ss.rho[(0, 2)],
        )
    };
    Ok(WeakProbeResponse {
        gamma21_rad: r.gamma21,
        coherence_decay_21: r.coherence_decay_21(),
        coherence_decay_10: r.coherence_decay_10(),
        delta_c: r.delta_c,
        omega_c: r.omega_c,
        inversion,
        pump_coherence,
    })
}

/// Weak-probe transmission at one probe detuning, with the pole report.
pub fn weak_probe_transmission(dp: f64, r: &ThreeLevelRates) -> Result<(Complex64, PoleReport)> {
    let response = weak_probe_response(r)?;
    Ok((response.eval(dp), response.poles()))
}

/// Steady-state probe transmission of the system truncated to the
/// `{|1>, |2>}` manifold: decay `Gamma_21`, both dephasings, probe drive
/// `Omega_p` at detuning `Delta_p`, solved through the same Lindblad
/// machinery and input-output relation as the full system.
pub fn two_level_truncation(
    gamma21: f64,
    gamma2_phi: f64,
    gamma1_phi: f64,
    omega_p: f64,
    delta_p: f64,
) -> Result<Complex64> {
    if !(gamma21 > 0.0) {
        return Err(Error::invalid_param("truncation needs gamma21 > 0"));
    }
    // local basis: index 0 = |1>, index 1 = |2>
    let mut h = CMat::zeros(2, 2);
    h[(1, 1)] = Complex64::new(delta_p, 0.0);
    h[(0, 1)] = Complex64::new(0.0, 0.5 * omega_p);
    h[(1, 0)] = Complex64::new(0.0, -0.5 * omega_p);
    let collapse = vec![
        (gamma21, sigma(2, 0, 1)),
        (2.0 * gamma2_phi, sigma(2, 1, 1)),
        (2.0 * gamma1_phi, sigma(2, 0, 0)),
    ];
    let l = lindblad::liouvillian(&h, &collapse)?;
    let ss = steady_state(&l)?;
    let alpha = probe_amp(omega_p, gamma21)?;
    if !(alpha > 0.0) {
        return Err(Error::invalid_param("truncation needs omega_p > 0"));
    }
    Ok(Complex64::new(1.0, 0.0) + ss.rho[(1, 0)] * (0.5 * gamma21).sqrt() / alpha)
}
