//! Device parameters, transmon level structure, and the multipoint-coupling
//! interference model.
//!
//! A transmon tapped into an open waveguide at `N` points spaced by a fixed
//! distance radiates into the line with an amplitude that interferes with
//! itself. The relaxation rate of each transition is modulated by the array
//! factor [`array_factor`], peaking where the transition frequency matches
//! the intercoupling frequency [`omega_lambda`].

use std::f64::consts::PI;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::units;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Interference factors below this are treated as a fully decoupled
/// transition when they appear in a denominator.
const DECOUPLED_FLOOR: f64 = 1e-18;

/// Static physical description of one device.
///
/// Energies are stored as `E/h` in GHz; rates are angular (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    /// Maximum Josephson energy, `E_J^max / h` (GHz).
    pub ej_max_ghz: f64,
    /// Charging energy, `E_c / h` (GHz).
    pub ec_ghz: f64,
    /// Number of coupling points, `N >= 1`.
    pub n_points: u32,
    /// Distance between adjacent coupling points (m).
    pub spacing_m: f64,
    /// Effective dielectric constant of the waveguide.
    pub eps_eff: f64,
    /// Maximum |0>-|1> relaxation rate (rad/s).
    pub gamma1_max: f64,
    /// External flux bias in units of the flux quantum.
    pub flux_phi0: f64,
}

/// On-disk schema for device parameter files. External interfaces express
/// rates as ordinary frequency with an `_hz` suffix.
#[derive(Debug, Deserialize)]
struct DeviceFile {
    ej_max_ghz: f64,
    ec_ghz: f64,
    n_points: u32,
    spacing_m: f64,
    eps_eff: f64,
    gamma1_max_hz: f64,
    flux_phi0: f64,
}

impl DeviceParams {
    /// Load a device description from a flat JSON document with keys
    /// `ej_max_ghz`, `ec_ghz`, `n_points`, `spacing_m`, `eps_eff`,
    /// `gamma1_max_hz`, `flux_phi0`.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DeviceFile = serde_json::from_str(text)
            .map_err(|e| Error::MissingKey(format!("device file: {e}")))?;
        let params = DeviceParams {
            ej_max_ghz: file.ej_max_ghz,
            ec_ghz: file.ec_ghz,
            n_points: file.n_points,
            spacing_m: file.spacing_m,
            eps_eff: file.eps_eff,
            gamma1_max: units::angular_from_hz(file.gamma1_max_hz),
            flux_phi0: file.flux_phi0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ej_max_ghz > 0.0) {
            return Err(Error::invalid_param("ej_max must be positive"));
        }
        if !(self.ec_ghz > 0.0) {
            return Err(Error::invalid_param("ec must be positive"));
        }
        if self.n_points < 1 {
            return Err(Error::invalid_param("n_points must be at least 1"));
        }
        if !(self.spacing_m > 0.0) {
            return Err(Error::invalid_param("spacing must be positive"));
        }
        if !(self.eps_eff >= 1.0) {
            return Err(Error::invalid_param("eps_eff must be at least 1"));
        }
        if !(self.gamma1_max >= 0.0) {
            return Err(Error::invalid_param("gamma1_max must be nonnegative"));
        }
        Ok(())
    }

    /// Intercoupling angular frequency of this device (rad/s).
    pub fn omega_lambda(&self) -> f64 {
        // validate() guarantees the arguments are in range
        omega_lambda(self.spacing_m, self.eps_eff).expect("validated device")
    }

    /// Transition frequencies (rad/s) at the given flux bias.
    pub fn transition_frequencies_at(&self, flux_phi0: f64) -> Result<(f64, f64)> {
        let ej = josephson_energy(self, flux_phi0);
        transition_frequencies(ej, self.ec_ghz)
    }
}

/// Intercoupling angular frequency `omega_lambda = 2 pi v / spacing` with
/// phase velocity `v = c / sqrt(eps_eff)`.
pub fn omega_lambda(spacing_m: f64, eps_eff: f64) -> Result<f64> {
    if !(spacing_m > 0.0) {
        return Err(Error::invalid_param("spacing must be positive"));
    }
    if !(eps_eff >= 1.0) {
        return Err(Error::invalid_param("eps_eff must be at least 1"));
    }
    let v = SPEED_OF_LIGHT / eps_eff.sqrt();
    Ok(2.0 * PI * v / spacing_m)
}

/// Flux-modulated Josephson energy `E_J(flux)/h` in GHz for a symmetric SQUID:
/// `E_J = E_J^max |cos(pi flux)|` with flux in units of the flux quantum.
pub fn josephson_energy(params: &DeviceParams, flux_phi0: f64) -> f64 {
    params.ej_max_ghz * (PI * flux_phi0).cos().abs()
}

/// Transmon transition frequencies from the Josephson and charging energies
/// (both as `E/h` in GHz): `omega10 = sqrt(8 E_J E_c)/hbar - E_c/hbar` and
/// `omega21 = omega10 - E_c/hbar`, returned as angular frequencies (rad/s).
pub fn transition_frequencies(ej_ghz: f64, ec_ghz: f64) -> Result<(f64, f64)> {
    if !(ej_ghz > 0.0) || !(ec_ghz > 0.0) {
        return Err(Error::invalid_param(
            "transition frequencies need positive ej and ec",
        ));
    }
    let f10_ghz = (8.0 * ej_ghz * ec_ghz).sqrt() - ec_ghz;
    if f10_ghz <= 0.0 {
        return Err(Error::invalid_param(
            "transmon regime violated: omega10 <= 0",
        ));
    }
    let omega10 = units::angular_from_ghz(f10_ghz);
    let omega21 = omega10 - units::angular_from_ghz(ec_ghz);
    Ok((omega10, omega21))
}

/// Interference (array) factor for `n_points` coupling points,
/// `F_N(theta) = [sin(N theta / 2) / (N sin(theta / 2))]^2` with
/// `theta = 2 pi omega / omega_lambda`. Removable singularities at
/// `theta in 2 pi Z` evaluate to 1.
pub fn array_factor(n_points: u32, omega: f64, omega_lambda: f64) -> f64 {
    if n_points <= 1 {
        return 1.0;
    }
    let n = f64::from(n_points);
    let half_theta = PI * omega / omega_lambda;
    // Reduce to s = theta/2 - m*pi, s in [-pi/2, pi/2]. Both sines pick up
    // only signs under the shift, which square away.
    let m = (half_theta / PI).round();
    let s = half_theta - m * PI;
    if s.sin().abs() < 1e-8 {
        // series branch across the removable singularity
        return 1.0 - (n * n - 1.0) * s * s / 3.0;
    }
    let ratio = (n * s).sin() / (n * s.sin());
    ratio * ratio
}

/// Transmon transition addressed by a rate query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// |0>-|1>
    ZeroOne,
    /// |1>-|2>
    OneTwo,
}

impl Transition {
    /// Ladder multiplier relative to the |0>-|1> rate.
    fn multiplier(self) -> f64 {
        match self {
            Transition::ZeroOne => 1.0,
            Transition::OneTwo => 2.0,
        }
    }
}

/// Frequency-dependent relaxation rate (rad/s):
/// `Gamma_10(omega) = Gamma_10^max F_N(omega)` and
/// `Gamma_21(omega) = 2 Gamma_10^max F_N(omega)`.
pub fn relaxation_rate(transition: Transition, omega: f64, params: &DeviceParams) -> f64 {
    transition.multiplier()
        * params.gamma1_max
        * array_factor(params.n_points, omega, params.omega_lambda())
}

/// Full width at half maximum of the interference factor around its peak at
/// `omega_lambda`, found by bisection on both half-maximum crossings.
pub fn profile_fwhm(n_points: u32, omega_lambda: f64) -> Result<f64> {
    if n_points < 2 {
        return Err(Error::invalid_param(
            "profile width undefined for a single coupling point (flat profile)",
        ));
    }
    if !(omega_lambda > 0.0) {
        return Err(Error::invalid_param("omega_lambda must be positive"));
    }
    let hi = half_max_crossing(n_points, omega_lambda, 1.0)?;
    let lo = half_max_crossing(n_points, omega_lambda, -1.0)?;
    Ok(hi - lo)
}

/// First frequency on the given side of the peak where `F_N` crosses 1/2.
fn half_max_crossing(n_points: u32, omega_lambda: f64, direction: f64) -> Result<f64> {
    let n = f64::from(n_points);
    // The first zero of F_N sits at omega_lambda (1 +- 1/N); the crossing is
    // bracketed between the peak and that zero.
    let step = direction * omega_lambda / (64.0 * n);
    let mut a = omega_lambda;
    let mut b = a + step;
    let mut fb = array_factor(n_points, b, omega_lambda);
    let mut guard = 0;
    while fb > 0.5 {
        a = b;
        b += step;
        fb = array_factor(n_points, b, omega_lambda);
        guard += 1;
        if guard > 256 {
            return Err(Error::Singular(
                "half-maximum crossing not bracketed".into(),
            ));
        }
    }
    // bisection, well past the requested 1e-9 relative tolerance
    let tol = 1e-12 * omega_lambda;
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        if array_factor(n_points, mid, omega_lambda) > 0.5 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Relaxation-rate ratio `beta = Gamma_21(omega21) / Gamma_10(omega10)`
/// evaluated at the transition frequencies set by the flux bias.
pub fn beta_ratio(params: &DeviceParams, flux_phi0: f64) -> Result<f64> {
    let (omega10, omega21) = params.transition_frequencies_at(flux_phi0)?;
    let wl = params.omega_lambda();
    let f10 = array_factor(params.n_points, omega10, wl);
    let f21 = array_factor(params.n_points, omega21, wl);
    if f10 < DECOUPLED_FLOOR {
        return Err(Error::Decoupled(format!(
            "the |0>-|1> transition at omega10/2pi = {:.4} GHz sits on an interference zero; \
             beta is unbounded there",
            units::ghz_from_angular(omega10)
        )));
    }
    Ok(2.0 * f21 / f10)
}

/// Infer one relaxation rate from another through the coupling-constant
/// ratio: `Gamma_21 = (k21/k10)^2 Gamma_10`.
pub fn gamma21_from_k_ratio(k21: f64, k10: f64, gamma10: f64) -> Result<f64> {
    if k10 == 0.0 {
        return Err(Error::Decoupled(
            "k10 = 0: rate ratio undefined for a decoupled |0>-|1> transition".into(),
        ));
    }
    if !(gamma10 >= 0.0) {
        return Err(Error::invalid_param("gamma10 must be nonnegative"));
    }
    let r = k21 / k10;
    Ok(r * r * gamma10)
}

/// Rabi frequency of a driven transition at drive power `P`:
/// `Omega = sqrt(2) k sqrt(P)`.
pub fn rabi_from_power(k: f64, power_w: f64) -> Result<f64> {
    if !(power_w >= 0.0) {
        return Err(Error::invalid_param("drive power must be nonnegative"));
    }
    Ok(std::f64::consts::SQRT_2 * k * power_w.sqrt())
}

/// Frequency-dependent relaxation rates sampled on a grid, with the profile
/// center and width.
#[derive(Debug, Clone)]
pub struct RateProfile {
    /// Angular frequency grid (rad/s).
    pub omega: Vec<f64>,
    /// |0>-|1> relaxation rate at each grid point (rad/s).
    pub gamma10: Vec<f64>,
    /// |1>-|2> relaxation rate at each grid point (rad/s).
    pub gamma21: Vec<f64>,
    /// Profile center (rad/s).
    pub omega_cen: f64,
    /// Full width at half maximum (rad/s); infinite for a flat profile.
    pub fwhm: f64,
}

impl RateProfile {
    /// Assemble a profile from sampled `(omega, gamma10)` pairs, estimating
    /// the center and width from interpolated half-maximum crossings.
    /// `gamma21` is filled with the pointwise ladder relation `2 gamma10`.
    pub fn from_samples(omega: Vec<f64>, gamma10: Vec<f64>) -> Result<Self> {
        if omega.len() != gamma10.len() || omega.len() < 3 {
            return Err(Error::invalid_param(
                "profile needs at least 3 samples with matching grids",
            ));
        }
        let (omega_cen, fwhm) = estimate_center_fwhm(&omega, &gamma10)?;
        let gamma21 = gamma10.iter().map(|g| 2.0 * g).collect();
        Ok(RateProfile {
            omega,
            gamma10,
            gamma21,
            omega_cen,
            fwhm,
        })
    }

    /// Grid point with the largest `gamma10`.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, g) in self.gamma10.iter().enumerate() {
            if *g > self.gamma10[best] {
                best = i;
            }
        }
        best
    }
}

/// Analytic rate profile of a device over a frequency grid.
pub fn rate_profile(params: &DeviceParams, omega_grid: &[f64]) -> Result<RateProfile> {
    if omega_grid.len() < 2 {
        return Err(Error::invalid_param("profile grid needs at least 2 points"));
    }
    let gamma10: Vec<f64> = omega_grid
        .iter()
        .map(|&w| relaxation_rate(Transition::ZeroOne, w, params))
        .collect();
    let gamma21: Vec<f64> = omega_grid
        .iter()
        .map(|&w| relaxation_rate(Transition::OneTwo, w, params))
        .collect();
    let fwhm = if params.n_points >= 2 {
        profile_fwhm(params.n_points, params.omega_lambda())?
    } else {
        f64::INFINITY
    };
    Ok(RateProfile {
        omega: omega_grid.to_vec(),
        gamma10,
        gamma21,
        omega_cen: params.omega_lambda(),
        fwhm,
    })
}

/// Center and FWHM of a sampled single-peak profile via linear interpolation
/// of the half-maximum crossings nearest the peak.
pub fn estimate_center_fwhm(omega: &[f64], gamma: &[f64]) -> Result<(f64, f64)> {
    let mut peak = 0;
    for (i, g) in gamma.iter().enumerate() {
        if *g > gamma[peak] {
            peak = i;
        }
    }
    let half = 0.5 * gamma[peak];
    if !(half > 0.0) {
        return Err(Error::IllConditionedFit("profile has no peak".into()));
    }
    let cross = |i_out: usize, i_in: usize| -> f64 {
        let (g0, g1) = (gamma[i_out], gamma[i_in]);
        let (w0, w1) = (omega[i_out], omega[i_in]);
        w0 + (half - g0) / (g1 - g0) * (w1 - w0)
    };
    let mut lo = None;
    for i in (0..peak).rev() {
        if gamma[i] <= half {
            lo = Some(cross(i, i + 1));
            break;
        }
    }
    let mut hi = None;
    for (i, g) in gamma.iter().enumerate().skip(peak + 1) {
        if *g <= half {
            hi = Some(cross(i, i - 1));
            break;
        }
    }
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok((0.5 * (lo + hi), hi - lo)),
        _ => Err(Error::IllConditionedFit(
            "profile does not cross half maximum inside the sampled window".into(),
        )),
    }
}
