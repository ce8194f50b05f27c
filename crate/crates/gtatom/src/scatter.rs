//! Two-level (|0>-|1>) scattering of a coherent probe in an open waveguide.
//!
//! The forward model for all single-tone spectroscopy: a resonant two-level
//! scatterer transmits
//!
//! ```text
//! t = 1 - r0 (1 - i d/g) / (1 + (d/g)^2 + Op^2 / (G10 g))
//! ```
//!
//! with detuning `d = omega_p - omega10`, total decoherence
//! `g = G10/2 + Gphi`, and `r0 = G10 / (2 g)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::device::{self, DeviceParams, Transition};
use crate::error::{Error, Result};

/// Parameters of the driven two-level scatterer. All rates angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    /// Transition frequency.
    pub omega10: f64,
    /// Radiative relaxation rate.
    pub gamma10: f64,
    /// Dephasing rate (pure dephasing plus nonradiative decay).
    pub gamma_phi: f64,
    /// Probe Rabi frequency.
    pub omega_p: f64,
}

impl TwoLevelParams {
    /// Total decoherence rate `g = G10/2 + Gphi`.
    pub fn decoherence(&self) -> f64 {
        0.5 * self.gamma10 + self.gamma_phi
    }

    /// On-resonance reflectance amplitude `r0 = G10/(2 g)`, in [0, 1].
    pub fn r0(&self) -> f64 {
        let g = self.decoherence();
        if g > 0.0 {
            0.5 * self.gamma10 / g
        } else {
            0.0
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma10 >= 0.0) || !(self.gamma_phi >= 0.0) {
            return Err(Error::invalid_param("rates must be nonnegative"));
        }
        Ok(())
    }
}

/// Complex transmission of the probe at `probe_omega`.
///
/// A fully decoupled scatterer (`gamma10 = 0`) transmits unity; otherwise the
/// total decoherence must be positive.
pub fn transmission(probe_omega: f64, p: &TwoLevelParams) -> Result<Complex64> {
    p.validate()?;
    let g = p.decoherence();
    if !(g > 0.0) {
        return Err(Error::invalid_param("total decoherence must be positive"));
    }
    if p.gamma10 == 0.0 {
        // r0 = 0 and the saturation term diverges: a decoupled scatterer
        return Ok(Complex64::new(1.0, 0.0));
    }
    let d = (probe_omega - p.omega10) / g;
    let sat = p.omega_p * p.omega_p / (p.gamma10 * g);
    let denom = 1.0 + d * d + sat;
    let num = Complex64::new(1.0, -d) * p.r0();
    Ok(Complex64::new(1.0, 0.0) - num / denom)
}

/// On-resonance transmittance `T = |t|^2` for each probe power, with the
/// probe Rabi frequency mapped through `Omega_p = sqrt(2) k10 sqrt(P)`.
pub fn transmittance_on_resonance(
    p: &TwoLevelParams,
    powers_w: &[f64],
    k10: f64,
) -> Result<Vec<f64>> {
    powers_w
        .iter()
        .map(|&power| {
            let omega_p = device::rabi_from_power(k10, power)?;
            let t = transmission(p.omega10, &TwoLevelParams { omega_p, ..*p })?;
            Ok(t.norm_sqr())
        })
        .collect()
}

/// Flux-resolved single-tone spectroscopy map.
#[derive(Debug, Clone)]
pub struct SpectroscopyMap {
    pub flux: Vec<f64>,
    /// Probe angular frequency grid (rad/s).
    pub probe_omega: Vec<f64>,
    /// `t[i][j]` at `(flux[i], probe_omega[j])`.
    pub t: Vec<Vec<Complex64>>,
}

/// Synthesize a spectroscopy map: for each flux the transition frequency and
/// its frequency-dependent relaxation rate come from the device model, the
/// dephasing rate is a fixed per-run input, and the probe row follows the
/// two-level transmission. The background is unity.
pub fn spectroscopy_map(
    device: &DeviceParams,
    flux_grid: &[f64],
    probe_grid: &[f64],
    gamma_phi: f64,
    omega_p: f64,
) -> Result<SpectroscopyMap> {
    if flux_grid.is_empty() || probe_grid.is_empty() {
        return Err(Error::invalid_param("spectroscopy grids must be nonempty"));
    }
    if flux_grid.windows(2).any(|w| w[0] >= w[1]) || probe_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_param(
            "spectroscopy grids must be strictly increasing",
        ));
    }
    let t: Vec<Vec<Complex64>> = flux_grid
        .par_iter()
        .map(|&flux| -> Result<Vec<Complex64>> {
            let (omega10, _) = device.transition_frequencies_at(flux)?;
            let gamma10 = device::relaxation_rate(Transition::ZeroOne, omega10, device);
            let p = TwoLevelParams {
                omega10,
                gamma10,
                gamma_phi,
                omega_p,
            };
            probe_grid.iter().map(|&w| transmission(w, &p)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(SpectroscopyMap {
        flux: flux_grid.to_vec(),
        probe_omega: probe_grid.to_vec(),
        t,
    })
}

impl SpectroscopyMap {
    /// Write as CSV with header `flux_phi0,probe_freq_hz,re_t,im_t`.
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["flux_phi0", "probe_freq_hz", "re_t", "im_t"])?;
        for (flux, row) in self.flux.iter().zip(&self.t) {
            for (omega, t) in self.probe_omega.iter().zip(row) {
                w.serialize((*flux, crate::units::hz_from_angular(*omega), t.re, t.im))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn params(gamma10: f64, gamma_phi: f64, omega_p: f64) -> TwoLevelParams {
        TwoLevelParams {
            omega10: units::angular_from_ghz(5.75),
            gamma10,
            gamma_phi,
            omega_p,
        }
    }

    #[test]
    fn resonant_weak_probe_extinguishes() {
        let p = params(units::angular_from_hz(25e6), 0.0, 0.0);
        let t = transmission(p.omega10, &p).unwrap();
        assert_abs_diff_eq!(t.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn residual_transmission_with_dephasing() {
        // Gphi = G10/2 leaves t = Gphi/(Gphi + G10/2) = 1/2 on resonance
        let g = units::angular_from_hz(25e6);
        let p = params(g, 0.5 * g, 0.0);
        let t = transmission(p.omega10, &p).unwrap();
        assert_relative_eq!(t.re, 0.5, max_relative = 1e-12);
        assert_abs_diff_eq!(t.im, 0.0);
    }

    #[test]
    fn far_detuned_probe_passes() {
        let p = params(units::angular_from_hz(25e6), 0.0, 0.0);
        let t = transmission(p.omega10 + 1e6 * p.gamma10, &p).unwrap();
        assert_relative_eq!(t.norm(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn saturation_restores_transmission() {
        let g = units::angular_from_hz(25e6);
        let p = params(g, 0.0, 1e3 * g);
        let t = transmission(p.omega10, &p).unwrap();
        assert_relative_eq!(t.norm(), 1.0, max_relative = 1e-5);
    }

    #[test]
    fn resonant_transmission_is_real() {
        let p = params(1.0e8, 0.3e8, 0.4e8);
        let t = transmission(p.omega10, &p).unwrap();
        assert_eq!(t.im, 0.0);
    }

    #[test]
    fn decoupled_scatterer_is_transparent() {
        let p = params(0.0, 0.4e8, 0.0);
        assert_eq!(transmission(p.omega10, &p).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn zero_decoherence_is_domain_error() {
        let p = params(0.0, 0.0, 0.0);
        assert!(transmission(p.omega10, &p).is_err());
        let p = params(1.0e8, -1.0, 0.0);
        assert!(transmission(p.omega10, &p).is_err());
    }

    #[test]
    fn weak_probe_limit_is_complex_lorentzian() {
        // With Op^2/(G10 g) < 1e-6 the lineshape is 1 - r0 g/(g + i d)
        let g10 = 1.0e8;
        let gphi = 0.35e8;
        let p = params(g10, gphi, 0.0);
        let g = p.decoherence();
        let omega_p = (1e-7 * g10 * g).sqrt();
        let p = TwoLevelParams { omega_p, ..p };
        for i in -100..=100 {
            let d = 6.0 * g * i as f64 / 100.0;
            let t = transmission(p.omega10 + d, &p).unwrap();
            let lorentz =
                Complex64::new(1.0, 0.0) - p.r0() * g / Complex64::new(g, d);
            assert!(
                (t - lorentz).norm() < 1e-5 * lorentz.norm().max(1e-3),
                "detuning {d}: {t} vs {lorentz}"
            );
        }
    }

    #[test]
    fn transmittance_monotone_in_power() {
        let p = params(1.2e8, 0.2e8, 0.0);
        let k10 = 2.0e8;
        let powers: Vec<f64> = (0..60).map(|i| 1e-12 * (i as f64).powi(2)).collect();
        let t = transmittance_on_resonance(&p, &powers, k10).unwrap();
        for w in t.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "transmittance not monotone: {w:?}");
        }
        // zero power leaves only the residual transmission (Gphi / g)^2
        let residual = (p.gamma_phi / p.decoherence()).powi(2);
        assert_relative_eq!(t[0], residual, max_relative = 1e-12);
        let lossless = TwoLevelParams { gamma_phi: 0.0, ..p };
        let t0 = transmittance_on_resonance(&lossless, &[0.0], k10).unwrap()[0];
        assert_abs_diff_eq!(t0, 0.0, epsilon = 1e-12);
        let t_inf =
            transmittance_on_resonance(&p, &[1e6], k10).unwrap()[0];
        assert_relative_eq!(t_inf, 1.0, max_relative = 1e-5);
    }

    #[test]
    fn map_matches_single_point_evaluation() {
        let device = DeviceParams {
            ej_max_ghz: 32.13,
            ec_ghz: 0.460,
            n_points: 3,
            spacing_m: 0.02054,
            eps_eff: 6.45,
            gamma1_max: units::angular_from_hz(25e6),
            flux_phi0: 0.0,
        };
        let flux: Vec<f64> = (0..21).map(|i| 0.30 + 0.012 * i as f64).collect();
        let probe: Vec<f64> = (0..101)
            .map(|i| units::angular_from_ghz(4.5 + 3.0 * i as f64 / 100.0))
            .collect();
        let gamma_phi = units::angular_from_hz(2e5);
        let map = spectroscopy_map(&device, &flux, &probe, gamma_phi, 0.0).unwrap();

        // consistency of one cell against the 1d operation
        let (omega10, _) = device.transition_frequencies_at(flux[7]).unwrap();
        let gamma10 = device::relaxation_rate(Transition::ZeroOne, omega10, &device);
        let p = TwoLevelParams {
            omega10,
            gamma10,
            gamma_phi,
            omega_p: 0.0,
        };
        let direct = transmission(probe[13], &p).unwrap();
        assert_eq!(map.t[7][13], direct);

        // deepest extinction where omega10 is closest to omega_lambda
        let wl = device.omega_lambda();
        let mut deepest = (0, f64::INFINITY);
        let mut closest = (0, f64::INFINITY);
        for (i, &f) in flux.iter().enumerate() {
            let min_abs = map.t[i]
                .iter()
                .map(|t| t.norm())
                .fold(f64::INFINITY, f64::min);
            if min_abs < deepest.1 {
                deepest = (i, min_abs);
            }
            let (w10, _) = device.transition_frequencies_at(f).unwrap();
            let dist = (w10 - wl).abs();
            if dist < closest.1 {
                closest = (i, dist);
            }
        }
        assert_eq!(deepest.0, closest.0);
    }

    #[test]
    fn map_near_interference_zero_is_transparent() {
        let device = DeviceParams {
            ej_max_ghz: 32.13,
            ec_ghz: 0.460,
            n_points: 3,
            spacing_m: 0.02054,
            eps_eff: 6.45,
            gamma1_max: units::angular_from_hz(25e6),
            flux_phi0: 0.0,
        };
        // flux such that omega10 sits at the F_3 zero at (4/3) omega_lambda
        let wl = device.omega_lambda();
        let target_ghz = units::ghz_from_angular(4.0 / 3.0 * wl);
        let ej = (target_ghz + device.ec_ghz).powi(2) / (8.0 * device.ec_ghz);
        let flux = (ej / device.ej_max_ghz).acos() / std::f64::consts::PI;
        let probe: Vec<f64> = (0..51)
            .map(|i| wl * (4.0 / 3.0 + (i as f64 - 25.0) * 1e-4))
            .collect();
        let map = spectroscopy_map(
            &device,
            &[flux - 1e-9, flux],
            &probe,
            units::angular_from_hz(2e5),
            0.0,
        )
        .unwrap();
        for t in &map.t[1] {
            assert!((t.norm() - 1.0).abs() < 1e-4, "|t| = {}", t.norm());
        }
    }

    proptest! {
        #[test]
        fn transmission_is_passive(
            gamma10 in 1e4f64..1e9,
            gamma_phi in 0.0f64..1e9,
            omega_p in 0.0f64..1e9,
            detuning in -1e10f64..1e10,
        ) {
            let p = TwoLevelParams {
                omega10: 1e10,
                gamma10,
                gamma_phi,
                omega_p,
            };
            let t = transmission(p.omega10 + detuning, &p).unwrap();
            prop_assert!(t.norm() <= 1.0 + 1e-12);
            prop_assert!((t - Complex64::new(1.0, 0.0)).norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn transmission_conjugate_symmetry(
            gamma10 in 1e4f64..1e9,
            gamma_phi in 0.0f64..1e9,
            omega_p in 0.0f64..1e9,
            detuning in 0.0f64..1e10,
        ) {
            let p = TwoLevelParams {
                omega10: 1e10,
                gamma10,
                gamma_phi,
                omega_p,
            };
            let plus = transmission(p.omega10 + detuning, &p).unwrap();
            let minus = transmission(p.omega10 - detuning, &p).unwrap();
            prop_assert!((plus + minus).im.abs() < 1e-12);
        }
    }
}
