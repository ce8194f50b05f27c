//! Cross-module pipelines: synthetic data generated by one subsystem and
//! recovered by another.

mod common;

use gtatom::device::{self, DeviceParams, RateProfile, Transition};
use gtatom::fit::{self, FreeParams, TwoLevelInit};
use gtatom::lambda::{self, ThreeLevelRates};
use gtatom::scatter::{self, TwoLevelParams};
use gtatom::spectrum::Spectrum;
use gtatom::units;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mhz(v: f64) -> f64 {
    units::angular_from_mhz(v)
}

fn table_3cp() -> DeviceParams {
    DeviceParams {
        ej_max_ghz: 32.13,
        ec_ghz: 0.460,
        n_points: 3,
        spacing_m: 0.02054,
        eps_eff: 6.45,
        gamma1_max: units::angular_from_hz(25e6),
        flux_phi0: 0.0,
    }
}

/// Spectra generated from the device rate profile, fitted one by one, must
/// reproduce the interference-factor shape.
#[test]
fn fitted_sweep_recovers_rate_profile() {
    let device = table_3cp();
    let wl = device.omega_lambda();
    let gamma_phi = mhz(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(314);

    let mut centers = Vec::new();
    let mut rates = Vec::new();
    for i in 0..41 {
        let omega10 = wl * (0.72 + 0.56 * i as f64 / 40.0);
        let gamma10 = device::relaxation_rate(Transition::ZeroOne, omega10, &device);
        if gamma10 < mhz(0.5) {
            continue; // skip nearly decoupled bias points
        }
        let truth = TwoLevelParams {
            omega10,
            gamma10,
            gamma_phi,
            omega_p: 0.0,
        };
        let g = truth.decoherence();
        let omega: Vec<f64> = (0..241)
            .map(|k| omega10 + g * (-8.0 + 16.0 * k as f64 / 240.0))
            .collect();
        let t: Vec<Complex64> = omega
            .iter()
            .map(|&w| {
                scatter::transmission(w, &truth).unwrap() + common::complex_noise(&mut rng, 0.01)
            })
            .collect();
        let spectrum = Spectrum::new(omega, t).unwrap();
        let init = TwoLevelInit::auto(&spectrum).unwrap();
        let fitted = fit::fit_two_level(&spectrum, init).unwrap();
        centers.push(fitted.params.omega10);
        rates.push(fitted.params.gamma10);
    }
    assert!(centers.len() > 25, "too few usable bias points");

    let profile = RateProfile::from_samples(centers, rates).unwrap();
    let analytic = device::profile_fwhm(3, wl).unwrap();
    let rel = (profile.fwhm - analytic).abs() / analytic;
    assert!(
        rel < 0.03,
        "recovered width {:.4} GHz vs analytic {:.4} GHz ({:.1}%)",
        units::ghz_from_angular(profile.fwhm),
        units::ghz_from_angular(analytic),
        100.0 * rel
    );
    assert!((profile.omega_cen - wl).abs() < 0.02 * wl);
}

fn table_3cp_low(omega_p_mhz: f64) -> ThreeLevelRates {
    ThreeLevelRates {
        gamma21: mhz(13.6),
        gamma20: 0.0,
        gamma10: mhz(1.07),
        gamma2_phi: mhz(0.94),
        gamma1_phi: mhz(0.35),
        omega_c: mhz(3.59),
        omega_p: mhz(omega_p_mhz),
        delta_c: 0.0,
        delta_p: 0.0,
    }
}

fn synth_map(
    truth: &ThreeLevelRates,
    scale: f64,
    noise: f64,
    seed: u64,
) -> gtatom::spectrum::EitMap {
    let dc: Vec<f64> = (0..11).map(|i| mhz(-8.0 + 16.0 * i as f64 / 10.0)).collect();
    let dp: Vec<f64> = (0..41).map(|i| mhz(-25.0 + 50.0 * i as f64 / 40.0)).collect();
    let mut map = lambda::eit_map(truth, &dc, &dp, scale).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in &mut map.t {
        for t in row {
            *t += common::complex_noise(&mut rng, noise);
        }
    }
    map
}

/// Master-equation map fit: recover the pump strength and the strong decay
/// rate from a noisy synthetic map, with the independently measured rates
/// held fixed.
#[test]
fn master_equation_fit_recovers_rates() {
    let truth = table_3cp_low(0.1);
    let map = synth_map(&truth, 1.0, 0.005, 99);
    let mut template = truth;
    template.gamma21 = mhz(10.0);
    template.omega_c = mhz(5.0);
    let free = FreeParams {
        gamma21: true,
        omega_c: true,
        scale: true,
        ..FreeParams::default()
    };
    let fitted = fit::fit_master_equation(&map, &template, &free, 1.0).unwrap();
    assert!(
        (fitted.rates.gamma21 - truth.gamma21).abs() < 0.05 * truth.gamma21,
        "gamma21 {:.4} MHz",
        units::mhz_from_angular(fitted.rates.gamma21)
    );
    assert!(
        (fitted.rates.omega_c - truth.omega_c).abs() < 0.05 * truth.omega_c,
        "omega_c {:.4} MHz",
        units::mhz_from_angular(fitted.rates.omega_c)
    );
    // beta against the fixed gamma10, the tabulated 12.7
    let beta = fitted.rates.gamma21 / fitted.rates.gamma10;
    assert!((beta - 12.7).abs() < 0.05 * 12.7, "beta {beta:.3}");
}

/// A map attenuated by a known factor comes back with that scale.
#[test]
fn master_equation_fit_recovers_scale() {
    let truth = table_3cp_low(0.1);
    let map = synth_map(&truth, 0.8, 0.002, 100);
    let free = FreeParams {
        scale: true,
        ..FreeParams::default()
    };
    let fitted = fit::fit_master_equation(&map, &truth, &free, 1.0).unwrap();
    assert!(
        (fitted.scale - 0.8).abs() < 0.01,
        "scale {:.4}",
        fitted.scale
    );
}
