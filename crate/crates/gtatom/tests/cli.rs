//! End-to-end command-line tests against the built binary.

mod common;

use std::path::PathBuf;
use std::process::Command;

use gtatom::scatter::{self, TwoLevelParams};
use gtatom::spectrum::{EitMap, Spectrum};
use gtatom::units;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gtatom"))
}

fn presets(name: &str) -> String {
    format!("{}/presets/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("gtatom_cli_tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn rate_profile_reports_the_six_point_width() {
    let dir = workdir("rate_profile");
    let out = dir.join("profile");
    let status = bin()
        .args([
            "rate-profile",
            "--device",
            &presets("6cp.json"),
            "--freq",
            "4.5:7:301",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let text = std::fs::read_to_string(dir.join("profile.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "freq_hz,gamma10_hz,gamma21_hz,center_hz,fwhm_hz");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let fwhm_hz: f64 = first[4].parse().unwrap();
    assert!(
        (fwhm_hz - 853e6).abs() <= 0.01 * 853e6,
        "fwhm column reports {fwhm_hz:.4e}"
    );
    // rates obey the ladder relation in the file as well
    let g10: f64 = first[1].parse().unwrap();
    let g21: f64 = first[2].parse().unwrap();
    assert!((g21 - 2.0 * g10).abs() <= 1e-9 * g21.abs().max(1.0));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("profile_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "rate-profile");
    assert!((manifest["results"]["fwhm_hz"].as_f64().unwrap() - fwhm_hz).abs() < 1.0);
}

#[test]
fn classify_prints_the_threshold() {
    let dir = workdir("classify");
    let out = dir.join("verdict");
    let output = bin()
        .args([
            "classify",
            "--params",
            &presets("tableII_3cp_low.json"),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("EIT"), "stdout: {stdout}");
    assert!(stdout.contains("7.74"), "stdout: {stdout}");

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(doc["regime"], "EIT");
    assert!((doc["omega_t_mhz"].as_f64().unwrap() - 7.74).abs() < 1e-9);

    // the high-power row lands on the other side
    let output = bin()
        .args([
            "classify",
            "--params",
            &presets("tableII_3cp_high.json"),
            "--out",
            dir.join("verdict_high").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("ATS"), "stdout: {stdout}");
}

#[test]
fn sim_eit_map_roundtrips_and_shows_the_ridge() {
    let dir = workdir("sim_eit");
    let out = dir.join("map");
    let status = bin()
        .args([
            "sim-eit",
            "--params",
            &presets("tableII_3cp_low.json"),
            "--dc",
            "-4:4:9",
            "--dp",
            "-20:20:81",
            "--linecut-dc",
            "0",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let map = EitMap::read_csv(dir.join("map.csv")).unwrap();
    assert_eq!(map.delta_c.len(), 9);
    assert_eq!(map.delta_p.len(), 81);
    // the two-photon point on an off-center row beats the absorbing shoulder
    let row = 2; // delta_c = -2 MHz
    let dc = map.delta_c[row];
    let near = |target: f64| {
        map.delta_p
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .unwrap()
            .0
    };
    let ridge = map.t[row][near(dc)].norm();
    let shoulder = map.t[row][near(dc + units::angular_from_mhz(3.0))]
        .norm()
        .min(map.t[row][near(dc - units::angular_from_mhz(3.0))].norm());
    assert!(ridge > shoulder, "ridge {ridge} vs shoulder {shoulder}");

    let cut = Spectrum::read_csv(dir.join("map_linecut.csv")).unwrap();
    assert_eq!(cut.len(), 81);
    let mid = map.delta_c.len() / 2;
    for (a, b) in cut.t.iter().zip(&map.t[mid]) {
        assert_eq!(a, b, "linecut must match the central map row exactly");
    }
}

#[test]
fn fit_eq1_recovers_parameters_from_csv() {
    let dir = workdir("fit_eq1");
    let truth = TwoLevelParams {
        omega10: units::angular_from_ghz(5.75),
        gamma10: units::angular_from_hz(25e6),
        gamma_phi: units::angular_from_hz(2e6),
        omega_p: 0.0,
    };
    let g = truth.decoherence();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let omega: Vec<f64> = (0..241)
        .map(|i| truth.omega10 + g * (-7.0 + 14.0 * i as f64 / 240.0))
        .collect();
    let t: Vec<Complex64> = omega
        .iter()
        .map(|&w| scatter::transmission(w, &truth).unwrap() + common::complex_noise(&mut rng, 0.005))
        .collect();
    let input = dir.join("spectrum.csv");
    Spectrum::new(omega, t).unwrap().write_csv(&input).unwrap();

    let out = dir.join("fit");
    let status = bin()
        .args([
            "fit-eq1",
            "--input",
            input.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fit.json")).unwrap()).unwrap();
    let g10 = doc["gamma10_hz"].as_f64().unwrap();
    assert!((g10 - 25e6).abs() < 0.02 * 25e6, "gamma10_hz {g10:.4e}");
    let gphi = doc["gamma_phi_hz"].as_f64().unwrap();
    assert!((gphi - 2e6).abs() < 0.05 * 2e6, "gamma_phi_hz {gphi:.4e}");
}

#[test]
fn saturation_fit_from_csv() {
    let dir = workdir("saturation");
    let gamma10 = units::angular_from_hz(25e6);
    let gamma_phi = units::angular_from_hz(1e6);
    let k10 = 2.2e9;
    let mut rows = String::from("power_w,transmittance\n");
    for i in 0..22 {
        let p = 1e-5 * 10f64.powf(i as f64 / 4.0);
        let omega_p = gtatom::device::rabi_from_power(k10, p).unwrap();
        let t = scatter::transmission(
            0.0,
            &TwoLevelParams {
                omega10: 0.0,
                gamma10,
                gamma_phi,
                omega_p,
            },
        )
        .unwrap();
        rows.push_str(&format!("{},{}\n", p, t.norm_sqr()));
    }
    let input = dir.join("points.csv");
    std::fs::write(&input, rows).unwrap();

    let out = dir.join("sat");
    let status = bin()
        .args([
            "saturation-fit",
            "--input",
            input.to_str().unwrap(),
            "--gamma10-hz",
            "25e6",
            "--gamma-phi-hz",
            "1e6",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sat.json")).unwrap()).unwrap();
    let k = doc["k10_hz_per_sqrt_w"].as_f64().unwrap();
    let expected = units::hz_from_angular(k10);
    assert!((k - expected).abs() < 1e-4 * expected, "k10 {k:.6e}");
}

#[test]
fn ats_extract_from_linecut_files() {
    let dir = workdir("ats_extract");
    let k21 = 3.0e9;
    let gamma = units::angular_from_hz(1.2e6);
    let omega: Vec<f64> = (-400..=400)
        .map(|i| units::angular_from_hz(1e5) * i as f64)
        .collect();
    let mut args: Vec<String> = vec!["ats-extract".into()];
    for i in 1..=5u32 {
        let p = 2e-4 * (i * i) as f64;
        let split = gtatom::device::rabi_from_power(k21, p).unwrap();
        let c = 0.3f64.sqrt() * gamma;
        let t: Vec<Complex64> = omega
            .iter()
            .map(|&w| {
                Complex64::new(
                    1.0 - gtatom::fit::ats_absorption(w, c, gamma, 0.5 * split),
                    0.0,
                )
            })
            .collect();
        let path = dir.join(format!("cut{i}.csv"));
        Spectrum::new(omega.clone(), t).unwrap().write_csv(&path).unwrap();
        args.push("--linecut".into());
        args.push(format!("{p}:{}", path.to_str().unwrap()));
    }
    let out = dir.join("ats");
    args.push("--out".into());
    args.push(out.to_str().unwrap().into());
    let status = bin().args(&args).status().unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("ats.json")).unwrap()).unwrap();
    let k = doc["k21_hz_per_sqrt_w"].as_f64().unwrap();
    let expected = units::hz_from_angular(k21);
    assert!((k - expected).abs() < 1e-3 * expected, "k21 {k:.6e}");
}

#[test]
fn fit_eit_from_map_csv() {
    let dir = workdir("fit_eit");
    let out_map = dir.join("map");
    let status = bin()
        .args([
            "sim-eit",
            "--params",
            &presets("tableII_3cp_low.json"),
            "--dc",
            "-6:6:7",
            "--dp",
            "-18:18:25",
            "--scale",
            "0.8",
            "--out",
            out_map.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let out = dir.join("fit");
    let status = bin()
        .args([
            "fit-eit",
            "--map",
            dir.join("map.csv").to_str().unwrap(),
            "--params",
            &presets("tableII_3cp_low.json"),
            "--free",
            "scale",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fit.json")).unwrap()).unwrap();
    let scale = doc["scale"].as_f64().unwrap();
    assert!((scale - 0.8).abs() < 1e-3, "scale {scale}");
    let beta = doc["beta"].as_f64().unwrap();
    assert!((beta - 13.6 / 1.07).abs() < 1e-6, "beta {beta}");
}

#[test]
fn mwnet_sweep_writes_profile_and_points() {
    let dir = workdir("mwnet_sweep");
    let out = dir.join("sweep");
    let status = bin()
        .args([
            "mwnet-sweep",
            "--netlist",
            &presets("3cp_ideal.net"),
            "--lmin-nh",
            "11.5",
            "--lmax-nh",
            "30",
            "--lcount",
            "10",
            "--window",
            "4.2:7.3:401",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let profile = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(profile.lines().count() >= 10);
    let points = std::fs::read_to_string(dir.join("sweep_points.csv")).unwrap();
    assert_eq!(points.lines().count(), 11); // header plus one row per inductance
}

#[test]
fn numerical_failures_exit_two() {
    let dir = workdir("exit_codes");
    // a netlist whose sweep cannot find any resonance: no island
    let netlist = dir.join("bare.net");
    std::fs::write(&netlist, "ports a b 50\ncpw 0.02 50 1.18e8 a b\n").unwrap();
    let status = bin()
        .args([
            "mwnet-sweep",
            "--netlist",
            netlist.to_str().unwrap(),
            "--lmin-nh",
            "10",
            "--lmax-nh",
            "20",
            "--lcount",
            "3",
            "--out",
            dir.join("x").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1)); // malformed model: usage error

    // flat spectrum: the lineshape fit degenerates (numerical failure)
    let omega: Vec<f64> = (0..64).map(|i| 1e9 + 1e6 * i as f64).collect();
    let t = vec![Complex64::new(1.0, 0.0); 64];
    let input = dir.join("flat.csv");
    Spectrum::new(omega, t).unwrap().write_csv(&input).unwrap();
    let status = bin()
        .args([
            "fit-eq1",
            "--input",
            input.to_str().unwrap(),
            "--out",
            dir.join("y").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    let code = status.code();
    assert!(
        code == Some(2) || code == Some(0),
        "flat-fit exit code {code:?}"
    );

    // malformed CSV: usage error with a line number on stderr
    std::fs::write(dir.join("bad.csv"), "freq_hz,re_t,im_t\n1e9,zzz,0\n").unwrap();
    let output = bin()
        .args([
            "fit-eq1",
            "--input",
            dir.join("bad.csv").to_str().unwrap(),
            "--out",
            dir.join("z").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}
