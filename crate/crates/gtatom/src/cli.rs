//! Command-line front end: simulation, fitting, and classification
//! subcommands with CSV/JSON outputs and a JSON run manifest per invocation.
//!
//! Frequency grids are written `min:max:count` in GHz; detuning grids use
//! the same syntax in MHz (matching the units of the rate files). All grids
//! are converted to angular units at this boundary. Exit codes: 0 success,
//! 1 usage or input error, 2 numerical failure. The `GA_THREADS`
//! environment variable caps sweep parallelism.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::device::{self, DeviceParams};
use crate::error::{Error, Result};
use crate::fit::{self, FreeParams, TwoLevelInit};
use crate::lambda::{self, Regime, ThreeLevelRates};
use crate::mwnet::{self, NodalNetwork};
use crate::scatter;
use crate::spectrum::{EitMap, Spectrum};
use crate::units;

#[derive(Parser, Debug)]
#[command(
    name = "gtatom",
    version,
    about = "Waveguide-coupled giant-transmon simulation and analysis"
)]
struct Cli {
    /// Seed for multi-start jitter in the fitting pipelines.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic relaxation-rate profile of a device.
    RateProfile {
        /// Device parameter file (JSON).
        #[arg(long)]
        device: PathBuf,
        /// Frequency grid, min:max:count in GHz.
        #[arg(long, default_value = "4:8:401", allow_hyphen_values = true)]
        freq: String,
        /// Output path prefix.
        #[arg(long)]
        out: String,
    },
    /// Synthetic single-tone spectroscopy map over flux and probe frequency.
    Sim2level {
        #[arg(long)]
        device: PathBuf,
        /// Flux grid, min:max:count in units of the flux quantum.
        #[arg(long, default_value = "-0.45:0.45:91", allow_hyphen_values = true)]
        flux: String,
        /// Probe grid, min:max:count in GHz.
        #[arg(long, default_value = "4:8:401", allow_hyphen_values = true)]
        probe: String,
        /// Dephasing rate (Hz).
        #[arg(long, default_value_t = 0.0)]
        gamma_phi_hz: f64,
        /// Probe Rabi frequency (Hz).
        #[arg(long, default_value_t = 0.0)]
        omega_p_hz: f64,
        #[arg(long)]
        out: String,
    },
    /// Steady-state pump-probe transmission map.
    SimEit {
        /// Three-level rate file (JSON, MHz fields).
        #[arg(long)]
        params: PathBuf,
        /// Pump detuning grid, min:max:count in MHz.
        #[arg(long, default_value = "-20:20:81", allow_hyphen_values = true)]
        dc: String,
        /// Probe detuning grid, min:max:count in MHz.
        #[arg(long, default_value = "-20:20:81", allow_hyphen_values = true)]
        dp: String,
        /// Real scale factor applied to the map.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Also write a 1d linecut at this pump detuning (MHz).
        #[arg(long, allow_hyphen_values = true)]
        linecut_dc: Option<f64>,
        #[arg(long)]
        out: String,
    },
    /// Fit the two-level lineshape to a spectrum CSV.
    FitEq1 {
        /// Input spectrum (freq_hz, re_t, im_t).
        #[arg(long)]
        input: PathBuf,
        /// Hold the probe strength fixed at this value (Hz).
        #[arg(long, default_value_t = 0.0)]
        omega_p_hz: f64,
        /// Fit the probe strength instead of holding it fixed.
        #[arg(long)]
        fit_omega_p: bool,
        #[arg(long)]
        out: String,
    },
    /// Fit the master-equation map model to a map CSV.
    FitEit {
        /// Map data (dc_hz, dp_hz, re_t, im_t[, abs_t]).
        #[arg(long)]
        map: PathBuf,
        /// Rate file providing fixed values and initial guesses.
        #[arg(long)]
        params: PathBuf,
        /// Comma-separated free parameters out of
        /// gamma21,gamma20,gamma2phi,gamma1phi,omega_c,scale.
        #[arg(long, default_value = "gamma21,omega_c,scale")]
        free: String,
        /// Initial scale factor.
        #[arg(long, default_value_t = 1.0)]
        scale_init: f64,
        #[arg(long)]
        out: String,
    },
    /// Extract doublet splittings vs pump power and the coupling constant.
    AtsExtract {
        /// Repeatable power:path pair, e.g. --linecut 1e-9:cut1.csv.
        #[arg(long, required = true)]
        linecut: Vec<String>,
        #[arg(long)]
        out: String,
    },
    /// Fit the saturation curve T(P) for the coupling constant k10.
    SaturationFit {
        /// Input CSV (power_w, transmittance).
        #[arg(long)]
        input: PathBuf,
        /// Relaxation rate (Hz), measured independently.
        #[arg(long)]
        gamma10_hz: f64,
        /// Dephasing rate (Hz), measured independently.
        #[arg(long, default_value_t = 0.0)]
        gamma_phi_hz: f64,
        #[arg(long)]
        out: String,
    },
    /// Preprocess a spectrum and run transparency-model selection.
    ModelSelect {
        /// Input spectrum (freq_hz, re_t, im_t); the frequency axis is the
        /// probe detuning.
        #[arg(long)]
        input: PathBuf,
        /// Rotation applied to undo propagation delay (radians).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phase: f64,
        /// Amplitude normalization.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: String,
    },
    /// Sweep the SQUID inductance of a netlist and extract a rate profile.
    MwnetSweep {
        /// Netlist file.
        #[arg(long)]
        netlist: PathBuf,
        /// Smallest SQUID inductance (nH).
        #[arg(long)]
        lmin_nh: f64,
        /// Largest SQUID inductance (nH).
        #[arg(long)]
        lmax_nh: f64,
        /// Number of inductance points.
        #[arg(long, default_value_t = 15)]
        lcount: usize,
        /// Frequency window, min:max:count in GHz.
        #[arg(long, default_value = "4.2:7.4:601", allow_hyphen_values = true)]
        window: String,
        /// Divide the extracted rates by the single-tap baseline, isolating
        /// the interference factor (output rates become dimensionless).
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: String,
    },
    /// Report the transparency threshold and regime for a rate file.
    Classify {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: String,
    },
}

/// Parse arguments, dispatch, and map failures onto exit codes.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn configure_threads() {
    let Some(n) = std::env::var("GA_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|n| *n > 0)
    else {
        return;
    };
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
}

/// `min:max:count` grid in the units handed in, scaled by `unit`.
fn parse_grid(spec: &str, unit: f64) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::invalid_param(format!(
            "grid must be min:max:count, got {spec:?}"
        )));
    }
    let min: f64 = parts[0]
        .parse()
        .map_err(|_| Error::invalid_param(format!("bad grid minimum {:?}", parts[0])))?;
    let max: f64 = parts[1]
        .parse()
        .map_err(|_| Error::invalid_param(format!("bad grid maximum {:?}", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::invalid_param(format!("bad grid count {:?}", parts[2])))?;
    if count < 2 {
        return Err(Error::invalid_param("grid count must be at least 2"));
    }
    if !(min < max) {
        return Err(Error::invalid_param("grid minimum must be below maximum"));
    }
    Ok((0..count)
        .map(|i| unit * (min + (max - min) * i as f64 / (count - 1) as f64))
        .collect())
}

const GHZ: f64 = 2.0 * std::f64::consts::PI * 1e9;
const MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;

struct Manifest {
    command: &'static str,
    seed: u64,
    inputs: serde_json::Value,
    outputs: Vec<String>,
    results: serde_json::Value,
}

impl Manifest {
    fn write(&self, prefix: &str) -> Result<()> {
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "results": self.results,
        });
        let path = format!("{prefix}_manifest.json");
        write_json_value(&path, &doc)
    }
}

fn write_json_value(path: &str, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid_param(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &str, value: &T) -> Result<()> {
    let doc = serde_json::to_value(value)
        .map_err(|e| Error::invalid_param(format!("serialization failed: {e}")))?;
    write_json_value(path, &doc)
}

fn write_profile_csv(path: &str, profile: &device::RateProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["freq_hz", "gamma10_hz", "gamma21_hz", "center_hz", "fwhm_hz"])?;
    for i in 0..profile.omega.len() {
        w.serialize((
            units::hz_from_angular(profile.omega[i]),
            units::hz_from_angular(profile.gamma10[i]),
            units::hz_from_angular(profile.gamma21[i]),
            units::hz_from_angular(profile.omega_cen),
            units::hz_from_angular(profile.fwhm),
        ))?;
    }
    w.flush()?;
    Ok(())
}

fn read_power_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let fields: Vec<&str> = record.iter().map(str::trim).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if idx == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "expected power_w,transmittance".into(),
            });
        }
        let p: f64 = fields[0].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad power {:?}", fields[0]),
        })?;
        let t: f64 = fields[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad transmittance {:?}", fields[1]),
        })?;
        out.push((p, t));
    }
    Ok(out)
}

fn rates_to_json(r: &ThreeLevelRates) -> serde_json::Value {
    json!({
        "gamma21_mhz": units::mhz_from_angular(r.gamma21),
        "gamma20_mhz": units::mhz_from_angular(r.gamma20),
        "gamma10_mhz": units::mhz_from_angular(r.gamma10),
        "gamma2phi_mhz": units::mhz_from_angular(r.gamma2_phi),
        "gamma1phi_mhz": units::mhz_from_angular(r.gamma1_phi),
        "omega_c_mhz": units::mhz_from_angular(r.omega_c),
        "omega_p_mhz": units::mhz_from_angular(r.omega_p),
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::RateProfile { device, freq, out } => {
            let params = DeviceParams::from_json_file(&device)?;
            let grid = parse_grid(&freq, GHZ)?;
            let profile = device::rate_profile(&params, &grid)?;
            let csv_path = format!("{out}.csv");
            write_profile_csv(&csv_path, &profile)?;
            Manifest {
                command: "rate-profile",
                seed,
                inputs: json!({ "device": device, "freq": freq }),
                outputs: vec![csv_path],
                results: json!({
                    "center_hz": units::hz_from_angular(profile.omega_cen),
                    "fwhm_hz": units::hz_from_angular(profile.fwhm),
                }),
            }
            .write(&out)
        }
        Command::Sim2level {
            device,
            flux,
            probe,
            gamma_phi_hz,
            omega_p_hz,
            out,
        } => {
            let params = DeviceParams::from_json_file(&device)?;
            let flux_grid = parse_grid(&flux, 1.0)?;
            let probe_grid = parse_grid(&probe, GHZ)?;
            let map = scatter::spectroscopy_map(
                &params,
                &flux_grid,
                &probe_grid,
                units::angular_from_hz(gamma_phi_hz),
                units::angular_from_hz(omega_p_hz),
            )?;
            let csv_path = format!("{out}.csv");
            map.write_csv(&csv_path)?;
            Manifest {
                command: "sim-2level",
                seed,
                inputs: json!({
                    "device": device, "flux": flux, "probe": probe,
                    "gamma_phi_hz": gamma_phi_hz, "omega_p_hz": omega_p_hz,
                }),
                outputs: vec![csv_path],
                results: json!({}),
            }
            .write(&out)
        }
        Command::SimEit {
            params,
            dc,
            dp,
            scale,
            linecut_dc,
            out,
        } => {
            let rates = ThreeLevelRates::from_json_file(&params)?;
            let dc_grid = parse_grid(&dc, MHZ)?;
            let dp_grid = parse_grid(&dp, MHZ)?;
            let map = lambda::eit_map(&rates, &dc_grid, &dp_grid, scale)?;
            let csv_path = format!("{out}.csv");
            map.write_csv(&csv_path)?;
            let mut outputs = vec![csv_path];
            if let Some(lc_mhz) = linecut_dc {
                let target = units::angular_from_mhz(lc_mhz);
                let row = dc_grid
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                    .map(|(i, _)| i)
                    .unwrap();
                let cut = Spectrum::new(dp_grid.clone(), map.t[row].clone())?;
                let cut_path = format!("{out}_linecut.csv");
                cut.write_csv(&cut_path)?;
                outputs.push(cut_path);
            }
            Manifest {
                command: "sim-eit",
                seed,
                inputs: json!({
                    "params": params, "dc": dc, "dp": dp, "scale": scale,
                    "linecut_dc_mhz": linecut_dc, "rates": rates_to_json(&rates),
                }),
                outputs,
                results: json!({
                    "omega_t_mhz": units::mhz_from_angular(lambda::threshold_drive(
                        rates.gamma21, rates.gamma20, rates.gamma2_phi,
                    )),
                }),
            }
            .write(&out)
        }
        Command::FitEq1 {
            input,
            omega_p_hz,
            fit_omega_p,
            out,
        } => {
            let spectrum = Spectrum::read_csv(&input)?;
            let init = TwoLevelInit::auto(&spectrum)?
                .with_probe(units::angular_from_hz(omega_p_hz), fit_omega_p);
            let fit = fit::fit_two_level(&spectrum, init)?;
            let json_path = format!("{out}.json");
            let doc = json!({
                "gamma10_hz": units::hz_from_angular(fit.params.gamma10),
                "gamma_phi_hz": units::hz_from_angular(fit.params.gamma_phi),
                "omega10_hz": units::hz_from_angular(fit.params.omega10),
                "omega_p_hz": units::hz_from_angular(fit.params.omega_p),
                "decoherence_hz": units::hz_from_angular(fit.decoherence),
                "r0": fit.r0,
                "report": fit.report,
            });
            write_json_value(&json_path, &doc)?;
            Manifest {
                command: "fit-eq1",
                seed,
                inputs: json!({
                    "input": input, "omega_p_hz": omega_p_hz, "fit_omega_p": fit_omega_p,
                }),
                outputs: vec![json_path],
                results: json!({
                    "gamma10_hz": units::hz_from_angular(fit.params.gamma10),
                    "gamma_phi_hz": units::hz_from_angular(fit.params.gamma_phi),
                    "omega10_hz": units::hz_from_angular(fit.params.omega10),
                }),
            }
            .write(&out)
        }
        Command::FitEit {
            map,
            params,
            free,
            scale_init,
            out,
        } => {
            let data = EitMap::read_csv(&map)?;
            let template = ThreeLevelRates::from_json_file(&params)?;
            let mask = FreeParams::parse(&free)?;
            let fitted = fit::fit_master_equation(&data, &template, &mask, scale_init)?;
            let json_path = format!("{out}.json");
            let doc = json!({
                "rates": rates_to_json(&fitted.rates),
                "scale": fitted.scale,
                "beta": if fitted.rates.gamma10 > 0.0 {
                    Some(fitted.rates.gamma21 / fitted.rates.gamma10)
                } else {
                    None
                },
                "report": fitted.report,
            });
            write_json_value(&json_path, &doc)?;
            Manifest {
                command: "fit-eit",
                seed,
                inputs: json!({
                    "map": map, "params": params, "free": free, "scale_init": scale_init,
                    "template": rates_to_json(&template),
                }),
                outputs: vec![json_path],
                results: json!({
                    "rates": rates_to_json(&fitted.rates),
                    "scale": fitted.scale,
                }),
            }
            .write(&out)
        }
        Command::AtsExtract { linecut, out } => {
            let mut powers = Vec::new();
            let mut cuts = Vec::new();
            for spec in &linecut {
                let (power, path) = spec.split_once(':').ok_or_else(|| {
                    Error::invalid_param(format!("linecut must be power_w:path, got {spec:?}"))
                })?;
                let power: f64 = power
                    .parse()
                    .map_err(|_| Error::invalid_param(format!("bad power {power:?}")))?;
                powers.push(power);
                cuts.push(Spectrum::read_csv(Path::new(path))?);
            }
            let extraction = fit::extract_ats_splitting(&cuts, &powers)?;
            let csv_path = format!("{out}.csv");
            let mut w = csv::Writer::from_path(&csv_path)?;
            w.write_record(["power_w", "sqrt_power", "omega21_hz"])?;
            for (p, s) in powers.iter().zip(&extraction.splittings) {
                w.serialize((*p, p.sqrt(), units::hz_from_angular(*s)))?;
            }
            w.flush()?;
            let json_path = format!("{out}.json");
            let doc = json!({
                "k21_hz_per_sqrt_w": units::hz_from_angular(extraction.k21),
                "slope_hz_per_sqrt_w": units::hz_from_angular(extraction.slope),
                "intercept_hz": units::hz_from_angular(extraction.intercept),
            });
            write_json_value(&json_path, &doc)?;
            Manifest {
                command: "ats-extract",
                seed,
                inputs: json!({ "linecut": linecut }),
                outputs: vec![csv_path, json_path],
                results: doc,
            }
            .write(&out)
        }
        Command::SaturationFit {
            input,
            gamma10_hz,
            gamma_phi_hz,
            out,
        } => {
            let points = read_power_csv(&input)?;
            let fitted = fit::fit_saturation(
                &points,
                units::angular_from_hz(gamma10_hz),
                units::angular_from_hz(gamma_phi_hz),
            )?;
            let json_path = format!("{out}.json");
            let doc = json!({
                "k10_hz_per_sqrt_w": units::hz_from_angular(fitted.k10),
                "report": fitted.report,
            });
            write_json_value(&json_path, &doc)?;
            Manifest {
                command: "saturation-fit",
                seed,
                inputs: json!({
                    "input": input, "gamma10_hz": gamma10_hz, "gamma_phi_hz": gamma_phi_hz,
                }),
                outputs: vec![json_path],
                results: json!({ "k10_hz_per_sqrt_w": units::hz_from_angular(fitted.k10) }),
            }
            .write(&out)
        }
        Command::ModelSelect {
            input,
            phase,
            scale,
            out,
        } => {
            let spectrum = Spectrum::read_csv(&input)?;
            let trace = fit::preprocess(&spectrum, phase, scale)?;
            let selection = fit::model_select(&trace, seed)?;
            let json_path = format!("{out}.json");
            write_json(&json_path, &selection)?;
            println!(
                "verdict {:?}, delta {:.3}, w_eit {:.3e}, w_ats {:.3e}",
                selection.verdict, selection.delta, selection.weight_eit, selection.weight_ats
            );
            Manifest {
                command: "model-select",
                seed,
                inputs: json!({ "input": input, "phase": phase, "scale": scale }),
                outputs: vec![json_path],
                results: json!({
                    "verdict": selection.verdict,
                    "delta": selection.delta,
                    "weight_eit": selection.weight_eit,
                    "weight_ats": selection.weight_ats,
                }),
            }
            .write(&out)
        }
        Command::MwnetSweep {
            netlist,
            lmin_nh,
            lmax_nh,
            lcount,
            window,
            normalize,
            out,
        } => {
            if lcount < 3 || !(lmin_nh > 0.0) || !(lmin_nh < lmax_nh) {
                return Err(Error::invalid_param(
                    "need lcount >= 3 and 0 < lmin_nh < lmax_nh",
                ));
            }
            let net = NodalNetwork::parse_file(&netlist)?;
            let l_grid: Vec<f64> = (0..lcount)
                .map(|i| {
                    1e-9 * (lmin_nh + (lmax_nh - lmin_nh) * i as f64 / (lcount - 1) as f64)
                })
                .collect();
            let window_grid = parse_grid(&window, GHZ)?;
            let sweep = if normalize {
                mwnet::sweep_inductance_normalized(&net, &l_grid, &window_grid)?
            } else {
                mwnet::sweep_inductance(&net, &l_grid, &window_grid)?
            };
            let profile_path = format!("{out}.csv");
            write_profile_csv(&profile_path, &sweep.profile)?;
            let points_path = format!("{out}_points.csv");
            let mut w = csv::Writer::from_path(&points_path)?;
            w.write_record(["l_h", "omega10_hz", "gamma10_hz", "flagged"])?;
            for p in &sweep.points {
                w.serialize((
                    p.l_h,
                    units::hz_from_angular(p.omega10),
                    units::hz_from_angular(p.gamma10),
                    p.flagged,
                ))?;
            }
            w.flush()?;
            Manifest {
                command: "mwnet-sweep",
                seed,
                inputs: json!({
                    "netlist": netlist, "lmin_nh": lmin_nh, "lmax_nh": lmax_nh,
                    "lcount": lcount, "window": window, "normalize": normalize,
                }),
                outputs: vec![profile_path, points_path],
                results: json!({
                    "center_hz": units::hz_from_angular(sweep.profile.omega_cen),
                    "fwhm_hz": units::hz_from_angular(sweep.profile.fwhm),
                }),
            }
            .write(&out)
        }
        Command::Classify { params, out } => {
            let rates = ThreeLevelRates::from_json_file(&params)?;
            let omega_t = lambda::threshold_drive(rates.gamma21, rates.gamma20, rates.gamma2_phi);
            let class = lambda::classify_regime(rates.omega_c, omega_t);
            let regime = match class.regime {
                Regime::Eit => "EIT",
                Regime::Ats => "ATS",
            };
            println!(
                "regime {regime}{}, Omega_t = {:.3} MHz, Omega_c = {:.3} MHz",
                if class.boundary { " (boundary)" } else { "" },
                units::mhz_from_angular(omega_t),
                units::mhz_from_angular(rates.omega_c),
            );
            let json_path = format!("{out}.json");
            let doc = json!({
                "regime": regime,
                "boundary": class.boundary,
                "omega_t_mhz": units::mhz_from_angular(omega_t),
                "omega_c_mhz": units::mhz_from_angular(rates.omega_c),
            });
            write_json_value(&json_path, &doc)?;
            Manifest {
                command: "classify",
                seed,
                inputs: json!({ "params": params, "rates": rates_to_json(&rates) }),
                outputs: vec![json_path],
                results: doc,
            }
            .write(&out)
        }
    }
}
