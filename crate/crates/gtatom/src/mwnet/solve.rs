//! Nodal analysis of the device network and rate-profile extraction.
//!
//! The multipoint island ties non-adjacent nodes together, so a pure chain
//! cascade cannot express it; instead every element is stamped into a nodal
//! admittance matrix (line sections enter as two-port admittance stamps)
//! and both ports are terminated in the reference impedance.
//!
//! Line sections are internally subdivided so that no segment exceeds a
//! third of a wavelength at the highest requested frequency, which keeps the
//! admittance representation of each segment nonsingular across the sweep
//! without changing the network.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::abcd;
use super::netlist::{BranchKind, NodalNetwork, Node};
use crate::device::RateProfile;
use crate::error::{Error, Result};
use crate::fit::{fit_two_level, TwoLevelInit};
use crate::spectrum::Spectrum;

type C64 = Complex64;

/// S-parameters over a frequency grid. Grid points where the admittance
/// matrix was singular are flagged rather than failing the sweep.
#[derive(Debug, Clone)]
pub struct NetworkSweep {
    pub omega: Vec<f64>,
    pub s21: Vec<C64>,
    pub s11: Vec<C64>,
    pub flagged: Vec<bool>,
}

impl NetworkSweep {
    /// Transmission spectrum of the unflagged samples.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let mut omega = Vec::new();
        let mut t = Vec::new();
        for i in 0..self.omega.len() {
            if !self.flagged[i] {
                omega.push(self.omega[i]);
                t.push(self.s21[i]);
            }
        }
        Spectrum::new(omega, t)
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Ground,
    Var(usize),
}

/// Frequency-independent stamp plan: node slots resolved, lines subdivided,
/// zero-value series inductors merged away.
struct Plan {
    n_vars: usize,
    port_in: usize,
    port_out: usize,
    z0: f64,
    lines: Vec<(f64, f64, f64, Slot, Slot)>,
    inductors: Vec<(f64, Slot, Slot)>,
    capacitors: Vec<(f64, Slot, Slot)>,
    squid: Option<(f64, usize)>,
}

impl Plan {
    fn build(net: &NodalNetwork, omega_max: f64) -> Result<Plan> {
        let n_named = net.node_names.len();
        // union-find over zero-inductance series branches, which are ideal
        // shorts and must collapse to one node
        let mut parent: Vec<usize> = (0..n_named).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for b in &net.branches {
            if let BranchKind::SeriesInductor { l_h } = b.kind {
                if l_h == 0.0 {
                    if let (Node::Index(i), Node::Index(j)) = (b.a, b.b) {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        parent[ri] = rj;
                    } else {
                        return Err(Error::invalid_param(
                            "zero series inductance to ground shorts the node",
                        ));
                    }
                }
            }
        }

        // compact variable indices for nodes actually used
        fn assign(var_of: &mut [Option<usize>], n_vars: &mut usize, root: usize) -> usize {
            if let Some(v) = var_of[root] {
                v
            } else {
                let v = *n_vars;
                var_of[root] = Some(v);
                *n_vars += 1;
                v
            }
        }
        fn slot(
            var_of: &mut [Option<usize>],
            parent: &mut [usize],
            n_vars: &mut usize,
            node: Node,
        ) -> Slot {
            match node {
                Node::Ground => Slot::Ground,
                Node::Index(i) => {
                    let root = find(parent, i);
                    Slot::Var(assign(var_of, n_vars, root))
                }
            }
        }
        let mut var_of: Vec<Option<usize>> = vec![None; n_named];
        let mut n_vars = 0;

        let port_in = match slot(&mut var_of, &mut parent, &mut n_vars, Node::Index(net.port_in)) {
            Slot::Var(v) => v,
            Slot::Ground => unreachable!(),
        };
        let port_out = match slot(&mut var_of, &mut parent, &mut n_vars, Node::Index(net.port_out))
        {
            Slot::Var(v) => v,
            Slot::Ground => unreachable!(),
        };

        let mut lines = Vec::new();
        let mut inductors = Vec::new();
        let mut capacitors = Vec::new();
        for b in &net.branches {
            let a = slot(&mut var_of, &mut parent, &mut n_vars, b.a);
            let z = slot(&mut var_of, &mut parent, &mut n_vars, b.b);
            match b.kind {
                BranchKind::Cpw { len_m, z0, v } => {
                    // segment count keeping beta * len <= 2 pi / 3 at the top
                    // of the sweep
                    let f_max = omega_max / (2.0 * std::f64::consts::PI);
                    let k = (3.0 * len_m * f_max / v).ceil().max(1.0) as usize;
                    let seg = len_m / k as f64;
                    let mut prev = a;
                    for s in 0..k {
                        let next = if s + 1 == k {
                            z
                        } else {
                            let v_new = n_vars;
                            n_vars += 1;
                            Slot::Var(v_new)
                        };
                        lines.push((seg, z0, v, prev, next));
                        prev = next;
                    }
                }
                BranchKind::SeriesInductor { l_h } => {
                    if l_h > 0.0 {
                        inductors.push((l_h, a, z));
                    }
                }
                BranchKind::Capacitor { c_f } => capacitors.push((c_f, a, z)),
            }
        }
        let squid = match (net.squid_l, net.island) {
            (Some(l), Some(island)) => {
                let s = slot(&mut var_of, &mut parent, &mut n_vars, Node::Index(island));
                match s {
                    Slot::Var(v) => Some((l, v)),
                    Slot::Ground => unreachable!(),
                }
            }
            _ => None,
        };

        Ok(Plan {
            n_vars,
            port_in,
            port_out,
            z0: net.z0,
            lines,
            inductors,
            capacitors,
            squid,
        })
    }

    fn stamp_pair(y: &mut DMatrix<C64>, a: Slot, b: Slot, adm: C64) {
        if let Slot::Var(i) = a {
            y[(i, i)] += adm;
        }
        if let Slot::Var(j) = b {
            y[(j, j)] += adm;
        }
        if let (Slot::Var(i), Slot::Var(j)) = (a, b) {
            y[(i, j)] -= adm;
            y[(j, i)] -= adm;
        }
    }

    /// Solve one frequency point; `None` marks a singular sample.
    fn solve_point(&self, omega: f64) -> Option<(C64, C64)> {
        let n = self.n_vars;
        let mut y = DMatrix::<C64>::zeros(n, n);
        for &(len, z0, v, a, b) in &self.lines {
            let ys = abcd::cpw_section(len, z0, v, omega).y_params()?;
            match (a, b) {
                (Slot::Var(i), Slot::Var(j)) => {
                    y[(i, i)] += ys[0][0];
                    y[(j, j)] += ys[1][1];
                    y[(i, j)] += ys[0][1];
                    y[(j, i)] += ys[1][0];
                }
                (Slot::Var(i), Slot::Ground) => y[(i, i)] += ys[0][0],
                (Slot::Ground, Slot::Var(j)) => y[(j, j)] += ys[1][1],
                (Slot::Ground, Slot::Ground) => {}
            }
        }
        for &(l_h, a, b) in &self.inductors {
            let adm = C64::new(0.0, -1.0 / (omega * l_h));
            Self::stamp_pair(&mut y, a, b, adm);
        }
        for &(c_f, a, b) in &self.capacitors {
            let adm = C64::new(0.0, omega * c_f);
            Self::stamp_pair(&mut y, a, b, adm);
        }
        if let Some((l_h, island)) = self.squid {
            y[(island, island)] += C64::new(0.0, -1.0 / (omega * l_h));
        }
        let y_port = C64::new(1.0 / self.z0, 0.0);
        y[(self.port_in, self.port_in)] += y_port;
        y[(self.port_out, self.port_out)] += y_port;

        let mut rhs = DVector::<C64>::zeros(n);
        rhs[self.port_in] = y_port; // unit source voltage behind z0
        let v = y.lu().solve(&rhs)?;
        let s21 = 2.0 * v[self.port_out];
        let s11 = 2.0 * v[self.port_in] - C64::new(1.0, 0.0);
        if s21.is_finite() && s11.is_finite() {
            Some((s21, s11))
        } else {
            None
        }
    }
}

/// S-parameters of the network over a frequency grid, ports terminated in
/// the reference impedance.
pub fn solve_s21(net: &NodalNetwork, omega_grid: &[f64]) -> Result<NetworkSweep> {
    if omega_grid.is_empty() || omega_grid.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid_param("frequency grid must be positive"));
    }
    net.validate()?;
    let omega_max = omega_grid.iter().copied().fold(0.0, f64::max);
    let plan = Plan::build(net, omega_max)?;
    let results: Vec<Option<(C64, C64)>> = omega_grid
        .par_iter()
        .map(|&w| plan.solve_point(w))
        .collect();
    let nan = C64::new(f64::NAN, f64::NAN);
    let mut sweep = NetworkSweep {
        omega: omega_grid.to_vec(),
        s21: Vec::with_capacity(omega_grid.len()),
        s11: Vec::with_capacity(omega_grid.len()),
        flagged: Vec::with_capacity(omega_grid.len()),
    };
    for r in results {
        match r {
            Some((s21, s11)) => {
                sweep.s21.push(s21);
                sweep.s11.push(s11);
                sweep.flagged.push(false);
            }
            None => {
                sweep.s21.push(nan);
                sweep.s11.push(nan);
                sweep.flagged.push(true);
            }
        }
    }
    Ok(sweep)
}

/// One extracted point of an inductance sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub l_h: f64,
    pub omega10: f64,
    pub gamma10: f64,
    /// Set when the resonance could not be located or fitted at this
    /// inductance.
    pub flagged: bool,
}

/// Result of an inductance sweep: per-inductance extracted resonances and
/// the assembled rate profile.
#[derive(Debug, Clone)]
pub struct InductanceSweep {
    pub points: Vec<SweepPoint>,
    pub profile: RateProfile,
}

/// Per-inductance resonance extraction without profile assembly.
fn sweep_points(
    net: &NodalNetwork,
    l_grid: &[f64],
    omega_window: &[f64],
) -> Result<Vec<SweepPoint>> {
    if l_grid.is_empty() || l_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::invalid_param("inductance grid must be positive"));
    }
    if omega_window.len() < 16 {
        return Err(Error::invalid_param("frequency window needs at least 16 points"));
    }
    if net.island.is_none() {
        return Err(Error::invalid_param("inductance sweep needs an island"));
    }
    let background = net.background();
    Ok(l_grid
        .par_iter()
        .map(|&l_h| {
            let device = net.with_squid(l_h);
            match extract_resonance(&device, &background, omega_window) {
                Ok((omega10, gamma10)) => SweepPoint {
                    l_h,
                    omega10,
                    gamma10,
                    flagged: false,
                },
                Err(_) => SweepPoint {
                    l_h,
                    omega10: f64::NAN,
                    gamma10: f64::NAN,
                    flagged: true,
                },
            }
        })
        .collect())
}

fn profile_from_points(points: &[SweepPoint]) -> Result<RateProfile> {
    let mut good: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.flagged)
        .map(|p| (p.omega10, p.gamma10))
        .collect();
    good.sort_by(|a, b| a.0.total_cmp(&b.0));
    RateProfile::from_samples(
        good.iter().map(|p| p.0).collect(),
        good.iter().map(|p| p.1).collect(),
    )
}

/// Sweep the SQUID inductance, extracting `(omega10, Gamma10)` at each value
/// by normalizing the transmission against the island-free background and
/// fitting the two-level lineshape around the resonance dip.
pub fn sweep_inductance(
    net: &NodalNetwork,
    l_grid: &[f64],
    omega_window: &[f64],
) -> Result<InductanceSweep> {
    let points = sweep_points(net, l_grid, omega_window)?;
    let profile = profile_from_points(&points)?;
    Ok(InductanceSweep { points, profile })
}

/// Like [`sweep_inductance`], but with the extracted rates divided by the
/// single-tap baseline of the same island at the same frequency, so the
/// profile isolates the multi-point interference factor on a flat
/// single-point baseline. The returned `gamma10` values are dimensionless
/// rate ratios.
pub fn sweep_inductance_normalized(
    net: &NodalNetwork,
    l_grid: &[f64],
    omega_window: &[f64],
) -> Result<InductanceSweep> {
    let device_points = sweep_points(net, l_grid, omega_window)?;
    let reference_net = net.single_tap_reference()?;

    // the reference island is lighter, so cover a wider inductance range to
    // span the same extracted-frequency interval
    let l_min = l_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let l_max = l_grid.iter().copied().fold(0.0, f64::max);
    let n_ref = l_grid.len().max(8) + 8;
    let l_ref: Vec<f64> = (0..n_ref)
        .map(|i| 0.7 * l_min + (1.7 * l_max - 0.7 * l_min) * i as f64 / (n_ref - 1) as f64)
        .collect();
    let mut reference: Vec<(f64, f64)> = sweep_points(&reference_net, &l_ref, omega_window)?
        .into_iter()
        .filter(|p| !p.flagged)
        .map(|p| (p.omega10, p.gamma10))
        .collect();
    reference.sort_by(|a, b| a.0.total_cmp(&b.0));
    if reference.len() < 2 {
        return Err(Error::IllConditionedFit(
            "single-tap baseline could not be extracted across the window".into(),
        ));
    }

    let baseline = |omega: f64| -> Option<f64> {
        if omega < reference[0].0 || omega > reference[reference.len() - 1].0 {
            return None;
        }
        let i = reference.partition_point(|p| p.0 < omega).clamp(1, reference.len() - 1);
        let (w0, g0) = reference[i - 1];
        let (w1, g1) = reference[i];
        Some(g0 + (g1 - g0) * (omega - w0) / (w1 - w0))
    };

    let points: Vec<SweepPoint> = device_points
        .into_iter()
        .map(|p| {
            if p.flagged {
                return p;
            }
            match baseline(p.omega10) {
                Some(base) if base > 0.0 => SweepPoint {
                    gamma10: p.gamma10 / base,
                    ..p
                },
                _ => SweepPoint {
                    omega10: p.omega10,
                    gamma10: f64::NAN,
                    flagged: true,
                    l_h: p.l_h,
                },
            }
        })
        .collect();
    let profile = profile_from_points(&points)?;
    Ok(InductanceSweep { points, profile })
}

/// Background-normalized transmission `S21 / S21_background` on a grid.
fn normalized_scan(
    device: &NodalNetwork,
    background: &NodalNetwork,
    grid: &[f64],
) -> Result<Spectrum> {
    let dev = solve_s21(device, grid)?;
    let bg = solve_s21(background, grid)?;
    let mut omega = Vec::new();
    let mut t = Vec::new();
    for (i, &w) in grid.iter().enumerate() {
        if !dev.flagged[i] && !bg.flagged[i] && bg.s21[i].norm() > 1e-9 {
            omega.push(w);
            t.push(dev.s21[i] / bg.s21[i]);
        }
    }
    Spectrum::new(omega, t)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Locate and fit one resonance dip: coarse scan over the window, zoom, fit.
fn extract_resonance(
    device: &NodalNetwork,
    background: &NodalNetwork,
    window: &[f64],
) -> Result<(f64, f64)> {
    let coarse = normalized_scan(device, background, window)?;
    let dip = coarse
        .t
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap();
    if dip == 0 || dip + 1 == coarse.len() {
        return Err(Error::IllConditionedFit(
            "resonance at the window edge".into(),
        ));
    }
    let step = coarse.omega[dip + 1] - coarse.omega[dip];

    // zoom stage: locate the dip and estimate its width
    let fine_grid = linspace(coarse.omega[dip] - 2.0 * step, coarse.omega[dip] + 2.0 * step, 129);
    let fine = normalized_scan(device, background, &fine_grid)?;
    let fdip = fine
        .t
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap();
    let center = fine.omega[fdip];
    let depth = 1.0 - fine.t[fdip].norm();
    if depth < 1e-4 {
        return Err(Error::IllConditionedFit("no visible resonance dip".into()));
    }
    let half_level = 1.0 - 0.5 * depth;
    let mut width = step;
    for i in fdip + 1..fine.len() {
        if fine.t[i].norm() >= half_level {
            width = fine.omega[i] - center;
            break;
        }
    }

    // fit stage: sample a window wide enough for the tails
    let fit_grid = linspace(center - 12.0 * width, center + 12.0 * width, 201);
    let fit_grid: Vec<f64> = fit_grid.into_iter().filter(|w| *w > 0.0).collect();
    let scan = normalized_scan(device, background, &fit_grid)?;
    let init = TwoLevelInit::auto(&scan)?;
    let fit = fit_two_level(&scan, init)?;
    Ok((fit.params.omega10, fit.params.gamma10))
}
