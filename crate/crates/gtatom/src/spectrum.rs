//! Frequency-domain data containers and their CSV representations.
//!
//! All containers hold angular frequencies (rad/s) internally; the CSV
//! columns are ordinary frequency in Hz (`freq_hz`, `dc_hz`, ...).

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units;

/// One-dimensional transmission trace: a frequency grid with complex `t`.
#[derive(Debug, Clone, Default)]
pub struct Spectrum {
    /// Angular frequency (or detuning) grid, rad/s.
    pub omega: Vec<f64>,
    /// Complex transmission at each grid point.
    pub t: Vec<Complex64>,
    /// Optional acquisition metadata.
    pub meta: SpectrumMeta,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpectrumMeta {
    pub label: Option<String>,
    /// Probe or pump power (W) the trace was taken at.
    pub power_w: Option<f64>,
    /// Flux bias the trace was taken at.
    pub flux_phi0: Option<f64>,
}

impl Spectrum {
    pub fn new(omega: Vec<f64>, t: Vec<Complex64>) -> Result<Self> {
        if omega.len() != t.len() {
            return Err(Error::invalid_param("spectrum grids differ in length"));
        }
        if omega.is_empty() {
            return Err(Error::invalid_param("spectrum is empty"));
        }
        Ok(Spectrum {
            omega,
            t,
            meta: SpectrumMeta::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Write as CSV with header `freq_hz,re_t,im_t`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["freq_hz", "re_t", "im_t"])?;
        for (omega, t) in self.omega.iter().zip(&self.t) {
            w.serialize((units::hz_from_angular(*omega), t.re, t.im))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a `freq_hz,re_t,im_t` CSV. A leading header row is optional.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path.as_ref())?;
        let mut omega = Vec::new();
        let mut t = Vec::new();
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
                continue; // header row
            }
            let [f_hz, re, im] = parse_floats::<3>(&fields, line)?;
            omega.push(units::angular_from_hz(f_hz));
            t.push(Complex64::new(re, im));
        }
        Spectrum::new(omega, t)
    }
}

/// Pump-probe transmission map over a detuning grid.
#[derive(Debug, Clone)]
pub struct EitMap {
    /// Pump detunings (rad/s).
    pub delta_c: Vec<f64>,
    /// Probe detunings (rad/s).
    pub delta_p: Vec<f64>,
    /// `t[i][j]` is the transmission at `(delta_c[i], delta_p[j])`.
    pub t: Vec<Vec<Complex64>>,
    /// Real scale factor already applied to `t`.
    pub scale: f64,
}

impl EitMap {
    /// Write as CSV with header `dc_hz,dp_hz,re_t,im_t,abs_t`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["dc_hz", "dp_hz", "re_t", "im_t", "abs_t"])?;
        for (dc, row) in self.delta_c.iter().zip(&self.t) {
            for (dp, t) in self.delta_p.iter().zip(row) {
                w.serialize((
                    units::hz_from_angular(*dc),
                    units::hz_from_angular(*dp),
                    t.re,
                    t.im,
                    t.norm(),
                ))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a map CSV back into grids; the rows must form a complete
    /// rectangular `(dc, dp)` grid (any row order).
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path.as_ref())?;
        let mut cells: Vec<(f64, f64, Complex64)> = Vec::new();
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
            let [dc_hz, dp_hz, re, im] = parse_floats::<4>(&fields, line)?;
            cells.push((
                units::angular_from_hz(dc_hz),
                units::angular_from_hz(dp_hz),
                Complex64::new(re, im),
            ));
        }
        let delta_c = sorted_unique(cells.iter().map(|c| c.0));
        let delta_p = sorted_unique(cells.iter().map(|c| c.1));
        if delta_c.len() * delta_p.len() != cells.len() {
            return Err(Error::invalid_param(format!(
                "map is not a complete {} x {} grid ({} rows)",
                delta_c.len(),
                delta_p.len(),
                cells.len()
            )));
        }
        let mut t = vec![vec![Complex64::default(); delta_p.len()]; delta_c.len()];
        for (dc, dp, v) in cells {
            let i = grid_index(&delta_c, dc);
            let j = grid_index(&delta_p, dp);
            t[i][j] = v;
        }
        Ok(EitMap {
            delta_c,
            delta_p,
            t,
            scale: 1.0,
        })
    }
}

/// Real absorption trace over a detuning grid, as produced by preprocessing.
#[derive(Debug, Clone)]
pub struct AbsorptionTrace {
    /// Detuning grid (rad/s).
    pub delta: Vec<f64>,
    /// Trace values, `Re(r)` with `r = t - 1`.
    pub values: Vec<f64>,
}

impl AbsorptionTrace {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["freq_hz", "value"])?;
        for (d, v) in self.delta.iter().zip(&self.values) {
            w.serialize((units::hz_from_angular(*d), *v))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_floats<const N: usize>(fields: &[&str], line: usize) -> Result<[f64; N]> {
    if fields.len() < N {
        return Err(Error::Parse {
            line,
            msg: format!("expected {N} columns, found {}", fields.len()),
        });
    }
    let mut out = [0.0; N];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = fields[i].parse::<f64>().map_err(|_| Error::Parse {
            line,
            msg: format!("column {} is not a number: {:?}", i + 1, fields[i]),
        })?;
    }
    Ok(out)
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn grid_index(grid: &[f64], value: f64) -> usize {
    grid.partition_point(|g| *g < value).min(grid.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_csv_roundtrip_is_lossless() {
        let dir = std::env::temp_dir().join("gtatom_spectrum_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        let s = Spectrum::new(
            vec![1.0e9, 2.5e9, 1.0 / 3.0 * 1e10],
            vec![
                Complex64::new(0.1, -0.2),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.123456789012345, 6.5e-11),
            ],
        )
        .unwrap();
        s.write_csv(&path).unwrap();
        let back = Spectrum::read_csv(&path).unwrap();
        assert_eq!(s.omega, back.omega);
        assert_eq!(s.t, back.t);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let dir = std::env::temp_dir().join("gtatom_spectrum_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "freq_hz,re_t,im_t\n1e9,0.5,0.0\n2e9,oops,0.0\n").unwrap();
        match Spectrum::read_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn map_csv_roundtrip() {
        let dir = std::env::temp_dir().join("gtatom_spectrum_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("map.csv");
        let map = EitMap {
            delta_c: vec![-1.0e6, 0.0, 1.0e6],
            delta_p: vec![-2.0e6, 2.0e6],
            t: vec![
                vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.1)],
                vec![Complex64::new(0.9, -0.1), Complex64::new(0.8, 0.0)],
                vec![Complex64::new(0.7, 0.2), Complex64::new(0.6, 0.3)],
            ],
            scale: 1.0,
        };
        map.write_csv(&path).unwrap();
        let back = EitMap::read_csv(&path).unwrap();
        assert_eq!(back.delta_c.len(), 3);
        assert_eq!(back.delta_p.len(), 2);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(back.t[i][j], map.t[i][j]);
            }
        }
    }
}
