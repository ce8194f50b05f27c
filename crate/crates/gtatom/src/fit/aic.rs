//! Information-criterion machinery for least-squares model comparison.

use serde::Serialize;

use super::FitReport;
use crate::error::{Error, Result};

/// Information criterion for a least-squares fit:
/// `I = n ln(sum(e_i^2) / n) + 2k`.
pub fn aic(n: usize, residuals: &[f64], k: usize) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(Error::invalid_param("aic needs n > 0 and k >= 1"));
    }
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    if sse == 0.0 {
        return Err(Error::PerfectFit);
    }
    Ok(n as f64 * (sse / n as f64).ln() + 2.0 * k as f64)
}

/// Normalized relative likelihoods over a candidate set:
/// `w_i = exp(-(I_i - I_min)/2) / sum_j exp(-(I_j - I_min)/2)`.
pub fn akaike_weights(ics: &[f64]) -> Vec<f64> {
    let min = ics.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = ics.iter().map(|i| (-(i - min) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Eit,
    Ats,
    /// Either fit failed to converge, or both fits are perfect and the
    /// criteria cannot be compared.
    Withheld,
}

/// Result of comparing the transparency-window and split-doublet absorption
/// models on one trace.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSelection {
    pub report_eit: FitReport,
    pub report_ats: FitReport,
    /// Positive Akaike difference `|I_eit - I_ats|`.
    pub delta: f64,
    pub weight_eit: f64,
    pub weight_ats: f64,
    pub verdict: Verdict,
}

impl ModelSelection {
    pub(crate) fn from_reports(
        report_eit: FitReport,
        report_ats: FitReport,
        eit_converged: bool,
        ats_converged: bool,
    ) -> ModelSelection {
        let verdict = match (
            eit_converged,
            ats_converged,
            report_eit.perfect_fit,
            report_ats.perfect_fit,
        ) {
            (false, _, _, _) | (_, false, _, _) => Verdict::Withheld,
            (_, _, true, true) => Verdict::Withheld,
            (_, _, true, false) => Verdict::Eit,
            (_, _, false, true) => Verdict::Ats,
            _ => {
                if report_eit.aic <= report_ats.aic {
                    Verdict::Eit
                } else {
                    Verdict::Ats
                }
            }
        };
        let weights = akaike_weights(&[report_eit.aic, report_ats.aic]);
        ModelSelection {
            delta: (report_eit.aic - report_ats.aic).abs(),
            weight_eit: weights[0],
            weight_ats: weights[1],
            report_eit,
            report_ats,
            verdict,
        }
    }
}
