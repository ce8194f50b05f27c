//! Absorption lineshape families for transparency-regime model selection.

/// Transparency-window model: the difference of a broad and a narrow
/// Lorentzian centered at the same frequency,
/// `A = C+^2/(g+^2 + d^2) - C-^2/(g-^2 + d^2)`.
pub fn eit_absorption(delta: f64, c_plus: f64, gamma_plus: f64, c_minus: f64, gamma_minus: f64) -> f64 {
    c_plus * c_plus / (gamma_plus * gamma_plus + delta * delta)
        - c_minus * c_minus / (gamma_minus * gamma_minus + delta * delta)
}

/// Split-doublet model: the sum of two otherwise identical Lorentzians
/// centered at `+-delta0`,
/// `A = C^2/(g^2 + (d - d0)^2) + C^2/(g^2 + (d + d0)^2)`.
pub fn ats_absorption(delta: f64, c: f64, gamma: f64, delta0: f64) -> f64 {
    let lo = delta - delta0;
    let hi = delta + delta0;
    c * c / (gamma * gamma + lo * lo) + c * c / (gamma * gamma + hi * hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eit_collapses_to_single_lorentzian() {
        for d in [-2.0, 0.0, 0.7, 5.0] {
            assert_relative_eq!(
                eit_absorption(d, 1.5, 0.8, 0.0, 0.3),
                1.5 * 1.5 / (0.8 * 0.8 + d * d),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn eit_center_depth() {
        let a0 = eit_absorption(0.0, 2.0, 0.5, 1.0, 0.1);
        assert_relative_eq!(a0, 4.0 / 0.25 - 1.0 / 0.01, max_relative = 1e-12);
    }

    #[test]
    fn ats_merged_doublet_is_even() {
        for d in [0.1, 0.9, 3.3] {
            let plus = ats_absorption(d, 1.2, 0.6, 0.0);
            let minus = ats_absorption(-d, 1.2, 0.6, 0.0);
            assert_relative_eq!(plus, minus, max_relative = 1e-12);
            assert_relative_eq!(
                plus,
                2.0 * 1.2 * 1.2 / (0.36 + d * d),
                max_relative = 1e-12
            );
        }
    }
}
