//! Two-port chain (ABCD) building blocks for cascaded microwave elements.

use num_complex::Complex64;

type C64 = Complex64;

/// Chain matrix [[a, b], [c, d]] relating port voltages and currents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Abcd {
    pub fn identity() -> Abcd {
        Abcd {
            a: C64::new(1.0, 0.0),
            b: C64::default(),
            c: C64::default(),
            d: C64::new(1.0, 0.0),
        }
    }

    /// Cascade: `self` followed by `other` (matrix product).
    pub fn cascade(&self, other: &Abcd) -> Abcd {
        Abcd {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// Determinant; unity for reciprocal blocks.
    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Two-port admittance parameters `[[y11, y12], [y21, y22]]`, undefined
    /// when the through-impedance entry vanishes.
    pub fn y_params(&self) -> Option<[[C64; 2]; 2]> {
        if self.b.norm() == 0.0 || !self.b.is_finite() {
            return None;
        }
        let det = self.det();
        let y11 = self.d / self.b;
        let y12 = -det / self.b;
        let y21 = -C64::new(1.0, 0.0) / self.b;
        let y22 = self.a / self.b;
        let ys = [[y11, y12], [y21, y22]];
        if ys.iter().flatten().all(|y| y.is_finite()) {
            Some(ys)
        } else {
            None
        }
    }
}

/// Lossless distributed line section:
/// `[[cos bl, i z0 sin bl], [i sin bl / z0, cos bl]]` with `b = omega / v`.
pub fn cpw_section(length_m: f64, z0: f64, v: f64, omega: f64) -> Abcd {
    let bl = omega * length_m / v;
    let (s, c) = bl.sin_cos();
    Abcd {
        a: C64::new(c, 0.0),
        b: C64::new(0.0, z0 * s),
        c: C64::new(0.0, s / z0),
        d: C64::new(c, 0.0),
    }
}

/// Series impedance `i omega L`: `[[1, i omega L], [0, 1]]`.
pub fn series_inductor(l_h: f64, omega: f64) -> Abcd {
    Abcd {
        b: C64::new(0.0, omega * l_h),
        ..Abcd::identity()
    }
}

/// Shunt admittance `Y`: `[[1, 0], [Y, 1]]`.
pub fn shunt_branch(y: C64) -> Abcd {
    Abcd {
        c: y,
        ..Abcd::identity()
    }
}
