//! Physical constants (CODATA 2018, SI).

use serde::Serialize;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Vacuum permeability, N/A².
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsTable {
    pub hbar: f64,
    pub c: f64,
    pub mu0: f64,
    pub eps0: f64,
}

pub fn table() -> ConstantsTable {
    ConstantsTable {
        hbar: HBAR,
        c: C,
        mu0: MU0,
        eps0: EPS0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps0_mu0_c_consistent() {
        let rel = (EPS0 * MU0 * C * C - 1.0).abs();
        assert!(rel < 1e-9, "eps0 mu0 c^2 - 1 = {rel}");
    }
}
