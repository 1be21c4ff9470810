//! Bogoliubov coefficient matrices and the solvers that produce them.
//!
//! Convention: `a_out_n = sum_k (alpha_nk a_k + conj(beta_nk) a_k^dagger)`.
//! Rows are out-modes, columns in-modes. Analytic 1D transforms may carry more
//! in-mode columns than out-mode rows so that each row is complete.

mod one_d;
mod ode;

pub use one_d::{
    rho_coefficients, rho_coefficients_with, rho_entry, shaker_transform_1d, shaker_transform_1d_with,
    single_wall_transform, single_wall_transform_with, ColumnPolicy, RhoCoefficients, DEFAULT_MAX_COLUMNS,
    MAX_KAPPA2,
};
pub use ode::{generator, integrate_multiscale, integrate_multiscale_grid, Generator, OdeOptions, OdeSystem};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::{mode_frequency, shaker_coupling, CavityGeometry, DriveConfig, ModeIndex, ModeSet};
use crate::error::{Error, Result};

/// How the vacuum contribution of in-modes outside the tracked columns is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// Only the tracked columns contribute; rows must be complete.
    Truncated,
    /// beta = 0 and the full map is orthogonal, so the vacuum maps to itself.
    Passive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovTransform {
    pub alpha: DMatrix<Complex64>,
    pub beta: DMatrix<Complex64>,
    pub tau: f64,
    pub out_modes: Vec<ModeIndex>,
    pub in_modes: Vec<ModeIndex>,
    pub closure: Closure,
    /// Set when the drive cannot couple any modes (even harmonic on a shaker).
    pub trivial: bool,
}

impl BogoliubovTransform {
    pub fn identity(modes: &ModeSet) -> Self {
        let n = modes.len();
        Self {
            alpha: DMatrix::identity(n, n),
            beta: DMatrix::zeros(n, n),
            tau: 0.0,
            out_modes: modes.modes().to_vec(),
            in_modes: modes.modes().to_vec(),
            closure: Closure::Truncated,
            trivial: false,
        }
    }

    /// sum_k |alpha_nk|^2 - |beta_nk|^2 - 1 for each row.
    pub fn row_defects(&self) -> Vec<f64> {
        (0..self.alpha.nrows())
            .map(|n| {
                let a: f64 = self.alpha.row(n).iter().map(|z| z.norm_sqr()).sum();
                let b: f64 = self.beta.row(n).iter().map(|z| z.norm_sqr()).sum();
                a - b - 1.0
            })
            .collect()
    }

    pub fn symplectic_defect(&self) -> f64 {
        self.row_defects().into_iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Photons per out-mode for a vacuum input, sum_k |beta_nk|^2.
    pub fn vacuum_photon_numbers(&self) -> Vec<f64> {
        (0..self.beta.nrows())
            .map(|n| self.beta.row(n).iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    pub fn has_pair_creation(&self) -> bool {
        self.beta.iter().any(|z| *z != Complex64::new(0.0, 0.0))
    }

    /// Applies the phase convention a_k -> (-1)^k a_k on 1D modes (x parity for 3D).
    pub fn parity_gauge(mut self) -> Self {
        let sign = |m: &ModeIndex| if m.x() % 2 == 0 { 1.0 } else { -1.0 };
        for (r, mo) in self.out_modes.iter().enumerate() {
            for (c, mi) in self.in_modes.iter().enumerate() {
                let s = sign(mo) * sign(mi);
                if s < 0.0 {
                    self.alpha[(r, c)] = -self.alpha[(r, c)];
                    self.beta[(r, c)] = -self.beta[(r, c)];
                }
            }
        }
        self
    }

    /// Square sub-block over the given modes (rows and columns).
    pub fn block(&self, modes: &[ModeIndex]) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        let find = |list: &[ModeIndex], m: &ModeIndex| {
            list.iter().position(|x| x == m).ok_or_else(|| Error::UnknownMode(m.to_string()))
        };
        let rows = modes.iter().map(|m| find(&self.out_modes, m)).collect::<Result<Vec<_>>>()?;
        let cols = modes.iter().map(|m| find(&self.in_modes, m)).collect::<Result<Vec<_>>>()?;
        let n = modes.len();
        let a = DMatrix::from_fn(n, n, |i, j| self.alpha[(rows[i], cols[j])]);
        let b = DMatrix::from_fn(n, n, |i, j| self.beta[(rows[i], cols[j])]);
        Ok((a, b))
    }
}

/// Effective rates of an isolated resonant pair (s, c).
///
/// `gamma_minus` and `gamma_plus` are magnitudes. The signs record the
/// orientation of the coupling so that the analytic transforms coincide
/// entrywise with the integrated multiple-scale system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeRates {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub sum_sign: f64,
    pub difference_sign: f64,
    pub s: ModeIndex,
    pub c: ModeIndex,
}

impl TwoModeRates {
    pub fn new(geom: &CavityGeometry, drive: &DriveConfig, s: &ModeIndex, c: &ModeIndex) -> Result<Self> {
        let ws = mode_frequency(geom, s)?;
        let wc = mode_frequency(geom, c)?;
        if ws == wc {
            return Err(Error::DegenerateModes(ws));
        }
        let g = shaker_coupling(s, c);
        // frequencies in units of the fundamental, as in the integrated system
        let w1 = geom.fundamental();
        let (ws, wc) = (ws / w1, wc / w1);
        let omega = drive.omega_drive / w1;
        let norm = 4.0 * (ws * wc).sqrt();
        let minus = g * omega * (ws - wc) / norm;
        let plus = g * omega * (ws + wc) / norm;
        Ok(Self {
            gamma_minus: minus.abs(),
            gamma_plus: plus.abs(),
            sum_sign: if minus < 0.0 { -1.0 } else { 1.0 },
            difference_sign: if plus < 0.0 { -1.0 } else { 1.0 },
            s: *s,
            c: *c,
        })
    }

    /// Rates from explicit magnitudes with positive orientation.
    pub fn from_rates(gamma_minus: f64, gamma_plus: f64, s: ModeIndex, c: ModeIndex) -> Self {
        Self { gamma_minus, gamma_plus, sum_sign: 1.0, difference_sign: 1.0, s, c }
    }
}

fn two_mode(rates: &TwoModeRates, tau: f64, alpha: [[f64; 2]; 2], beta: [[f64; 2]; 2]) -> BogoliubovTransform {
    let re = |m: [[f64; 2]; 2]| DMatrix::from_fn(2, 2, |i, j| Complex64::new(m[i][j], 0.0));
    BogoliubovTransform {
        alpha: re(alpha),
        beta: re(beta),
        tau,
        out_modes: vec![rates.s, rates.c],
        in_modes: vec![rates.s, rates.c],
        closure: Closure::Truncated,
        trivial: false,
    }
}

/// Sum resonance Omega = omega_s + omega_c: two-mode squeezing with parameter gamma_minus tau.
pub fn two_mode_sum_transform(rates: &TwoModeRates, tau: f64) -> Result<BogoliubovTransform> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeTime(tau));
    }
    let x = rates.gamma_minus * tau;
    let (ch, sh) = (x.cosh(), rates.sum_sign * x.sinh());
    Ok(two_mode(rates, tau, [[ch, 0.0], [0.0, ch]], [[0.0, sh], [sh, 0.0]]))
}

/// Difference resonance Omega = |omega_s - omega_c|: rotation by gamma_plus tau, no pair creation.
pub fn two_mode_difference_transform(rates: &TwoModeRates, tau: f64) -> Result<BogoliubovTransform> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeTime(tau));
    }
    let x = rates.gamma_plus * tau;
    let (c, s) = (x.cos(), rates.difference_sign * x.sin());
    Ok(two_mode(rates, tau, [[c, -s], [s, c]], [[0.0; 2]; 2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates() -> TwoModeRates {
        TwoModeRates::from_rates(1.0, 1.0, ModeIndex::ThreeD([1, 1, 1]), ModeIndex::ThreeD([2, 1, 1]))
    }

    #[test]
    fn sum_at_zero_is_identity() {
        let t = two_mode_sum_transform(&rates(), 0.0).unwrap();
        assert_eq!(t.alpha, DMatrix::identity(2, 2));
        assert!(!t.has_pair_creation());
    }

    #[test]
    fn sum_photons_are_sinh_squared() {
        let t = two_mode_sum_transform(&rates(), 1.0).unwrap();
        for n in t.vacuum_photon_numbers() {
            assert!((n - 1f64.sinh().powi(2)).abs() < 1e-14);
        }
        assert!(t.symplectic_defect() < 1e-14);
    }

    #[test]
    fn difference_quarter_period_swaps() {
        let t = two_mode_difference_transform(&rates(), std::f64::consts::FRAC_PI_2).unwrap();
        assert!(t.alpha[(0, 0)].norm() < 1e-15);
        assert!((t.alpha[(0, 1)].norm() - 1.0).abs() < 1e-15);
        assert!(!t.has_pair_creation());
    }

    #[test]
    fn negative_time_rejected() {
        assert!(two_mode_sum_transform(&rates(), -0.1).is_err());
        assert!(two_mode_difference_transform(&rates(), -0.1).is_err());
    }

    #[test]
    fn equal_frequencies_rejected() {
        let g = CavityGeometry::three_d(1.0, 1.0, 1.0).unwrap();
        let d = DriveConfig::new(0.01, 10.0).unwrap();
        let e = TwoModeRates::new(&g, &d, &ModeIndex::ThreeD([1, 2, 1]), &ModeIndex::ThreeD([1, 1, 2])).unwrap_err();
        assert!(matches!(e, Error::DegenerateModes(_)));
    }
}
