//! Analytic solution of the 1D equidistant cavity driven at the q-th harmonic.
//!
//! The coefficient rho^(N)_M (N = j + n q, M = j + m q) is the Laurent
//! coefficient of xi^(M/q) in ((xi + s k) / (1 + s k xi))^(N/q), with
//! s = (-1)^q and k = tanh(q tau~). On |xi| = 1 that function has modulus one,
//! which gives two stable evaluation routes: for q = 1 it is a power series
//! obeying an exact recurrence in N, and for q >= 3 its coefficients are the
//! Fourier coefficients of a unimodular function. `rho_entry` evaluates the
//! closed hypergeometric form and is accurate only for small indices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{BogoliubovTransform, Closure};
use crate::cavity::{ModeIndex, ModeSet};
use crate::error::{Error, Result};
use crate::special::{gamma, hyp2f1_regularized, rgamma};

pub const MAX_KAPPA2: f64 = 1.0 - 1e-6;
pub const DEFAULT_MAX_COLUMNS: usize = 1 << 17;
const ROW_TAIL_TOL: f64 = 1e-15;
const DECAY_DIGITS: f64 = 45.0;

/// How many in-mode columns an analytic transform carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnPolicy {
    /// Extend until every row's tail weight is negligible, up to a cap.
    Adaptive { max_columns: usize },
    /// Exactly this many columns (at least the number of rows).
    Fixed(usize),
}

impl Default for ColumnPolicy {
    fn default() -> Self {
        ColumnPolicy::Adaptive { max_columns: DEFAULT_MAX_COLUMNS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoCoefficients {
    pub q: u32,
    pub tau_tilde: f64,
    pub kappa: f64,
    pub sigma: f64,
    rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl RhoCoefficients {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Largest |m| stored.
    pub fn width(&self) -> usize {
        self.width
    }

    /// rho^(n)_m for 1 <= n <= rows; zero outside the stored window.
    pub fn get(&self, n: usize, m: i64) -> f64 {
        if n == 0 || n > self.rows || m.unsigned_abs() as usize > self.width {
            return 0.0;
        }
        self.data[(n - 1) * (2 * self.width + 1) + (m + self.width as i64) as usize]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = 2 * self.width + 1;
        &self.data[(n - 1) * w..n * w]
    }
}

fn check_q(q: u32) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidArgument("harmonic number must be >= 1".into()));
    }
    if q % 2 == 0 {
        return Err(Error::EvenHarmonic(q));
    }
    Ok(())
}

fn kappa_for(q: u32, tau_tilde: f64) -> Result<f64> {
    if !(tau_tilde >= 0.0) {
        return Err(Error::NegativeTime(tau_tilde));
    }
    let kappa = (f64::from(q) * tau_tilde).tanh();
    if kappa * kappa > MAX_KAPPA2 {
        return Err(Error::KappaOutOfRange { kappa2: kappa * kappa, max: MAX_KAPPA2 });
    }
    Ok(kappa)
}

/// Closed hypergeometric form of rho^(N)_M, M signed.
pub fn rho_entry(q: u32, tau_tilde: f64, big_n: usize, big_m: i64) -> Result<f64> {
    check_q(q)?;
    if big_n == 0 {
        return Err(Error::InvalidArgument("row index must be >= 1".into()));
    }
    let kappa = kappa_for(q, tau_tilde)?;
    let qi = i64::from(q);
    let j = big_n as i64 % qi;
    let n = (big_n as i64 - j) / qi;
    if (big_m - j).rem_euclid(qi) != 0 {
        return Ok(0.0);
    }
    let m = (big_m - j).div_euclid(qi);
    if kappa == 0.0 {
        return Ok(if m == n { 1.0 } else { 0.0 });
    }
    let jq = j as f64 / f64::from(q);
    let (nf, mf) = (n as f64, m as f64);
    let sigma = if q % 2 == 0 { 1.0 } else { -1.0 };
    let recip = rgamma(1.0 + mf + jq);
    if recip == 0.0 {
        return Ok(0.0);
    }
    let f = hyp2f1_regularized(nf + jq, -mf - jq, 1.0 + nf - mf, kappa * kappa)?;
    Ok(gamma(1.0 + nf + jq) * (sigma * kappa).powi((n - m) as i32) * recip * f)
}

fn column_estimate(q: u32, rows: usize, kappa: f64) -> usize {
    if kappa == 0.0 {
        return rows;
    }
    let spread = rows as f64 * (1.0 + kappa) / (1.0 - kappa);
    // the tail decays like kappa^d with m = n - q d, so q columns per e-fold of d
    let decay = f64::from(q) * DECAY_DIGITS / -kappa.ln();
    (rows as f64 + spread + decay).ceil().min(usize::MAX as f64 / 4.0) as usize
}

/// Rows 1..=rows of rho over m in [-width, width].
fn laurent_rows(q: u32, kappa: f64, rows: usize, width: usize) -> Vec<f64> {
    let stride = 2 * width + 1;
    let mut data = vec![0.0; rows * stride];
    let sk = if q % 2 == 0 { kappa } else { -kappa };
    if kappa == 0.0 {
        for n in 1..=rows.min(width) {
            data[(n - 1) * stride + width + n] = 1.0;
        }
        return data;
    }
    if q == 1 {
        // power series in xi; negative m never appear
        let mut prev = vec![0.0; width + 1];
        prev[0] = sk;
        let mut pw = 1.0;
        for slot in prev.iter_mut().skip(1) {
            *slot = pw * (1.0 - kappa * kappa);
            pw *= -sk;
        }
        data[width..stride].copy_from_slice(&prev);
        let mut next = vec![0.0; width + 1];
        for n in 2..=rows {
            next[0] = sk * prev[0];
            for m in 1..=width {
                next[m] = prev[m - 1] + sk * prev[m] - sk * next[m - 1];
            }
            std::mem::swap(&mut prev, &mut next);
            let base = (n - 1) * stride + width;
            data[base..base + width + 1].copy_from_slice(&prev);
        }
        return data;
    }
    let qi = i64::from(q);
    let d_extent = (rows + width) / q as usize + 2;
    let decay = (DECAY_DIGITS / -kappa.ln()).ceil() as usize;
    let len = (2 * d_extent + decay).next_power_of_two().max(64);
    let fft = FftPlanner::new().plan_fft_inverse(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let phase: Vec<f64> = (0..len)
        .map(|t| {
            let th = 2.0 * PI * t as f64 / len as f64;
            (sk * th.sin()).atan2(1.0 + sk * th.cos())
        })
        .collect();
    for n in 1..=rows {
        let nu = n as f64 / f64::from(q);
        for (b, ph) in buf.iter_mut().zip(&phase) {
            *b = Complex64::from_polar(1.0, -2.0 * nu * ph);
        }
        fft.process(&mut buf);
        let base = (n - 1) * stride;
        let ni = n as i64;
        for m in -(width as i64)..=(width as i64) {
            if (ni - m).rem_euclid(qi) != 0 {
                continue;
            }
            let d = (ni - m) / qi;
            let idx = d.rem_euclid(len as i64) as usize;
            data[base + (m + width as i64) as usize] = buf[idx].re / len as f64;
        }
    }
    data
}

/// Smallest width keeping every row's weight beyond it under the tail tolerance.
fn trimmed_width(data: &[f64], rows: usize, width: usize) -> usize {
    let stride = 2 * width + 1;
    let mut need = rows.min(width);
    for n in 1..=rows {
        let row = &data[(n - 1) * stride..n * stride];
        let mut tail = 0.0;
        let mut w = width;
        while w > need {
            let m = w as i64;
            let wt = (row[width + w].powi(2) + row[(width as i64 - m) as usize].powi(2)) * w as f64 / n as f64;
            if tail + wt > ROW_TAIL_TOL {
                break;
            }
            tail += wt;
            w -= 1;
        }
        need = need.max(w);
    }
    need
}

pub fn rho_coefficients(q: u32, tau_tilde: f64, truncation: usize) -> Result<RhoCoefficients> {
    rho_coefficients_with(q, tau_tilde, truncation, ColumnPolicy::default())
}

pub fn rho_coefficients_with(q: u32, tau_tilde: f64, truncation: usize, policy: ColumnPolicy) -> Result<RhoCoefficients> {
    check_q(q)?;
    if truncation < q as usize || truncation == 0 {
        return Err(Error::InvalidArgument(format!("truncation {truncation} must be >= q = {q}")));
    }
    let kappa = kappa_for(q, tau_tilde)?;
    let rows = truncation;
    let (width, trim) = match policy {
        ColumnPolicy::Fixed(w) => (w.max(rows), false),
        ColumnPolicy::Adaptive { max_columns } => (column_estimate(q, rows, kappa).min(max_columns).max(rows), true),
    };
    let data = laurent_rows(q, kappa, rows, width);
    let (width, data) = if trim {
        let w = trimmed_width(&data, rows, width);
        let stride = 2 * width + 1;
        let mut out = Vec::with_capacity(rows * (2 * w + 1));
        for n in 0..rows {
            out.extend_from_slice(&data[n * stride + width - w..n * stride + width + w + 1]);
        }
        (w, out)
    } else {
        (width, data)
    };
    Ok(RhoCoefficients {
        q,
        tau_tilde,
        kappa,
        sigma: if q % 2 == 0 { 1.0 } else { -1.0 },
        rows,
        width,
        data,
    })
}

fn assemble(rho: &RhoCoefficients, tau: f64) -> Result<BogoliubovTransform> {
    let rows = rho.rows();
    let cols = rho.width();
    let mut alpha = DMatrix::<Complex64>::zeros(rows, cols);
    let mut beta = DMatrix::<Complex64>::zeros(rows, cols);
    for n in 1..=rows {
        for m in 1..=cols {
            // the m = 0 coefficient carries weight sqrt(0/n) and drops out
            let w = (m as f64 / n as f64).sqrt();
            alpha[(n - 1, m - 1)] = Complex64::new(w * rho.get(n, m as i64), 0.0);
            beta[(n - 1, m - 1)] = Complex64::new(-w * rho.get(n, -(m as i64)), 0.0);
        }
    }
    let out_modes = ModeSet::first_n(rows)?.modes().to_vec();
    let in_modes = (1..=cols as u32).map(ModeIndex::OneD).collect();
    Ok(BogoliubovTransform {
        alpha,
        beta,
        tau,
        out_modes,
        in_modes,
        closure: if rho.q == 1 { Closure::Passive } else { Closure::Truncated },
        trivial: false,
    })
}

/// Single moving wall, `tau_wall` measured on the clock of the single-wall multiple-scale system.
pub fn single_wall_transform(q: u32, tau_wall: f64, truncation: usize) -> Result<BogoliubovTransform> {
    single_wall_transform_with(q, tau_wall, truncation, ColumnPolicy::default())
}

pub fn single_wall_transform_with(
    q: u32,
    tau_wall: f64,
    truncation: usize,
    policy: ColumnPolicy,
) -> Result<BogoliubovTransform> {
    if !(tau_wall >= 0.0) {
        return Err(Error::NegativeTime(tau_wall));
    }
    let rho = rho_coefficients_with(q, tau_wall / 2.0, truncation, policy)?;
    assemble(&rho, tau_wall)
}

/// Rigidly shaken 1D cavity at slow time `tau`: the single-wall solution at 2 tau in the parity gauge.
pub fn shaker_transform_1d(q: u32, tau: f64, truncation: usize) -> Result<BogoliubovTransform> {
    shaker_transform_1d_with(q, tau, truncation, ColumnPolicy::default())
}

pub fn shaker_transform_1d_with(q: u32, tau: f64, truncation: usize, policy: ColumnPolicy) -> Result<BogoliubovTransform> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeTime(tau));
    }
    if q != 0 && q % 2 == 0 {
        let mut t = BogoliubovTransform::identity(&ModeSet::first_n(truncation.max(1))?);
        t.tau = tau;
        t.trivial = true;
        return Ok(t);
    }
    let mut t = single_wall_transform_with(q, 2.0 * tau, truncation, policy)?.parity_gauge();
    t.tau = tau;
    Ok(t)
}
