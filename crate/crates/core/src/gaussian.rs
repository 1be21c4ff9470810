//! Gaussian states: covariance matrices, propagation through Bogoliubov maps,
//! logarithmic negativity and mutual information.
//!
//! Quadratures q = (a + a^dagger)/sqrt(2), p = (a - a^dagger)/(i sqrt(2)),
//! ordered (q1, p1, q2, p2, ...). The vacuum covariance is I/2. All
//! logarithms are base 2.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bogoliubov::{BogoliubovTransform, Closure};
use crate::cavity::ModeIndex;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;
const PHYSICAL_TOL: f64 = 1e-9;
// eigenvalues from a near-double root carry errors of order sqrt(machine epsilon)
const ENTROPY_TOL: f64 = 1e-6;
// rounding in V bounds the symplectic spectrum to about eps |2V|^2; the factor is the worst seen in practice with margin
const CONDITION_FACTOR: f64 = 64.0;

/// A mode of the static cavity or of the shaken cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeLabel {
    Static,
    Cavity(ModeIndex),
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Static => write!(f, "p"),
            ModeLabel::Cavity(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    r: f64,
}

impl SqueezeParams {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("squeezing r must be >= 0, got {r}")));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    basis: Vec<ModeLabel>,
    displacement: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl CovarianceState {
    pub fn new(basis: Vec<ModeLabel>, displacement: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = 2 * basis.len();
        if covariance.nrows() != n || covariance.ncols() != n || displacement.len() != n {
            return Err(Error::InvalidCovariance(format!(
                "{} modes need a {n}x{n} covariance and length-{n} displacement",
                basis.len()
            )));
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(Error::InvalidCovariance("covariance is not symmetric".into()));
        }
        let mut sorted = basis.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != basis.len() {
            return Err(Error::InvalidCovariance("duplicate mode labels".into()));
        }
        Ok(Self { basis, displacement, covariance })
    }

    pub fn vacuum(basis: Vec<ModeLabel>) -> Result<Self> {
        let n = 2 * basis.len();
        Self::new(basis, DVector::zeros(n), DMatrix::identity(n, n) * 0.5)
    }

    pub fn basis(&self) -> &[ModeLabel] {
        &self.basis
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    pub fn index_of(&self, label: &ModeLabel) -> Result<usize> {
        self.basis.iter().position(|l| l == label).ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    /// Checks the uncertainty relation through the symplectic spectrum.
    pub fn check_physical(&self) -> Result<()> {
        let nu = symplectic_eigenvalues(&self.covariance)?;
        match nu.first() {
            Some(v) if *v < 0.5 - PHYSICAL_TOL => {
                Err(Error::InvalidCovariance(format!("symplectic eigenvalue {v} below 1/2")))
            }
            _ => Ok(()),
        }
    }
}

/// Two-mode squeezed vacuum of the static mode p and cavity mode s, basis (p, s).
pub fn initial_tmsv(r: SqueezeParams, mode_s: ModeIndex) -> CovarianceState {
    let (c, s) = ((2.0 * r.r).cosh() / 2.0, (2.0 * r.r).sinh() / 2.0);
    let mut v = DMatrix::zeros(4, 4);
    for i in 0..4 {
        v[(i, i)] = c;
    }
    v[(0, 2)] = s;
    v[(2, 0)] = s;
    v[(1, 3)] = -s;
    v[(3, 1)] = -s;
    CovarianceState { basis: vec![ModeLabel::Static, ModeLabel::Cavity(mode_s)], displacement: DVector::zeros(4), covariance: v }
}

/// 2x2 quadrature block of a single Bogoliubov coefficient pair.
fn quadrature_block(alpha: num_complex::Complex64, beta: num_complex::Complex64) -> [[f64; 2]; 2] {
    let sum = alpha + beta;
    let diff = alpha - beta;
    [[sum.re, -sum.im], [diff.im, diff.re]]
}

/// Real symplectic matrix of a transform, rows (q,p) of out-modes, columns (q,p) of in-modes.
pub fn symplectic_matrix(t: &BogoliubovTransform) -> DMatrix<f64> {
    let (no, ni) = (t.out_modes.len(), t.in_modes.len());
    let mut s = DMatrix::zeros(2 * no, 2 * ni);
    for n in 0..no {
        for k in 0..ni {
            let b = quadrature_block(t.alpha[(n, k)], t.beta[(n, k)]);
            for (i, row) in b.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    s[(2 * n + i, 2 * k + j)] = *v;
                }
            }
        }
    }
    s
}

/// (1/2) S S^T of the cavity map, from the coefficient matrices directly.
///
/// With P = alpha + beta and Q = alpha - beta the quadrature rows are
/// (Re P, -Im P) and (Im Q, Re Q), so the product splits into K x K blocks
/// and the imaginary parts drop out when the coefficients are real.
fn vacuum_image(t: &BogoliubovTransform) -> DMatrix<f64> {
    let p = &t.alpha + &t.beta;
    let q = &t.alpha - &t.beta;
    let (pr, pi) = (p.map(|z| z.re), p.map(|z| z.im));
    let (qr, qi) = (q.map(|z| z.re), q.map(|z| z.im));
    let mut a = &pr * pr.transpose();
    let mut b = &qr * qr.transpose();
    let mut c = DMatrix::zeros(pr.nrows(), pr.nrows());
    if pi.iter().chain(qi.iter()).any(|v| *v != 0.0) {
        a += &pi * pi.transpose();
        b += &qi * qi.transpose();
        c = &pr * qi.transpose() - &pi * qr.transpose();
    }
    let n = pr.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, col| {
        let (i, j) = (r / 2, col / 2);
        0.5 * match (r % 2, col % 2) {
            (0, 0) => a[(i, j)],
            (1, 1) => b[(i, j)],
            (0, 1) => c[(i, j)],
            _ => c[(j, i)],
        }
    })
}

/// Propagates a state through a transform acting on its cavity modes.
///
/// Static labels carry the identity. Cavity modes absent from the state are
/// taken in vacuum. Output basis: the state's static labels, then the
/// transform's out-modes. `defect_tol` bounds the row symplectic defect.
pub fn propagate(state: &CovarianceState, t: &BogoliubovTransform, defect_tol: f64) -> Result<CovarianceState> {
    let defects = t.row_defects();
    let worst = match t.closure {
        // rows may be cut short but can never exceed the identity
        Closure::Passive => defects.iter().fold(0.0f64, |m, d| m.max(*d)),
        Closure::Truncated => defects.iter().fold(0.0f64, |m, d| m.max(d.abs())),
    };
    if !(worst <= defect_tol) {
        return Err(Error::SymplecticDefect { defect: worst, bound: defect_tol, tau: t.tau });
    }
    if t.closure == Closure::Passive && t.has_pair_creation() {
        return Err(Error::InvalidArgument("passive closure requires beta = 0".into()));
    }
    let statics: Vec<usize> =
        state.basis.iter().enumerate().filter(|(_, l)| **l == ModeLabel::Static).map(|(i, _)| i).collect();
    let n_static = statics.len();
    let n_out = n_static + t.out_modes.len();

    // map from the state's coordinates to output coordinates
    let mut m = DMatrix::zeros(2 * n_out, 2 * state.basis.len());
    for (o, &i) in statics.iter().enumerate() {
        m[(2 * o, 2 * i)] = 1.0;
        m[(2 * o + 1, 2 * i + 1)] = 1.0;
    }
    for (i, label) in state.basis.iter().enumerate() {
        if let ModeLabel::Cavity(mode) = label {
            let k = t.in_modes.iter().position(|x| x == mode).ok_or_else(|| Error::UnknownMode(label.to_string()))?;
            for n in 0..t.out_modes.len() {
                let b = quadrature_block(t.alpha[(n, k)], t.beta[(n, k)]);
                for (di, row) in b.iter().enumerate() {
                    m[(2 * (n_static + n) + di, 2 * i)] = row[0];
                    m[(2 * (n_static + n) + di, 2 * i + 1)] = row[1];
                }
            }
        }
    }

    let mut vac = DMatrix::identity(2 * n_out, 2 * n_out) * 0.5;
    if t.closure == Closure::Truncated {
        let cav = vacuum_image(t);
        let off = 2 * n_static;
        vac.view_mut((off, off), (cav.nrows(), cav.ncols())).copy_from(&cav);
    }
    let excess = &state.covariance - DMatrix::identity(state.covariance.nrows(), state.covariance.ncols()) * 0.5;
    let mut v = vac + &m * excess * m.transpose();
    // remove rounding asymmetry
    v = (&v + v.transpose()) * 0.5;
    let d = &m * &state.displacement;

    let mut basis: Vec<ModeLabel> = statics.iter().map(|&i| state.basis[i]).collect();
    basis.extend(t.out_modes.iter().map(|m| ModeLabel::Cavity(*m)));
    CovarianceState::new(basis, d, v)
}

/// Restriction of a state to two of its modes, in the given order.
pub fn reduce(state: &CovarianceState, a: &ModeLabel, b: &ModeLabel) -> Result<CovarianceState> {
    let idx = [state.index_of(a)?, state.index_of(b)?];
    if idx[0] == idx[1] {
        return Err(Error::InvalidArgument(format!("pair needs two distinct modes, got {a} twice")));
    }
    let coords: Vec<usize> = idx.iter().flat_map(|&i| [2 * i, 2 * i + 1]).collect();
    let v = DMatrix::from_fn(4, 4, |r, c| state.covariance[(coords[r], coords[c])]);
    let d = DVector::from_fn(4, |r, _| state.displacement[coords[r]]);
    Ok(CovarianceState { basis: vec![*a, *b], displacement: d, covariance: v })
}

pub fn photon_number(state: &CovarianceState, mode: &ModeLabel) -> Result<f64> {
    let i = state.index_of(mode)?;
    let v = &state.covariance;
    let d = &state.displacement;
    let n = (v[(2 * i, 2 * i)] + v[(2 * i + 1, 2 * i + 1)] - 1.0) / 2.0
        + (d[2 * i].powi(2) + d[2 * i + 1].powi(2)) / 2.0;
    Ok(n.max(0.0))
}

fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

/// Symplectic eigenvalues (moduli of the eigenvalues of i Omega V), ascending.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    if v.nrows() != v.ncols() || v.nrows() % 2 != 0 {
        return Err(Error::InvalidCovariance(format!("{}x{} is not an even square matrix", v.nrows(), v.ncols())));
    }
    let n = v.nrows() / 2;
    let eig = SymmetricEigen::try_new(v.clone(), 1e-15, 10_000).ok_or_else(|| Error::Eigen("covariance".into()))?;
    if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
        if !(min > 0.0) {
            return Err(Error::InvalidCovariance(format!("covariance not positive definite (eigenvalue {min})")));
        }
    }
    let sqrt_v = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let m = &sqrt_v * symplectic_form(n) * &sqrt_v;
    // M is antisymmetric; M M^T has each nu^2 twice
    let mm = &m * m.transpose();
    let mm = (&mm + mm.transpose()) * 0.5;
    let e = SymmetricEigen::try_new(mm, 1e-15, 10_000).ok_or_else(|| Error::Eigen("symplectic".into()))?;
    let mut sq: Vec<f64> = e.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
    sq.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(sq.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// Entropy function f(x) for a symplectic eigenvalue x of 2V.
pub fn entropy_f(x: f64) -> Result<f64> {
    if !(x >= 1.0 - ENTROPY_TOL) {
        return Err(Error::InvalidCovariance(format!("symplectic eigenvalue of 2V is {x} < 1")));
    }
    let y = ((x - 1.0) / 2.0).max(0.0);
    if x - 1.0 < 1e-8 {
        if y == 0.0 {
            return Ok(0.0);
        }
        return Ok((y + y * y / 2.0 - y * y.ln()) / std::f64::consts::LN_2);
    }
    let h = (x + 1.0) / 2.0;
    Ok(h * h.log2() - y * y.log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub sigma: f64,
    pub det: f64,
    pub nu_minus: f64,
    pub log_negativity: f64,
    pub mutual_information: f64,
    pub eta_minus: f64,
    pub eta_plus: f64,
    /// Set when a slightly negative radicand was clamped to zero.
    pub clamped: bool,
}

fn blocks(v: &DMatrix<f64>) -> Result<(f64, f64, f64, f64)> {
    if v.nrows() != 4 || v.ncols() != 4 {
        return Err(Error::InvalidCovariance("two-mode quantities need a 4x4 covariance".into()));
    }
    let det2 = |r: usize, c: usize| v[(r, c)] * v[(r + 1, c + 1)] - v[(r, c + 1)] * v[(r + 1, c)];
    Ok((det2(0, 0), det2(2, 2), det2(0, 2), v.determinant()))
}

/// Smaller root of x^2 - b x + c = 0 in the cancellation-free form.
fn small_root(b: f64, c: f64, clamped: &mut bool) -> Result<(f64, f64)> {
    let mut disc = b * b - 4.0 * c;
    // a double root (pure state) leaves only rounding in disc, which sqrt would amplify
    if disc.abs() <= 1e-12 * b * b {
        disc = 0.0;
    }
    if disc < 0.0 {
        if disc < -1e-9 * (b * b).max(1.0) {
            return Err(Error::InvalidCovariance(format!("negative radicand {disc}")));
        }
        *clamped = true;
        disc = 0.0;
    }
    let big = (b + disc.sqrt()) / 2.0;
    let small = if big > 0.0 { c / big } else { 0.0 };
    Ok((small.max(0.0), big))
}

pub fn log_negativity(state4: &CovarianceState) -> Result<EntanglementReport> {
    let (da, db, dc, det) = blocks(&state4.covariance)?;
    let sigma = da + db - 2.0 * dc;
    let mut clamped = false;
    let (nu2, _) = small_root(sigma, det, &mut clamped)?;
    let nu_minus = nu2.sqrt();
    let log_negativity = (-(2.0 * nu_minus).log2()).max(0.0);
    Ok(EntanglementReport {
        sigma,
        det,
        nu_minus,
        log_negativity,
        mutual_information: f64::NAN,
        eta_minus: f64::NAN,
        eta_plus: f64::NAN,
        clamped,
    })
}

pub fn mutual_information(state4: &CovarianceState) -> Result<EntanglementReport> {
    let (da, db, dc, det) = blocks(&state4.covariance)?;
    let delta = da + db + 2.0 * dc;
    let mut clamped = false;
    let (n2m, n2p) = small_root(delta, det, &mut clamped)?;
    let mut eta_minus = 2.0 * n2m.sqrt();
    let eta_plus = 2.0 * n2p.sqrt();
    let scale = 2.0 * state4.covariance.amax();
    let tol = ENTROPY_TOL.max(CONDITION_FACTOR * f64::EPSILON * scale * scale);
    if eta_minus < 1.0 && eta_minus >= 1.0 - tol {
        clamped |= eta_minus < 1.0 - ENTROPY_TOL;
        eta_minus = 1.0;
    }
    let local = |d: f64| entropy_f(2.0 * d.max(0.0).sqrt());
    let i = local(da)? + local(db)? - entropy_f(eta_minus)? - entropy_f(eta_plus)?;
    Ok(EntanglementReport {
        sigma: f64::NAN,
        det,
        nu_minus: f64::NAN,
        log_negativity: f64::NAN,
        mutual_information: i.max(0.0),
        eta_minus,
        eta_plus,
        clamped,
    })
}

/// Both measures for a two-mode state.
pub fn entanglement_report(state4: &CovarianceState) -> Result<EntanglementReport> {
    let n = log_negativity(state4)?;
    let m = mutual_information(state4)?;
    Ok(EntanglementReport {
        mutual_information: m.mutual_information,
        eta_minus: m.eta_minus,
        eta_plus: m.eta_plus,
        clamped: n.clamped || m.clamped,
        ..n
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_image_matches_full_product() {
        use num_complex::Complex64;
        let modes: Vec<ModeIndex> = (1..=3).map(ModeIndex::OneD).collect();
        let f = |i: usize, j: usize, s: f64| Complex64::new((i as f64 + s * j as f64).sin(), (s * i as f64 - j as f64).cos());
        let t = BogoliubovTransform {
            alpha: DMatrix::from_fn(2, 3, |i, j| f(i, j, 0.7)),
            beta: DMatrix::from_fn(2, 3, |i, j| f(i, j, 1.9) * 0.3),
            tau: 0.0,
            out_modes: modes[..2].to_vec(),
            in_modes: modes,
            closure: Closure::Truncated,
            trivial: false,
        };
        let s = symplectic_matrix(&t);
        let full = &s * s.transpose() * 0.5;
        assert!((vacuum_image(&t) - full).amax() < 1e-14);
    }

    #[test]
    fn vacuum_has_no_correlations() {
        let s = CovarianceState::vacuum(vec![ModeLabel::Static, ModeLabel::Cavity(ModeIndex::OneD(1))]).unwrap();
        let r = entanglement_report(&s).unwrap();
        assert_eq!(r.log_negativity, 0.0);
        assert_eq!(r.mutual_information, 0.0);
        assert_eq!(photon_number(&s, &ModeLabel::Static).unwrap(), 0.0);
    }

    #[test]
    fn tmsv_negativity() {
        let s = initial_tmsv(SqueezeParams::new(1.0).unwrap(), ModeIndex::OneD(1));
        let r = log_negativity(&s).unwrap();
        assert!((r.nu_minus - (-2f64).exp() / 2.0).abs() < 1e-15);
        assert!((r.log_negativity - 2.0 / std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn f_is_zero_at_one_and_continuous() {
        assert_eq!(entropy_f(1.0).unwrap(), 0.0);
        // series branch against the direct formula just inside it
        let x: f64 = 1.0 + 0.99e-8;
        let y = (x - 1.0) / 2.0;
        let direct = ((x + 1.0) / 2.0) * ((x + 1.0) / 2.0).log2() - y * y.log2();
        let a = entropy_f(x).unwrap();
        assert!((a - direct).abs() < 1e-6 * direct);
        assert!(entropy_f(0.5).is_err());
    }

    #[test]
    fn reduce_rejects_unknown() {
        let s = initial_tmsv(SqueezeParams::new(0.5).unwrap(), ModeIndex::OneD(1));
        assert!(reduce(&s, &ModeLabel::Static, &ModeLabel::Cavity(ModeIndex::OneD(2))).is_err());
    }

    #[test]
    fn negative_squeezing_rejected() {
        assert!(SqueezeParams::new(-0.1).is_err());
    }
}
