//! Cavity geometry, mode spectra, inter-mode couplings and resonance search.
//!
//! Natural units throughout (hbar = c = 1). A cavity is a box of sides
//! `(L_x, L_y, L_z)`; in one dimension only `L_x` is used and the spectrum
//! is equidistant, `omega_n = n pi / L_x`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative resonance tolerance, in units of the fundamental frequency.
pub const DEFAULT_RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimensionality {
    OneD,
    ThreeD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    lengths: [f64; 3],
    dimensionality: Dimensionality,
}

impl CavityGeometry {
    pub fn one_d(length: f64) -> Result<Self> {
        Self::new([length, 1.0, 1.0], Dimensionality::OneD)
    }

    pub fn three_d(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        Self::new([lx, ly, lz], Dimensionality::ThreeD)
    }

    pub fn new(lengths: [f64; 3], dimensionality: Dimensionality) -> Result<Self> {
        let used = match dimensionality {
            Dimensionality::OneD => &lengths[..1],
            Dimensionality::ThreeD => &lengths[..],
        };
        if let Some(bad) = used.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "lengths must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { lengths, dimensionality })
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn lx(&self) -> f64 {
        self.lengths[0]
    }

    pub fn dimensionality(&self) -> Dimensionality {
        self.dimensionality
    }

    /// Lowest mode index of this cavity.
    pub fn ground_mode(&self) -> ModeIndex {
        match self.dimensionality {
            Dimensionality::OneD => ModeIndex::OneD(1),
            Dimensionality::ThreeD => ModeIndex::ThreeD([1, 1, 1]),
        }
    }

    /// Fundamental frequency omega_1 (lowest mode).
    pub fn fundamental(&self) -> f64 {
        mode_frequency(self, &self.ground_mode()).expect("ground mode matches geometry")
    }
}

/// Integer mode label. Components are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeIndex {
    OneD(u32),
    ThreeD([u32; 3]),
}

impl ModeIndex {
    pub fn one_d(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMode("1D mode index must be >= 1".into()));
        }
        Ok(ModeIndex::OneD(n))
    }

    pub fn three_d(nx: u32, ny: u32, nz: u32) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidMode(format!(
                "3D mode components must be >= 1, got ({nx},{ny},{nz})"
            )));
        }
        Ok(ModeIndex::ThreeD([nx, ny, nz]))
    }

    /// Index along the shaking axis.
    pub fn x(&self) -> u32 {
        match self {
            ModeIndex::OneD(n) => *n,
            ModeIndex::ThreeD(n) => n[0],
        }
    }

    fn transverse(&self) -> [u32; 2] {
        match self {
            ModeIndex::OneD(_) => [1, 1],
            ModeIndex::ThreeD(n) => [n[1], n[2]],
        }
    }

    fn check(&self, geom: &CavityGeometry) -> Result<()> {
        match (self, geom.dimensionality) {
            (ModeIndex::OneD(n), Dimensionality::OneD) if *n >= 1 => Ok(()),
            (ModeIndex::ThreeD(n), Dimensionality::ThreeD) if n.iter().all(|c| *c >= 1) => Ok(()),
            (ModeIndex::OneD(_), Dimensionality::OneD) | (ModeIndex::ThreeD(_), Dimensionality::ThreeD) => {
                Err(Error::InvalidMode(format!("{self} has a zero component")))
            }
            (_, Dimensionality::OneD) => Err(Error::DimensionMismatch { mode: *self, expected: "1D" }),
            (_, Dimensionality::ThreeD) => Err(Error::DimensionMismatch { mode: *self, expected: "3D" }),
        }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeIndex::OneD(n) => write!(f, "{n}"),
            ModeIndex::ThreeD([x, y, z]) => write!(f, "({x},{y},{z})"),
        }
    }
}

/// Ordered, truncated set of cavity modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet(Vec<ModeIndex>);

impl ModeSet {
    pub fn new(modes: Vec<ModeIndex>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidMode("mode set is empty".into()));
        }
        let mut seen = modes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != modes.len() {
            return Err(Error::InvalidMode("mode set has duplicates".into()));
        }
        Ok(Self(modes))
    }

    /// Modes 1..=k of a 1D cavity.
    pub fn first_n(k: usize) -> Result<Self> {
        Self::new((1..=k as u32).map(ModeIndex::OneD).collect())
    }

    /// All 3D modes with every component at most `max_index`, in lexicographic order.
    pub fn cube(max_index: u32) -> Result<Self> {
        let mut v = Vec::new();
        for x in 1..=max_index {
            for y in 1..=max_index {
                for z in 1..=max_index {
                    v.push(ModeIndex::ThreeD([x, y, z]));
                }
            }
        }
        Self::new(v)
    }

    /// Modes of `geom` up to `max_index` per axis.
    pub fn truncated(geom: &CavityGeometry, max_index: u32) -> Result<Self> {
        match geom.dimensionality() {
            Dimensionality::OneD => Self::first_n(max_index as usize),
            Dimensionality::ThreeD => Self::cube(max_index),
        }
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, m: &ModeIndex) -> Option<usize> {
        self.0.iter().position(|x| x == m)
    }
}

pub fn mode_frequency(geom: &CavityGeometry, m: &ModeIndex) -> Result<f64> {
    m.check(geom)?;
    let [lx, ly, lz] = geom.lengths;
    Ok(match m {
        ModeIndex::OneD(n) => f64::from(*n) * PI / lx,
        ModeIndex::ThreeD([nx, ny, nz]) => {
            let kx = f64::from(*nx) * PI / lx;
            let ky = f64::from(*ny) * PI / ly;
            let kz = f64::from(*nz) * PI / lz;
            (kx * kx + ky * ky + kz * kz).sqrt()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingVariant {
    /// Both walls move rigidly together.
    Shaker,
    /// Only the wall at x = L_x moves.
    SingleWall,
}

/// Shaker coupling between modes k and j.
pub fn shaker_coupling(k: &ModeIndex, j: &ModeIndex) -> f64 {
    if k.transverse() != j.transverse() {
        return 0.0;
    }
    let (kx, jx) = (f64::from(k.x()), f64::from(j.x()));
    if (k.x() + j.x()) % 2 == 0 {
        return 0.0;
    }
    // ((-1)^(k+j) - 1) = -2 for k+j odd
    -2.0 * 2.0 * kx * jx / (kx * kx - jx * jx)
}

/// Single-wall coupling between modes k and j.
pub fn single_wall_coupling(k: &ModeIndex, j: &ModeIndex) -> f64 {
    if k.transverse() != j.transverse() || k.x() == j.x() {
        return 0.0;
    }
    let (kx, jx) = (f64::from(k.x()), f64::from(j.x()));
    2.0 * kx * jx / (kx * kx - jx * jx)
}

pub fn coupling(variant: CouplingVariant, k: &ModeIndex, j: &ModeIndex) -> f64 {
    match variant {
        CouplingVariant::Shaker => shaker_coupling(k, j),
        CouplingVariant::SingleWall => single_wall_coupling(k, j),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub entries: DMatrix<f64>,
    pub variant: CouplingVariant,
    pub modes: ModeSet,
}

pub fn coupling_matrix(geom: &CavityGeometry, modes: &ModeSet, variant: CouplingVariant) -> Result<CouplingMatrix> {
    for m in modes.modes() {
        m.check(geom)?;
    }
    let ms = modes.modes();
    let entries = DMatrix::from_fn(ms.len(), ms.len(), |a, b| coupling(variant, &ms[a], &ms[b]));
    Ok(CouplingMatrix { entries, variant, modes: modes.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub epsilon: f64,
    pub omega_drive: f64,
    pub harmonic_q: Option<u32>,
    pub t_start: f64,
    /// `None` means the shaking never stops.
    pub t_stop: Option<f64>,
}

impl DriveConfig {
    pub fn new(epsilon: f64, omega_drive: f64) -> Result<Self> {
        let d = Self { epsilon, omega_drive, harmonic_q: None, t_start: 0.0, t_stop: None };
        d.validate()?;
        Ok(d)
    }

    /// Drive at the q-th harmonic of the fundamental.
    pub fn harmonic(geom: &CavityGeometry, epsilon: f64, q: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidDrive("harmonic_q must be >= 1".into()));
        }
        let d = Self {
            epsilon,
            omega_drive: f64::from(q) * geom.fundamental(),
            harmonic_q: Some(q),
            t_start: 0.0,
            t_stop: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_window(mut self, t_start: f64, t_stop: Option<f64>) -> Result<Self> {
        self.t_start = t_start;
        self.t_stop = t_stop;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            problems.push(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.omega_drive.is_finite() && self.omega_drive > 0.0) {
            problems.push(format!("omega_drive must be > 0, got {}", self.omega_drive));
        }
        if !self.t_start.is_finite() {
            problems.push("t_start must be finite".into());
        }
        if let Some(stop) = self.t_stop {
            if !(stop > self.t_start) {
                problems.push(format!("t_start ({}) must be < t_stop ({stop})", self.t_start));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDrive(problems.join("; ")))
        }
    }

    /// Checks the harmonic number against the cavity spectrum.
    pub fn validate_for(&self, geom: &CavityGeometry, rel_tol: f64) -> Result<()> {
        self.validate()?;
        if let Some(q) = self.harmonic_q {
            let w1 = geom.fundamental();
            if (self.omega_drive - f64::from(q) * w1).abs() >= rel_tol * w1 {
                return Err(Error::InvalidDrive(format!(
                    "omega_drive = {} is not q * omega_1 = {}",
                    self.omega_drive,
                    f64::from(q) * w1
                )));
            }
        }
        Ok(())
    }

    /// Slow time tau = eps omega_1 (t - t_start) / (2 L_x), frozen outside the shaking window.
    pub fn slow_time(&self, geom: &CavityGeometry, t: f64) -> f64 {
        let t_eff = match self.t_stop {
            Some(stop) => t.min(stop),
            None => t,
        };
        (self.epsilon * geom.fundamental() * (t_eff - self.t_start) / (2.0 * geom.lx())).max(0.0)
    }

    /// Lab time elapsed since `t_start` that corresponds to slow time `tau`.
    pub fn lab_time(&self, geom: &CavityGeometry, tau: f64) -> f64 {
        self.t_start + 2.0 * geom.lx() * tau / (self.epsilon * geom.fundamental())
    }

    /// Slow time at which shaking stops, if it does.
    pub fn stop_slow_time(&self, geom: &CavityGeometry) -> Option<f64> {
        self.t_stop.map(|t| self.slow_time(geom, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResonanceKind {
    Sum,
    Difference,
}

fn resonates(omega: f64, wa: f64, wb: f64, kind: ResonanceKind, tol: f64) -> bool {
    match kind {
        ResonanceKind::Sum => (omega - (wa + wb)).abs() < tol,
        ResonanceKind::Difference => (omega - (wa - wb).abs()).abs() < tol,
    }
}

/// Finds the partner c of mode s with Omega = omega_s +- omega_c among modes up to `cutoff` per axis.
///
/// Besides more than one direct candidate, a resonant chain (a third mode
/// coupled resonantly to s or c) is reported as ambiguous: the two-mode
/// solution does not apply and the equidistant solver must be used.
pub fn resonant_partner(
    geom: &CavityGeometry,
    drive: &DriveConfig,
    s: &ModeIndex,
    kind: ResonanceKind,
    tol: f64,
    cutoff: u32,
) -> Result<Option<ModeIndex>> {
    s.check(geom)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("resonance tolerance must be > 0, got {tol}")));
    }
    let set = ModeSet::truncated(geom, cutoff)?;
    let omega = drive.omega_drive;
    let ws = mode_frequency(geom, s)?;
    let freq = |m: &ModeIndex| mode_frequency(geom, m).expect("mode from truncated set");
    let candidates: Vec<ModeIndex> = set
        .modes()
        .iter()
        .filter(|c| *c != s && shaker_coupling(s, c) != 0.0 && resonates(omega, ws, freq(c), kind, tol))
        .copied()
        .collect();
    match candidates.len() {
        0 => Ok(None),
        1 => {
            let c = candidates[0];
            let wc = freq(&c);
            let mut chain: Vec<ModeIndex> = Vec::new();
            for d in set.modes().iter().filter(|d| *d != s && **d != c) {
                let wd = freq(d);
                for (anchor, wa) in [(s, ws), (&c, wc)] {
                    if shaker_coupling(anchor, d) == 0.0 {
                        continue;
                    }
                    if resonates(omega, wa, wd, ResonanceKind::Sum, tol)
                        || resonates(omega, wa, wd, ResonanceKind::Difference, tol)
                    {
                        chain.push(*d);
                    }
                }
            }
            if chain.is_empty() {
                Ok(Some(c))
            } else {
                chain.sort();
                chain.dedup();
                let mut all = vec![c];
                all.extend(chain);
                Err(Error::AmbiguousResonance { mode: *s, candidates: all })
            }
        }
        _ => Err(Error::AmbiguousResonance { mode: *s, candidates }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_of_pi_cavity_is_one() {
        let g = CavityGeometry::one_d(PI).unwrap();
        assert!((g.fundamental() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatch_is_rejected() {
        let g = CavityGeometry::one_d(1.0).unwrap();
        let e = mode_frequency(&g, &ModeIndex::ThreeD([1, 1, 1])).unwrap_err();
        assert!(matches!(e, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn slow_time_freezes_after_stop() {
        let g = CavityGeometry::one_d(PI).unwrap();
        let d = DriveConfig::harmonic(&g, 0.01, 3).unwrap().with_window(0.0, Some(100.0)).unwrap();
        assert!((d.slow_time(&g, 100.0) - 0.01 * 100.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(d.slow_time(&g, 100.0), d.slow_time(&g, 500.0));
        assert_eq!(d.slow_time(&g, -1.0), 0.0);
    }

    #[test]
    fn window_must_be_ordered() {
        let d = DriveConfig::new(0.1, 1.0).unwrap();
        assert!(d.with_window(2.0, Some(1.0)).is_err());
    }
}
