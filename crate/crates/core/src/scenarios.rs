//! End-to-end regimes: transform, propagate the initial squeezed state, record observables.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bogoliubov::{
    integrate_multiscale, integrate_multiscale_grid, shaker_transform_1d_with, two_mode_difference_transform,
    two_mode_sum_transform, BogoliubovTransform, ColumnPolicy, OdeOptions, OdeSystem, TwoModeRates,
    DEFAULT_MAX_COLUMNS,
};
use crate::cavity::{
    mode_frequency, resonant_partner, CavityGeometry, Dimensionality, DriveConfig, ModeIndex, ModeSet, ResonanceKind,
};
use crate::error::{Error, Result};
use crate::gaussian::{
    entanglement_report, entropy_f, initial_tmsv, log_negativity, photon_number, propagate, reduce, CovarianceState,
    EntanglementReport, ModeLabel, SqueezeParams,
};

pub const DEFAULT_TRUNCATION: usize = 40;
pub const DEFAULT_DEFECT_TOL: f64 = 1e-6;
pub const SUDDEN_DEATH_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Sum3D,
    Diff3D,
    Fund1D,
    Harm1D { q: u32 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Sum3D => "sum3d",
            Regime::Diff3D => "diff3d",
            Regime::Fund1D => "fund1d",
            Regime::Harm1D { .. } => "harm1d",
        }
    }

    pub fn is_one_d(&self) -> bool {
        matches!(self, Regime::Fund1D | Regime::Harm1D { .. })
    }

    pub fn harmonic(&self) -> Option<u32> {
        match self {
            Regime::Fund1D => Some(1),
            Regime::Harm1D { q } => Some(*q),
            _ => None,
        }
    }

    pub fn default_solver(&self) -> Solver {
        Solver::Analytic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    Analytic,
    Ode,
}

/// Evenly spaced slow-time samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub samples: usize,
}

impl TimeGrid {
    pub fn taus(&self) -> Vec<f64> {
        match self.samples {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub label: Option<String>,
    pub regime: Regime,
    pub geometry: CavityGeometry,
    pub drive: DriveConfig,
    pub squeeze: SqueezeParams,
    /// Cavity mode initially entangled with the static mode.
    pub s: ModeIndex,
    /// Resonant partner for the 3D regimes.
    pub c: Option<ModeIndex>,
    /// 1D: number of tracked modes K. 3D: index cutoff per axis.
    pub truncation: usize,
    pub grid: TimeGrid,
    pub tracked: Vec<ModeLabel>,
    pub pairs: Vec<(ModeLabel, ModeLabel)>,
    pub solver: Solver,
    pub ode: OdeOptions,
    pub defect_tol: f64,
    /// In-mode column cap for analytic 1D transforms with pair creation.
    pub max_columns: usize,
}

impl ScenarioConfig {
    /// A config with defaults for everything but the physics.
    pub fn new(
        regime: Regime,
        geometry: CavityGeometry,
        drive: DriveConfig,
        squeeze: SqueezeParams,
        s: ModeIndex,
        c: Option<ModeIndex>,
        grid: TimeGrid,
    ) -> Self {
        let truncation = if regime.is_one_d() { DEFAULT_TRUNCATION } else { 3 };
        Self {
            label: None,
            regime,
            geometry,
            drive,
            squeeze,
            s,
            c,
            truncation,
            grid,
            tracked: vec![ModeLabel::Cavity(s)],
            pairs: vec![(ModeLabel::Static, ModeLabel::Cavity(s))],
            solver: regime.default_solver(),
            ode: OdeOptions::default(),
            defect_tol: DEFAULT_DEFECT_TOL,
            max_columns: DEFAULT_MAX_COLUMNS,
        }
    }

    /// Every problem with the config, or nothing.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let dim = self.geometry.dimensionality();
        match (self.regime, dim) {
            (Regime::Sum3D | Regime::Diff3D, Dimensionality::OneD) => {
                p.push(format!("regime {} needs a 3D geometry", self.regime.name()))
            }
            (Regime::Fund1D | Regime::Harm1D { .. }, Dimensionality::ThreeD) => {
                p.push(format!("regime {} needs a 1D geometry", self.regime.name()))
            }
            _ => {}
        }
        if let Regime::Harm1D { q } = self.regime {
            if q % 2 == 0 {
                p.push(format!("harmonic_q must be odd, got {q}"));
            } else if q < 3 {
                p.push(format!("harm1d needs harmonic_q >= 3, got {q}"));
            }
        }
        if let Err(e) = self.drive.validate() {
            p.push(e.to_string());
        }
        if let Some(q) = self.regime.harmonic() {
            if dim == Dimensionality::OneD {
                if let Err(e) = self.drive.validate_for(&self.geometry, self.ode.resonance_tol) {
                    p.push(e.to_string());
                }
                if self.drive.harmonic_q.is_some_and(|dq| dq != q) {
                    p.push(format!("drive harmonic_q {:?} disagrees with regime q = {q}", self.drive.harmonic_q));
                }
                if self.truncation < q as usize {
                    p.push(format!("truncation {} must be >= q = {q}", self.truncation));
                }
            }
        }
        if self.regime.is_one_d() && !matches!(self.s, ModeIndex::OneD(_)) {
            p.push(format!("mode s = {} is not a 1D mode", self.s));
        }
        if !self.regime.is_one_d() {
            if !matches!(self.s, ModeIndex::ThreeD(_)) {
                p.push(format!("mode s = {} is not a 3D mode", self.s));
            }
            match self.c {
                None => p.push("3D regimes need the partner mode c".into()),
                Some(c) if c == self.s => p.push("modes s and c must differ".into()),
                Some(ModeIndex::OneD(_)) => p.push("mode c must be a 3D mode".into()),
                _ => {}
            }
        }
        if !(self.grid.samples >= 1) {
            p.push("grid needs at least one sample".into());
        }
        if !(self.grid.start >= 0.0 && self.grid.start.is_finite()) {
            p.push(format!("grid start must be >= 0, got {}", self.grid.start));
        }
        if !(self.grid.stop >= self.grid.start && self.grid.stop.is_finite()) {
            p.push(format!("grid stop must be >= start, got {}", self.grid.stop));
        }
        if !(self.ode.step > 0.0) {
            p.push(format!("ode step must be > 0, got {}", self.ode.step));
        }
        if !(self.defect_tol > 0.0) {
            p.push(format!("defect tolerance must be > 0, got {}", self.defect_tol));
        }
        if self.pairs.iter().any(|(a, b)| a == b) {
            p.push("a pair lists the same mode twice".into());
        }
        let known = self.known_labels();
        for l in self.tracked.iter().chain(self.pairs.iter().flat_map(|(a, b)| [a, b])) {
            if !known(l) {
                p.push(format!("mode {l} is outside the simulated mode set"));
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(p.join("; ")))
        }
    }

    fn known_labels(&self) -> impl Fn(&ModeLabel) -> bool + '_ {
        move |l| match l {
            ModeLabel::Static => true,
            ModeLabel::Cavity(m) => {
                if self.regime.is_one_d() {
                    matches!(m, ModeIndex::OneD(n) if (*n as usize) <= self.truncation)
                } else if self.solver == Solver::Analytic {
                    *m == self.s || Some(*m) == self.c
                } else {
                    matches!(m, ModeIndex::ThreeD(n) if n.iter().all(|x| (*x as usize) <= self.truncation))
                }
            }
        }
    }

    /// Column-name tag for a mode: p, s and c for the 3D roles, the index in 1D.
    pub fn mode_name(&self, l: &ModeLabel) -> String {
        match l {
            ModeLabel::Static => "p".into(),
            ModeLabel::Cavity(m) if !self.regime.is_one_d() && *m == self.s => "s".into(),
            ModeLabel::Cavity(m) if !self.regime.is_one_d() && Some(*m) == self.c => "c".into(),
            ModeLabel::Cavity(ModeIndex::OneD(n)) => n.to_string(),
            ModeLabel::Cavity(ModeIndex::ThreeD([x, y, z])) => format!("{x}-{y}-{z}"),
        }
    }
}

/// Drive and partner for a constructed 3D resonance between s and c.
pub fn resonant_drive(
    geom: &CavityGeometry,
    s: &ModeIndex,
    c: &ModeIndex,
    kind: ResonanceKind,
    epsilon: f64,
) -> Result<DriveConfig> {
    let ws = mode_frequency(geom, s)?;
    let wc = mode_frequency(geom, c)?;
    let omega = match kind {
        ResonanceKind::Sum => ws + wc,
        ResonanceKind::Difference => (ws - wc).abs(),
    };
    DriveConfig::new(epsilon, omega)
}

enum Route {
    TwoMode { rates: TwoModeRates, kind: ResonanceKind },
    Ode { system: OdeSystem, modes: ModeSet },
    OneD { q: u32, policy: ColumnPolicy },
}

/// A validated scenario ready to produce transforms and states at any slow time.
pub struct Prepared {
    pub config: ScenarioConfig,
    route: Route,
    initial: CovarianceState,
    tau_stop: Option<f64>,
    /// Resonant rate for the 3D regimes.
    pub rate: Option<f64>,
}

impl Prepared {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let cfg = config.clone();
        let geom = &cfg.geometry;
        let (route, rate) = match (cfg.regime, cfg.solver) {
            (Regime::Sum3D | Regime::Diff3D, solver) => {
                let kind = if cfg.regime == Regime::Sum3D { ResonanceKind::Sum } else { ResonanceKind::Difference };
                let c = cfg.c.expect("validated");
                let tol = cfg.ode.resonance_tol * geom.fundamental();
                let partner = resonant_partner(geom, &cfg.drive, &cfg.s, kind, tol, cfg.truncation as u32)?;
                if partner != Some(c) {
                    return Err(Error::Precondition(format!(
                        "drive omega = {} does not resonate s = {} with c = {c} (found {partner:?})",
                        cfg.drive.omega_drive, cfg.s
                    )));
                }
                let rates = TwoModeRates::new(geom, &cfg.drive, &cfg.s, &c)?;
                let rate = if kind == ResonanceKind::Sum { rates.gamma_minus } else { rates.gamma_plus };
                let route = match solver {
                    Solver::Analytic => Route::TwoMode { rates, kind },
                    Solver::Ode => {
                        Route::Ode { system: OdeSystem::ThreeD, modes: ModeSet::cube(cfg.truncation as u32)? }
                    }
                };
                (route, Some(rate))
            }
            (regime, Solver::Analytic) => {
                let q = regime.harmonic().expect("1D regime");
                let policy = if q == 1 {
                    // beta vanishes: the passive closure needs only the tracked columns
                    ColumnPolicy::Fixed(cfg.truncation)
                } else {
                    ColumnPolicy::Adaptive { max_columns: cfg.max_columns }
                };
                (Route::OneD { q, policy }, None)
            }
            (_, Solver::Ode) => {
                (Route::Ode { system: OdeSystem::OneDShaker, modes: ModeSet::first_n(cfg.truncation)? }, None)
            }
        };
        let initial = initial_tmsv(cfg.squeeze, cfg.s);
        let tau_stop = cfg.drive.stop_slow_time(geom);
        Ok(Self { config: cfg, route, initial, tau_stop, rate })
    }

    fn effective(&self, tau: f64) -> f64 {
        match self.tau_stop {
            Some(stop) => tau.min(stop),
            None => tau,
        }
    }

    pub fn transform_at(&self, tau: f64) -> Result<BogoliubovTransform> {
        let t = self.effective(tau);
        let cfg = &self.config;
        match &self.route {
            Route::TwoMode { rates, kind: ResonanceKind::Sum } => two_mode_sum_transform(rates, t),
            Route::TwoMode { rates, kind: ResonanceKind::Difference } => two_mode_difference_transform(rates, t),
            Route::Ode { system, modes } => integrate_multiscale(*system, &cfg.geometry, &cfg.drive, modes, t, &cfg.ode),
            Route::OneD { q, policy } => shaker_transform_1d_with(*q, t, cfg.truncation, *policy),
        }
    }

    pub fn transforms(&self, taus: &[f64]) -> Result<Vec<BogoliubovTransform>> {
        let eff: Vec<f64> = taus.iter().map(|t| self.effective(*t)).collect();
        if let Route::Ode { system, modes } = &self.route {
            let cfg = &self.config;
            return integrate_multiscale_grid(*system, &cfg.geometry, &cfg.drive, modes, &eff, &cfg.ode);
        }
        taus.par_iter()
            .enumerate()
            .map(|(i, t)| {
                self.transform_at(*t).map_err(|e| Error::Sample { index: i, tau: *t, source: Box::new(e) })
            })
            .collect()
    }

    pub fn state_from(&self, t: &BogoliubovTransform) -> Result<CovarianceState> {
        propagate(&self.initial, t, self.config.defect_tol)
    }

    pub fn state_at(&self, tau: f64) -> Result<CovarianceState> {
        self.state_from(&self.transform_at(tau)?)
    }

    pub fn initial_state(&self) -> &CovarianceState {
        &self.initial
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub regime: String,
    pub label: Option<String>,
    pub solver: Solver,
    pub truncation: usize,
    /// Largest number of in-mode columns used by any sample.
    pub in_mode_columns: usize,
    pub defect_tol: f64,
    pub resonance_tol: f64,
    pub ode_step: f64,
    pub max_symplectic_defect: f64,
    /// Samples where a symplectic eigenvalue was snapped to its physical bound within rounding.
    pub clamped_samples: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub tau: Vec<f64>,
    pub columns: Vec<Column>,
    pub metadata: SeriesMetadata,
}

impl ObservableSeries {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }
}

struct Sample {
    photons: Vec<f64>,
    pairs: Vec<EntanglementReport>,
    defect: f64,
    columns: usize,
}

fn evaluate(
    prep: &Prepared,
    t: &BogoliubovTransform,
    tracked: &[ModeLabel],
    pairs: &[(ModeLabel, ModeLabel)],
) -> Result<Sample> {
    let state = prep.state_from(t)?;
    let photons = tracked.iter().map(|l| photon_number(&state, l)).collect::<Result<Vec<_>>>()?;
    let pairs =
        pairs.iter().map(|(a, b)| entanglement_report(&reduce(&state, a, b)?)).collect::<Result<Vec<_>>>()?;
    Ok(Sample { photons, pairs, defect: t.symplectic_defect(), columns: t.in_modes.len() })
}

fn series_for(prep: &Prepared, tracked: &[ModeLabel], pairs: &[(ModeLabel, ModeLabel)]) -> Result<ObservableSeries> {
    let cfg = &prep.config;
    let taus = cfg.grid.taus();
    let transforms = prep.transforms(&taus)?;
    let samples: Vec<Sample> = transforms
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            evaluate(prep, t, tracked, pairs).map_err(|e| Error::Sample { index: i, tau: taus[i], source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mut columns = Vec::new();
    for (k, l) in tracked.iter().enumerate() {
        columns.push(Column { name: format!("N_{}", cfg.mode_name(l)), values: samples.iter().map(|s| s.photons[k]).collect() });
    }
    for (k, (a, b)) in pairs.iter().enumerate() {
        let tag = format!("{}_{}", cfg.mode_name(a), cfg.mode_name(b));
        columns.push(Column {
            name: format!("logneg_{tag}"),
            values: samples.iter().map(|s| s.pairs[k].log_negativity).collect(),
        });
        columns.push(Column {
            name: format!("mutinfo_{tag}"),
            values: samples.iter().map(|s| s.pairs[k].mutual_information).collect(),
        });
    }
    if let Some((c, i)) = columns.iter().find_map(|c| c.values.iter().position(|v| !v.is_finite()).map(|i| (c, i))) {
        return Err(Error::Sample {
            index: i,
            tau: taus[i],
            source: Box::new(Error::InvalidCovariance(format!("non-finite {}", c.name))),
        });
    }
    Ok(ObservableSeries {
        tau: taus,
        columns,
        metadata: SeriesMetadata {
            regime: cfg.regime.name().into(),
            label: cfg.label.clone(),
            solver: cfg.solver,
            truncation: cfg.truncation,
            in_mode_columns: samples.iter().map(|s| s.columns).max().unwrap_or(0),
            defect_tol: cfg.defect_tol,
            resonance_tol: cfg.ode.resonance_tol,
            ode_step: cfg.ode.step,
            max_symplectic_defect: samples.iter().map(|s| s.defect).fold(0.0, f64::max),
            clamped_samples: samples.iter().filter(|s| s.pairs.iter().any(|p| p.clamped)).count(),
            rate: prep.rate,
        },
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ObservableSeries> {
    let prep = Prepared::new(config)?;
    series_for(&prep, &config.tracked, &config.pairs)
}

/// Pairwise negativity between each partner j and both p and s.
pub fn redistribution_map(config: &ScenarioConfig, partner_modes: &[ModeLabel]) -> Result<ObservableSeries> {
    let p = ModeLabel::Static;
    let s = ModeLabel::Cavity(config.s);
    let mut pairs = Vec::new();
    if !partner_modes.contains(&s) {
        pairs.push((p, s));
    }
    for j in partner_modes {
        if *j != p {
            pairs.push((p, *j));
        }
        if *j != s && *j != p {
            pairs.push((s, *j));
        }
    }
    let mut cfg = config.clone();
    cfg.pairs = pairs;
    cfg.tracked = partner_modes.iter().filter(|l| **l != p).copied().collect();
    if !cfg.tracked.contains(&s) {
        cfg.tracked.insert(0, s);
    }
    run_scenario(&cfg)
}

/// Smallest nu_minus of the pair at each grid sample.
pub fn nu_minus_series(prep: &Prepared, pair: &(ModeLabel, ModeLabel)) -> Result<Vec<f64>> {
    let taus = prep.config.grid.taus();
    let ts = prep.transforms(&taus)?;
    ts.par_iter()
        .map(|t| Ok(log_negativity(&reduce(&prep.state_from(t)?, &pair.0, &pair.1)?)?.nu_minus))
        .collect()
}

/// Time after which the pair's negativity stays exactly zero, refined by bisection on nu_minus = 1/2.
pub fn sudden_death_time(config: &ScenarioConfig, pair: &(ModeLabel, ModeLabel)) -> Result<Option<f64>> {
    let prep = Prepared::new(config)?;
    let taus = config.grid.taus();
    let nu = nu_minus_series(&prep, pair)?;
    let alive = |v: f64| 2.0 * v < 1.0;
    let initial = log_negativity(&reduce(&prep.state_at(0.0)?, &pair.0, &pair.1)?)?;
    if !alive(initial.nu_minus) {
        return Err(Error::Precondition("negativity is zero at tau = 0".into()));
    }
    let Some(first_dead) = nu.iter().position(|v| !alive(*v)) else {
        return Ok(None);
    };
    if let Some(back) = nu[first_dead..].iter().position(|v| alive(*v)) {
        return Err(Error::Reentry { died_at: taus[first_dead], revived_at: taus[first_dead + back] });
    }
    if first_dead == 0 {
        return Ok(Some(taus[0]));
    }
    let f = |tau: f64| -> Result<f64> {
        Ok(log_negativity(&reduce(&prep.state_at(tau)?, &pair.0, &pair.1)?)?.nu_minus - 0.5)
    };
    let (mut lo, mut hi) = (taus[first_dead - 1], taus[first_dead]);
    while hi - lo > SUDDEN_DEATH_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Slow time of the first interior minimum of the photon number of `mode`, if any.
pub fn photon_turning_point(series: &ObservableSeries, column: &str) -> Option<f64> {
    let v = series.column(column)?;
    (1..v.len().saturating_sub(1)).find(|&i| v[i] <= v[i - 1] && v[i] < v[i + 1]).map(|i| series.tau[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTimeLimits {
    pub regime: String,
    pub log_negativity: f64,
    pub mutual_information: f64,
    /// Limit of 2 nu_minus when the regime has one.
    pub two_nu_minus: Option<f64>,
    /// Limit of det V / Sigma when the regime has one.
    pub det_over_sigma: Option<f64>,
    /// Diagonal of the limiting (p, s) covariance when the regime has one.
    pub covariance_diagonal: Option<[f64; 4]>,
}

pub fn long_time_limits(config: &ScenarioConfig) -> Result<LongTimeLimits> {
    let r = config.squeeze.r();
    let ch = (2.0 * r).cosh();
    let base = LongTimeLimits {
        regime: config.regime.name().into(),
        log_negativity: 0.0,
        mutual_information: 0.0,
        two_nu_minus: None,
        det_over_sigma: None,
        covariance_diagonal: None,
    };
    match config.regime {
        Regime::Diff3D => Err(Error::Precondition("the difference resonance is periodic and has no limit".into())),
        Regime::Sum3D => Ok(LongTimeLimits { mutual_information: entropy_f(ch)?, det_over_sigma: Some(0.25), ..base }),
        Regime::Fund1D => Ok(LongTimeLimits { covariance_diagonal: Some([ch / 2.0, ch / 2.0, 0.5, 0.5]), ..base }),
        Regime::Harm1D { .. } => Ok(LongTimeLimits { two_nu_minus: Some(ch), ..base }),
    }
}

/// Max absolute difference per shared column between runs at K and K/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub truncation: usize,
    pub half_truncation: usize,
    pub max_abs_difference: Vec<(String, f64)>,
}

pub fn convergence_report(config: &ScenarioConfig, full: &ObservableSeries) -> Result<Option<ConvergenceReport>> {
    if !config.regime.is_one_d() {
        return Ok(None);
    }
    let mut half = config.clone();
    half.truncation = config.truncation / 2;
    if !half.problems().is_empty() {
        return Ok(None);
    }
    let h = run_scenario(&half)?;
    let diffs = full
        .columns
        .iter()
        .filter_map(|c| {
            h.column(&c.name)
                .map(|hv| (c.name.clone(), c.values.iter().zip(hv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)))
        })
        .collect();
    Ok(Some(ConvergenceReport { truncation: config.truncation, half_truncation: half.truncation, max_abs_difference: diffs }))
}

/// Default 3D box used by the figure configs: incommensurate sides keep the resonant pair isolated.
pub fn default_box() -> CavityGeometry {
    CavityGeometry::three_d(1.0, 1.3, 1.7).expect("positive lengths")
}

/// One quarter period of the difference resonance, in slow time, for a given rate.
pub fn quarter_period(rate: f64) -> f64 {
    PI / (2.0 * rate)
}
