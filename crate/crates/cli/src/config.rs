//! TOML scenario files.
//!
//! Every section is optional except `regime`; see the README for the schema.

use std::path::Path;

use dce_core::bogoliubov::{OdeOptions, TwoModeRates};
use dce_core::cavity::{CavityGeometry, DriveConfig, ModeIndex, ResonanceKind};
use dce_core::gaussian::{ModeLabel, SqueezeParams};
use dce_core::scenarios::{default_box, resonant_drive, Regime, ScenarioConfig, Solver, TimeGrid};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 61;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    label: Option<String>,
    regime: String,
    harmonic_q: Option<u32>,
    r: Option<f64>,
    truncation: Option<usize>,
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    modes: RawModes,
    #[serde(default)]
    drive: RawDrive,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    observables: RawObservables,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    lengths: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModes {
    s: Option<Vec<u32>>,
    c: Option<Vec<u32>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    epsilon: Option<f64>,
    omega: Option<f64>,
    t_start: Option<f64>,
    t_stop: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start: Option<f64>,
    stop: Option<f64>,
    /// Stop given as rate * tau for the 3D regimes.
    stop_rate_units: Option<f64>,
    samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservables {
    tracked: Option<Vec<String>>,
    pairs: Option<Vec<[String; 2]>>,
    partners: Option<Vec<String>>,
    log_photons: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    kind: Option<String>,
    step: Option<f64>,
    defect_tol: Option<f64>,
    resonance_tol: Option<f64>,
    max_columns: Option<usize>,
}

/// A resolved scenario plus the run options that live next to it in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: ScenarioConfig,
    /// Redistribution partners; when present the run is a redistribution map.
    pub partners: Option<Vec<ModeLabel>>,
    pub log_photons: bool,
}

pub fn load(path: &Path, truncation: Option<usize>) -> Result<RunSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, truncation)
}

fn parse_error(text: &str, e: &toml::de::Error) -> CliError {
    let msg = e.message();
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            CliError::Config(vec![format!("line {line}, column {col}: {msg}")])
        }
        None => CliError::Config(vec![msg.to_string()]),
    }
}

/// Parses and validates a config; every problem found is reported together.
pub fn parse(text: &str, truncation: Option<usize>) -> Result<RunSpec, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let mut problems = Vec::new();

    let regime = match (raw.regime.to_ascii_lowercase().as_str(), raw.harmonic_q) {
        ("sum3d", None) => Some(Regime::Sum3D),
        ("diff3d", None) => Some(Regime::Diff3D),
        ("fund1d", None | Some(1)) => Some(Regime::Fund1D),
        ("harm1d", Some(q)) => Some(Regime::Harm1D { q }),
        ("harm1d", None) => {
            problems.push("harm1d needs harmonic_q".into());
            None
        }
        ("sum3d" | "diff3d" | "fund1d", Some(q)) => {
            problems.push(format!("harmonic_q = {q} does not apply to regime {}", raw.regime));
            None
        }
        (other, _) => {
            problems.push(format!("unknown regime '{other}' (expected sum3d, diff3d, fund1d or harm1d)"));
            None
        }
    };
    let one_d = regime.map(|r| r.is_one_d());

    let geometry = match (&raw.geometry.lengths, one_d) {
        (None, Some(false)) => Some(default_box()),
        (None, _) => Some(CavityGeometry::one_d(1.0).expect("unit length")),
        (Some(l), _) if l.len() == 1 => keep(CavityGeometry::one_d(l[0]), &mut problems),
        (Some(l), _) if l.len() == 3 => keep(CavityGeometry::three_d(l[0], l[1], l[2]), &mut problems),
        (Some(l), _) => {
            problems.push(format!("geometry.lengths needs 1 or 3 entries, got {}", l.len()));
            None
        }
    };

    let mode = |v: &Vec<u32>, name: &str, problems: &mut Vec<String>| match v.as_slice() {
        [n] => keep(ModeIndex::one_d(*n), problems),
        [x, y, z] => keep(ModeIndex::three_d(*x, *y, *z), problems),
        _ => {
            problems.push(format!("modes.{name} needs 1 or 3 indices, got {}", v.len()));
            None
        }
    };
    let s = match (&raw.modes.s, one_d) {
        (Some(v), _) => mode(v, "s", &mut problems),
        (None, Some(false)) => Some(ModeIndex::ThreeD([1, 1, 1])),
        (None, _) => Some(ModeIndex::OneD(1)),
    };
    let c = match (&raw.modes.c, one_d) {
        (Some(v), _) => mode(v, "c", &mut problems),
        (None, Some(false)) => Some(ModeIndex::ThreeD([2, 1, 1])),
        (None, _) => None,
    };

    let r = raw.r.unwrap_or(1.0);
    let squeeze = keep(SqueezeParams::new(r), &mut problems);
    let epsilon = raw.drive.epsilon.unwrap_or(DEFAULT_EPSILON);

    let mut drive = None;
    let mut rate = None;
    if let (Some(regime), Some(g), Some(s)) = (regime, geometry, s) {
        let d = match (raw.drive.omega, regime) {
            (Some(w), Regime::Fund1D | Regime::Harm1D { .. }) => {
                let q = regime.harmonic().expect("1D");
                DriveConfig::new(epsilon, w).map(|d| DriveConfig { harmonic_q: Some(q), ..d })
            }
            (Some(w), _) => DriveConfig::new(epsilon, w),
            (None, Regime::Fund1D | Regime::Harm1D { .. }) => {
                DriveConfig::harmonic(&g, epsilon, regime.harmonic().expect("1D"))
            }
            (None, Regime::Sum3D | Regime::Diff3D) => match c {
                Some(c) => resonant_drive(&g, &s, &c, kind_of(regime), epsilon),
                None => Ok(DriveConfig::new(epsilon, 1.0).expect("positive")),
            },
        };
        drive = keep(d.and_then(|d| d.with_window(raw.drive.t_start.unwrap_or(0.0), raw.drive.t_stop)), &mut problems);
        if let (Some(d), Some(c), false) = (drive, c, regime.is_one_d()) {
            if let Ok(rates) = TwoModeRates::new(&g, &d, &s, &c) {
                rate = Some(if regime == Regime::Sum3D { rates.gamma_minus } else { rates.gamma_plus });
            }
        }
    }

    let start = raw.grid.start.unwrap_or(0.0);
    let stop = match (raw.grid.stop, raw.grid.stop_rate_units, regime) {
        (Some(_), Some(_), _) => {
            problems.push("give grid.stop or grid.stop_rate_units, not both".into());
            None
        }
        (Some(t), None, _) => Some(t),
        (None, Some(x), Some(Regime::Sum3D | Regime::Diff3D)) => rate.map(|g| x / g),
        (None, Some(_), _) => {
            problems.push("grid.stop_rate_units only applies to the 3D regimes".into());
            None
        }
        (None, None, Some(Regime::Sum3D)) => rate.map(|g| 10.0 / g),
        (None, None, Some(Regime::Diff3D)) => rate.map(|g| 2.0 * std::f64::consts::PI / g),
        (None, None, Some(Regime::Fund1D)) => Some(6.0),
        (None, None, Some(Regime::Harm1D { .. })) => Some(1.2),
        (None, None, None) => None,
    };
    let samples = raw.grid.samples.unwrap_or(DEFAULT_SAMPLES);

    let solver = match raw.solver.kind.as_deref() {
        None => regime.map(|r| r.default_solver()),
        Some("analytic") => Some(Solver::Analytic),
        Some("ode") => Some(Solver::Ode),
        Some(other) => {
            problems.push(format!("unknown solver kind '{other}' (expected analytic or ode)"));
            None
        }
    };

    let (Some(regime), Some(geometry), Some(drive), Some(squeeze), Some(s), Some(stop), Some(solver)) =
        (regime, geometry, drive, squeeze, s, stop, solver)
    else {
        if problems.is_empty() {
            problems.push("the 3D resonance rate could not be computed for the grid".into());
        }
        return Err(CliError::Config(problems));
    };

    let grid = TimeGrid { start, stop, samples };
    let mut cfg = ScenarioConfig::new(regime, geometry, drive, squeeze, s, if regime.is_one_d() { None } else { c }, grid);
    cfg.label = raw.label.clone();
    if let Some(k) = truncation.or(raw.truncation) {
        cfg.truncation = k;
    }
    cfg.solver = solver;
    let defaults = OdeOptions::default();
    cfg.ode = OdeOptions {
        step: raw.solver.step.unwrap_or(defaults.step),
        resonance_tol: raw.solver.resonance_tol.unwrap_or(defaults.resonance_tol),
        ..defaults
    };
    if let Some(t) = raw.solver.defect_tol {
        cfg.defect_tol = t;
        cfg.ode.defect_bound = t;
    }
    if let Some(m) = raw.solver.max_columns {
        cfg.max_columns = m;
    }

    let (sm, cm) = (cfg.s, cfg.c);
    let label = |name: &str, problems: &mut Vec<String>| parse_label(name, sm, cm).map_err(|e| problems.push(e)).ok();
    if let Some(t) = &raw.observables.tracked {
        cfg.tracked = t.iter().filter_map(|n| label(n, &mut problems)).collect();
    }
    if let Some(ps) = &raw.observables.pairs {
        cfg.pairs = ps
            .iter()
            .filter_map(|[a, b]| Some((label(a, &mut problems)?, label(b, &mut problems)?)))
            .collect();
    }
    let partners = raw
        .observables
        .partners
        .as_ref()
        .map(|ps| ps.iter().filter_map(|n| label(n, &mut problems)).collect::<Vec<_>>());
    if let Some(ps) = &partners {
        if ps.is_empty() && problems.is_empty() {
            problems.push("observables.partners is empty".into());
        }
        let mut probe = cfg.clone();
        probe.tracked = ps.clone();
        problems.extend(probe.problems().into_iter().filter(|p| p.contains("outside the simulated")));
    }

    problems.extend(cfg.problems());
    if !problems.is_empty() {
        problems.dedup();
        return Err(CliError::Config(problems));
    }
    Ok(RunSpec { config: cfg, partners, log_photons: raw.observables.log_photons.unwrap_or(true) })
}

fn kind_of(regime: Regime) -> ResonanceKind {
    if regime == Regime::Sum3D {
        ResonanceKind::Sum
    } else {
        ResonanceKind::Difference
    }
}

fn keep<T>(r: dce_core::Result<T>, problems: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| problems.push(e.to_string())).ok()
}

/// Mode names: `p` (static), `s`, `c`, a 1D index such as `4`, or a 3D index such as `2-1-1`.
pub fn parse_label(name: &str, s: ModeIndex, c: Option<ModeIndex>) -> Result<ModeLabel, String> {
    let bad = || format!("unknown mode name '{name}'");
    match name {
        "p" => Ok(ModeLabel::Static),
        "s" => Ok(ModeLabel::Cavity(s)),
        "c" => c.map(ModeLabel::Cavity).ok_or_else(|| "mode 'c' needs a 3D regime".to_string()),
        _ => {
            let parts: Vec<u32> = name.split('-').map(|p| p.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
            let m = match parts.as_slice() {
                [n] => ModeIndex::one_d(*n),
                [x, y, z] => ModeIndex::three_d(*x, *y, *z),
                _ => return Err(bad()),
            };
            m.map(ModeLabel::Cavity).map_err(|e| e.to_string())
        }
    }
}
