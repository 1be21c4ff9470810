//! Sudden death, photon turning point and long-time limits next to the last sample.

use std::fmt::Write as _;

use dce_core::gaussian::{entanglement_report, reduce, ModeLabel};
use dce_core::scenarios::{
    long_time_limits, photon_turning_point, sudden_death_time, ObservableSeries, Prepared, Regime, ScenarioConfig,
};
use dce_core::Error;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub quantity: String,
    pub predicted: f64,
    pub last_sample: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Summary {
    pub sudden_death_time: Option<f64>,
    pub sudden_death_note: Option<String>,
    pub photon_turning_point: Option<f64>,
    pub limits: Vec<LimitRow>,
    pub limits_note: Option<String>,
}

pub fn summarize(cfg: &ScenarioConfig, series: &ObservableSeries) -> Result<Summary, Error> {
    let mut out = Summary::default();
    let pair = (ModeLabel::Static, ModeLabel::Cavity(cfg.s));
    if let Regime::Harm1D { .. } = cfg.regime {
        match sudden_death_time(cfg, &pair) {
            Ok(Some(t)) => out.sudden_death_time = Some(t),
            Ok(None) => out.sudden_death_note = Some("negativity stays positive on the grid".into()),
            Err(e @ (Error::Reentry { .. } | Error::Precondition(_))) => out.sudden_death_note = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    out.photon_turning_point = photon_turning_point(series, &format!("N_{}", cfg.mode_name(&pair.1)));

    let lim = match long_time_limits(cfg) {
        Ok(l) => l,
        Err(e) => {
            out.limits_note = Some(e.to_string());
            return Ok(out);
        }
    };
    let Some(&last_tau) = series.tau.last() else { return Ok(out) };
    let state = Prepared::new(cfg)?.state_at(last_tau)?;
    let ps = reduce(&state, &pair.0, &pair.1)?;
    let rep = entanglement_report(&ps)?;
    let mut row = |q: &str, predicted: f64, last: f64| {
        out.limits.push(LimitRow { quantity: q.into(), predicted, last_sample: last })
    };
    row("log negativity p|s", lim.log_negativity, rep.log_negativity);
    row("mutual information p|s", lim.mutual_information, rep.mutual_information);
    if let Some(d) = lim.det_over_sigma {
        row("det V / Sigma", d, rep.det / rep.sigma);
    }
    if let Some(v) = lim.two_nu_minus {
        row("2 nu_minus", v, 2.0 * rep.nu_minus);
        row("-log2(2 nu_minus)", -v.log2(), -(2.0 * rep.nu_minus).log2());
    }
    if let Some(diag) = lim.covariance_diagonal {
        for (i, d) in diag.iter().enumerate() {
            row(&format!("V[{i}][{i}]"), *d, ps.covariance()[(i, i)]);
        }
    }
    Ok(out)
}

pub fn render(label: &str, s: &Summary) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "== {label}");
    if let Some(t) = s.sudden_death_time {
        let _ = writeln!(o, "sudden death at tau* = {t:.6}");
    }
    if let Some(n) = &s.sudden_death_note {
        let _ = writeln!(o, "sudden death: {n}");
    }
    match s.photon_turning_point {
        Some(t) => {
            let _ = writeln!(o, "N_s turning point at tau = {t:.6}");
        }
        None => {
            let _ = writeln!(o, "N_s has no interior minimum on the grid");
        }
    }
    if let Some(n) = &s.limits_note {
        let _ = writeln!(o, "long-time limits: {n}");
    }
    if !s.limits.is_empty() {
        let _ = writeln!(o, "{:<26} {:>14} {:>14} {:>11}", "quantity", "limit", "last sample", "|diff|");
        for r in &s.limits {
            let _ = writeln!(
                o,
                "{:<26} {:>14.6e} {:>14.6e} {:>11.3e}",
                r.quantity,
                r.predicted,
                r.last_sample,
                (r.predicted - r.last_sample).abs()
            );
        }
    }
    o
}
