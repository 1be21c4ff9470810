//! CSV, JSON and SVG renderings of a series. Everything is built in memory;
//! writing happens in one place so a failed run leaves no files behind.

use std::fmt::Write as _;

use dce_core::scenarios::{Column, ConvergenceReport, ObservableSeries, ScenarioConfig};
use serde::Serialize;

use crate::report::Summary;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TOOL: &str = env!("CARGO_PKG_NAME");

/// Shortest round-trip scientific notation, so parsing and reprinting is the identity.
pub fn number(x: f64) -> String {
    format!("{x:e}")
}

pub fn csv(series: &ObservableSeries) -> String {
    let mut out = String::from("tau");
    for c in &series.columns {
        out.push(',');
        out.push_str(&c.name);
    }
    out.push('\n');
    for (i, t) in series.tau.iter().enumerate() {
        out.push_str(&number(*t));
        for c in &series.columns {
            out.push(',');
            out.push_str(&number(c.values[i]));
        }
        out.push('\n');
    }
    out
}

/// Table read back from a CSV written by [`csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub tau: Vec<f64>,
    pub columns: Vec<Column>,
}

impl CsvTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau");
        for c in &self.columns {
            let _ = write!(out, ",{}", c.name);
        }
        out.push('\n');
        for (i, t) in self.tau.iter().enumerate() {
            out.push_str(&number(*t));
            for c in &self.columns {
                let _ = write!(out, ",{}", number(c.values[i]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_csv(text: &str) -> Result<CsvTable, String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    if header.first() != Some(&"tau") {
        return Err("first column must be tau".into());
    }
    let mut columns: Vec<Column> =
        header[1..].iter().map(|n| Column { name: n.to_string(), values: Vec::new() }).collect();
    let mut tau = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", i + 1, cells.len(), header.len()));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: '{s}': {e}", i + 1));
        tau.push(parse(cells[0])?);
        for (c, s) in columns.iter_mut().zip(&cells[1..]) {
            c.values.push(parse(s)?);
        }
    }
    Ok(CsvTable { tau, columns })
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    tool: &'static str,
    version: &'static str,
    deterministic: &'static str,
    config: &'a ScenarioConfig,
    metadata: &'a dce_core::scenarios::SeriesMetadata,
    convergence: &'a Option<ConvergenceReport>,
    summary: &'a Summary,
    tau: &'a [f64],
    columns: &'a [Column],
}

pub fn json(config: &ScenarioConfig, series: &ObservableSeries, conv: &Option<ConvergenceReport>, summary: &Summary) -> String {
    let doc = JsonDoc {
        tool: TOOL,
        version: VERSION,
        deterministic: "no randomness; identical inputs give identical bytes",
        config,
        metadata: &series.metadata,
        convergence: conv,
        summary,
        tau: &series.tau,
        columns: &series.columns,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

/// Observable families, one plot each.
pub const FAMILIES: [(&str, &str); 3] =
    [("N_", "photon number"), ("logneg_", "log negativity (bits)"), ("mutinfo_", "mutual information (bits)")];

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A self-contained polyline plot of every column whose name starts with `prefix`.
/// Returns `None` when the series has no such column.
pub fn svg(
    series: &ObservableSeries,
    prefix: &str,
    ylabel: &str,
    log_y: bool,
    config: &ScenarioConfig,
) -> Option<String> {
    let cols: Vec<&Column> = series.columns.iter().filter(|c| c.name.starts_with(prefix)).collect();
    if cols.is_empty() || series.tau.is_empty() {
        return None;
    }
    let tx = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
    let (x0, x1) = (series.tau[0], *series.tau.last().unwrap());
    let ys = cols.iter().flat_map(|c| c.values.iter().copied());
    let (mut y0, mut y1) = if log_y {
        let pos: Vec<f64> = ys.filter(|v| *v > 0.0).map(tx).collect();
        let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() { (lo.floor(), hi.ceil()) } else { (0.0, 1.0) }
    } else {
        let v: Vec<f64> = ys.collect();
        (v.iter().copied().fold(0.0, f64::min), v.iter().copied().fold(0.0, f64::max))
    };
    if y1 - y0 <= 0.0 {
        y1 = y0 + 1.0;
    }
    if !log_y {
        y1 += 0.05 * (y1 - y0);
    } else if y1 == y0 {
        y0 -= 1.0;
    }
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let (l, r, t, b) = MARGIN;
    let px = |x: f64| l + (x - x0) / xspan * (W - l - r);
    let py = |y: f64| H - b - (tx(y) - y0) / (y1 - y0) * (H - t - b);

    let params = serde_json::to_string(config).expect("plain data serializes").replace("--", "- -");
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, "<!-- {TOOL} {VERSION} -->");
    let _ = writeln!(s, "<!-- parameters: {params} -->");
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} V{} H{}" fill="none" stroke="black"/>"#,
        H - b,
        W - r
    );
    for i in 0..=4 {
        let x = x0 + xspan * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            px(x),
            H - b + 16.0,
            tick(x)
        );
        let yv = y0 + (y1 - y0) * i as f64 / 4.0;
        let label = if log_y { format!("1e{}", tick(yv)) } else { tick(yv) };
        let ypos = H - b - (yv - y0) / (y1 - y0) * (H - t - b);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">{label}</text>"#, l - 6.0, ypos + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">τ (slow time)</text>"#, (l + W - r) / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (t + H - b) / 2.0,
        (t + H - b) / 2.0,
        xml_escape(ylabel)
    );
    for (k, c) in cols.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = series
            .tau
            .iter()
            .zip(&c.values)
            .filter(|(_, v)| !log_y || **v > 0.0)
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
            W - r - 4.0,
            t + 14.0 * (k + 1) as f64,
            xml_escape(&c.name)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}
