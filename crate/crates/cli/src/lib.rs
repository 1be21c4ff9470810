//! Runs scenario files and writes CSV, JSON and SVG results.

pub mod config;
pub mod emit;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, ValueEnum};
use dce_core::scenarios::{convergence_report, redistribution_map, run_scenario};

pub use config::RunSpec;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("numerical error: {0}")]
    Numerical(#[from] dce_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Simulates entanglement between a static cavity and a harmonically shaken one.
#[derive(Debug, Parser)]
#[command(name = "dce-sim", version)]
#[command(group(ArgGroup::new("input").required(true).args(["config", "batch"])))]
pub struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of scenario files, run in name order.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Outputs to write.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json,svg")]
    pub emit: Vec<Format>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Override the truncation (1D modes or 3D index cutoff).
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
}

/// Files produced by one run, not yet written.
pub struct Planned {
    pub files: Vec<(PathBuf, String)>,
    pub summary: String,
}

/// Runs one scenario and renders every requested output in memory.
pub fn plan(spec: &RunSpec, stem: &str, out: &Path, emit: &[Format], verbose: bool) -> Result<Planned, CliError> {
    let cfg = &spec.config;
    if verbose {
        eprintln!("{stem}: regime {} solver {:?} truncation {} samples {}", cfg.regime.name(), cfg.solver, cfg.truncation, cfg.grid.samples);
    }
    let series = match &spec.partners {
        Some(p) => redistribution_map(cfg, p)?,
        None => run_scenario(cfg)?,
    };
    let summary = report::summarize(cfg, &series)?;
    let mut files = Vec::new();
    if emit.contains(&Format::Csv) {
        files.push((out.join(format!("{stem}.csv")), emit::csv(&series)));
    }
    if emit.contains(&Format::Json) {
        let conv = convergence_report(cfg, &series)?;
        if verbose {
            if let Some(c) = &conv {
                for (name, d) in &c.max_abs_difference {
                    eprintln!("{stem}: K={} vs K={}: {name} differs by {d:.3e}", c.truncation, c.half_truncation);
                }
            }
        }
        files.push((out.join(format!("{stem}.json")), emit::json(cfg, &series, &conv, &summary)));
    }
    if emit.contains(&Format::Svg) {
        for (prefix, ylabel) in emit::FAMILIES {
            let log_y = prefix == "N_" && spec.log_photons;
            if let Some(svg) = emit::svg(&series, prefix, ylabel, log_y, cfg) {
                files.push((out.join(format!("{stem}_{}.svg", prefix.trim_end_matches('_'))), svg));
            }
        }
    }
    if verbose {
        eprintln!("{stem}: max symplectic defect {:.3e}", series.metadata.max_symplectic_defect);
    }
    Ok(Planned { files, summary: report::render(cfg.label.as_deref().unwrap_or(stem), &summary) })
}

/// Writes all files or none: existing targets are refused unless `force`, and
/// each file goes through a temporary name first.
pub fn write_all(files: &[(PathBuf, String)], force: bool) -> Result<(), CliError> {
    if !force {
        let taken: Vec<String> = files.iter().filter(|(p, _)| p.exists()).map(|(p, _)| p.display().to_string()).collect();
        if !taken.is_empty() {
            return Err(CliError::Io(format!("refusing to overwrite {} (use --force)", taken.join(", "))));
        }
    }
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    let mut staged = Vec::new();
    let mut moved = Vec::new();
    let result = (|| {
        for (path, body) in files {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            }
            let mut name = path.file_name().unwrap_or_default().to_os_string();
            name.push(".partial");
            let tmp = path.with_file_name(name);
            fs::write(&tmp, body).map_err(|e| io(&tmp, e))?;
            staged.push((tmp, path.clone()));
        }
        for (tmp, path) in &staged {
            fs::rename(tmp, path).map_err(|e| io(path, e))?;
            moved.push(path.clone());
        }
        Ok(())
    })();
    if result.is_err() {
        for path in staged.iter().map(|(t, _)| t).chain(&moved) {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn run_file(path: &Path, args: &Args) -> Result<(), CliError> {
    let spec = config::load(path, args.truncation)?;
    let planned = plan(&spec, &stem_of(path), &args.out, &args.emit, args.verbose)?;
    write_all(&planned.files, args.force)?;
    print!("{}", planned.summary);
    for (p, _) in &planned.files {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Runs the invocation; the error carries the exit code.
pub fn run(args: &Args) -> Result<(), CliError> {
    if let Some(path) = &args.config {
        return run_file(path, args);
    }
    let dir = args.batch.as_ref().expect("clap requires config or batch");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Io(format!("no .toml files in {}", dir.display())));
    }
    let mut first_err = None;
    for p in &paths {
        if let Err(e) = run_file(p, args) {
            eprintln!("{}: {e}", p.display());
            first_err.get_or_insert(e);
        }
    }
    first_err.map_or(Ok(()), Err)
}
