//! Fixed-step RK4 integration of the averaged multiple-scale equations.
//!
//! Each coupling g_kj enters multiplied by sqrt(omega_k / omega_j), i.e. the
//! equations are written for normalized mode amplitudes. In that form the
//! alpha-alpha block of the generator is antisymmetric and the alpha-beta
//! block symmetric, so every row conserves sum |alpha|^2 - |beta|^2.
//! Frequencies on the right-hand side are measured in units of the
//! fundamental omega_1, which keeps tau dimensionless.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BogoliubovTransform, Closure};
use crate::cavity::{
    coupling, mode_frequency, CavityGeometry, CouplingVariant, Dimensionality, DriveConfig, ModeSet,
    DEFAULT_RESONANCE_TOL,
};
use crate::error::{Error, Result};

/// Upper bound on step times generator norm.
const MAX_STEP_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeSystem {
    ThreeD,
    OneDShaker,
    OneDSingleWall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    /// Largest step; it is reduced automatically when the generator is stiff.
    pub step: f64,
    pub defect_bound: f64,
    /// Resonance tolerance relative to the fundamental frequency.
    pub resonance_tol: f64,
    pub monitor_every: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { step: 1e-3, defect_bound: 1e-6, resonance_tol: DEFAULT_RESONANCE_TOL, monitor_every: 100 }
    }
}

/// Sparse generator: d alpha_n/d tau = A alpha_n + B beta_n, d beta_n/d tau = A beta_n + B alpha_n.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub size: usize,
    pub aa: Vec<(usize, usize, f64)>,
    pub ab: Vec<(usize, usize, f64)>,
}

impl Generator {
    pub fn is_empty(&self) -> bool {
        self.aa.is_empty() && self.ab.is_empty()
    }

    /// Largest absolute row sum of the combined alpha/beta generator.
    pub fn row_norm(&self) -> f64 {
        let mut rows = vec![0.0; self.size];
        for &(k, _, v) in self.aa.iter().chain(&self.ab) {
            rows[k] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn dense(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = DMatrix::zeros(self.size, self.size);
        let mut b = DMatrix::zeros(self.size, self.size);
        for &(k, j, v) in &self.aa {
            a[(k, j)] += v;
        }
        for &(k, j, v) in &self.ab {
            b[(k, j)] += v;
        }
        (a, b)
    }
}

pub fn generator(
    system: OdeSystem,
    geom: &CavityGeometry,
    drive: &DriveConfig,
    modes: &ModeSet,
    resonance_tol: f64,
) -> Result<Generator> {
    let expected = match system {
        OdeSystem::ThreeD => Dimensionality::ThreeD,
        OdeSystem::OneDShaker | OdeSystem::OneDSingleWall => Dimensionality::OneD,
    };
    if geom.dimensionality() != expected {
        return Err(Error::InvalidArgument(format!("{system:?} needs a {expected:?} geometry")));
    }
    let variant = match system {
        OdeSystem::OneDSingleWall => CouplingVariant::SingleWall,
        _ => CouplingVariant::Shaker,
    };
    let ms = modes.modes();
    let w = ms.iter().map(|m| mode_frequency(geom, m)).collect::<Result<Vec<_>>>()?;
    let w1 = geom.fundamental();
    let w: Vec<f64> = w.iter().map(|x| x / w1).collect();
    let tol = resonance_tol;
    let omega = drive.omega_drive / w1;
    let mut aa = Vec::new();
    let mut ab = Vec::new();
    for (k, mk) in ms.iter().enumerate() {
        for (j, mj) in ms.iter().enumerate() {
            let g = coupling(variant, mk, mj);
            if g == 0.0 {
                continue;
            }
            let (wk, wj) = (w[k], w[j]);
            let pre = g * omega / (2.0 * (wk * wj).sqrt());
            if (omega + wj - wk).abs() < tol {
                aa.push((k, j, pre * (wj + omega / 2.0)));
            }
            if (wj - omega - wk).abs() < tol {
                aa.push((k, j, pre * (wj - omega / 2.0)));
            }
            if (omega - wj - wk).abs() < tol {
                ab.push((k, j, pre * (omega / 2.0 - wj)));
            }
        }
        if system == OdeSystem::OneDSingleWall && (2.0 * w[k] - omega).abs() < tol {
            ab.push((k, k, -w[k] / 2.0));
        }
    }
    Ok(Generator { size: ms.len(), aa, ab })
}

struct State {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn derivative(gen: &Generator, x: &State, out: &mut State) {
    let n = gen.size;
    out.a.iter_mut().for_each(|v| *v = 0.0);
    out.b.iter_mut().for_each(|v| *v = 0.0);
    for row in 0..n {
        let base = row * n;
        for &(k, j, v) in &gen.aa {
            out.a[base + k] += v * x.a[base + j];
            out.b[base + k] += v * x.b[base + j];
        }
        for &(k, j, v) in &gen.ab {
            out.a[base + k] += v * x.b[base + j];
            out.b[base + k] += v * x.a[base + j];
        }
    }
}

fn axpy(dst: &mut State, x: &State, h: f64, k: &State) {
    for ((d, xv), kv) in dst.a.iter_mut().zip(&x.a).zip(&k.a) {
        *d = xv + h * kv;
    }
    for ((d, xv), kv) in dst.b.iter_mut().zip(&x.b).zip(&k.b) {
        *d = xv + h * kv;
    }
}

fn rk4_step(gen: &Generator, x: &mut State, h: f64, scratch: &mut [State; 5]) {
    let [k1, k2, k3, k4, tmp] = scratch;
    derivative(gen, x, k1);
    axpy(tmp, x, h / 2.0, k1);
    derivative(gen, tmp, k2);
    axpy(tmp, x, h / 2.0, k2);
    derivative(gen, tmp, k3);
    axpy(tmp, x, h, k3);
    derivative(gen, tmp, k4);
    for i in 0..x.a.len() {
        x.a[i] += h / 6.0 * (k1.a[i] + 2.0 * k2.a[i] + 2.0 * k3.a[i] + k4.a[i]);
        x.b[i] += h / 6.0 * (k1.b[i] + 2.0 * k2.b[i] + 2.0 * k3.b[i] + k4.b[i]);
    }
}

fn defect(x: &State, n: usize) -> f64 {
    (0..n)
        .map(|r| {
            let a: f64 = x.a[r * n..(r + 1) * n].iter().map(|v| v * v).sum();
            let b: f64 = x.b[r * n..(r + 1) * n].iter().map(|v| v * v).sum();
            (a - b - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn snapshot(x: &State, n: usize, tau: f64, modes: &ModeSet) -> BogoliubovTransform {
    let to_c = |v: &[f64]| DMatrix::from_fn(n, n, |r, c| Complex64::new(v[r * n + c], 0.0));
    BogoliubovTransform {
        alpha: to_c(&x.a),
        beta: to_c(&x.b),
        tau,
        out_modes: modes.modes().to_vec(),
        in_modes: modes.modes().to_vec(),
        closure: Closure::Truncated,
        trivial: false,
    }
}

pub fn integrate_multiscale(
    system: OdeSystem,
    geom: &CavityGeometry,
    drive: &DriveConfig,
    modes: &ModeSet,
    tau_end: f64,
    opts: &OdeOptions,
) -> Result<BogoliubovTransform> {
    let mut v = integrate_multiscale_grid(system, geom, drive, modes, &[tau_end], opts)?;
    Ok(v.pop().expect("one sample requested"))
}

/// Integrates once through a nondecreasing grid of slow times, returning a transform per sample.
pub fn integrate_multiscale_grid(
    system: OdeSystem,
    geom: &CavityGeometry,
    drive: &DriveConfig,
    modes: &ModeSet,
    taus: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<BogoliubovTransform>> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {}", opts.step)));
    }
    if let Some(t) = taus.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::NegativeTime(*t));
    }
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("tau grid must be nondecreasing".into()));
    }
    let gen = generator(system, geom, drive, modes, opts.resonance_tol)?;
    // rates grow with the mode index, so large truncations need a finer step
    let step = match gen.row_norm() {
        r if r > 0.0 => opts.step.min(MAX_STEP_RATE / r),
        _ => opts.step,
    };
    let n = modes.len();
    let mut x = State { a: vec![0.0; n * n], b: vec![0.0; n * n] };
    for i in 0..n {
        x.a[i * n + i] = 1.0;
    }
    let mut scratch: [State; 5] = std::array::from_fn(|_| State { a: vec![0.0; n * n], b: vec![0.0; n * n] });
    let monitor = opts.monitor_every.max(1);
    let mut out = Vec::with_capacity(taus.len());
    let mut now = 0.0;
    let mut steps_done = 0usize;
    for &target in taus {
        let span = target - now;
        if span > 0.0 && !gen.is_empty() {
            let steps = (span / step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                rk4_step(&gen, &mut x, h, &mut scratch);
                steps_done += 1;
                if steps_done % monitor == 0 {
                    let d = defect(&x, n);
                    if !(d <= opts.defect_bound) {
                        return Err(Error::SymplecticDefect {
                            defect: d,
                            bound: opts.defect_bound,
                            tau: now + h * (s + 1) as f64,
                        });
                    }
                }
            }
            let d = defect(&x, n);
            if !(d <= opts.defect_bound) {
                return Err(Error::SymplecticDefect { defect: d, bound: opts.defect_bound, tau: target });
            }
        }
        now = target;
        let mut t = snapshot(&x, n, target, modes);
        t.trivial = gen.is_empty();
        out.push(t);
    }
    Ok(out)
}
