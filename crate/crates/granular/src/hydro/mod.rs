//! Pseudo-spectral solver for the forced incompressible Navier-Stokes-Fourier
//! limit on the periodic box `[0, 2pi)^d`, `d` in {2, 3}:
//!
//! ```text
//! d_t u - (nu0/e) lap u + e u.grad u + grad p = xi(t) u,      div u = 0
//! d_t th - (nu1/e^2) lap th + e u.grad th = 3(1-g)/2 e^2 xi(t) th
//! rho = -e th
//! ```
//!
//! `e` is the reference temperature. Diffusion and forcing are integrated exactly
//! through an integrating factor; advection uses Heun's method on the transformed
//! variable with 2/3 dealiasing.

mod fft;

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scaling::ScalingSchedule;
use fft::Transform;

pub const CFL_LIMIT: f64 = 0.5;

/// Wavevectors, dealiasing mask and conjugate partners for one grid.
pub struct Grid {
    pub n: usize,
    pub dim: usize,
    pub dealias: bool,
    k: Vec<[f64; 3]>,
    k2: Vec<f64>,
    keep: Vec<bool>,
    mirror: Vec<usize>,
    transform: Transform,
}

impl Grid {
    /// Without dealiasing only the Nyquist modes are dropped.
    pub fn new(n: usize, dim: usize, dealias: bool) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::domain(format!("dim={dim} must be 2 or 3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::domain(format!("n={n} must be a power of two >= 4")));
        }
        let len = n.pow(dim as u32);
        let cut = if dealias { ((n - 1) / 3) as i64 } else { (n / 2 - 1) as i64 };
        let wave = |i: usize| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
        let mut k = Vec::with_capacity(len);
        let mut keep = Vec::with_capacity(len);
        let mut mirror = Vec::with_capacity(len);
        for idx in 0..len {
            let ix = unravel(idx, n, dim);
            let mut kv = [0.0; 3];
            let mut ok = true;
            let mut m = 0;
            for a in 0..dim {
                let w = wave(ix[a]);
                kv[a] = w as f64;
                ok &= w.abs() <= cut;
                m = m * n + (n - ix[a]) % n;
            }
            k.push(kv);
            keep.push(ok);
            mirror.push(m);
        }
        let k2 = k.iter().map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).collect();
        Ok(Self { n, dim, dealias, k, k2, keep, mirror, transform: Transform::new(n, dim) })
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// `u <- (I - k k^T / |k|^2) u`; the mean mode is untouched.
    pub fn leray_project(&self, u_hat: &mut [Vec<Complex64>]) {
        let dim = self.dim;
        for idx in 0..self.len() {
            let k2 = self.k2[idx];
            if k2 == 0.0 {
                continue;
            }
            let k = self.k[idx];
            let mut dot = Complex64::default();
            for a in 0..dim {
                dot += u_hat[a][idx] * k[a];
            }
            let f = dot / k2;
            for a in 0..dim {
                u_hat[a][idx] -= f * k[a];
            }
        }
    }

    /// `max_k |k . u(k)|`.
    pub fn max_divergence(&self, u_hat: &[Vec<Complex64>]) -> f64 {
        (0..self.len())
            .map(|idx| {
                let mut dot = Complex64::default();
                for a in 0..self.dim {
                    dot += u_hat[a][idx] * self.k[idx][a];
                }
                dot.norm()
            })
            .fold(0.0, f64::max)
    }

    /// Zeroes dropped modes and copies the conjugate of each canonical mode onto
    /// its partner, so `c(-k) == conj(c(k))` holds bitwise.
    fn symmetrize(&self, c: &mut [Complex64]) {
        for idx in 0..self.len() {
            let m = self.mirror[idx];
            if !self.keep[idx] {
                c[idx] = Complex64::default();
            } else if idx == m {
                c[idx].im = 0.0;
            } else if idx < m {
                c[m] = c[idx].conj();
            }
        }
    }

    pub fn is_real_symmetric(&self, c: &[Complex64]) -> bool {
        (0..self.len()).all(|i| c[self.mirror[i]] == c[i].conj())
    }

    fn to_physical(&self, c: &[Complex64]) -> Vec<f64> {
        let mut d = c.to_vec();
        self.transform.inverse(&mut d);
        d.into_iter().map(|z| z.re).collect()
    }

    fn to_spectral(&self, r: &[f64]) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform.forward(&mut d);
        self.symmetrize(&mut d);
        d
    }

    fn derivative(&self, c: &[Complex64], axis: usize) -> Vec<f64> {
        let d: Vec<Complex64> = c.iter().zip(&self.k).map(|(z, k)| z * Complex64::new(0.0, k[axis])).collect();
        self.to_physical(&d)
    }

    /// Shell-summed energy spectrum `E(|k|)`, integer shells.
    pub fn spectrum(&self, u_hat: &[Vec<Complex64>]) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        for idx in 0..self.len() {
            let s = (self.k2[idx].sqrt().round() as usize).min(self.n - 1);
            e[s] += 0.5 * u_hat.iter().map(|c| c[idx].norm_sqr()).sum::<f64>();
        }
        e
    }

    pub fn coordinate(&self, idx: usize) -> [f64; 3] {
        let ix = unravel(idx, self.n, self.dim);
        let h = 2.0 * PI / self.n as f64;
        [ix[0] as f64 * h, ix[1] as f64 * h, ix[2] as f64 * h]
    }
}

fn unravel(mut idx: usize, n: usize, dim: usize) -> [usize; 3] {
    let mut ix = [0; 3];
    for a in (0..dim).rev() {
        ix[a] = idx % n;
        idx /= n;
    }
    ix
}

/// Velocity and temperature fluctuation in Fourier coefficients (`c(k)` with
/// `f(x) = sum c(k) exp(i k.x)`).
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub n: usize,
    pub dim: usize,
    pub u_hat: Vec<Vec<Complex64>>,
    pub theta_hat: Vec<Complex64>,
    pub time: f64,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            n: grid.n,
            dim: grid.dim,
            u_hat: vec![vec![Complex64::default(); grid.len()]; grid.dim],
            theta_hat: vec![Complex64::default(); grid.len()],
            time: 0.0,
        }
    }

    /// From real-space samples; the velocity is projected onto divergence-free fields.
    pub fn from_physical(grid: &Grid, u: &[Vec<f64>], theta: &[f64], time: f64) -> Result<Self> {
        if u.len() != grid.dim || u.iter().any(|c| c.len() != grid.len()) || theta.len() != grid.len() {
            return Err(Error::domain("field sizes do not match the grid"));
        }
        let mut f = Self::zeros(grid);
        f.u_hat = u.iter().map(|c| grid.to_spectral(c)).collect();
        f.theta_hat = grid.to_spectral(theta);
        grid.leray_project(&mut f.u_hat);
        f.time = time;
        Ok(f)
    }

    pub fn velocity(&self, grid: &Grid) -> Vec<Vec<f64>> {
        self.u_hat.iter().map(|c| grid.to_physical(c)).collect()
    }

    pub fn theta(&self, grid: &Grid) -> Vec<f64> {
        grid.to_physical(&self.theta_hat)
    }

    /// Density fluctuation from the Boussinesq relation `rho = -e th`.
    pub fn density(&self, grid: &Grid, theta_star: f64) -> Vec<f64> {
        self.theta(grid).into_iter().map(|t| -theta_star * t).collect()
    }

    /// Box average of `|u|^2 / 2`.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.u_hat.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Box average of `|grad u|^2`.
    pub fn gradient_norm2(&self, grid: &Grid) -> f64 {
        self.u_hat.iter().map(|c| c.iter().zip(&grid.k2).map(|(z, k2)| k2 * z.norm_sqr()).sum::<f64>()).sum()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.n != grid.n || self.dim != grid.dim {
            return Err(Error::domain("field and grid sizes differ"));
        }
        Ok(())
    }

    /// Binary snapshot: `u32 dim, u32 n, f64 time`, then each velocity component
    /// and the temperature as row-major real-space `f64`, all little endian.
    pub fn write_snapshot<W: Write>(&self, grid: &Grid, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.time.to_le_bytes())?;
        for f in self.velocity(grid).iter().chain(std::iter::once(&self.theta(grid))) {
            for x in f {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(grid: &Grid, mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::domain(format!("snapshot: {e}"));
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(io)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4).map_err(io)?;
        let n = u32::from_le_bytes(b4) as usize;
        if dim != grid.dim || n != grid.n {
            return Err(Error::domain(format!("snapshot is {n}^{dim}, grid is {}^{}", grid.n, grid.dim)));
        }
        r.read_exact(&mut b8).map_err(io)?;
        let time = f64::from_le_bytes(b8);
        let mut read_field = || -> Result<Vec<f64>> {
            (0..grid.len())
                .map(|_| {
                    r.read_exact(&mut b8).map_err(io)?;
                    Ok(f64::from_le_bytes(b8))
                })
                .collect()
        };
        let u: Vec<Vec<f64>> = (0..dim).map(|_| read_field()).collect::<Result<_>>()?;
        let theta = read_field()?;
        Self::from_physical(grid, &u, &theta, time)
    }
}

/// `u = A (sin x cos y, -cos x sin y)` (times `cos z` in 3-D), `th = 0`.
pub fn taylor_green(grid: &Grid, amplitude: f64) -> SpectralField {
    let mut u = vec![vec![0.0; grid.len()]; grid.dim];
    for idx in 0..grid.len() {
        let [x, y, z] = grid.coordinate(idx);
        let c = if grid.dim == 3 { z.cos() } else { 1.0 };
        u[0][idx] = amplitude * x.sin() * y.cos() * c;
        u[1][idx] = -amplitude * x.cos() * y.sin() * c;
    }
    SpectralField::from_physical(grid, &u, &vec![0.0; grid.len()], 0.0).expect("sizes match")
}

/// Random divergence-free velocity with shell spectrum `~ |k|^slope` on
/// `1 <= |k| <= kmax`, scaled to the given rms speed, and a zero-mean temperature
/// drawn the same way.
pub fn random_solenoidal(grid: &Grid, seed: u64, slope: f64, kmax: f64, u_rms: f64, theta_rms: f64) -> SpectralField {
    let mut rng = stream(seed, grid.n as u64, grid.dim as u64);
    let mut f = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let k2 = grid.k2[idx];
        if k2 == 0.0 || k2 > kmax * kmax || !grid.keep[idx] {
            continue;
        }
        // per-mode amplitude for a shell spectrum k^slope
        let amp = k2.powf(0.5 * (slope - (grid.dim as f64 - 1.0)) * 0.5);
        let mut g = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * amp;
        for a in 0..grid.dim {
            f.u_hat[a][idx] = g();
        }
        f.theta_hat[idx] = g();
    }
    for c in f.u_hat.iter_mut().chain(std::iter::once(&mut f.theta_hat)) {
        grid.symmetrize(c);
    }
    grid.leray_project(&mut f.u_hat);
    let e = (2.0 * f.kinetic_energy() / grid.dim as f64).sqrt();
    let t = f.theta_hat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for c in f.u_hat.iter_mut().flatten() {
        *c *= if e > 0.0 { u_rms / e } else { 0.0 };
    }
    for c in &mut f.theta_hat {
        *c *= if t > 0.0 { theta_rms / t } else { 0.0 };
    }
    f
}

/// Source of the anti-drift coefficient as a function of (rescaled) time.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum XiSource {
    Constant(f64),
    Schedule(ScalingSchedule),
}

impl XiSource {
    pub fn xi(&self, t: f64) -> f64 {
        match self {
            XiSource::Constant(c) => *c,
            XiSource::Schedule(s) => s.xi(t),
        }
    }

    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self {
            XiSource::Constant(c) => c * (t1 - t0),
            XiSource::Schedule(s) => s.xi_integral(t0, t1),
        }
    }
}

/// Placement of the reference temperature in the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Normalization {
    /// `nu0/e`, `nu1/e^2`, advection `e`, temperature forcing `3(1-g)/2 e^2`.
    Kinetic,
    /// `nu0`, `nu1`, unit advection, temperature forcing `3(1-g)/2`.
    Conventional,
}

#[derive(Clone, Debug, Serialize)]
pub struct HydroConfig {
    pub n: usize,
    pub dim: usize,
    pub nu0: f64,
    pub nu1: f64,
    pub theta_star: f64,
    pub gamma: f64,
    pub xi: XiSource,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub normalization: Normalization,
    /// Diagnostics every this many steps (and at the end).
    pub output_every: usize,
}

impl HydroConfig {
    pub fn new(n: usize, dim: usize, xi: XiSource) -> Self {
        Self {
            n,
            dim,
            nu0: 1.0,
            nu1: 1.0,
            theta_star: 1.0,
            gamma: 0.2,
            xi,
            dt: 1e-3,
            t_end: 1.0,
            dealias: true,
            normalization: Normalization::Kinetic,
            output_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, x) in [("nu0", self.nu0), ("nu1", self.nu1), ("theta_star", self.theta_star), ("dt", self.dt)] {
            if !(x > 0.0 && x.is_finite()) {
                errs.push(format!("{name}={x} must be positive"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            errs.push(format!("gamma={} outside (0,1)", self.gamma));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            errs.push(format!("t_end={} must be non-negative", self.t_end));
        }
        if self.output_every == 0 {
            errs.push("output_every must be positive".into());
        }
        if let XiSource::Constant(c) = self.xi {
            if !c.is_finite() {
                errs.push("xi must be finite".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::domain(errs.join("; ")))
        }
    }

    /// (velocity diffusivity, temperature diffusivity, advection, temperature forcing).
    pub fn coefficients(&self) -> (f64, f64, f64, f64) {
        let e = self.theta_star;
        let f = 1.5 * (1.0 - self.gamma);
        match self.normalization {
            Normalization::Kinetic => (self.nu0 / e, self.nu1 / (e * e), e, f * e * e),
            Normalization::Conventional => (self.nu0, self.nu1, 1.0, f),
        }
    }
}

pub struct Solver {
    pub grid: Grid,
    pub config: HydroConfig,
}

struct Nonlinear {
    u: Vec<Vec<Complex64>>,
    theta: Vec<Complex64>,
    max_speed: f64,
}

impl Solver {
    pub fn new(config: HydroConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::new(config.n, config.dim, config.dealias)?;
        Ok(Self { grid, config })
    }

    /// `-a (u.grad u)` projected, `-a (u.grad th)`, and `max |u|`.
    fn nonlinear(&self, f: &SpectralField) -> Nonlinear {
        let g = &self.grid;
        let dim = g.dim;
        let (_, _, adv, _) = self.config.coefficients();
        let u: Vec<Vec<f64>> = f.u_hat.iter().map(|c| g.to_physical(c)).collect();
        let max_speed = (0..g.len()).into_par_iter().map(|i| (0..dim).map(|a| u[a][i] * u[a][i]).sum::<f64>().sqrt()).reduce(|| 0.0, f64::max);
        let advect = |c: &[Complex64]| -> Vec<Complex64> {
            let mut acc = vec![0.0; g.len()];
            for (j, uj) in u.iter().enumerate() {
                let d = g.derivative(c, j);
                acc.par_iter_mut().zip(uj.par_iter().zip(d.par_iter())).for_each(|(s, (a, b))| *s -= adv * a * b);
            }
            g.to_spectral(&acc)
        };
        let mut nu: Vec<Vec<Complex64>> = f.u_hat.iter().map(|c| advect(c)).collect();
        g.leray_project(&mut nu);
        Nonlinear { u: nu, theta: advect(&f.theta_hat), max_speed }
    }

    /// One step of size `dt` from `f.time`.
    pub fn step(&self, f: &mut SpectralField, dt: f64) -> Result<()> {
        f.check_grid(&self.grid)?;
        let g = &self.grid;
        let (nu_u, nu_t, _, force_t) = self.config.coefficients();
        let (t0, t1) = (f.time, f.time + dt);
        let ix = self.config.xi.integral(t0, t1);
        let eu: Vec<f64> = g.k2.iter().map(|k2| (-nu_u * k2 * dt + ix).exp()).collect();
        let et: Vec<f64> = g.k2.iter().map(|k2| (-nu_t * k2 * dt + force_t * ix).exp()).collect();

        let n0 = self.nonlinear(f);
        let h = 2.0 * PI / g.n as f64;
        let cfl = dt * n0.max_speed / h;
        if cfl >= CFL_LIMIT {
            return Err(Error::numeric(format!("CFL number {cfl:.3} at t={t0} exceeds {CFL_LIMIT}")));
        }
        let predict = |c: &[Complex64], n: &[Complex64], e: &[f64]| -> Vec<Complex64> {
            c.iter().zip(n).zip(e).map(|((c, n), e)| (c + n * dt) * e).collect()
        };
        let mut star = SpectralField {
            n: f.n,
            dim: f.dim,
            u_hat: (0..g.dim).map(|a| predict(&f.u_hat[a], &n0.u[a], &eu)).collect(),
            theta_hat: predict(&f.theta_hat, &n0.theta, &et),
            time: t1,
        };
        g.leray_project(&mut star.u_hat);
        let n1 = self.nonlinear(&star);
        let correct = |c: &mut [Complex64], a: &[Complex64], b: &[Complex64], e: &[f64]| {
            for i in 0..c.len() {
                c[i] = c[i] * e[i] + (a[i] * e[i] + b[i]) * (0.5 * dt);
            }
        };
        for a in 0..g.dim {
            correct(&mut f.u_hat[a], &n0.u[a], &n1.u[a], &eu);
        }
        correct(&mut f.theta_hat, &n0.theta, &n1.theta, &et);
        g.leray_project(&mut f.u_hat);
        f.time = t1;

        let e = f.kinetic_energy() + f.theta_hat.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if !e.is_finite() {
            let spec: Vec<String> = g.spectrum(&f.u_hat).iter().map(|x| format!("{x:.3e}")).collect();
            return Err(Error::numeric(format!("non-finite field at t={t1}; shell spectrum [{}]", spec.join(", "))));
        }
        let norm = f.u_hat.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let div = g.max_divergence(&f.u_hat);
        if div > 1e-10 * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::numeric(format!("divergence {div:.3e} at t={t1}")));
        }
        Ok(())
    }

    fn record(&self, f: &SpectralField, residual: f64) -> HydroDiagnostics {
        let g = &self.grid;
        HydroDiagnostics {
            time: f.time,
            kinetic_energy: f.kinetic_energy(),
            enstrophy: 0.5 * f.gradient_norm2(g),
            max_divergence: g.max_divergence(&f.u_hat),
            theta_mean: f.theta_hat[0].re,
            theta_l2: f.theta_hat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            energy_residual: residual,
        }
    }

    /// Energy-balance rate `dE/dt + nu <|grad u|^2> - 2 xi E` at time `t`.
    fn energy_rate(&self, f: &SpectralField) -> f64 {
        let (nu_u, ..) = self.config.coefficients();
        -nu_u * f.gradient_norm2(&self.grid) + 2.0 * self.config.xi.xi(f.time) * f.kinetic_energy()
    }

    /// Integrates to `t_end` with steps no larger than `dt`, equally spaced.
    pub fn run(&self, initial: SpectralField) -> Result<HydroRun> {
        initial.check_grid(&self.grid)?;
        let g = &self.grid;
        let norm = initial.u_hat.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if g.max_divergence(&initial.u_hat) > 1e-10 * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Invariant("initial velocity is not divergence-free".into()));
        }
        if !initial.u_hat.iter().chain(std::iter::once(&initial.theta_hat)).all(|c| g.is_real_symmetric(c)) {
            return Err(Error::Invariant("initial fields are not real".into()));
        }
        let span = self.config.t_end - initial.time;
        let steps = ((span / self.config.dt).ceil() as usize).max(1);
        let dt = span / steps as f64;
        let mut f = initial;
        let mut diags = vec![self.record(&f, 0.0)];
        let mut max_residual: f64 = 0.0;
        for s in 1..=steps {
            let (e0, r0) = (f.kinetic_energy(), self.energy_rate(&f));
            if dt > 0.0 {
                self.step(&mut f, dt)?;
            }
            let residual = if dt > 0.0 { (f.kinetic_energy() - e0) / dt - 0.5 * (r0 + self.energy_rate(&f)) } else { 0.0 };
            max_residual = max_residual.max(residual.abs());
            if s % self.config.output_every == 0 || s == steps {
                diags.push(self.record(&f, residual));
            }
        }
        Ok(HydroRun { diagnostics: diags, max_energy_residual: max_residual, steps, dt, field: f })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HydroDiagnostics {
    pub time: f64,
    pub kinetic_energy: f64,
    pub enstrophy: f64,
    pub max_divergence: f64,
    pub theta_mean: f64,
    pub theta_l2: f64,
    /// Trapezoidal energy-balance residual over the step ending here.
    pub energy_residual: f64,
}

#[derive(Debug)]
pub struct HydroRun {
    pub diagnostics: Vec<HydroDiagnostics>,
    pub max_energy_residual: f64,
    pub steps: usize,
    pub dt: f64,
    pub field: SpectralField,
}

impl HydroRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,kinetic_energy,enstrophy,max_divergence,theta_mean,theta_l2,energy_residual\n");
        for d in &self.diagnostics {
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                d.time, d.kinetic_energy, d.enstrophy, d.max_divergence, d.theta_mean, d.theta_l2, d.energy_residual
            ));
        }
        s
    }
}

/// Max modal difference between two fields on the same grid.
pub fn field_distance(a: &SpectralField, b: &SpectralField) -> f64 {
    a.u_hat
        .iter()
        .flatten()
        .zip(b.u_hat.iter().flatten())
        .chain(a.theta_hat.iter().zip(&b.theta_hat))
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
