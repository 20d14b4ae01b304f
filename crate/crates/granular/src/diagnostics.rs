//! Moments of particle data, projections onto the collision invariants, Haff
//! slope fits and balance residuals.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::dsmc::{ParticleEnsemble, Series, Spatial};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gk15};
use crate::rng::stream;
use crate::scaling::ScalingSchedule;
use crate::vec3::{norm2, Vec3};

/// Cell moments. Empty cells carry `valid = false` and zero moments.
#[derive(Clone, Debug, Serialize)]
pub struct MacroFields {
    /// Density relative to the mean density.
    pub rho: Vec<f64>,
    pub u: Vec<Vec3>,
    /// Raw second moment `<|v|^2>` per cell.
    pub t_raw: Vec<f64>,
    /// Second moment about the cell velocity.
    pub t_central: Vec<f64>,
    pub valid: Vec<bool>,
    /// Mass-weighted spatial mean of the energy coefficient `<phi_5>`.
    pub e_global: f64,
}

impl MacroFields {
    /// Mass-weighted mean velocity over cells.
    pub fn global_velocity(&self) -> Vec3 {
        let n = self.rho.len() as f64;
        let mut m = [0.0; 3];
        for (r, u) in self.rho.iter().zip(&self.u) {
            for i in 0..3 {
                m[i] += r * u[i] / n;
            }
        }
        m
    }

    /// Mass-weighted mean raw temperature over cells.
    pub fn global_temperature(&self) -> f64 {
        let n = self.rho.len() as f64;
        self.rho.iter().zip(&self.t_raw).map(|(r, t)| r * t).sum::<f64>() / n
    }

    pub fn global_mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }
}

/// Per-cell moments; homogeneous mode yields a single cell.
pub fn macro_from_particles(ens: &ParticleEnsemble, spatial: Spatial, theta: f64) -> Result<MacroFields> {
    let nc = spatial.n_cells();
    let cell_of: Box<dyn Fn(usize) -> usize> = match spatial {
        Spatial::Homogeneous => Box::new(|_| 0),
        Spatial::Torus { .. } => {
            let pos = ens.positions.as_ref().ok_or_else(|| Error::domain("torus fields need particle positions"))?;
            Box::new(move |i| spatial.cell_of(pos[i]))
        }
    };
    let basis = ProjectionBasis::new(theta)?;
    let mut count = vec![0usize; nc];
    let mut s1 = vec![[0.0; 3]; nc];
    let mut s2 = vec![0.0; nc];
    let mut e5 = 0.0;
    for (i, &v) in ens.velocities.iter().enumerate() {
        let c = cell_of(i);
        count[c] += 1;
        for k in 0..3 {
            s1[c][k] += v[k];
        }
        s2[c] += norm2(v);
        e5 += basis.phi(v)[4];
    }
    let n = ens.len() as f64;
    let mut f = MacroFields {
        rho: vec![0.0; nc],
        u: vec![[0.0; 3]; nc],
        t_raw: vec![0.0; nc],
        t_central: vec![0.0; nc],
        valid: vec![false; nc],
        e_global: e5 / n,
    };
    for c in 0..nc {
        if count[c] == 0 {
            continue;
        }
        let m = count[c] as f64;
        f.valid[c] = true;
        f.rho[c] = m * nc as f64 / n;
        f.u[c] = [s1[c][0] / m, s1[c][1] / m, s1[c][2] / m];
        f.t_raw[c] = s2[c] / m;
        f.t_central[c] = f.t_raw[c] - norm2(f.u[c]);
    }
    Ok(f)
}

/// Orthonormal basis of the collision invariants for the Maxwellian with variance `theta`:
/// `1`, `v_i / sqrt(theta)`, `(|v|^2 - 3 theta) / (theta sqrt 6)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProjectionBasis {
    pub theta_star: f64,
}

impl ProjectionBasis {
    pub fn new(theta_star: f64) -> Result<Self> {
        if !(theta_star > 0.0 && theta_star.is_finite()) {
            return Err(Error::domain(format!("theta_star={theta_star} must be positive")));
        }
        Ok(Self { theta_star })
    }

    pub fn phi(&self, v: Vec3) -> [f64; 5] {
        let t = self.theta_star;
        let s = t.sqrt();
        [1.0, v[0] / s, v[1] / s, v[2] / s, (norm2(v) - 3.0 * t) / (t * 6f64.sqrt())]
    }

    /// `int f(v) phi_i(v) dv` for a density written as `M(v) g(v)`, by a tensor Gauss-Hermite rule.
    pub fn project_density<G: Fn(Vec3) -> f64>(&self, g: G, points: usize) -> [f64; 5] {
        let rule = gauss_hermite(points);
        let s = (2.0 * self.theta_star).sqrt();
        let w0 = PI.powf(-1.5);
        let mut c = [0.0; 5];
        for (xa, wa) in rule.nodes.iter().zip(&rule.weights) {
            for (xb, wb) in rule.nodes.iter().zip(&rule.weights) {
                for (xc, wc) in rule.nodes.iter().zip(&rule.weights) {
                    let v = [s * xa, s * xb, s * xc];
                    let w = w0 * wa * wb * wc * g(v);
                    let p = self.phi(v);
                    for i in 0..5 {
                        c[i] += w * p[i];
                    }
                }
            }
        }
        c
    }

    /// `int phi_i phi_j M dv`.
    pub fn gram(&self) -> [[f64; 5]; 5] {
        let mut g = [[0.0; 5]; 5];
        for i in 0..5 {
            let row = self.project_density(|v| self.phi(v)[i], 6);
            g[i] = row;
        }
        g
    }
}

/// Coefficients `c_i = (1/N) sum phi_i(v)`.
pub fn pi0_project(velocities: &[Vec3], basis: &ProjectionBasis) -> [f64; 5] {
    let mut c = [0.0; 5];
    for &v in velocities {
        let p = basis.phi(v);
        for i in 0..5 {
            c[i] += p[i];
        }
    }
    let n = velocities.len().max(1) as f64;
    c.map(|x| x / n)
}

/// Per-cell coefficients weighted by the cell density, their spatial mean, and the
/// energy coefficient alone.
#[derive(Clone, Debug, Serialize)]
pub struct Projections {
    pub cells: Vec<[f64; 5]>,
    pub spatial_mean: [f64; 5],
    pub energy: f64,
}

pub fn project_cells(ens: &ParticleEnsemble, spatial: Spatial, basis: &ProjectionBasis) -> Result<Projections> {
    let nc = spatial.n_cells();
    let mut groups: Vec<Vec<Vec3>> = vec![Vec::new(); nc];
    match spatial {
        Spatial::Homogeneous => groups[0] = ens.velocities.clone(),
        Spatial::Torus { .. } => {
            let pos = ens.positions.as_ref().ok_or_else(|| Error::domain("torus projections need positions"))?;
            for (x, &v) in pos.iter().zip(&ens.velocities) {
                groups[spatial.cell_of(*x)].push(v);
            }
        }
    }
    let n = ens.len() as f64;
    let cells: Vec<[f64; 5]> = groups
        .iter()
        .map(|g| {
            let rho = g.len() as f64 * nc as f64 / n;
            pi0_project(g, basis).map(|c| rho * c)
        })
        .collect();
    let mut mean = [0.0; 5];
    for c in &cells {
        for i in 0..5 {
            mean[i] += c[i] / nc as f64;
        }
    }
    Ok(Projections { energy: mean[4], spatial_mean: mean, cells })
}

/// Normalized fourth cumulant `3 <|v|^4> / (5 <|v|^2>^2) - 1`, zero for a Maxwellian.
pub fn fourth_cumulant(ens: &ParticleEnsemble) -> f64 {
    let t = ens.central_temperature();
    let m = ens.mean_velocity();
    let m4 = ens.velocities.iter().map(|v| norm2([v[0] - m[0], v[1] - m[1], v[2] - m[2]]).powi(2)).sum::<f64>() / ens.len() as f64;
    3.0 * m4 / (5.0 * t * t) - 1.0
}

/// Computable stand-in for the weighted fluctuation norm: the weighted L1 distance
/// between the speed histogram and the Maxwellian of the same temperature,
/// `sum_b <v_b>^q |p_b - p_b^M|` over 32 bins of width `sigma/4`.
pub fn fluctuation_proxy(ens: &ParticleEnsemble, q: f64) -> f64 {
    const BINS: usize = 32;
    let sigma = (ens.central_temperature() / 3.0).sqrt();
    if !(sigma > 0.0) {
        return 0.0;
    }
    let m = ens.mean_velocity();
    let width = 0.25;
    let mut hist = [0.0; BINS];
    let n = ens.len() as f64;
    for v in &ens.velocities {
        let s = norm2([v[0] - m[0], v[1] - m[1], v[2] - m[2]]).sqrt() / sigma;
        let b = ((s / width) as usize).min(BINS - 1);
        hist[b] += 1.0 / n;
    }
    let chi = |x: f64| (2.0 / PI).sqrt() * x * x * (-0.5 * x * x).exp();
    let mut total = 0.0;
    let mut below = 0.0;
    for (b, h) in hist.iter().enumerate() {
        let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
        let p = if b + 1 == BINS { 1.0 - below } else { gk15(&chi, lo, hi).0 };
        below += p;
        let speed = sigma * (lo + 0.5 * width);
        total += (1.0 + speed * speed).powf(0.5 * q) * (h - p).abs();
    }
    total
}

#[derive(Clone, Debug, Serialize)]
pub struct HaffFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_points: usize,
    pub tail_fraction: f64,
}

const BOOTSTRAP: usize = 200;

/// Least squares of `log T` against `log t` over the last `tail_fraction` of the
/// logarithmic time span, with a 95% bootstrap interval for the slope.
pub fn haff_fit(times: &[f64], temperatures: &[f64], tail_fraction: f64) -> Result<HaffFit> {
    if times.len() != temperatures.len() {
        return Err(Error::domain("times and temperatures differ in length"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::domain(format!("tail_fraction={tail_fraction} outside (0,1]")));
    }
    if temperatures.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::domain("temperatures must be positive"));
    }
    let pts: Vec<(f64, f64)> = times.iter().zip(temperatures).filter(|(t, _)| **t > 0.0).map(|(t, y)| (t.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::domain("need positive times"));
    }
    let (first, last) = (pts[0].0, pts[pts.len() - 1].0);
    let cut = last - tail_fraction * (last - first);
    let tail: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.0 >= cut - 1e-12 * cut.abs().max(1.0)).collect();
    if tail.len() < 20 {
        return Err(Error::domain(format!("only {} points in the fitted tail, need 20", tail.len())));
    }
    let (slope, intercept) = least_squares(&tail);
    let mut rng = stream(0xB007, tail.len() as u64, slope.to_bits());
    let mut boot: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| {
            let sample: Vec<(f64, f64)> = (0..tail.len()).map(|_| tail[rng.random_range(0..tail.len())]).collect();
            least_squares(&sample).0
        })
        .filter(|s| s.is_finite())
        .collect();
    boot.sort_by(f64::total_cmp);
    let q = |p: f64| boot[((p * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
    Ok(HaffFit { slope, intercept, ci_low: q(0.025), ci_high: q(0.975), n_points: tail.len(), tail_fraction })
}

fn least_squares(p: &[(f64, f64)]) -> (f64, f64) {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = p.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Finite-difference residuals of the global balances between consecutive outputs.
#[derive(Clone, Debug, Serialize)]
pub struct BalanceResiduals {
    pub times: Vec<f64>,
    /// Relative change of the particle count (always zero for a closed system).
    pub mass: Vec<f64>,
    /// `|dP/dt - xi P| / N`.
    pub momentum: Vec<f64>,
    /// `dT/dt` minus the collision and stretch ledgers.
    pub energy_ledger: Vec<f64>,
    /// `dT/dt - (2 xi T - eps^{-2} D(T))`, filled when a dissipation model is given.
    pub energy_model: Vec<f64>,
}

/// Balance residuals for a particle series. `dissipation(T, t)` returns the
/// model dissipation rate, e.g. the Maxwellian quadrature at temperature `T`.
pub fn moment_balance_residuals(
    series: &Series,
    schedule: Option<&ScalingSchedule>,
    dissipation: Option<&dyn Fn(f64, f64) -> Result<f64>>,
) -> Result<BalanceResiduals> {
    let n = series.times.len();
    if n < 3 {
        return Err(Error::domain("need at least 3 outputs"));
    }
    let h = series.times[1] - series.times[0];
    for w in series.times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(w[1].abs()) {
            return Err(Error::domain("balance residuals need uniformly spaced outputs"));
        }
    }
    let npart = series.final_ensemble.len() as f64;
    let mut r = BalanceResiduals { times: vec![], mass: vec![], momentum: vec![], energy_ledger: vec![], energy_model: vec![] };
    for i in 0..n - 1 {
        let (t0, t1) = (series.times[i], series.times[i + 1]);
        let tm = 0.5 * (t0 + t1);
        let dt = t1 - t0;
        let xi = schedule.map_or(0.0, |s| s.xi(tm));
        r.times.push(tm);
        r.mass.push(0.0);
        let (p0, p1) = (series.momentum[i], series.momentum[i + 1]);
        let mut m = 0.0;
        for k in 0..3 {
            let d = (p1[k] - p0[k]) / dt - xi * 0.5 * (p0[k] + p1[k]);
            m += d * d;
        }
        r.momentum.push(m.sqrt() / npart);
        let (e0, e1) = (series.temperatures[i], series.temperatures[i + 1]);
        let booked = (series.collision_energy[i + 1] - series.collision_energy[i]) + (series.stretch_energy[i + 1] - series.stretch_energy[i]);
        r.energy_ledger.push((e1 - e0 - booked) / dt);
        if let Some(d) = dissipation {
            let tmid = 0.5 * (e0 + e1);
            r.energy_model.push((e1 - e0) / dt - (2.0 * xi * tmid - d(tmid, tm)?));
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsmc::init_maxwellian;
    use rand_distr::StandardNormal;

    #[test]
    fn maxwellian_fields() {
        let e = init_maxwellian(10_000, 1.0, 1).unwrap();
        let f = macro_from_particles(&e, Spatial::Homogeneous, 1.0).unwrap();
        assert_eq!(f.rho, vec![1.0]);
        assert_eq!(f.u[0], [0.0; 3]);
        assert!((f.t_raw[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cell_flagged() {
        let mut e = init_maxwellian(100, 1.0, 1).unwrap();
        e.positions = Some(vec![[0.1, 0.5, 0.5]; 100]);
        let f = macro_from_particles(&e, Spatial::Torus { cells_per_dim: 2, dims: 1 }, 1.0).unwrap();
        assert_eq!(f.valid, vec![true, false]);
        assert_eq!(f.rho[1], 0.0);
    }

    #[test]
    fn cell_averages_reproduce_global_moments() {
        let e = init_maxwellian(20_000, 1.0, 2).unwrap().with_uniform_positions(3);
        let f = macro_from_particles(&e, Spatial::Torus { cells_per_dim: 5, dims: 2 }, 1.0).unwrap();
        assert!((f.global_mass() - 1.0).abs() < 1e-14);
        assert!((f.global_temperature() - e.temperature()).abs() < 1e-13);
        let u = f.global_velocity();
        assert!(u.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn shifted_maxwellian() {
        let mut rng = stream(4, 0, 0);
        let w = [0.5, -0.2, 1.0];
        let v: Vec<Vec3> = (0..100_000)
            .map(|_| [w[0] + rng.sample::<f64, _>(StandardNormal), w[1] + rng.sample::<f64, _>(StandardNormal), w[2] + rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let e = ParticleEnsemble::from_velocities(v).unwrap();
        let f = macro_from_particles(&e, Spatial::Homogeneous, 1.0).unwrap();
        let se = (1.0 / 100_000f64).sqrt();
        for k in 0..3 {
            assert!((f.u[0][k] - w[k]).abs() < 5.0 * se);
        }
        assert!((f.t_central[0] - 3.0).abs() < 5.0 * (6.0 / 100_000f64).sqrt());
        assert!((f.t_raw[0] - f.t_central[0] - norm2(f.u[0])).abs() < 1e-12);
    }

    #[test]
    fn gram_is_identity() {
        for theta in [1.0, 0.3] {
            let g = ProjectionBasis::new(theta).unwrap().gram();
            for i in 0..5 {
                for j in 0..5 {
                    let d = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i][j] - d).abs() < 1e-8, "{i}{j}: {}", g[i][j]);
                }
            }
        }
    }

    #[test]
    fn analytic_projections() {
        let b = ProjectionBasis::new(1.0).unwrap();
        let c = b.project_density(|_| 1.0, 6);
        let expect = [1.0, 0.0, 0.0, 0.0, 0.0];
        for i in 0..5 {
            assert!((c[i] - expect[i]).abs() < 1e-12);
        }
        let delta = 0.03;
        let c = b.project_density(|v| 1.0 + delta * b.phi(v)[4], 6);
        assert!((c[4] - delta).abs() < 1e-12);
    }

    #[test]
    fn particle_projection_clt() {
        let e = init_maxwellian(100_000, 1.0, 5).unwrap();
        let c = pi0_project(&e.velocities, &ProjectionBasis::new(1.0).unwrap());
        assert_eq!(c[0], 1.0);
        for x in &c[1..] {
            assert!(x.abs() < 5.0 / (100_000f64).sqrt());
        }
        let p = project_cells(&e, Spatial::Homogeneous, &ProjectionBasis::new(1.0).unwrap()).unwrap();
        assert_eq!(p.energy, p.spatial_mean[4]);
    }

    #[test]
    fn haff_fit_exact_power_law() {
        let t: Vec<f64> = (0..100).map(|k| 10f64.powf(k as f64 / 25.0)).collect();
        let y: Vec<f64> = t.iter().map(|t| 7.0 * t.powf(-5.0 / 3.0)).collect();
        let f = haff_fit(&t, &y, 0.5).unwrap();
        assert!((f.slope + 5.0 / 3.0).abs() < 1e-6);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-6);
        assert!(f.ci_low <= f.slope + 1e-9 && f.ci_high >= f.slope - 1e-9);
    }

    #[test]
    fn haff_fit_shifted_law() {
        let t: Vec<f64> = (0..=100).map(|k| 10f64.powf(2.0 + k as f64 / 50.0)).collect();
        let y: Vec<f64> = t.iter().map(|t| (1.0 + t).powi(-2)).collect();
        let f = haff_fit(&t, &y, 1.0).unwrap();
        assert!((f.slope + 2.0).abs() < 0.01);
    }

    #[test]
    fn haff_fit_errors() {
        let t: Vec<f64> = (1..40).map(|k| k as f64).collect();
        let mut y: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        assert!(haff_fit(&t, &y, 0.05).is_err());
        y[3] = 0.0;
        assert!(haff_fit(&t, &y, 1.0).is_err());
    }

    #[test]
    fn haff_fit_scale_equivariance() {
        let t: Vec<f64> = (1..200).map(|k| k as f64 * 0.7).collect();
        let y: Vec<f64> = t.iter().enumerate().map(|(i, t)| t.powf(-1.7) * (1.0 + 0.01 * ((i * 7) % 5) as f64)).collect();
        let a = haff_fit(&t, &y, 0.8).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * 123.0).collect();
        let b = haff_fit(&t, &ys, 0.8).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
        assert!((b.intercept - a.intercept - 123f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cumulant_and_proxy_vanish_for_gaussian() {
        let e = init_maxwellian(200_000, 1.0, 9).unwrap();
        assert!(fourth_cumulant(&e).abs() < 0.02);
        let p = fluctuation_proxy(&e, 2.0);
        // sampling floor is about 0.035 at this N
        assert!(p < 0.06, "{p}");
        let bimodal: Vec<Vec3> = (0..20_000).map(|i| if i % 2 == 0 { [1.0, 0.0, 0.0] } else { [-1.0, 0.0, 0.0] }).collect();
        let b = ParticleEnsemble::from_velocities(bimodal).unwrap();
        assert!((fourth_cumulant(&b) + 0.4).abs() < 1e-12);
        assert!(fluctuation_proxy(&b, 2.0) > 0.5);
    }
}
