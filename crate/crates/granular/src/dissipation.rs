//! Dissipation functional, Gaussian moments, the constants a1 and a2, the
//! dissipation rate lambda and a Monte Carlo estimate of the collision operator
//! applied to the Maxwellian.
//!
//! Double Maxwellian integrals are reduced to one radial integral through the
//! change of variables `y = (v + v*)/sqrt 2`, `y* = (v - v*)/sqrt 2`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::collision::{AngularKernel, ImpactLaw, Rescaled};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::restitution::RestitutionModel;
use crate::scaling::ScalingSchedule;
use crate::vec3::{dot, norm, scale, sub, Vec3};

/// Integrate a fallible integrand; the first error raised inside is returned.
fn integrate_fallible<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let wrapped = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let res = integrate(wrapped, a, b, cfg);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(res?.value)
}

/// `int_{R^3} M(y) g(|y|) dy` for the standard Gaussian `M`, truncated at the radial cutoff.
fn radial_gaussian<F: Fn(f64) -> Result<f64>>(g: F, cfg: &QuadratureConfig) -> Result<f64> {
    let c = (2.0 / PI).sqrt();
    integrate_fallible(|rho| Ok(c * rho * rho * (-0.5 * rho * rho).exp() * g(rho)?), 0.0, cfg.radial_cutoff, cfg)
}

/// `Psi_e(r) = (r^{3/2}/2) int_0^1 (1 - e(sqrt(r) z)^2) z^3 dz`.
pub fn psi(model: &RestitutionModel, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    psi_rescaled(model, 1.0, r, cfg)
}

/// `Psi` for the rescaled law `e_ell(r) = e(ell r)`.
pub fn psi_rescaled(model: &RestitutionModel, ell: f64, r: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("psi argument {r} must be finite and nonnegative")));
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::domain(format!("scale {ell} must be positive")));
    }
    if r == 0.0 || model.is_elastic() {
        return Ok(0.0);
    }
    let s = ell * r.sqrt();
    let inner = integrate_fallible(|z| Ok(model.one_minus_e_sq(s * z)? * z * z * z), 0.0, 1.0, cfg)?;
    Ok(0.5 * r.powf(1.5) * inner)
}

/// `K_s = int M(y) |y|^{3+s} dy` for the standard Gaussian `M`.
pub fn moment_k(s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(s > -3.0) || !s.is_finite() {
        return Err(Error::domain(format!("moment order s={s} must exceed -3")));
    }
    radial_gaussian(|rho| Ok(rho.powf(3.0 + s)), cfg)
}

/// `I(alpha) = int_{R^d} M(x) |x|^{3+alpha} (|x|^2 - (d+2)) dx` for the standard
/// Gaussian in dimension `d`. Its sign is the sign of `alpha + 1`.
pub fn gaussian_sign_integral(alpha: f64, d: u32, cfg: &QuadratureConfig) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let p = 3.0 + alpha;
    if !(p > -(d as f64)) {
        return Err(Error::domain(format!("|x|^{p} is not integrable against the Gaussian in dimension {d}")));
    }
    let dm1 = d as i32 - 1;
    let weight = |rho: f64| rho.powi(dm1) * (-0.5 * rho * rho).exp();
    let norm = integrate_fallible(|rho| Ok(weight(rho)), 0.0, cfg.radial_cutoff, cfg)?;
    let dd = d as f64 + 2.0;
    let val = integrate_fallible(|rho| Ok(weight(rho) * rho.powf(p) * (rho * rho - dd)), 0.0, cfg.radial_cutoff, cfg)?;
    Ok(val / norm)
}

/// `D_ell = int M(y) Psi_{e_ell}(2 theta |y|^2) dy`: the rate of decrease of the
/// temperature `(1/N) sum |v|^2` when both partners are Maxwellian with variance `theta`.
pub fn maxwellian_dissipation(model: &RestitutionModel, ell: f64, theta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_positive("theta", theta)?;
    if model.is_elastic() {
        return Ok(0.0);
    }
    radial_gaussian(|rho| psi_rescaled(model, ell, 2.0 * theta * rho * rho, cfg), cfg)
}

/// `F_ell = (theta/2) int (|y|^2 - 3) M(y) Psi_{e_ell}(2 theta |y|^2) dy`, the
/// projection of the dissipation onto the energy direction.
pub fn energy_flux(model: &RestitutionModel, ell: f64, theta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_positive("theta", theta)?;
    if model.is_elastic() {
        return Ok(0.0);
    }
    let v = radial_gaussian(|rho| Ok((rho * rho - 3.0) * psi_rescaled(model, ell, 2.0 * theta * rho * rho, cfg)?), cfg)?;
    Ok(0.5 * theta * v)
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name}={x} must be positive")))
    }
}

/// Constants of the small-speed expansion for a Maxwellian of variance `theta_star`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KineticConstants {
    pub gamma: f64,
    pub gamma_bar: f64,
    pub a0: f64,
    pub theta_star: f64,
    pub a1: f64,
    pub a2: f64,
    pub k_gamma: f64,
    pub k_gamma_plus_2: f64,
}

impl KineticConstants {
    pub fn new(model: &RestitutionModel, theta_star: f64, cfg: &QuadratureConfig) -> Result<Self> {
        if model.is_constant() {
            return Err(Error::domain("kinetic constants need a speed-dependent restitution law (gamma > 0)"));
        }
        check_positive("theta_star", theta_star)?;
        let g = model.gamma;
        let a0 = model.a0;
        let k_gamma = moment_k(g, cfg)?;
        let k_gamma_plus_2 = moment_k(g + 2.0, cfg)?;
        let two_t = 2.0 * theta_star;
        let a1 = a0 * k_gamma * two_t.powf(0.5 * (1.0 + g)) / (3.0 * (4.0 + g));
        let big_k = a0 * theta_star / (2.0 * (4.0 + g)) * two_t.powf(0.5 * (3.0 + g)) * (k_gamma_plus_2 - 5.0 * k_gamma);
        let a2 = big_k / (3.0 * theta_star * theta_star);
        Ok(Self { gamma: g, gamma_bar: model.gamma_bar, a0, theta_star, a1, a2, k_gamma, k_gamma_plus_2 })
    }

    /// `K_s` for any order, computed on demand.
    pub fn k(&self, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
        moment_k(s, cfg)
    }

    pub fn ratio(&self) -> f64 {
        self.a2 / self.a1
    }
}

/// `tau_ell = D_ell / (6 a1 ell^gamma theta_star)`, which tends to one as `ell -> 0`.
pub fn tau_ell(model: &RestitutionModel, consts: &KineticConstants, ell: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let d = maxwellian_dissipation(model, ell, consts.theta_star, cfg)?;
    Ok(d / (6.0 * consts.a1 * ell.powf(consts.gamma) * consts.theta_star))
}

/// `lambda z^{-gamma} = F_ell / (3 theta^2 ell^gamma) - 2 a1`, which tends to `a2` as `ell -> 0`.
pub fn lambda_scaled(model: &RestitutionModel, consts: &KineticConstants, ell: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let th = consts.theta_star;
    let f = energy_flux(model, ell, th, cfg)?;
    Ok(f / (3.0 * th * th * ell.powf(consts.gamma)) - 2.0 * consts.a1)
}

/// Dissipation rate `lambda_eps(t) = (2/eps^2) [F_ell / (6 theta^2) - eps^2 xi(t)]` with `ell = ell_eps(t)`.
pub fn lambda_eps(model: &RestitutionModel, schedule: &ScalingSchedule, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time {t} must be nonnegative")));
    }
    let th = schedule.theta_star;
    let eps2 = schedule.epsilon * schedule.epsilon;
    let f = energy_flux(model, schedule.ell(t), th, cfg)?;
    Ok(f / (3.0 * th * th * eps2) - 2.0 * schedule.xi(t))
}

/// Monte Carlo estimate of `||Q(M, M)||` in `L^2(M^{-1/2})`.
#[derive(Clone, Debug, Serialize)]
pub struct QmmEstimate {
    pub ell: f64,
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub rejected: u64,
    pub rejected_fraction: f64,
}

const QMM_INNER: usize = 32;
const QMM_CHUNK: usize = 256;

/// Estimate `||Q_{e_ell}(M, M)||` for the Maxwellian `M` with variance `theta`.
///
/// With `G = Q(M,M)/M` the squared norm is `E_v[G(v)^2]`. For each outer `v`,
/// two independent inner averages over `(v*, n)` estimate `G(v)`, and their
/// product is an unbiased estimate of `G(v)^2`. The gain term follows the strong
/// form: the weight is `exp(-(1-e^2)('u.n)^2 / (4 theta)) / (e J) - 1` with the
/// pre-collisional impact speed `|'u.n| = eta^{-1}(|u.n|)`.
pub fn q_mm_weighted_norm(
    model: &RestitutionModel,
    kernel: &AngularKernel,
    ell: f64,
    theta: f64,
    mc_samples: u64,
    seed: u64,
) -> Result<QmmEstimate> {
    if !(ell > 0.0 && ell <= 1.0) {
        return Err(Error::domain(format!("ell={ell} outside (0,1]")));
    }
    check_positive("theta", theta)?;
    if mc_samples < 100_000 {
        return Err(Error::domain(format!("mc_samples={mc_samples} below 1e5")));
    }
    let law = Rescaled { model, ell };
    let rate = kernel.scattering_rate();
    let sd = theta.sqrt();
    let outer = (mc_samples as usize).div_ceil(2 * QMM_INNER);
    let chunks = outer.div_ceil(QMM_CHUNK);
    // per chunk: (sum, sum of squares, rejected, count)
    let parts: Vec<Result<(f64, f64, u64, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = crate::rng::stream(seed, c as u64, 0x9A11);
            let n = QMM_CHUNK.min(outer - c * QMM_CHUNK);
            let (mut s1, mut s2, mut rej) = (0.0, 0.0, 0u64);
            for _ in 0..n {
                let v = gaussian3(&mut rng, sd);
                let mut g = [0.0; 2];
                for gi in &mut g {
                    let mut acc = 0.0;
                    for _ in 0..QMM_INNER {
                        let vs = gaussian3(&mut rng, sd);
                        match gain_loss_ratio(v, vs, kernel, &law, theta, &mut rng)? {
                            Some(w) => acc += rate * w,
                            None => rej += 1,
                        }
                    }
                    *gi = acc / QMM_INNER as f64;
                }
                let x = g[0] * g[1];
                s1 += x;
                s2 += x * x;
            }
            Ok((s1, s2, rej, n as u64))
        })
        .collect();
    let (mut s1, mut s2, mut rej, mut count) = (0.0, 0.0, 0u64, 0u64);
    for p in parts {
        let (a, b, r, n) = p?;
        s1 += a;
        s2 += b;
        rej += r;
        count += n;
    }
    let n = count as f64;
    let mean = s1 / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let se_sq = (var / n).sqrt();
    let value = mean.max(0.0).sqrt();
    let std_error = if value > 0.0 { se_sq / (2.0 * value) } else { se_sq.sqrt() };
    let samples = count * 2 * QMM_INNER as u64;
    Ok(QmmEstimate { ell, value, std_error, samples, rejected: rej, rejected_fraction: rej as f64 / samples as f64 })
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Vec3 {
    [sd * rng.sample::<f64, _>(StandardNormal), sd * rng.sample::<f64, _>(StandardNormal), sd * rng.sample::<f64, _>(StandardNormal)]
}

/// `|u| (M('v)M('v*) / (M(v)M(v*) e J) - 1)` for one sampled normal; `None` when the Jacobian vanishes.
fn gain_loss_ratio<R: Rng + ?Sized, L: ImpactLaw>(
    v: Vec3,
    vs: Vec3,
    kernel: &AngularKernel,
    law: &L,
    theta: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    let u = sub(v, vs);
    let ua = norm(u);
    if ua == 0.0 {
        return Ok(Some(0.0));
    }
    let n = kernel.sample_direction(scale(u, 1.0 / ua), rng);
    let un = dot(u, n).abs();
    let pre = law.eta_inverse(un)?;
    let jac = law.jacobian(pre)?;
    if jac < 1e-14 {
        return Ok(None);
    }
    let e = law.e(pre)?;
    let loss = law.one_minus_e_sq(pre)?;
    let ratio = (-loss * pre * pre / (4.0 * theta)).exp() / (e * jac) - 1.0;
    Ok(Some(ua * ratio))
}
