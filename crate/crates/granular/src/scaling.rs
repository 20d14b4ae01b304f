//! Self-similar schedule: velocity scale V, time change tau and its inverse,
//! anti-drift xi, restitution scale ell and the epsilon-free clock z.
//!
//! With `B = b1^{g/(g+1)}` and `k = eps^{2/g}`:
//!
//! ```text
//! V(t)     = (b1 + (1+g) a1 k t)^{1/(g+1)} / k          (physical time t)
//! tau(t)   = ((b1 + (1+g) a1 k t)^{g/(g+1)} - B) / (g a1)
//! xi(s)    = a1 / (B + g a1 s)                           (rescaled time s)
//! z(s)     = (B + g a1 s)^{-1/g}
//! ell(s)   = k z(s)
//! ```

use serde::Serialize;

use crate::dsmc::ParticleEnsemble;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingSchedule {
    pub epsilon: f64,
    pub gamma: f64,
    pub a1: f64,
    pub b1: f64,
    pub theta_star: f64,
}

impl ScalingSchedule {
    pub fn new(epsilon: f64, gamma: f64, a1: f64, b1: f64, theta_star: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain(format!("epsilon={epsilon} outside (0,1]")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("gamma={gamma} must be positive")));
        }
        for (name, x) in [("a1", a1), ("b1", b1), ("theta_star", theta_star)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::domain(format!("{name}={x} must be positive")));
            }
        }
        Ok(Self { epsilon, gamma, a1, b1, theta_star })
    }

    fn k(&self) -> f64 {
        self.epsilon.powf(2.0 / self.gamma)
    }

    fn big_b(&self) -> f64 {
        self.b1.powf(self.gamma / (self.gamma + 1.0))
    }

    /// Velocity scale at physical time `t`.
    pub fn v(&self, t: f64) -> f64 {
        let g = self.gamma;
        (self.b1 + (1.0 + g) * self.a1 * self.k() * t).powf(1.0 / (g + 1.0)) / self.k()
    }

    /// Rescaled time reached at physical time `t`; `tau(t) = int_0^t ds / V(s)`.
    pub fn tau(&self, t: f64) -> f64 {
        let g = self.gamma;
        let x = (1.0 + g) * self.a1 * self.k() * t / self.b1;
        self.big_b() * ((g / (g + 1.0)) * x.ln_1p()).exp_m1() / (g * self.a1)
    }

    /// Physical time at which the rescaled clock reads `s`.
    pub fn s_inv(&self, s: f64) -> f64 {
        let g = self.gamma;
        let x = g * self.a1 * s / self.big_b();
        self.b1 * (((g + 1.0) / g) * x.ln_1p()).exp_m1() / ((1.0 + g) * self.a1 * self.k())
    }

    /// Anti-drift coefficient at rescaled time `s`.
    pub fn xi(&self, s: f64) -> f64 {
        self.a1 / (self.big_b() + self.gamma * self.a1 * s)
    }

    /// `int_{s0}^{s1} xi`.
    pub fn xi_integral(&self, s0: f64, s1: f64) -> f64 {
        let d = self.big_b() + self.gamma * self.a1 * s0;
        (self.gamma * self.a1 * (s1 - s0) / d).ln_1p() / self.gamma
    }

    pub fn z(&self, s: f64) -> f64 {
        (self.big_b() + self.gamma * self.a1 * s).powf(-1.0 / self.gamma)
    }

    /// Restitution scale at rescaled time `s`.
    pub fn ell(&self, s: f64) -> f64 {
        self.k() * self.z(s)
    }

    /// Unit-free Haff profile `eps^{4/(g+1)} (eps^{-2/g} + t)^{-2/(g+1)}`.
    pub fn haff_profile(&self, t: f64) -> f64 {
        let g = self.gamma;
        let k = self.k();
        // eps^{4/(g+1)} eps^{4/(g(g+1))} = k^2
        k * k * (-2.0 / (g + 1.0) * (k * t).ln_1p()).exp()
    }

    /// Lower and upper envelopes for the physical temperature at time `t`.
    pub fn haff_envelope(&self, t: f64, c_low: f64, c_high: f64) -> (f64, f64) {
        let p = self.haff_profile(t);
        (c_low * p, c_high * p)
    }
}

/// Physical to rescaled variables at physical time `t_phys`: velocities are
/// multiplied by `V(t_phys)` and the clock becomes `tau(t_phys)`.
pub fn rescale_ensemble(physical: &ParticleEnsemble, schedule: &ScalingSchedule, t_phys: f64) -> (ParticleEnsemble, f64) {
    let v = schedule.v(t_phys);
    let t = schedule.tau(t_phys);
    let mut out = physical.clone();
    for w in &mut out.velocities {
        for c in w.iter_mut() {
            *c *= v;
        }
    }
    out.time = t;
    (out, t)
}

/// Inverse of [`rescale_ensemble`] at rescaled time `s`.
pub fn unrescale_ensemble(rescaled: &ParticleEnsemble, schedule: &ScalingSchedule, s: f64) -> (ParticleEnsemble, f64) {
    let t = schedule.s_inv(s);
    let v = schedule.v(t);
    let mut out = rescaled.clone();
    for w in &mut out.velocities {
        for c in w.iter_mut() {
            *c /= v;
        }
    }
    out.time = t;
    (out, t)
}
