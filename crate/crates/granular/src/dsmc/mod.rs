//! Particle solver for the homogeneous or periodic inelastic Boltzmann equation,
//! in physical variables (free cooling) and in self-similar variables.

mod collide;
mod ensemble;

pub use collide::{step_transport, step_velocity_stretch, CollisionStats, Collider, Spatial};
pub use ensemble::{init_maxwellian, ParticleEnsemble};

use serde::Serialize;

use crate::collision::{AngularKernel, Rescaled};
use crate::diagnostics::fluctuation_proxy;
use crate::error::{Error, Result};
use crate::restitution::RestitutionModel;
use crate::scaling::ScalingSchedule;
use crate::vec3::{norm, Vec3};

/// Bound on the expected number of collisions per particle in one step.
pub const MAX_COLLISION_PROBABILITY: f64 = 0.09;
const MAX_STEPS: u64 = 200_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    PhysicalCooling,
    Rescaled,
}

#[derive(Clone, Debug)]
pub struct DsmcConfig {
    pub n_particles: usize,
    /// Base time step. In cooling mode it grows like `T^{-1/2}` when `adaptive_dt` is set.
    pub dt: f64,
    pub mode: Mode,
    pub spatial: Spatial,
    pub kernel: AngularKernel,
    pub restitution: RestitutionModel,
    pub schedule: Option<ScalingSchedule>,
    pub seed: u64,
    pub theta_star: f64,
    pub t_end: f64,
    /// Cooling mode stops once the temperature has dropped by this factor.
    pub target_drop: Option<f64>,
    pub majorant_safety: f64,
    /// Cooling outputs are log-spaced in time, starting at `dt`.
    pub outputs_per_decade: usize,
    /// Rescaled outputs are evenly spaced.
    pub output_interval: f64,
    /// Explicit output times, replacing the default grids.
    pub output_times: Option<Vec<f64>>,
    pub adaptive_dt: bool,
    /// Apply the anti-drift velocity stretch in rescaled mode.
    pub stretch: bool,
}

impl DsmcConfig {
    pub fn new(mode: Mode, restitution: RestitutionModel) -> Self {
        Self {
            n_particles: 10_000,
            dt: 0.02,
            mode,
            spatial: Spatial::Homogeneous,
            kernel: AngularKernel::HardSphere,
            restitution,
            schedule: None,
            seed: 1,
            theta_star: 1.0,
            t_end: 10.0,
            target_drop: None,
            majorant_safety: 1.5,
            outputs_per_decade: 50,
            output_interval: 0.1,
            output_times: None,
            adaptive_dt: true,
            stretch: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_particles < 2 {
            errs.push(format!("n_particles={} must be at least 2", self.n_particles));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt={} must be positive", self.dt));
        }
        if !(self.majorant_safety >= 1.2) {
            errs.push(format!("majorant_safety={} must be at least 1.2", self.majorant_safety));
        }
        if !(self.theta_star > 0.0 && self.theta_star.is_finite()) {
            errs.push(format!("theta_star={} must be positive", self.theta_star));
        }
        if !(self.t_end > 0.0) {
            errs.push(format!("t_end={} must be positive", self.t_end));
        }
        if let Some(d) = self.target_drop {
            if !(d > 1.0) {
                errs.push(format!("target_drop={d} must exceed 1"));
            }
        }
        if self.mode == Mode::Rescaled && self.schedule.is_none() {
            errs.push("rescaled mode requires a scaling schedule".into());
        }
        if self.mode == Mode::PhysicalCooling && !self.t_end.is_finite() && self.target_drop.is_none() {
            errs.push("cooling run needs a finite t_end or a target_drop".into());
        }
        if self.mode == Mode::Rescaled && !self.t_end.is_finite() {
            errs.push("rescaled run needs a finite t_end".into());
        }
        if self.outputs_per_decade == 0 {
            errs.push("outputs_per_decade must be positive".into());
        }
        if !(self.output_interval > 0.0) {
            errs.push("output_interval must be positive".into());
        }
        if let Spatial::Torus { cells_per_dim, dims } = self.spatial {
            if cells_per_dim == 0 || !(1..=3).contains(&dims) {
                errs.push("torus needs cells_per_dim >= 1 and dims in 1..=3".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(errs.join("; ")))
        }
    }
}

/// Output of a particle run. Cumulative ledgers start at zero.
#[derive(Clone, Debug, Serialize)]
pub struct Series {
    pub mode: Mode,
    /// Operator splitting used per step.
    pub splitting: &'static str,
    pub times: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub momentum: Vec<Vec3>,
    pub n_collisions: Vec<u64>,
    /// Cumulative temperature change booked collision by collision.
    pub collision_energy: Vec<f64>,
    /// Cumulative temperature change from the velocity stretch.
    pub stretch_energy: Vec<f64>,
    pub fluctuation_norms: Vec<f64>,
    pub stats: CollisionStats,
    pub steps: u64,
    #[serde(skip)]
    pub final_ensemble: ParticleEnsemble,
}

pub type CoolingSeries = Series;
pub type RescaledSeries = Series;

impl Series {
    fn new(mode: Mode, splitting: &'static str, ens: &ParticleEnsemble) -> Self {
        Self {
            mode,
            splitting,
            times: Vec::new(),
            temperatures: Vec::new(),
            momentum: Vec::new(),
            n_collisions: Vec::new(),
            collision_energy: Vec::new(),
            stretch_energy: Vec::new(),
            fluctuation_norms: Vec::new(),
            stats: CollisionStats::default(),
            steps: 0,
            final_ensemble: ens.clone(),
        }
    }

    fn record(&mut self, t: f64, ens: &ParticleEnsemble, coll: f64, stretch: f64) {
        self.times.push(t);
        self.temperatures.push(ens.temperature());
        self.momentum.push(ens.momentum());
        self.n_collisions.push(self.stats.accepted);
        self.collision_energy.push(coll);
        self.stretch_energy.push(stretch);
        self.fluctuation_norms.push(fluctuation_proxy(ens, 2.0));
    }

    /// CSV with columns `t,T,px,py,pz,n_collisions`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,T,px,py,pz,n_collisions\n");
        for i in 0..self.times.len() {
            let p = self.momentum[i];
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{}\n",
                self.times[i], self.temperatures[i], p[0], p[1], p[2], self.n_collisions[i]
            ));
        }
        s
    }
}

/// Mean relative speed `4 sqrt(T/(3 pi))` of a Maxwellian with temperature `T`.
fn mean_relative_speed(t: f64) -> f64 {
    4.0 * (t / (3.0 * std::f64::consts::PI)).sqrt()
}

fn initial_ensemble(cfg: &DsmcConfig) -> Result<ParticleEnsemble> {
    let ens = init_maxwellian(cfg.n_particles, cfg.theta_star, cfg.seed)?;
    Ok(match cfg.spatial {
        Spatial::Homogeneous => ens,
        Spatial::Torus { .. } => ens.with_uniform_positions(cfg.seed),
    })
}

fn collider_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xC0_11DE
}

/// Upcoming output times, consumed front to back.
struct OutputClock {
    times: Vec<f64>,
    next: usize,
}

impl OutputClock {
    fn explicit(mut times: Vec<f64>) -> Self {
        times.retain(|&t| t > 0.0);
        times.sort_by(f64::total_cmp);
        times.dedup();
        Self { times, next: 0 }
    }

    fn log_spaced(first: f64, per_decade: usize, end: f64) -> Self {
        let mut times = Vec::new();
        let mut k = 0;
        loop {
            let t = first * 10f64.powf(k as f64 / per_decade as f64);
            if !(t < end) || times.len() > 100_000 {
                break;
            }
            times.push(t);
            k += 1;
        }
        if end.is_finite() {
            times.push(end);
        }
        Self { times, next: 0 }
    }

    fn even(interval: f64, end: f64) -> Self {
        let n = (end / interval).round().max(1.0) as usize;
        let mut times: Vec<f64> = (1..=n).map(|k| k as f64 * interval).filter(|&t| t < end).collect();
        times.push(end);
        Self { times, next: 0 }
    }

    fn peek(&self) -> Option<f64> {
        self.times.get(self.next).copied()
    }
}

fn check_momentum(ens: &ParticleEnsemble, v_ref: f64, steps: u64, t: f64) -> Result<()> {
    let p = norm(ens.momentum());
    let bound = 1e-10 * ens.len() as f64 * v_ref * (1.0 + steps as f64 / 1000.0);
    if p > bound {
        return Err(Error::Invariant(format!("momentum drift {p:e} above {bound:e} at t={t} after {steps} steps")));
    }
    Ok(())
}

/// Free cooling in physical variables.
pub fn run_free_cooling(cfg: &DsmcConfig) -> Result<CoolingSeries> {
    cfg.validate()?;
    if cfg.mode != Mode::PhysicalCooling {
        return Err(Error::domain("run_free_cooling needs mode = physical_cooling"));
    }
    let mut ens = initial_ensemble(cfg)?;
    let mut collider = Collider::new(collider_seed(cfg.seed), cfg.majorant_safety, 1.0, cfg.spatial)?;
    let model = &cfg.restitution;
    let rate = cfg.kernel.scattering_rate();
    let t0 = ens.temperature();
    let v_ref = t0.sqrt();
    let t_floor = cfg.target_drop.map(|d| t0 / d);
    let mut clock = match &cfg.output_times {
        Some(ts) => OutputClock::explicit(ts.clone()),
        None => OutputClock::log_spaced(cfg.dt, cfg.outputs_per_decade, cfg.t_end),
    };
    let mut series = Series::new(Mode::PhysicalCooling, "none", &ens);
    let mut coll = 0.0;
    series.record(0.0, &ens, 0.0, 0.0);
    let mut t = 0.0;
    let mut temp = t0;
    let mut last_recorded = t0;
    loop {
        if series.steps >= MAX_STEPS {
            return Err(Error::numeric(format!("step limit reached at t={t}, T={temp}")));
        }
        let mut dt = if cfg.adaptive_dt { cfg.dt * (t0 / temp).sqrt() } else { cfg.dt };
        dt = dt.min(MAX_COLLISION_PROBABILITY / (rate * mean_relative_speed(temp)));
        let mut landing = None;
        if let Some(next) = clock.peek() {
            if t + dt >= next {
                dt = next - t;
                landing = Some(next);
            }
        }
        if t + dt >= cfg.t_end {
            dt = cfg.t_end - t;
            landing = Some(cfg.t_end);
        }
        let stats = collider.step(&mut ens, dt, model, &cfg.kernel)?;
        series.stats.merge(&stats);
        series.steps += 1;
        coll += stats.energy_change;
        t = landing.unwrap_or(t + dt);
        temp = ens.temperature();
        if !temp.is_finite() {
            return Err(Error::numeric(format!("non-finite temperature at t={t}")));
        }
        let done = t >= cfg.t_end || t_floor.is_some_and(|f| temp <= f);
        let at_output = landing.is_some() && clock.peek() == landing;
        if at_output || done {
            if at_output {
                clock.next += 1;
            }
            if temp > last_recorded * (1.0 + 8.0 * f64::EPSILON) {
                return Err(Error::Invariant(format!(
                    "temperature increased between outputs: {last_recorded:e} -> {temp:e} at t={t}"
                )));
            }
            check_momentum(&ens, v_ref, series.steps, t)?;
            series.record(t, &ens, coll, 0.0);
            last_recorded = temp;
        }
        if done {
            break;
        }
    }
    ens.time = t;
    series.final_ensemble = ens;
    Ok(series)
}

/// Particle solution of the rescaled equation with Strang splitting
/// stretch(dt/2), collide(dt), transport(dt), stretch(dt/2).
pub fn run_rescaled(cfg: &DsmcConfig) -> Result<RescaledSeries> {
    cfg.validate()?;
    if cfg.mode != Mode::Rescaled {
        return Err(Error::domain("run_rescaled needs mode = rescaled"));
    }
    let sched = cfg.schedule.expect("validated");
    let eps = sched.epsilon;
    let rf = 1.0 / (eps * eps);
    let mut ens = initial_ensemble(cfg)?;
    let mut collider = Collider::new(collider_seed(cfg.seed), cfg.majorant_safety, rf, cfg.spatial)?;
    let rate = cfg.kernel.scattering_rate() * rf;
    let v_ref = ens.temperature().sqrt();
    let mut clock = match &cfg.output_times {
        Some(ts) => OutputClock::explicit(ts.iter().copied().filter(|&t| t <= cfg.t_end).collect()),
        None => OutputClock::even(cfg.output_interval, cfg.t_end),
    };
    let mut series = Series::new(Mode::Rescaled, "strang", &ens);
    let (mut coll, mut stretch) = (0.0, 0.0);
    series.record(0.0, &ens, 0.0, 0.0);
    let mut t = 0.0;
    while t < cfg.t_end {
        if series.steps >= MAX_STEPS {
            return Err(Error::numeric(format!("step limit reached at t={t}")));
        }
        let temp = ens.temperature();
        let mut dt = cfg.dt.min(MAX_COLLISION_PROBABILITY / (rate * mean_relative_speed(temp)));
        let mut landing = None;
        if let Some(next) = clock.peek() {
            if t + dt >= next {
                dt = next - t;
                landing = Some(next);
            }
        }
        let half = 0.5 * dt;
        let mut t_now = temp;
        if cfg.stretch {
            let f = step_velocity_stretch(&mut ens, &sched, t, half);
            stretch += (f * f - 1.0) * t_now;
            t_now *= f * f;
        }
        let law = Rescaled { model: &cfg.restitution, ell: sched.ell(t + half) };
        let stats = collider.step(&mut ens, dt, &law, &cfg.kernel)?;
        series.stats.merge(&stats);
        coll += stats.energy_change;
        t_now += stats.energy_change;
        step_transport(&mut ens, dt, eps);
        if cfg.stretch {
            let f = step_velocity_stretch(&mut ens, &sched, t + half, half);
            stretch += (f * f - 1.0) * t_now;
        }
        series.steps += 1;
        t = landing.unwrap_or(t + dt);
        if landing.is_some() && clock.peek() == landing {
            clock.next += 1;
            let temp = ens.temperature();
            if !temp.is_finite() {
                return Err(Error::numeric(format!("non-finite temperature at t={t}")));
            }
            check_momentum(&ens, v_ref * temp.sqrt().max(1.0), series.steps, t)?;
            series.record(t, &ens, coll, stretch);
        }
    }
    ens.time = t;
    series.final_ensemble = ens;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elastic_cooling_run_is_flat() {
        let mut cfg = DsmcConfig::new(Mode::PhysicalCooling, RestitutionModel::elastic());
        cfg.n_particles = 5000;
        cfg.t_end = 5.0;
        let s = run_free_cooling(&cfg).unwrap();
        for &t in &s.temperatures {
            assert!((t / 3.0 - 1.0).abs() < 1e-8);
        }
        assert_eq!(*s.times.last().unwrap(), 5.0);
    }

    #[test]
    fn cooling_is_monotone_and_ledger_balances() {
        let mut cfg = DsmcConfig::new(Mode::PhysicalCooling, RestitutionModel::constant(0.8).unwrap());
        cfg.n_particles = 4000;
        cfg.t_end = 50.0;
        let s = run_free_cooling(&cfg).unwrap();
        for w in s.temperatures.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for i in 0..s.times.len() {
            let direct = s.temperatures[i] - s.temperatures[0];
            assert!((direct - s.collision_energy[i]).abs() < 1e-8 * s.temperatures[0]);
        }
    }

    #[test]
    fn target_drop_stops_the_run() {
        let mut cfg = DsmcConfig::new(Mode::PhysicalCooling, RestitutionModel::constant(0.7).unwrap());
        cfg.n_particles = 2000;
        cfg.t_end = f64::INFINITY;
        cfg.target_drop = Some(10.0);
        let s = run_free_cooling(&cfg).unwrap();
        let last = *s.temperatures.last().unwrap();
        assert!(last <= 0.3 && last > 0.2, "{last}");
    }

    #[test]
    fn equal_seeds_give_identical_series() {
        let mut cfg = DsmcConfig::new(Mode::PhysicalCooling, RestitutionModel::viscoelastic(1.0).unwrap());
        cfg.n_particles = 3000;
        cfg.t_end = 3.0;
        let a = run_free_cooling(&cfg).unwrap();
        let b = run_free_cooling(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn rescaled_elastic_without_drift_is_flat() {
        let mut cfg = DsmcConfig::new(Mode::Rescaled, RestitutionModel::elastic());
        cfg.n_particles = 3000;
        cfg.t_end = 2.0;
        cfg.stretch = false;
        cfg.schedule = Some(ScalingSchedule::new(0.5, 0.2, 1.0, 1.0, 1.0).unwrap());
        let s = run_rescaled(&cfg).unwrap();
        assert_eq!(s.splitting, "strang");
        for &t in &s.temperatures {
            assert!((t / 3.0 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rescaled_ledger_balances() {
        let mut cfg = DsmcConfig::new(Mode::Rescaled, RestitutionModel::viscoelastic(1.0).unwrap());
        cfg.n_particles = 3000;
        cfg.t_end = 1.0;
        cfg.schedule = Some(ScalingSchedule::new(0.5, 0.2, 1.0, 1.0, 1.0).unwrap());
        let s = run_rescaled(&cfg).unwrap();
        for i in 0..s.times.len() {
            let direct = s.temperatures[i] - s.temperatures[0];
            let booked = s.collision_energy[i] + s.stretch_energy[i];
            assert!((direct - booked).abs() < 1e-10 * s.temperatures[0], "{direct} vs {booked}");
        }
    }

    #[test]
    fn torus_rescaled_run() {
        let mut cfg = DsmcConfig::new(Mode::Rescaled, RestitutionModel::viscoelastic(1.0).unwrap());
        cfg.n_particles = 4000;
        cfg.t_end = 0.5;
        cfg.spatial = Spatial::Torus { cells_per_dim: 4, dims: 2 };
        cfg.schedule = Some(ScalingSchedule::new(0.5, 0.2, 1.0, 1.0, 1.0).unwrap());
        let s = run_rescaled(&cfg).unwrap();
        s.final_ensemble.validate().unwrap();
        assert!(s.final_ensemble.positions.is_some());
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let mut cfg = DsmcConfig::new(Mode::Rescaled, RestitutionModel::elastic());
        cfg.n_particles = 1;
        cfg.majorant_safety = 1.0;
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.contains("n_particles") && e.contains("majorant_safety") && e.contains("schedule"));
    }
}
