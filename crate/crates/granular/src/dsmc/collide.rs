use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collision::{post_collision_n, AngularKernel, ImpactLaw};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scaling::ScalingSchedule;
use crate::vec3::{norm, scale, sub, Vec3};

use super::ParticleEnsemble;

/// Particles per collision block in homogeneous mode.
const BLOCK: usize = 8192;
const MAX_RETRIES: u32 = 30;

/// How collision partners are grouped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Spatial {
    /// Partners are drawn from randomly reshuffled blocks of the whole ensemble.
    Homogeneous,
    /// Partners are drawn within cells of a regular grid on the unit torus;
    /// `dims` of the three position coordinates are binned.
    Torus { cells_per_dim: usize, dims: usize },
}

impl Spatial {
    pub fn n_cells(&self) -> usize {
        match *self {
            Spatial::Homogeneous => 1,
            Spatial::Torus { cells_per_dim, dims } => cells_per_dim.pow(dims as u32),
        }
    }

    pub fn cell_of(&self, x: Vec3) -> usize {
        match *self {
            Spatial::Homogeneous => 0,
            Spatial::Torus { cells_per_dim, dims } => {
                let mut c = 0;
                for &xi in x.iter().take(dims) {
                    let k = ((xi * cells_per_dim as f64) as usize).min(cells_per_dim - 1);
                    c = c * cells_per_dim + k;
                }
                c
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CollisionStats {
    pub candidates: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// Largest relative speed among candidate pairs of the accepted attempt.
    pub max_rel_speed: f64,
    pub majorant: f64,
    pub retries: u32,
    /// Change of the temperature `(1/N) sum |v|^2` accounted collision by collision.
    pub energy_change: f64,
}

impl CollisionStats {
    pub fn merge(&mut self, o: &CollisionStats) {
        self.candidates += o.candidates;
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.max_rel_speed = self.max_rel_speed.max(o.max_rel_speed);
        self.majorant = self.majorant.max(o.majorant);
        self.retries += o.retries;
        self.energy_change += o.energy_change;
    }
}

/// Null-collision (majorant) collision step with per-unit random streams.
///
/// Each unit (a block or a cell) owns a contiguous slice of particles during the
/// step and draws from the stream keyed by `(seed, unit, step)`, so results do not
/// depend on the number of threads.
#[derive(Clone, Debug)]
pub struct Collider {
    pub seed: u64,
    pub safety: f64,
    /// Multiplies every pair rate; `1/eps^2` in rescaled mode.
    pub rate_factor: f64,
    pub spatial: Spatial,
    step: u64,
    majorant: Option<f64>,
}

struct UnitResult {
    candidates: u64,
    accepted: u64,
    max_u: f64,
    exceeded: bool,
    energy: f64,
}

impl Collider {
    pub fn new(seed: u64, safety: f64, rate_factor: f64, spatial: Spatial) -> Result<Self> {
        if !(safety >= 1.2) {
            return Err(Error::domain(format!("majorant_safety={safety} must be at least 1.2")));
        }
        if !(rate_factor > 0.0 && rate_factor.is_finite()) {
            return Err(Error::domain(format!("rate factor {rate_factor} must be positive")));
        }
        if let Spatial::Torus { cells_per_dim, dims } = spatial {
            if cells_per_dim == 0 || !(1..=3).contains(&dims) {
                return Err(Error::domain("torus needs cells_per_dim >= 1 and dims in 1..=3"));
            }
        }
        Ok(Self { seed, safety, rate_factor, spatial, step: 0, majorant: None })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn majorant(&self) -> Option<f64> {
        self.majorant
    }

    /// Advance collisions by `dt` with restitution `law` and angular kernel `kernel`.
    pub fn step<L: ImpactLaw + Sync>(
        &mut self,
        ens: &mut ParticleEnsemble,
        dt: f64,
        law: &L,
        kernel: &AngularKernel,
    ) -> Result<CollisionStats> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("dt={dt} must be finite and nonnegative")));
        }
        let step = self.step;
        self.step += 1;
        if dt == 0.0 {
            return Ok(CollisionStats { majorant: self.majorant.unwrap_or(0.0), ..Default::default() });
        }
        let n = ens.len();
        let ranges = self.arrange(ens, step)?;
        let n_cells = self.spatial.n_cells() as f64;
        let rate = kernel.scattering_rate() * self.rate_factor;
        let mut maj = match self.majorant {
            Some(m) => m,
            None => self.safety * 2.0 * ens.max_speed(),
        };
        if maj == 0.0 {
            return Ok(CollisionStats::default());
        }
        let snapshot = ens.velocities.clone();
        let mut retries = 0;
        loop {
            let units = split_ranges(&mut ens.velocities, &ranges);
            let results: Vec<Result<UnitResult>> = units
                .into_par_iter()
                .enumerate()
                .map(|(u, vel)| {
                    let mut rng = stream(self.seed ^ ((retries as u64) << 56), u as u64, step);
                    // density of the unit relative to the mean density
                    let rho = match self.spatial {
                        Spatial::Homogeneous => 1.0,
                        _ => vel.len() as f64 * n_cells / n as f64,
                    };
                    collide_unit(vel, rho, rate, maj, dt, law, kernel, &mut rng)
                })
                .collect();
            let mut stats = CollisionStats { majorant: maj, retries, ..Default::default() };
            let mut exceeded = false;
            for r in results {
                let r = r?;
                stats.candidates += r.candidates;
                stats.accepted += r.accepted;
                stats.max_rel_speed = stats.max_rel_speed.max(r.max_u);
                stats.energy_change += r.energy;
                exceeded |= r.exceeded;
            }
            if exceeded {
                retries += 1;
                if retries > MAX_RETRIES {
                    return Err(Error::numeric(format!("majorant retuning did not converge after {MAX_RETRIES} retries")));
                }
                ens.velocities.copy_from_slice(&snapshot);
                maj = self.safety * stats.max_rel_speed;
                continue;
            }
            stats.rejected = stats.candidates - stats.accepted;
            stats.energy_change /= n as f64;
            if stats.max_rel_speed > 0.0 {
                self.majorant = Some(self.safety * stats.max_rel_speed);
            }
            return Ok(stats);
        }
    }

    /// Reorder particles into contiguous units and return their index ranges.
    fn arrange(&self, ens: &mut ParticleEnsemble, step: u64) -> Result<Vec<(usize, usize)>> {
        let n = ens.len();
        match self.spatial {
            Spatial::Homogeneous => {
                let mut rng = stream(self.seed, u64::MAX, step);
                ens.velocities.shuffle(&mut rng);
                let blocks = (n / BLOCK).max(1);
                Ok((0..blocks).map(|b| (b * n / blocks, (b + 1) * n / blocks)).collect())
            }
            Spatial::Torus { .. } => {
                let pos = ens.positions.as_ref().ok_or_else(|| Error::domain("torus mode requires particle positions"))?;
                let cells: Vec<usize> = pos.iter().map(|&x| self.spatial.cell_of(x)).collect();
                let nc = self.spatial.n_cells();
                let mut start = vec![0usize; nc + 1];
                for &c in &cells {
                    start[c + 1] += 1;
                }
                for c in 0..nc {
                    start[c + 1] += start[c];
                }
                let mut fill = start.clone();
                let mut v = vec![[0.0; 3]; n];
                let mut x = vec![[0.0; 3]; n];
                for i in 0..n {
                    let c = cells[i];
                    v[fill[c]] = ens.velocities[i];
                    x[fill[c]] = pos[i];
                    fill[c] += 1;
                }
                ens.velocities = v;
                ens.positions = Some(x);
                Ok((0..nc).map(|c| (start[c], start[c + 1])).collect())
            }
        }
    }
}

fn split_ranges<'a>(v: &'a mut [Vec3], ranges: &[(usize, usize)]) -> Vec<&'a mut [Vec3]> {
    let mut out = Vec::with_capacity(ranges.len());
    let mut rest = v;
    let mut at = 0;
    for &(a, b) in ranges {
        debug_assert_eq!(a, at);
        let (head, tail) = rest.split_at_mut(b - a);
        out.push(head);
        rest = tail;
        at = b;
    }
    out
}

/// Collisions inside one unit. The pair rate is `|u| rate rho / (n - 1)`, so every
/// particle collides at `rho rate E|u|` per unit time.
#[allow(clippy::too_many_arguments)]
fn collide_unit<L: ImpactLaw, R: Rng>(
    vel: &mut [Vec3],
    rho: f64,
    rate: f64,
    maj: f64,
    dt: f64,
    law: &L,
    kernel: &AngularKernel,
    rng: &mut R,
) -> Result<UnitResult> {
    let n = vel.len();
    let mut res = UnitResult { candidates: 0, accepted: 0, max_u: 0.0, exceeded: false, energy: 0.0 };
    if n < 2 {
        return Ok(res);
    }
    let mean = n as f64 * rho * rate * maj * dt / 2.0;
    let count = (mean + rng.random::<f64>()).floor() as u64;
    for _ in 0..count {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        res.candidates += 1;
        let u = sub(vel[i], vel[j]);
        let ua = norm(u);
        res.max_u = res.max_u.max(ua);
        if ua > maj {
            res.exceeded = true;
            return Ok(res);
        }
        if rng.random::<f64>() * maj >= ua {
            continue;
        }
        let nrm = kernel.sample_direction(scale(u, 1.0 / ua), rng);
        let out = post_collision_n(vel[i], vel[j], nrm, law)?;
        vel[i] = out.v_prime;
        vel[j] = out.vstar_prime;
        res.energy += out.energy_change;
        res.accepted += 1;
    }
    Ok(res)
}

/// Multiply every velocity by `exp(int_t^{t+dt} xi)`; returns the factor.
pub fn step_velocity_stretch(ens: &mut ParticleEnsemble, schedule: &ScalingSchedule, t: f64, dt: f64) -> f64 {
    let f = schedule.xi_integral(t, t + dt).exp();
    if f != 1.0 {
        for v in &mut ens.velocities {
            for c in v.iter_mut() {
                *c *= f;
            }
        }
    }
    f
}

/// Free streaming `x <- x + (dt/eps) v` on the unit torus. No-op without positions.
///
/// The displacement is reduced modulo one before it is added, so whole-period
/// shifts leave positions bit-identical.
pub fn step_transport(ens: &mut ParticleEnsemble, dt: f64, epsilon: f64) {
    let Some(pos) = ens.positions.as_mut() else { return };
    let k = dt / epsilon;
    for (x, v) in pos.iter_mut().zip(&ens.velocities) {
        for i in 0..3 {
            let s = (k * v[i]).rem_euclid(1.0);
            let mut y = x[i] + s;
            if y >= 1.0 {
                y -= 1.0;
            }
            if !(y < 1.0) {
                y = 0.0;
            }
            x[i] = y;
        }
    }
}
