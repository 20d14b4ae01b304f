use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::reduce::{tree_sum, tree_sum3};
use crate::rng::stream;
use crate::vec3::{norm2, Vec3};

/// Equal-weight particle approximation of a velocity distribution, optionally
/// with positions on the unit torus.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub velocities: Vec<Vec3>,
    pub positions: Option<Vec<Vec3>>,
    /// Statistical weight of one particle; `1/N` for unit total mass.
    pub weight: f64,
    pub time: f64,
}

impl ParticleEnsemble {
    pub fn from_velocities(velocities: Vec<Vec3>) -> Result<Self> {
        if velocities.len() < 2 {
            return Err(Error::domain(format!("ensemble needs at least 2 particles, got {}", velocities.len())));
        }
        let weight = 1.0 / velocities.len() as f64;
        Ok(Self { velocities, positions: None, weight, time: 0.0 })
    }

    /// Attach i.i.d. uniform positions on the unit torus.
    pub fn with_uniform_positions(mut self, seed: u64) -> Self {
        let mut rng = stream(seed, 1, 0x7051);
        let pos = (0..self.len()).map(|_| [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]).collect();
        self.positions = Some(pos);
        self
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    /// Raw second moment `(1/N) sum |v|^2`.
    pub fn temperature(&self) -> f64 {
        let v = &self.velocities;
        tree_sum(v.len(), &|i| norm2(v[i])) / v.len() as f64
    }

    /// `sum v` (not divided by N).
    pub fn momentum(&self) -> Vec3 {
        let v = &self.velocities;
        tree_sum3(v.len(), &|i| v[i])
    }

    pub fn mean_velocity(&self) -> Vec3 {
        let p = self.momentum();
        let n = self.len() as f64;
        [p[0] / n, p[1] / n, p[2] / n]
    }

    /// Second moment about the mean velocity.
    pub fn central_temperature(&self) -> f64 {
        let m = self.mean_velocity();
        let v = &self.velocities;
        tree_sum(v.len(), &|i| norm2([v[i][0] - m[0], v[i][1] - m[1], v[i][2] - m[2]])) / v.len() as f64
    }

    /// `(1/N) sum |v|^4`.
    pub fn fourth_moment(&self) -> f64 {
        let v = &self.velocities;
        tree_sum(v.len(), &|i| norm2(v[i]).powi(2)) / v.len() as f64
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|&v| norm2(v)).fold(0.0, f64::max).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::Invariant("ensemble has fewer than 2 particles".into()));
        }
        if !(self.weight > 0.0) {
            return Err(Error::Invariant("particle weight must be positive".into()));
        }
        if self.velocities.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::numeric("non-finite particle velocity"));
        }
        if let Some(p) = &self.positions {
            if p.len() != self.len() {
                return Err(Error::Invariant("positions and velocities differ in length".into()));
            }
            if p.iter().any(|x| x.iter().any(|&c| !(0.0..1.0).contains(&c))) {
                return Err(Error::Invariant("position outside the unit torus".into()));
            }
        }
        Ok(())
    }
}

/// Gaussian ensemble with per-component variance `theta`, zero momentum and
/// temperature exactly `3 theta`.
///
/// Velocities come in antithetic pairs `(g, -g)`, so the momentum sums to zero
/// exactly in the tree-ordered reduction. After scaling, one pair's x component is
/// moved by single ulps until the computed temperature equals `3 theta`.
pub fn init_maxwellian(n: usize, theta: f64, seed: u64) -> Result<ParticleEnsemble> {
    if n < 2 {
        return Err(Error::domain(format!("n={n} must be at least 2")));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("theta={theta} must be positive")));
    }
    let mut rng = stream(seed, 0, 0x1417);
    let mut v = vec![[0.0; 3]; n];
    for p in 0..n / 2 {
        let g: Vec3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        v[2 * p] = g;
        v[2 * p + 1] = [-g[0], -g[1], -g[2]];
    }
    let mut ens = ParticleEnsemble::from_velocities(v)?;
    let target = 3.0 * theta;
    let f = (target / ens.temperature()).sqrt();
    for w in &mut ens.velocities {
        for c in w.iter_mut() {
            *c *= f;
        }
    }
    if ens.temperature() != target {
        pin_temperature(&mut ens, target);
    }
    Ok(ens)
}

fn set_pair(ens: &mut ParticleEnsemble, p: usize, x: f64) {
    ens.velocities[2 * p][0] = x;
    ens.velocities[2 * p + 1][0] = -x;
}

/// Search over the x component of one antithetic pair for a value that makes the
/// computed temperature hit `target`; several pairs are tried if needed.
fn pin_temperature(ens: &mut ParticleEnsemble, target: f64) {
    let pairs = ens.len() / 2;
    let scale = (target / 3.0).sqrt();
    let mut order: Vec<usize> = (0..pairs.min(256)).collect();
    order.sort_by(|&a, &b| {
        let da = (ens.velocities[2 * a][0].abs() - scale).abs();
        let db = (ens.velocities[2 * b][0].abs() - scale).abs();
        da.total_cmp(&db)
    });
    for &p in order.iter().take(8) {
        let x0 = ens.velocities[2 * p][0];
        let sign = if x0 < 0.0 { -1.0 } else { 1.0 };
        let t_at = |ens: &mut ParticleEnsemble, m: f64| {
            set_pair(ens, p, sign * m);
            ens.temperature()
        };
        let m0 = x0.abs().max(f64::MIN_POSITIVE);
        let (mut lo, mut hi) = (m0, m0);
        let mut step = 4.0 * f64::EPSILON * m0;
        if t_at(ens, m0) < target {
            while t_at(ens, hi) < target {
                lo = hi;
                hi = m0 + step;
                step *= 2.0;
            }
        } else {
            while t_at(ens, lo) > target {
                hi = lo;
                lo = (m0 - step).max(0.0);
                step *= 2.0;
                if lo == 0.0 {
                    break;
                }
            }
        }
        // bisection on the bit patterns of nonnegative doubles
        let (mut a, mut b) = (lo.to_bits(), hi.to_bits());
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            if t_at(ens, f64::from_bits(mid)) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        for bits in [a, b] {
            if t_at(ens, f64::from_bits(bits)) == target {
                return;
            }
        }
        set_pair(ens, p, x0);
    }
}
