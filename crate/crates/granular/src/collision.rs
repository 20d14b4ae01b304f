//! Binary inelastic collisions in the normal (n) and scattering-direction (sigma)
//! parametrizations, their inverse, and sampling of collision directions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::restitution::RestitutionModel;
use crate::vec3::{dot, norm, norm2, orthonormal_frame, scale, sub, Vec3};

/// Restitution as seen by a collision: either a model or a model rescaled by a speed factor.
pub trait ImpactLaw {
    fn e(&self, r: f64) -> Result<f64>;
    fn one_minus_e_sq(&self, r: f64) -> Result<f64>;
    fn eta_inverse(&self, z: f64) -> Result<f64>;
    fn jacobian(&self, r: f64) -> Result<f64>;
}

impl ImpactLaw for RestitutionModel {
    fn e(&self, r: f64) -> Result<f64> {
        self.eval(r)
    }
    fn one_minus_e_sq(&self, r: f64) -> Result<f64> {
        RestitutionModel::one_minus_e_sq(self, r)
    }
    fn eta_inverse(&self, z: f64) -> Result<f64> {
        RestitutionModel::eta_inverse(self, z)
    }
    fn jacobian(&self, r: f64) -> Result<f64> {
        RestitutionModel::jacobian(self, r)
    }
}

/// The law `r -> e(ell r)`.
#[derive(Clone, Copy, Debug)]
pub struct Rescaled<'a> {
    pub model: &'a RestitutionModel,
    pub ell: f64,
}

impl ImpactLaw for Rescaled<'_> {
    fn e(&self, r: f64) -> Result<f64> {
        self.model.eval_rescaled(self.ell, r)
    }
    fn one_minus_e_sq(&self, r: f64) -> Result<f64> {
        self.model.one_minus_e_sq(self.ell * r)
    }
    fn eta_inverse(&self, z: f64) -> Result<f64> {
        Ok(self.model.eta_inverse(self.ell * z)? / self.ell)
    }
    fn jacobian(&self, r: f64) -> Result<f64> {
        self.model.jacobian(self.ell * r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionOutcome {
    pub v_prime: Vec3,
    pub vstar_prime: Vec3,
    pub impact_speed: f64,
    pub e_used: f64,
    pub energy_change: f64,
}

fn check_unit(n: Vec3, what: &str) -> Result<()> {
    if (norm2(n) - 1.0).abs() > 2e-12 {
        return Err(Error::domain(format!("{what} is not a unit vector (|{what}|^2 = {})", norm2(n))));
    }
    Ok(())
}

/// Post-collisional velocities for the unit normal `n`.
pub fn post_collision_n<L: ImpactLaw + ?Sized>(v: Vec3, vs: Vec3, n: Vec3, law: &L) -> Result<CollisionOutcome> {
    check_unit(n, "n")?;
    normal_kick(v, vs, n, law)
}

/// Collision along `n` evaluated with compensated arithmetic.
///
/// The relative velocity, `u.n` and the kick `(1+e)/2 (u.n)` are carried as
/// double-double numbers, so each output component is rounded exactly once and
/// the energy identity holds to a few ulps of the pair energy.
fn normal_kick<L: ImpactLaw + ?Sized>(v: Vec3, vs: Vec3, n: Vec3, law: &L) -> Result<CollisionOutcome> {
    let mut un = Dd::ZERO;
    for i in 0..3 {
        let (hi, lo) = two_sum(v[i], -vs[i]);
        un = un.add(Dd::prod(hi, n[i])).add_f64(lo * n[i]);
    }
    let impact = un.hi.abs();
    let e = law.e(impact)?;
    // 1/|n|^2 to first order; |n|^2 - 1 is a few ulps for a normalized vector
    let mut nn = Dd::ZERO;
    for &c in &n {
        nn = nn.add(Dd::prod(c, c));
    }
    let inv_nn = Dd::renorm(2.0 - nn.hi, -nn.lo);
    let (s, t) = two_sum(1.0, e);
    let one_plus_e = Dd { hi: s, lo: t };
    let k = Dd { hi: 0.5 * s, lo: 0.5 * t }.mul(un).mul(inv_nn);
    let mut exact = [Dd::ZERO; 6];
    for i in 0..3 {
        let kick = k.mul_f64(n[i]);
        exact[i] = kick.neg().add_f64(v[i]);
        exact[i + 3] = kick.add_f64(vs[i]);
    }
    let out = energy_aware_round(&exact);
    let vp = [out[0], out[1], out[2]];
    let vsp = [out[3], out[4], out[5]];
    // the energy change of the update actually applied: -(1 - e^2)/2 (u.n)^2 / |n|^2,
    // with 1 - e^2 taken from the fast accurate path when e is within rounding of 1
    let (a, b) = two_sum(1.0, -e);
    let mut loss = one_plus_e.mul(Dd { hi: a, lo: b });
    if e == 1.0 || a < 1e-6 {
        let accurate = law.one_minus_e_sq(impact)?;
        loss = Dd { hi: accurate, lo: 0.0 };
    }
    let change = loss.mul(un).mul(un).mul(inv_nn);
    Ok(CollisionOutcome {
        v_prime: vp,
        vstar_prime: vsp,
        impact_speed: impact,
        e_used: e,
        energy_change: -0.5 * change.to_f64(),
    })
}

/// Post-collisional velocities for the scattering direction `sigma`.
pub fn post_collision_sigma<L: ImpactLaw + ?Sized>(v: Vec3, vs: Vec3, sigma: Vec3, law: &L) -> Result<CollisionOutcome> {
    check_unit(sigma, "sigma")?;
    let u = sub(v, vs);
    let un = norm(u);
    if un == 0.0 {
        return Err(Error::DegeneratePair);
    }
    sigma_kick(v, vs, u, un, sigma, law)
}

/// Same as [`post_collision_sigma`] for callers that already hold `u` and `|u|`.
///
/// `|u| sigma - u = -2 (u.n) n`, so the collision is applied along the normal
/// recovered from that difference.
#[inline]
pub(crate) fn sigma_kick<L: ImpactLaw + ?Sized>(
    v: Vec3,
    vs: Vec3,
    u: Vec3,
    u_abs: f64,
    sigma: Vec3,
    law: &L,
) -> Result<CollisionOutcome> {
    let d = [u_abs * sigma[0] - u[0], u_abs * sigma[1] - u[1], u_abs * sigma[2] - u[2]];
    let d_abs = norm(d);
    if d_abs <= 4.0 * f64::EPSILON * u_abs {
        return Ok(CollisionOutcome { v_prime: v, vstar_prime: vs, impact_speed: 0.0, e_used: law.e(0.0)?, energy_change: 0.0 });
    }
    normal_kick(v, vs, scale(d, 1.0 / d_abs), law)
}

/// Round six double-double components to doubles, choosing for each between the
/// nearest double and its neighbour on the other side of the exact value so that
/// the rounding error of the summed squares is smallest. Each component stays
/// within one ulp of its exact value.
fn energy_aware_round(exact: &[Dd; 6]) -> [f64; 6] {
    let mut choice = [[0.0; 2]; 6];
    let mut err = [[0.0; 2]; 6];
    for (i, x) in exact.iter().enumerate() {
        let near = x.hi;
        let other = if x.lo > 0.0 {
            near.next_up()
        } else if x.lo < 0.0 {
            near.next_down()
        } else {
            near
        };
        choice[i] = [near, other];
        for (j, &r) in [near, other].iter().enumerate() {
            // r^2 - x^2 = (r - x)(r + x), with r - x exact to double-double accuracy
            let delta = (r - x.hi) - x.lo;
            err[i][j] = delta * (r + x.hi);
        }
    }
    let mut best = (f64::INFINITY, 0usize);
    for mask in 0..64usize {
        let total: f64 = (0..6).map(|i| err[i][(mask >> i) & 1]).sum();
        if total.abs() < best.0 {
            best = (total.abs(), mask);
        }
    }
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = choice[i][(best.1 >> i) & 1];
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    fn prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd { hi: p, lo: a.mul_add(b, -p) }
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Dd {
        let (h, l) = two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        Dd::renorm(s, e + self.lo + o.lo)
    }

    #[inline]
    fn add_f64(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        Dd::renorm(s, e + self.lo)
    }

    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let p = Dd::prod(self.hi, o.hi);
        Dd::renorm(p.hi, p.lo + self.hi * o.lo + self.lo * o.hi)
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Dd {
        let p = Dd::prod(self.hi, b);
        Dd::renorm(p.hi, p.lo + self.lo * b)
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Scattering direction associated with the normal `n`: `sigma = u_hat - 2 (u_hat.n) n`.
pub fn sigma_from_normal(u_hat: Vec3, n: Vec3) -> Vec3 {
    let s = dot(u_hat, n);
    [u_hat[0] - 2.0 * s * n[0], u_hat[1] - 2.0 * s * n[1], u_hat[2] - 2.0 * s * n[2]]
}

/// Pre-collisional velocities `('v, 'v*)` that are mapped to `(v, v*)` by a collision along `n`.
pub fn pre_collision<L: ImpactLaw + ?Sized>(v: Vec3, vs: Vec3, n: Vec3, law: &L) -> Result<(Vec3, Vec3)> {
    check_unit(n, "n")?;
    let un = dot(sub(v, vs), n);
    if un == 0.0 {
        return Ok((v, vs));
    }
    let mag = law.eta_inverse(un.abs())?;
    if !(mag >= un.abs() * (1.0 - 1e-12)) || !mag.is_finite() {
        return Err(Error::Invariant(format!("eta inverse {mag} below its argument {}", un.abs())));
    }
    let pre_un = -un.signum() * mag;
    // (1 + e)/2 ('u.n) = ('u.n - u.n)/2 since e |'u.n| = |u.n|
    let k = 0.5 * (pre_un - un);
    let mut pv = v;
    let mut pvs = vs;
    for i in 0..3 {
        pv[i] += k * n[i];
        pvs[i] -= k * n[i];
    }
    Ok((pv, pvs))
}

pub type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Angular part `b0(u_hat . n)` of the collision kernel.
#[derive(Clone)]
pub enum AngularKernel {
    /// `b0(s) = |s| / (4 pi)`: scattering directions are uniform on the sphere.
    HardSphere,
    /// `b0 = 1/(8 pi)`: normals uniform on the sphere, total scattering rate one.
    Isotropic,
    Custom(CustomKernel),
}

#[derive(Clone)]
pub struct CustomKernel {
    b0: KernelFn,
    b0_max: f64,
    rate: f64,
}

impl fmt::Debug for AngularKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngularKernel::HardSphere => write!(f, "HardSphere"),
            AngularKernel::Isotropic => write!(f, "Isotropic"),
            AngularKernel::Custom(c) => write!(f, "Custom(rate={})", c.rate),
        }
    }
}

impl AngularKernel {
    /// User kernel `b0` on `(-1, 1)`, assumed even in its argument.
    pub fn custom(b0: KernelFn) -> Result<Self> {
        let mut b0_max: f64 = 0.0;
        for i in 0..=4000 {
            let s = -1.0 + 2.0 * i as f64 / 4000.0;
            let s = s.clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            let b = b0(s);
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::domain(format!("custom kernel b0({s}) = {b} must be finite and nonnegative")));
            }
            b0_max = b0_max.max(b);
        }
        if b0_max == 0.0 {
            return Err(Error::domain("custom kernel vanishes identically"));
        }
        let f = b0.clone();
        let half = integrate(move |s| f(s), -1.0, 1.0, &QuadratureConfig::default())?.value;
        Ok(AngularKernel::Custom(CustomKernel { b0, b0_max: 1.05 * b0_max, rate: 4.0 * PI * half }))
    }

    pub fn b0(&self, s: f64) -> f64 {
        match self {
            AngularKernel::HardSphere => s.abs() / (4.0 * PI),
            AngularKernel::Isotropic => 1.0 / (8.0 * PI),
            AngularKernel::Custom(c) => (c.b0)(s),
        }
    }

    /// Total scattering measure `int b(u_hat.sigma) dsigma = 2 int b0(u_hat.n) dn`;
    /// the pair collision rate is `|u|` times this.
    pub fn scattering_rate(&self) -> f64 {
        match self {
            AngularKernel::HardSphere | AngularKernel::Isotropic => 1.0,
            AngularKernel::Custom(c) => c.rate,
        }
    }

    /// `int |u_hat.n|^{-1} b0(u_hat.n) dn` over the sphere. Divergent kernels are reported as errors.
    pub fn normalization(&self, cfg: &QuadratureConfig) -> Result<f64> {
        match self {
            AngularKernel::Isotropic => Err(Error::domain("isotropic kernel: int |s|^-1 b0(s) ds diverges at s = 0")),
            _ => {
                let k = self.clone();
                let half = integrate(move |s| k.b0(s) / s, 0.0, 1.0, cfg)?;
                let k = self.clone();
                let neg = integrate(move |s| k.b0(-s) / s, 0.0, 1.0, cfg)?;
                Ok(2.0 * PI * (half.value + neg.value))
            }
        }
    }

    /// Draw a unit normal `n` with density proportional to `b0(u_hat.n)`.
    ///
    /// For the hard-sphere kernel the normal is drawn on the half-range
    /// `u_hat.n >= 0` with density `2s`; `n` and `-n` give the same collision.
    pub fn sample_direction<R: Rng + ?Sized>(&self, u_hat: Vec3, rng: &mut R) -> Vec3 {
        let s = match self {
            AngularKernel::HardSphere => rng.random::<f64>().sqrt(),
            AngularKernel::Isotropic => 2.0 * rng.random::<f64>() - 1.0,
            AngularKernel::Custom(c) => loop {
                let s = 2.0 * rng.random::<f64>() - 1.0;
                if rng.random::<f64>() * c.b0_max < (c.b0)(s) {
                    break s;
                }
            },
        };
        let phi = 2.0 * PI * rng.random::<f64>();
        let (e1, e2) = orthonormal_frame(u_hat);
        let t = (1.0 - s * s).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        let mut n = [0.0; 3];
        for i in 0..3 {
            n[i] = s * u_hat[i] + t * (cp * e1[i] + sp * e2[i]);
        }
        scale(n, 1.0 / norm(n))
    }
}
