//! Restitution coefficients e(r) as a function of the impact speed r.
//!
//! Three laws are supported: a constant coefficient, the viscoelastic law defined
//! implicitly by `e + a0 r^{1/5} e^{3/5} = 1`, and user supplied closures that
//! declare their small-speed expansion `e(r) = 1 - a0 r^gamma + O(r^gamma_bar)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type RestitutionFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum RestitutionKind {
    Constant { e0: f64 },
    Viscoelastic,
    Custom(RestitutionFn),
}

impl fmt::Debug for RestitutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestitutionKind::Constant { e0 } => write!(f, "Constant({e0})"),
            RestitutionKind::Viscoelastic => write!(f, "Viscoelastic"),
            RestitutionKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A restitution law together with its declared class exponents.
///
/// For `Constant` the expansion data are not meaningful and are stored as zero.
#[derive(Clone, Debug)]
pub struct RestitutionModel {
    pub kind: RestitutionKind,
    pub gamma: f64,
    pub gamma_bar: f64,
    pub a0: f64,
    pub b0_bound: f64,
}

const ROOT_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 100;

impl RestitutionModel {
    pub fn constant(e0: f64) -> Result<Self> {
        if !(e0 > 0.0 && e0 <= 1.0) {
            return Err(Error::domain(format!("constant restitution e0={e0} outside (0,1]")));
        }
        Ok(Self { kind: RestitutionKind::Constant { e0 }, gamma: 0.0, gamma_bar: 0.0, a0: 0.0, b0_bound: 0.0 })
    }

    pub fn elastic() -> Self {
        Self::constant(1.0).expect("e0 = 1 is valid")
    }

    /// Viscoelastic law with gamma = 1/5 and gamma_bar = 2/5.
    ///
    /// The remainder constant is `0.6 a0^2`: with `c = a0 r^{1/5}` the ratio
    /// `|e - 1 + c| / r^{2/5}` equals `a0^2 |e - 1 + c| / c^2`, which increases
    /// towards its supremum 3/5 as `c -> 0`.
    pub fn viscoelastic(a0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::domain(format!("viscoelastic a0={a0} must be positive")));
        }
        Ok(Self { kind: RestitutionKind::Viscoelastic, gamma: 0.2, gamma_bar: 0.4, a0, b0_bound: 0.6 * a0 * a0 })
    }

    pub fn custom(f: RestitutionFn, gamma: f64, gamma_bar: f64, a0: f64, b0_bound: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::domain("custom restitution requires gamma > 0"));
        }
        if !(gamma_bar > 1.5 * gamma) {
            return Err(Error::domain("custom restitution requires gamma_bar > 3 gamma / 2"));
        }
        if !(a0 > 0.0) || !(b0_bound >= 0.0) {
            return Err(Error::domain("custom restitution requires a0 > 0 and b0 >= 0"));
        }
        Ok(Self { kind: RestitutionKind::Custom(f), gamma, gamma_bar, a0, b0_bound })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, RestitutionKind::Constant { .. })
    }

    pub fn is_elastic(&self) -> bool {
        matches!(self.kind, RestitutionKind::Constant { e0 } if e0 == 1.0)
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        check_speed(r)?;
        match &self.kind {
            RestitutionKind::Constant { e0 } => Ok(*e0),
            RestitutionKind::Viscoelastic => {
                let c = self.a0 * r.powf(0.2);
                Ok(power_root(c, 5, 3)?.powi(5))
            }
            RestitutionKind::Custom(f) => {
                let e = f(r);
                if !(e > 0.0 && e <= 1.0) {
                    return Err(Error::Invariant(format!("custom restitution e({r}) = {e} outside (0,1]")));
                }
                Ok(e)
            }
        }
    }

    pub fn eval_rescaled(&self, ell: f64, r: f64) -> Result<f64> {
        check_scale(ell)?;
        self.eval(ell * r)
    }

    /// `1 - e(r)^2` without cancellation when `e` is close to one.
    pub fn one_minus_e_sq(&self, r: f64) -> Result<f64> {
        check_speed(r)?;
        match &self.kind {
            RestitutionKind::Constant { e0 } => Ok((1.0 - e0) * (1.0 + e0)),
            RestitutionKind::Viscoelastic => {
                let c = self.a0 * r.powf(0.2);
                let y = power_root(c, 5, 3)?;
                // 1 - e = c y^3 follows from the defining equation y^5 + c y^3 = 1
                Ok(c * y.powi(3) * (1.0 + y.powi(5)))
            }
            RestitutionKind::Custom(_) => {
                let e = self.eval(r)?;
                Ok((1.0 - e) * (1.0 + e))
            }
        }
    }

    pub fn eta(&self, r: f64) -> Result<f64> {
        Ok(r * self.eval(r)?)
    }

    pub fn eta_inverse(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) || !z.is_finite() {
            return Err(Error::domain(format!("eta_inverse argument {z} must be finite and nonnegative")));
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            RestitutionKind::Constant { e0 } => Ok(z / e0),
            RestitutionKind::Viscoelastic => {
                // with e = w^5 and r = z/e the defining equation becomes w^5 + a0 z^{1/5} w^2 = 1
                let w = power_root(self.a0 * z.powf(0.2), 5, 2)?;
                Ok(z / w.powi(5))
            }
            RestitutionKind::Custom(_) => self.eta_inverse_bisect(z),
        }
    }

    fn eta_inverse_bisect(&self, z: f64) -> Result<f64> {
        let non_monotone = |a: f64, b: f64| Error::Invariant(format!("eta is not strictly increasing on [{a}, {b}]"));
        let mut lo = 0.0;
        let mut eta_lo = 0.0;
        let mut hi = z.max(1.0);
        let mut eta_hi = self.eta(hi)?;
        let mut expansions = 0;
        while eta_hi < z {
            if eta_hi <= eta_lo {
                return Err(non_monotone(lo, hi));
            }
            lo = hi;
            eta_lo = eta_hi;
            hi *= 2.0;
            eta_hi = self.eta(hi)?;
            expansions += 1;
            if expansions > 2000 {
                return Err(Error::numeric(format!("eta_inverse: no bracket found for z={z}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let eta_mid = self.eta(mid)?;
            if !(eta_lo < eta_mid && eta_mid < eta_hi) && eta_mid != z {
                return Err(non_monotone(lo, hi));
            }
            if eta_mid < z {
                lo = mid;
                eta_lo = eta_mid;
            } else {
                hi = mid;
                eta_hi = eta_mid;
            }
            if (hi - lo) <= 1e-13 * hi {
                break;
            }
        }
        let mut r = 0.5 * (lo + hi);
        // Newton polish, kept inside the bracket
        for _ in 0..3 {
            let slope = self.jacobian(r)?;
            if !(slope > 0.0) {
                break;
            }
            let next = r - (self.eta(r)? - z) / slope;
            if next > lo && next < hi {
                r = next;
            }
        }
        Ok(r)
    }

    /// Derivative of eta(r) = r e(r).
    pub fn jacobian(&self, r: f64) -> Result<f64> {
        check_speed(r)?;
        match &self.kind {
            RestitutionKind::Constant { e0 } => Ok(*e0),
            RestitutionKind::Viscoelastic => {
                let c = self.a0 * r.powf(0.2);
                let y = power_root(c, 5, 3)?;
                let e = y.powi(5);
                let q = c / (y * y);
                Ok(e * (1.0 + 0.4 * q) / (1.0 + 0.6 * q))
            }
            RestitutionKind::Custom(_) => {
                let h = 1e-6 * r.max(1e-3);
                if r >= h {
                    Ok((self.eta(r + h)? - self.eta(r - h)?) / (2.0 * h))
                } else {
                    Ok((self.eta(r + h)? - self.eta(r)?) / h)
                }
            }
        }
    }
}

fn check_speed(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("impact speed {r} must be finite and nonnegative")))
    }
}

fn check_scale(ell: f64) -> Result<()> {
    if ell > 0.0 && ell.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("scale {ell} must be positive")))
    }
}

/// Root in (0,1] of `y^p + c y^q = 1` for `p > q >= 1`, `c >= 0`.
///
/// The left side is convex and increasing in y, so Newton started from the upper
/// bound `min(1, c^{-1/q})` decreases monotonically to the root. A bracket is kept
/// and bisection takes over if roundoff ever pushes an iterate outside it.
pub(crate) fn power_root(c: f64, p: i32, q: i32) -> Result<f64> {
    if c == 0.0 {
        return Ok(1.0);
    }
    let g = |y: f64| y.powi(p) + c * y.powi(q) - 1.0;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64.min(c.powf(-1.0 / q as f64));
    let mut y = hi;
    for _ in 0..MAX_NEWTON {
        let gy = g(y);
        if gy > 0.0 {
            hi = hi.min(y);
        } else {
            lo = lo.max(y);
        }
        if gy.abs() < 0.25 * ROOT_TOL {
            return Ok(y);
        }
        let dg = p as f64 * y.powi(p - 1) + q as f64 * c * y.powi(q - 1);
        let mut next = y - gy / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == y {
            break;
        }
        y = next;
    }
    let residual = g(y).abs();
    if residual < ROOT_TOL {
        Ok(y)
    } else {
        Err(Error::numeric(format!("restitution root for c={c}: residual {residual:e}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub e_in_unit_interval: bool,
    pub e_nonincreasing: bool,
    pub eta_increasing: bool,
    pub expansion_checked: bool,
    pub expansion_bound_holds: bool,
    /// sup over the grid of |e - 1 + a0 r^gamma| / r^gamma_bar
    pub expansion_constant: f64,
    pub jacobian_lower_bound_holds: bool,
    /// min over the grid of J / e; the axiom asks for at least 2/5
    pub jacobian_ratio_min: f64,
    pub jacobian_gap_holds: bool,
    /// max over the grid of |J - e| / (1 - e)
    pub jacobian_gap_ratio_max: f64,
    pub grid_points: usize,
    pub notes: Vec<String>,
}

impl ClassReport {
    pub fn all_passed(&self) -> bool {
        self.e_in_unit_interval
            && self.e_nonincreasing
            && self.eta_increasing
            && (!self.expansion_checked || self.expansion_bound_holds)
            && self.jacobian_lower_bound_holds
            && self.jacobian_gap_holds
    }
}

/// Check the class axioms on a strictly increasing positive grid.
pub fn verify_class(model: &RestitutionModel, r_grid: &[f64]) -> ClassReport {
    let mut report = ClassReport {
        e_in_unit_interval: true,
        e_nonincreasing: true,
        eta_increasing: true,
        expansion_checked: !model.is_constant(),
        expansion_bound_holds: true,
        expansion_constant: 0.0,
        jacobian_lower_bound_holds: true,
        jacobian_ratio_min: f64::INFINITY,
        jacobian_gap_holds: true,
        jacobian_gap_ratio_max: 0.0,
        grid_points: r_grid.len(),
        notes: Vec::new(),
    };
    if model.is_constant() {
        report.notes.push("constant model, gamma-expansion skipped".into());
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) || r_grid.first().is_some_and(|&r| !(r > 0.0)) {
        report.notes.push("grid is not strictly increasing and positive".into());
    }
    let mut prev: Option<(f64, f64)> = None;
    for &r in r_grid {
        let (e, one_minus_e, jac) = match (model.eval(r), model.one_minus_e_sq(r), model.jacobian(r)) {
            (Ok(e), Ok(d), Ok(j)) => (e, d / (1.0 + e), j),
            (Err(err), _, _) | (_, Err(err), _) | (_, _, Err(err)) => {
                report.e_in_unit_interval = false;
                report.notes.push(format!("evaluation failed at r={r}: {err}"));
                continue;
            }
        };
        let eta = r * e;
        if let Some((e_prev, eta_prev)) = prev {
            if e > e_prev + 2.0 * f64::EPSILON {
                if report.e_nonincreasing {
                    report.notes.push(format!("e increases at r={r}"));
                }
                report.e_nonincreasing = false;
            }
            if !(eta > eta_prev) {
                if report.eta_increasing {
                    report.notes.push(format!("eta not strictly increasing at r={r}"));
                }
                report.eta_increasing = false;
            }
        }
        prev = Some((e, eta));
        if report.expansion_checked {
            let dev = (model.a0 * r.powf(model.gamma) - one_minus_e).abs();
            let ratio = dev / r.powf(model.gamma_bar);
            report.expansion_constant = report.expansion_constant.max(ratio);
            if dev > model.b0_bound * r.powf(model.gamma_bar) * (1.0 + 1e-9) + 1e-15 {
                report.expansion_bound_holds = false;
            }
        }
        report.jacobian_ratio_min = report.jacobian_ratio_min.min(jac / e);
        if jac < 0.4 * e * (1.0 - 1e-12) {
            report.jacobian_lower_bound_holds = false;
        }
        let gap = (jac - e).abs();
        if one_minus_e > 0.0 {
            report.jacobian_gap_ratio_max = report.jacobian_gap_ratio_max.max(gap / one_minus_e);
        }
        if gap > one_minus_e * (1.0 + 1e-9) + 1e-14 {
            report.jacobian_gap_holds = false;
        }
    }
    if !report.expansion_bound_holds {
        report.notes.push(format!(
            "declared b0={} is below the measured constant {}",
            model.b0_bound, report.expansion_constant
        ));
    }
    report
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
