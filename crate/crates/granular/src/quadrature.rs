//! Adaptive Gauss-Kronrod integration and Gaussian rules built by Golub-Welsch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Uniform panels used before adaptive bisection starts.
    pub panels: usize,
    /// Absolute tolerance, measured against the L1 mass of the integrand from the initial pass.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Gaussian tails are cut at this many standard deviations.
    pub radial_cutoff: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { panels: 16, abs_tol: 1e-13, rel_tol: 1e-12, radial_cutoff: 12.0, max_subdivisions: 20_000 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.panels < 8 {
            return Err(Error::domain("quadrature.panels must be at least 8"));
        }
        if !(self.abs_tol > 1e-14 && self.rel_tol > 1e-14) {
            return Err(Error::domain("quadrature tolerances must exceed 1e-14"));
        }
        if !(self.radial_cutoff > 0.0) {
            return Err(Error::domain("quadrature.radial_cutoff must be positive"));
        }
        Ok(())
    }

    /// Same settings with half the tolerances and twice the initial panels.
    pub fn refined(&self) -> Self {
        Self { panels: 2 * self.panels, abs_tol: 0.5 * self.abs_tol, rel_tol: 0.5 * self.rel_tol, ..self.clone() }
    }

    /// Upper bound on the standard Gaussian mass beyond the radial cutoff,
    /// `P(|X| > R)` for a 3-D standard normal, via the chi tail `~ R e^{-R^2/2}`.
    pub fn truncation_bound(&self) -> f64 {
        let r = self.radial_cutoff;
        (2.0 / std::f64::consts::PI).sqrt() * (r + 2.0 / r) * (-0.5 * r * r).exp()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point Gauss rule.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration over `[a, b]`, bisecting the panel with the
/// largest error estimate until the summed estimate meets the tolerances.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let n0 = cfg.panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(4 * n0);
    let mut mass = 0.0;
    for i in 0..n0 {
        let pa = a + width * i as f64;
        let pb = if i + 1 == n0 { b } else { a + width * (i + 1) as f64 };
        let (value, error) = gk15(&f, pa, pb);
        mass += value.abs();
        heap.push(Panel { a: pa, b: pb, value, error });
    }
    let mut evaluations = 15 * n0;
    let mut splits = 0;
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return Err(Error::numeric(format!("non-finite integrand on [{a}, {b}]")));
        }
        let tol = (cfg.abs_tol * mass).max(cfg.rel_tol * value.abs());
        if error <= tol {
            return Ok(QuadResult { value, error, evaluations });
        }
        if splits >= cfg.max_subdivisions {
            return Err(Error::numeric(format!(
                "quadrature on [{a}, {b}] did not converge after {splits} subdivisions: value {value:e}, error {error:e}, tolerance {tol:e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further: accept what roundoff allows
            let rest: f64 = heap.iter().map(|p| p.error).sum();
            if rest <= tol {
                return Ok(QuadResult { value, error, evaluations });
            }
            return Err(Error::numeric(format!("quadrature panel at {mid} exhausted floating-point resolution")));
        }
        for (pa, pb) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk15(&f, pa, pb);
            heap.push(Panel { a: pa, b: pb, value: v, error: e });
        }
        evaluations += 30;
        splits += 1;
    }
}

/// A quadrature rule: nodes and weights.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule from three-term recurrence coefficients (Golub-Welsch).
/// `beta[0]` is the total mass of the weight.
pub fn rule_from_recurrence(alpha: &[f64], beta: &[f64]) -> Rule {
    let n = alpha.len();
    assert_eq!(beta.len(), n);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = alpha[i];
        if i + 1 < n {
            let off = beta[i + 1].sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], beta[0] * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

/// Gauss-Hermite rule for the weight `exp(-x^2)` on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    let alpha = vec![0.0; n];
    let beta: Vec<f64> =
        (0..n).map(|k| if k == 0 { std::f64::consts::PI.sqrt() } else { 0.5 * k as f64 }).collect();
    rule_from_recurrence(&alpha, &beta)
}

/// Gauss rule for the weight `rho^k exp(-a rho^2)` on `[0, inf)`.
///
/// Recurrence coefficients come from the discretized Stieltjes procedure on a
/// composite Gauss-Legendre discretization of the (truncated) weight, which is
/// stable where the moment-based Chebyshev algorithm is not.
pub fn gauss_half_gaussian(n: usize, k: u32, a: f64) -> Rule {
    assert!(n >= 1 && a > 0.0);
    let degree = (k as usize + 2 * n + 1) as f64;
    let peak = (degree / (2.0 * a)).sqrt();
    let cutoff = peak + 12.0 / (2.0 * a).sqrt() * 1.5;
    let panels = 24;
    let base = gauss_legendre(40);
    let mut xs = Vec::with_capacity(panels * 40);
    let mut ws = Vec::with_capacity(panels * 40);
    let h = cutoff / panels as f64;
    for p in 0..panels {
        let c = h * (p as f64 + 0.5);
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            let rho = c + 0.5 * h * x;
            xs.push(rho);
            ws.push(0.5 * h * w * rho.powi(k as i32) * (-a * rho * rho).exp());
        }
    }
    let (alpha, beta) = stieltjes(&xs, &ws, n);
    rule_from_recurrence(&alpha, &beta)
}

/// Discretized Stieltjes procedure in orthonormal form.
fn stieltjes(xs: &[f64], ws: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = xs.len();
    let mu0: f64 = ws.iter().sum();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    beta[0] = mu0;
    let mut q_prev = vec![0.0; m];
    let norm0 = mu0.sqrt();
    let mut q: Vec<f64> = vec![1.0 / norm0; m];
    for j in 0..n {
        alpha[j] = (0..m).map(|i| ws[i] * xs[i] * q[i] * q[i]).sum();
        if j + 1 == n {
            break;
        }
        let sb = if j == 0 { 0.0 } else { beta[j].sqrt() };
        let p: Vec<f64> = (0..m).map(|i| (xs[i] - alpha[j]) * q[i] - sb * q_prev[i]).collect();
        let nrm2: f64 = (0..m).map(|i| ws[i] * p[i] * p[i]).sum();
        beta[j + 1] = nrm2;
        let nrm = nrm2.sqrt();
        q_prev = q;
        q = p.iter().map(|v| v / nrm).collect();
    }
    (alpha, beta)
}
