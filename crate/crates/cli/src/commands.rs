//! Subcommand implementations. Each writes its artifacts into the output
//! directory and returns their file names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use granular::diagnostics::{haff_fit, moment_balance_residuals};
use granular::dissipation::{gaussian_sign_integral, lambda_eps, maxwellian_dissipation, q_mm_weighted_norm, KineticConstants};
use granular::dsmc::{run_free_cooling, run_rescaled, DsmcConfig, Mode};
use granular::hydro::{random_solenoidal, taylor_green, HydroConfig, SpectralField, Solver, XiSource};
use granular::restitution::{log_grid, verify_class, RestitutionKind};
use granular::scaling::ScalingSchedule;
use granular::Error;

use crate::config::{RunConfig, Subcommand, XiSetting};

/// Why a run failed, mapped onto the process exit status.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "validation failure: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o: {e}"))
    }
}

type Outcome = Result<Vec<String>, Failure>;

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Out<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }
}

pub fn dispatch(cfg: &RunConfig, dir: &Path) -> Outcome {
    fs::create_dir_all(dir)?;
    let mut out = Out { dir, files: Vec::new() };
    match cfg.subcommand {
        Subcommand::ValidateRestitution => validate_restitution(cfg, &mut out)?,
        Subcommand::Constants => constants(cfg, &mut out)?,
        Subcommand::ScalingTable => scaling_table(cfg, &mut out)?,
        Subcommand::Haff => haff(cfg, &mut out)?,
        Subcommand::Rescaled => rescaled(cfg, &mut out)?,
        Subcommand::Hydro => hydro(cfg, &mut out)?,
        Subcommand::Qscaling => qscaling(cfg, &mut out)?,
    }
    Ok(out.files)
}

fn model_name(cfg: &RunConfig) -> String {
    match cfg.restitution.kind {
        RestitutionKind::Constant { e0: 1.0 } => "elastic".into(),
        RestitutionKind::Constant { e0 } => format!("constant({e0})"),
        RestitutionKind::Viscoelastic => format!("viscoelastic(a0={})", cfg.restitution.a0),
        RestitutionKind::Custom(_) => "custom".into(),
    }
}

fn kinetic_constants(cfg: &RunConfig) -> Result<KineticConstants, Failure> {
    Ok(KineticConstants::new(&cfg.restitution, cfg.scaling.theta_star, &cfg.quadrature)?)
}

fn schedule(cfg: &RunConfig) -> Result<ScalingSchedule, Failure> {
    let k = kinetic_constants(cfg)?;
    let s = &cfg.scaling;
    Ok(ScalingSchedule::new(s.epsilon, k.gamma, k.a1, s.b1, s.theta_star)?)
}

fn validate_restitution(cfg: &RunConfig, out: &mut Out) -> Result<(), Failure> {
    let (lo, hi, n) = cfg.validate_grid;
    let grid = log_grid(lo, hi, n);
    let m = &cfg.restitution;
    let mut csv = String::from("r,e,one_minus_e_sq,eta,jacobian\n");
    for &r in &grid {
        let e = m.eval(r)?;
        writeln!(csv, "{r:e},{e:e},{:e},{:e},{:e}", m.one_minus_e_sq(r)?, r * e, m.jacobian(r)?).expect("string write");
    }
    out.text("restitution.csv", &csv)?;
    let report = verify_class(m, &grid);
    let passed = report.all_passed();
    out.json(
        "report.json",
        &json!({
            "model": model_name(cfg),
            "gamma": m.gamma,
            "gamma_bar": m.gamma_bar,
            "a0": m.a0,
            "b0_bound": m.b0_bound,
            "all_passed": passed,
            "report": report,
        }),
    )?;
    if !passed {
        return Err(Failure::Validation(format!("class check failed: {}", report.notes.join("; "))));
    }
    Ok(())
}

fn constants(cfg: &RunConfig, out: &mut Out) -> Result<(), Failure> {
    let k = kinetic_constants(cfg)?;
    let q = &cfg.quadrature;
    let alphas = [-2.0, -1.5, -1.0, -0.5, 0.0, 1.0, 2.0];
    let mut sign = BTreeMap::new();
    for a in alphas {
        sign.insert(format!("{a}"), gaussian_sign_integral(a, 3, q)?);
    }
    out.json(
        "constants.json",
        &json!({
            "model": model_name(cfg),
            "gamma": k.gamma,
            "gamma_bar": k.gamma_bar,
            "a0": k.a0,
            "theta_star": k.theta_star,
            "b1": cfg.scaling.b1,
            "a1": k.a1,
            "a2": k.a2,
            "ratio": k.ratio(),
            "gamma_plus_one": k.gamma + 1.0,
            "K_gamma": k.k_gamma,
            "K_gamma_plus_2": k.k_gamma_plus_2,
            "k_recursion_residual": k.k_gamma_plus_2 / (k.k_gamma * (k.gamma + 6.0)) - 1.0,
            "sign_integral": sign,
        }),
    )
}

fn scaling_table(cfg: &RunConfig, out: &mut Out) -> Result<(), Failure> {
    let s = schedule(cfg)?;
    let mut times = vec![0.0];
    times.extend(log_grid(cfg.scaling.t_max * 1e-4, cfg.scaling.t_max, cfg.scaling.points - 1));
    // rows are spaced in rescaled time tau; t is the matching physical time
    let mut csv = String::from("t,V,tau,xi,ell,z,lambda_eps,lambda_z_pow\n");
    for &tau in &times {
        let t = s.s_inv(tau);
        let lam = lambda_eps(&cfg.restitution, &s, tau, &cfg.quadrature)?;
        let z = s.z(tau);
        writeln!(csv, "{t:e},{:e},{tau:e},{:e},{:e},{z:e},{lam:e},{:e}", s.v(t), s.xi(tau), s.ell(tau), lam * z.powf(-s.gamma)).expect("string write");
    }
    out.text("scaling.csv", &csv)?;
    out.json("schedule.json", &s)
}

fn dsmc_base(cfg: &RunConfig, mode: Mode) -> DsmcConfig {
    let d = &cfg.dsmc;
    let mut c = DsmcConfig::new(mode, cfg.restitution.clone());
    c.n_particles = d.n_particles;
    c.dt = d.dt;
    c.spatial = d.spatial;
    c.kernel = d.kernel.clone();
    c.majorant_safety = d.majorant_safety;
    c.adaptive_dt = d.adaptive_dt;
    c.stretch = d.stretch;
    c.seed = cfg.seed;
    c.theta_star = cfg.scaling.theta_star;
    c
}

fn haff(cfg: &RunConfig, out: &mut Out) -> Result<(), Failure> {
    let mut c = dsmc_base(cfg, Mode::PhysicalCooling);
    c.t_end = cfg.haff.t_end;
    c.target_drop = Some(cfg.haff.target_drop);
    c.outputs_per_decade = cfg.haff.outputs_per_decade;
    let series = run_free_cooling(&c)?;
    out.text("series.csv", &series.to_csv())?;
    let fit = haff_fit(&series.times, &series.temperatures, cfg.haff.tail_fraction)?;
    let expected = if cfg.restitution.is_constant() { -2.0 } else { -2.0 / (cfg.restitution.gamma + 1.0) };
    out.json(
        "haff.json",
        &json!({
            "model": model_name(cfg),
            "seed": cfg.seed,
            "build": crate::BUILD,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "ci_low": fit.ci_low,
            "ci_high": fit.ci_high,
            "n_points": fit.n_points,
            "tail_fraction": fit.tail_fraction,
            "expected_slope": expected,
            "final_time": series.times.last(),
            "temperature_drop": series.temperatures[0] / series.temperatures.last().expect("recorded"),
            "steps": series.steps,
            "collisions": series.stats.accepted,
            "majorant_retries": series.stats.retries,
        }),
    )
}

fn rescaled(cfg: &RunConfig, out: &mut Out) -> Result<(), Failure> {
    let sched = schedule(cfg)?;
    let mut c = dsmc_base(cfg, Mode::Rescaled);
    c.schedule = Some(sched);
    c.t_end = cfg.rescaled.t_end;
    c.output_interval = cfg.rescaled.output_interval;
    let series = run_rescaled(&c)?;
    out.text("series.csv", &series.to_csv())?;
    let eps2 = sched.epsilon * sched.epsilon;
    let model = &cfg.restitution;
    let q = &cfg.quadrature;
    let diss = |temp: f64, t: f64| -> granular::Result<f64> { Ok(maxwellian_dissipation(model, sched.ell(t), temp / 3.0, q)? / eps2) };
    let stretch = if cfg.dsmc.stretch { Some(&sched) } else { None };
    let bal = moment_balance_residuals(&series, stretch, Some(&diss))?;
    let mut csv = String::from("t,momentum,energy_ledger,energy_model\n");
    for i in 0..bal.times.len() {
        writeln!(csv, "{:e},{:e},{:e},{:e}", bal.times[i], bal.momentum[i], bal.energy_ledger[i], bal.energy_model[i]).expect("string write");
    }
    out.text("balance.csv", &csv)?;
    let fold = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tmin = series.temperatures.iter().copied().fold(f64::INFINITY, f64::min);
    let tmax = series.temperatures.iter().copied().fold(0.0, f64::max);
    out.json(
        "summary.json",
        &json!({
            "model": model_name(cfg),
            "epsilon": sched.epsilon,
            "theta_star": sched.theta_star,
            "temperature_min": tmin,
            "temperature_max": tmax,
            "temperature_final": series.temperatures.last(),
            "max_energy_ledger_residual": fold(&bal.energy_ledger),
            "max_energy_model_residual": fold(&bal.energy_model),
            "steps": series.steps,
            "collisions": series.stats.accepted,
            "majorant_retries": series.stats.retries,
        }),
    )
}

fn hydro(cfg: &RunConfig, out: &mut Out) -> Result<(), Failure> {
    let h = &cfg.hydro;
    let m = &cfg.restitution;
    if m.is_constant() {
        return Err(Failure::Validation("hydro needs a speed-dependent restitution law for gamma".into()));
    }
    let xi = match h.xi {
        XiSetting::Schedule => XiSource::Schedule(schedule(cfg)?),
        XiSetting::Constant(x) => XiSource::Constant(x),
    };
    let mut hc = HydroConfig::new(h.n, h.dim, xi);
    hc.nu0 = h.nu0;
    hc.nu1 = h.nu1;
    hc.theta_star = cfg.scaling.theta_star;
    hc.gamma = m.gamma;
    hc.dt = h.dt;
    hc.t_end = h.t_end;
    hc.dealias = h.dealias;
    hc.normalization = h.normalization;
    hc.output_every = h.output_every;
    let solver = Solver::new(hc)?;
    let init = match h.initial.as_str() {
        "random_solenoidal" => random_solenoidal(&solver.grid, cfg.seed, h.slope, h.kmax, h.u_rms, h.theta_rms),
        "file" => {
            let bytes = fs::read(out.dir.join(&h.file)).map_err(|e| Failure::Validation(format!("hydro.file: {e}")))?;
            SpectralField::read_snapshot(&solver.grid, bytes.as_slice())?
        }
        _ => taylor_green(&solver.grid, h.amplitude),
    };
    let run = solver.run(init)?;
    out.text("diagnostics.csv", &run.to_csv())?;
    if h.snapshot {
        let mut buf = Vec::new();
        run.field.write_snapshot(&solver.grid, &mut buf)?;
        fs::write(out.dir.join("snapshot.bin"), &buf)?;
        out.files.push("snapshot.bin".into());
    }
    let last = run.diagnostics.last().expect("recorded");
    out.json(
        "summary.json",
        &json!({
            "steps": run.steps,
            "dt": run.dt,
            "final_time": last.time,
            "kinetic_energy": last.kinetic_energy,
            "enstrophy": last.enstrophy,
            "theta_mean": last.theta_mean,
            "max_divergence": run.diagnostics.iter().map(|d| d.max_divergence).fold(0.0, f64::max),
            "max_energy_residual": run.max_energy_residual,
        }),
    )
}

fn qscaling(cfg: &RunConfig, out: &mut Out) -> Result<(), Failure> {
    let mut est = Vec::new();
    let mut csv = String::from("ell,value,std_error,samples,rejected_fraction\n");
    for &ell in &cfg.q_ells {
        let e = q_mm_weighted_norm(&cfg.restitution, &cfg.q_kernel, ell, cfg.scaling.theta_star, cfg.q_samples, cfg.seed)?;
        writeln!(csv, "{:e},{:e},{:e},{},{:e}", e.ell, e.value, e.std_error, e.samples, e.rejected_fraction).expect("string write");
        est.push(e);
    }
    out.text("qscaling.csv", &csv)?;
    let pts: Vec<(f64, f64)> = est.iter().map(|e| (e.ell.ln(), e.value.ln())).collect();
    let slope = if pts.len() >= 2 { log_slope(&pts) } else { f64::NAN };
    out.json("qscaling.json", &json!({"model": model_name(cfg), "slope": slope, "expected_slope": cfg.restitution.gamma, "estimates": est}))
}

/// Least-squares slope of `y` against `x`.
pub fn log_slope(p: &[(f64, f64)]) -> f64 {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    sxy / sxx
}
