//! Flat `key = value` configuration with `[section]` prefixes.
//!
//! Every key has a default. Unknown keys and bad values are collected and
//! reported together.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use granular::collision::AngularKernel;
use granular::dsmc::Spatial;
use granular::hydro::Normalization;
use granular::quadrature::QuadratureConfig;
use granular::restitution::RestitutionModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    ValidateRestitution,
    Constants,
    ScalingTable,
    Haff,
    Rescaled,
    Hydro,
    Qscaling,
}

pub const SUBCOMMANDS: [(&str, Subcommand); 7] = [
    ("validate-restitution", Subcommand::ValidateRestitution),
    ("constants", Subcommand::Constants),
    ("scaling-table", Subcommand::ScalingTable),
    ("haff", Subcommand::Haff),
    ("rescaled", Subcommand::Rescaled),
    ("hydro", Subcommand::Hydro),
    ("qscaling", Subcommand::Qscaling),
];

impl Subcommand {
    pub fn name(self) -> &'static str {
        SUBCOMMANDS.iter().find(|(_, s)| *s == self).map(|(n, _)| *n).expect("listed")
    }
}

impl FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SUBCOMMANDS.iter().find(|(n, _)| *n == s).map(|(_, c)| *c).ok_or_else(|| format!("unknown subcommand '{s}'"))
    }
}

/// All problems found in one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for m in &self.messages {
            write!(f, "\n  {m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Raw entries with their source location for messages.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty() && k.split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'))
}

impl RawConfig {
    /// Parses file text. Later duplicates are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut errs = Vec::new();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(s) = line.strip_prefix('[') {
                match s.strip_suffix(']') {
                    Some(name) if valid_key(name.trim()) => section = format!("{}.", name.trim()),
                    _ => errs.push(format!("line {n}: malformed section header")),
                }
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errs.push(format!("line {n}: expected 'key = value'"));
                continue;
            };
            let key = format!("{section}{}", k.trim());
            if let Err(e) = raw.insert(&key, v.trim(), format!("line {n}")) {
                errs.push(e);
            }
        }
        if errs.is_empty() {
            Ok(raw)
        } else {
            Err(ConfigError { messages: errs })
        }
    }

    fn insert(&mut self, key: &str, value: &str, origin: String) -> Result<(), String> {
        if !valid_key(key) {
            return Err(format!("{origin}: malformed key '{key}'"));
        }
        if let Some((_, prev)) = self.entries.get(key) {
            return Err(format!("{origin}: duplicate key '{key}' (first set at {prev})"));
        }
        self.entries.insert(key.to_string(), (value.to_string(), origin));
        Ok(())
    }

    /// Command-line `key=value` overrides replace file values.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let err = |m: String| ConfigError { messages: vec![m] };
        let (k, v) = assignment.split_once('=').ok_or_else(|| err(format!("--set '{assignment}': expected key=value")))?;
        self.entries.remove(k.trim());
        self.insert(k.trim(), v.trim(), "--set".into()).map_err(err)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut errs = Vec::new();
        for (k, v) in map {
            if let Err(e) = raw.insert(k, v, "manifest".into()) {
                errs.push(e);
            }
        }
        if errs.is_empty() {
            Ok(raw)
        } else {
            Err(ConfigError { messages: errs })
        }
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
    errors: Vec<String>,
}

trait Value: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn show(&self) -> String;
}

impl Value for f64 {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("'{s}' is not a number"))
    }
    fn show(&self) -> String {
        format!("{self:?}")
    }
}

impl Value for usize {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
    }
    fn show(&self) -> String {
        self.to_string()
    }
}

impl Value for u64 {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
    }
    fn show(&self) -> String {
        self.to_string()
    }
}

impl Value for bool {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("'{s}' is not true/false")),
        }
    }
    fn show(&self) -> String {
        self.to_string()
    }
}

impl Value for String {
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(s.to_string())
    }
    fn show(&self) -> String {
        self.clone()
    }
}

impl Value for Vec<f64> {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.split(',').map(|x| f64::parse_value(x.trim())).collect()
    }
    fn show(&self) -> String {
        self.iter().map(|x| x.show()).collect::<Vec<_>>().join(",")
    }
}

impl<'a> Reader<'a> {
    fn new(raw: &'a RawConfig) -> Self {
        Self { raw, used: BTreeSet::new(), resolved: BTreeMap::new(), errors: Vec::new() }
    }

    fn get<T: Value + Clone>(&mut self, key: &str, default: T) -> T {
        self.opt(key).unwrap_or_else(|| {
            self.resolved.insert(key.into(), default.show());
            default
        })
    }

    fn opt<T: Value + Clone>(&mut self, key: &str) -> Option<T> {
        self.used.insert(key.into());
        let (s, origin) = self.raw.entries.get(key)?;
        match T::parse_value(s) {
            Ok(v) => {
                self.resolved.insert(key.into(), v.show());
                Some(v)
            }
            Err(e) => {
                self.errors.push(format!("{key} ({origin}): {e}"));
                None
            }
        }
    }

    fn require(&mut self, ok: bool, key: &str, msg: impl fmt::Display) {
        if !ok {
            self.errors.push(format!("{key}: {msg}"));
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.get(key, default);
        self.require(v > 0.0, key, format!("must be positive (got {v})"));
        v
    }

    fn choice(&mut self, key: &str, default: &str, options: &[&str]) -> String {
        let v: String = self.get(key, default.to_string());
        self.require(options.contains(&v.as_str()), key, format!("'{v}' is not one of {}", options.join(", ")));
        v
    }
}

#[derive(Clone, Debug)]
pub struct DsmcSection {
    pub n_particles: usize,
    pub dt: f64,
    pub kernel: AngularKernel,
    pub majorant_safety: f64,
    pub spatial: Spatial,
    pub adaptive_dt: bool,
    pub stretch: bool,
}

#[derive(Clone, Debug)]
pub struct HaffSection {
    pub target_drop: f64,
    pub t_end: f64,
    pub outputs_per_decade: usize,
    pub tail_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct RescaledSection {
    pub t_end: f64,
    pub output_interval: f64,
}

#[derive(Clone, Debug)]
pub enum XiSetting {
    Schedule,
    Constant(f64),
}

#[derive(Clone, Debug)]
pub struct HydroSection {
    pub n: usize,
    pub dim: usize,
    pub nu0: f64,
    pub nu1: f64,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub normalization: Normalization,
    pub xi: XiSetting,
    pub initial: String,
    pub file: String,
    pub amplitude: f64,
    pub slope: f64,
    pub kmax: f64,
    pub u_rms: f64,
    pub theta_rms: f64,
    pub output_every: usize,
    pub snapshot: bool,
}

#[derive(Clone, Debug)]
pub struct ScalingSection {
    pub epsilon: f64,
    pub b1: f64,
    pub theta_star: f64,
    pub t_max: f64,
    pub points: usize,
}

/// Fully resolved configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub seed: u64,
    pub threads: usize,
    pub restitution: RestitutionModel,
    pub quadrature: QuadratureConfig,
    pub scaling: ScalingSection,
    pub dsmc: DsmcSection,
    pub haff: HaffSection,
    pub rescaled: RescaledSection,
    pub hydro: HydroSection,
    pub q_ells: Vec<f64>,
    pub q_samples: u64,
    pub q_kernel: AngularKernel,
    pub validate_grid: (f64, f64, usize),
    /// Every key with its effective value; written to the manifest.
    pub resolved: BTreeMap<String, String>,
}

fn kernel(name: &str) -> AngularKernel {
    match name {
        "isotropic" => AngularKernel::Isotropic,
        _ => AngularKernel::HardSphere,
    }
}

/// Applies defaults and validates every key.
pub fn resolve(subcommand: Subcommand, raw: &RawConfig) -> Result<RunConfig, ConfigError> {
    let mut r = Reader::new(raw);
    let seed = r.get("seed", 1u64);
    let threads = r.get("runtime.threads", 0usize);

    let kind = r.choice("restitution.kind", "viscoelastic", &["viscoelastic", "constant", "elastic"]);
    let a0 = r.positive("restitution.a0", 1.0);
    let e0: Option<f64> = r.opt("restitution.e0");
    let restitution = match kind.as_str() {
        "constant" => match e0 {
            None => {
                r.errors.push("restitution.e0: required when restitution.kind = constant".into());
                None
            }
            Some(e) => RestitutionModel::constant(e).map_err(|err| r.errors.push(format!("restitution.e0: {err}"))).ok(),
        },
        "elastic" => Some(RestitutionModel::elastic()),
        _ => RestitutionModel::viscoelastic(a0).ok(),
    };

    let d = QuadratureConfig::default();
    let quadrature = QuadratureConfig {
        panels: r.get("quadrature.panels", d.panels),
        abs_tol: r.get("quadrature.abs_tol", d.abs_tol),
        rel_tol: r.get("quadrature.rel_tol", d.rel_tol),
        radial_cutoff: r.get("quadrature.radial_cutoff", d.radial_cutoff),
        max_subdivisions: r.get("quadrature.max_subdivisions", d.max_subdivisions),
    };
    if let Err(e) = quadrature.validate() {
        r.errors.push(format!("quadrature: {e}"));
    }

    let epsilon = r.get("scaling.epsilon", 0.1);
    r.require(epsilon > 0.0 && epsilon <= 1.0, "scaling.epsilon", format!("must lie in (0,1] (got {epsilon})"));
    let scaling = ScalingSection {
        epsilon,
        b1: r.positive("scaling.b1", 1.0),
        theta_star: r.positive("scaling.theta_star", 1.0),
        t_max: r.positive("scaling.t_max", 100.0),
        points: r.get("scaling.points", 41usize),
    };
    r.require(scaling.points >= 2, "scaling.points", "must be at least 2");

    let n_particles = r.get("dsmc.n_particles", 100_000usize);
    r.require(n_particles >= 2, "dsmc.n_particles", format!("must be at least 2 (got {n_particles})"));
    let kname = r.choice("dsmc.kernel", "hard_sphere", &["hard_sphere", "isotropic"]);
    let sname = r.choice("dsmc.spatial", "homogeneous", &["homogeneous", "torus"]);
    let cells = r.get("dsmc.cells_per_dim", 8usize);
    let dims = r.get("dsmc.dims", 3usize);
    r.require(cells >= 1, "dsmc.cells_per_dim", "must be at least 1");
    r.require((1..=3).contains(&dims), "dsmc.dims", "must be 1, 2 or 3");
    let safety = r.get("dsmc.majorant_safety", 1.5);
    r.require(safety >= 1.2, "dsmc.majorant_safety", format!("must be at least 1.2 (got {safety})"));
    let dsmc = DsmcSection {
        n_particles,
        dt: r.positive("dsmc.dt", 0.01),
        kernel: kernel(&kname),
        majorant_safety: safety,
        spatial: if sname == "torus" { Spatial::Torus { cells_per_dim: cells, dims } } else { Spatial::Homogeneous },
        adaptive_dt: r.get("dsmc.adaptive_dt", true),
        stretch: r.get("dsmc.stretch", true),
    };

    let target_drop = r.get("haff.target_drop", 1000.0);
    r.require(target_drop > 1.0, "haff.target_drop", format!("must exceed 1 (got {target_drop})"));
    let tail = r.get("haff.tail_fraction", 0.2);
    r.require(tail > 0.0 && tail <= 1.0, "haff.tail_fraction", format!("must lie in (0,1] (got {tail})"));
    let haff = HaffSection {
        target_drop,
        t_end: r.positive("haff.t_end", f64::INFINITY),
        outputs_per_decade: r.get("haff.outputs_per_decade", 50usize),
        tail_fraction: tail,
    };
    r.require(haff.outputs_per_decade >= 1, "haff.outputs_per_decade", "must be at least 1");

    let rescaled = RescaledSection { t_end: r.positive("rescaled.t_end", 20.0), output_interval: r.positive("rescaled.output_interval", 0.1) };
    r.require(rescaled.t_end.is_finite(), "rescaled.t_end", "must be finite");

    let n = r.get("hydro.n", 64usize);
    r.require(n >= 4 && n.is_power_of_two(), "hydro.n", format!("must be a power of two >= 4 (got {n})"));
    let dim = r.get("hydro.dim", 2usize);
    r.require((2..=3).contains(&dim), "hydro.dim", format!("must be 2 or 3 (got {dim})"));
    let norm = r.choice("hydro.normalization", "kinetic", &["kinetic", "conventional"]);
    let xi_s: String = r.get("hydro.xi", "schedule".to_string());
    let xi = if xi_s == "schedule" {
        XiSetting::Schedule
    } else {
        match xi_s.parse::<f64>() {
            Ok(x) if x.is_finite() => XiSetting::Constant(x),
            _ => {
                r.errors.push(format!("hydro.xi: '{xi_s}' is neither 'schedule' nor a number"));
                XiSetting::Constant(0.0)
            }
        }
    };
    let initial = r.choice("hydro.initial", "taylor_green", &["taylor_green", "random_solenoidal", "file"]);
    let file: String = r.get("hydro.file", String::new());
    r.require(initial != "file" || !file.is_empty(), "hydro.file", "required when hydro.initial = file");
    let hydro = HydroSection {
        n,
        dim,
        nu0: r.positive("hydro.nu0", 1.0),
        nu1: r.positive("hydro.nu1", 1.0),
        dt: r.positive("hydro.dt", 1e-3),
        t_end: r.positive("hydro.t_end", 1.0),
        dealias: r.get("hydro.dealias", true),
        normalization: if norm == "conventional" { Normalization::Conventional } else { Normalization::Kinetic },
        xi,
        initial,
        file,
        amplitude: r.get("hydro.amplitude", 1.0),
        slope: r.get("hydro.slope", -3.0),
        kmax: r.positive("hydro.kmax", 8.0),
        u_rms: r.get("hydro.u_rms", 1.0),
        theta_rms: r.get("hydro.theta_rms", 0.1),
        output_every: r.get("hydro.output_every", 10usize),
        snapshot: r.get("hydro.snapshot", false),
    };
    r.require(hydro.output_every >= 1, "hydro.output_every", "must be at least 1");

    let q_ells: Vec<f64> = r.get("qscaling.ells", vec![1e-3, 1e-2, 1e-1]);
    r.require(q_ells.iter().all(|&l| l > 0.0 && l <= 1.0), "qscaling.ells", "entries must lie in (0,1]");
    let q_samples = r.get("qscaling.samples", 1_000_000u64);
    r.require(q_samples >= 100_000, "qscaling.samples", format!("must be at least 100000 (got {q_samples})"));
    let qk = r.choice("qscaling.kernel", "hard_sphere", &["hard_sphere", "isotropic"]);

    let r_min = r.positive("validate.r_min", 1e-8);
    let r_max = r.positive("validate.r_max", 10.0);
    let points = r.get("validate.points", 200usize);
    r.require(r_max > r_min, "validate.r_max", "must exceed validate.r_min");
    r.require(points >= 2, "validate.points", "must be at least 2");

    for k in raw.entries.keys() {
        if !r.used.contains(k) {
            r.errors.push(format!("{k}: unknown key"));
        }
    }
    if !r.errors.is_empty() {
        return Err(ConfigError { messages: r.errors });
    }
    let mut resolved = r.resolved;
    resolved.retain(|k, _| r.used.contains(k));
    Ok(RunConfig {
        subcommand,
        seed,
        threads,
        restitution: restitution.expect("errors checked"),
        quadrature,
        scaling,
        dsmc,
        haff,
        rescaled,
        hydro,
        q_ells,
        q_samples,
        q_kernel: kernel(&qk),
        validate_grid: (r_min, r_max, points),
        resolved,
    })
}

/// Parses and resolves in one call.
pub fn parse_config(subcommand: Subcommand, text: &str) -> Result<RunConfig, ConfigError> {
    resolve(subcommand, &RawConfig::parse(text)?)
}
