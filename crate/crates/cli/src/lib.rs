//! Command-line driver: configuration, dispatch and run manifests.

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use commands::{dispatch, Failure};
use config::{resolve, RawConfig, RunConfig, Subcommand, SUBCOMMANDS};

pub const BUILD: &str = env!("GRANULAR_BUILD");
pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "granular", version = BUILD, about = "Granular gas simulations and numerical checks")]
struct Args {
    /// One of the subcommands, or `rerun` followed by a manifest path.
    command: String,
    /// Manifest to replay (only with `rerun`).
    manifest: Option<PathBuf>,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single key, e.g. `--set dsmc.n_particles=20000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for all artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Everything needed to reproduce a run.
#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct Manifest {
    pub subcommand: String,
    pub build: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

pub fn usage() -> String {
    let names: Vec<&str> = SUBCOMMANDS.iter().map(|(n, _)| *n).collect();
    format!(
        "usage: granular <command> [--config FILE] [--set KEY=VALUE]... [--out DIR]\n       granular rerun <manifest.json> [--out DIR]\ncommands: {}",
        names.join(", ")
    )
}

fn load(args: &Args) -> Result<RunConfig, Failure> {
    let invalid = |m: String| Failure::Validation(m);
    if args.command == "rerun" {
        let path = args.manifest.as_ref().ok_or_else(|| invalid("rerun needs a manifest path".into()))?;
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let sub: Subcommand = m.subcommand.parse().map_err(invalid)?;
        let raw = RawConfig::from_map(&m.config).map_err(|e| invalid(e.to_string()))?;
        return resolve(sub, &raw).map_err(|e| invalid(e.to_string()));
    }
    if args.manifest.is_some() {
        return Err(invalid(format!("unexpected argument after '{}'", args.command)));
    }
    let sub: Subcommand = args.command.parse().map_err(|e| invalid(format!("{e}\n{}", usage())))?;
    let mut raw = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            RawConfig::parse(&text).map_err(|e| invalid(e.to_string()))?
        }
        None => RawConfig::default(),
    };
    for s in &args.set {
        raw.set(s).map_err(|e| invalid(e.to_string()))?;
    }
    resolve(sub, &raw).map_err(|e| invalid(e.to_string()))
}

fn configure_threads(cfg: &RunConfig) -> usize {
    let threads = std::env::var("GRANULAR_THREADS").ok().and_then(|s| s.parse().ok()).unwrap_or(cfg.threads);
    if threads > 0 {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    rayon::current_num_threads()
}

/// Runs one configuration and writes its manifest next to the outputs.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Vec<String>, Failure> {
    let mut outputs = dispatch(cfg, out)?;
    outputs.push(MANIFEST.into());
    let m = Manifest {
        subcommand: cfg.subcommand.name().into(),
        build: BUILD.into(),
        seed: cfg.seed,
        config: cfg.resolved.clone(),
        outputs: outputs.clone(),
    };
    let mut text = serde_json::to_string_pretty(&m).map_err(|e| Failure::Numeric(e.to_string()))?;
    text.push('\n');
    fs::write(out.join(MANIFEST), text)?;
    Ok(outputs)
}

/// Parses arguments, runs, and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                eprintln!("{}", usage());
            }
            return code;
        }
    };
    let result = load(&args).and_then(|cfg| {
        let threads = configure_threads(&cfg);
        let start = std::time::Instant::now();
        let files = execute(&cfg, &args.out)?;
        eprintln!("{}: {} files in {} ({threads} threads, {:.1}s)", cfg.subcommand.name(), files.len(), args.out.display(), start.elapsed().as_secs_f64());
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}
