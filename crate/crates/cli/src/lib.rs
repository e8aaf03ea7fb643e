//! Command-line driver for the backscatter simulator: configuration,
//! dispatch to the map and campaign engines, and artifact output.

pub mod artifacts;
pub mod config;
pub mod modes;
pub mod selfcheck;

use std::path::{Path, PathBuf};

use clap::Parser;

use crate::artifacts::Artifacts;
use crate::config::{parse_override, parse_text, Mode, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SELFCHECK: i32 = 4;
pub const EXIT_INTERNAL: i32 = 1;

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("selfcheck failed")]
    SelfCheck,
    #[error("{0}")]
    Simulation(backscatter_core::Error),
}

impl From<backscatter_core::Error> for CliError {
    fn from(e: backscatter_core::Error) -> Self {
        Self::Simulation(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Io { .. } => EXIT_IO,
            Self::SelfCheck => EXIT_SELFCHECK,
            Self::Simulation(_) => EXIT_INTERNAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "backscatter-sim",
    version,
    about = "Backscatter link simulation under massive-MIMO beamforming"
)]
pub struct Cli {
    /// maps, f_o_maps, campaign, legacy or selfcheck
    #[arg(long)]
    pub mode: Option<String>,
    /// Config file with `section.key = value` lines
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// paper or desk
    #[arg(long)]
    pub preset: Option<String>,
    /// Extra `key=value` override, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Builds the configuration from file and flags, without touching the disk
/// beyond reading the config file.
pub fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut layers = Vec::new();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        layers.push(parse_text(&text)?);
    }
    let mut flags = std::collections::BTreeMap::new();
    if let Some(m) = &cli.mode {
        flags.insert("mode".to_string(), toml::Value::String(m.clone()));
    }
    if let Some(p) = &cli.preset {
        flags.insert("preset".to_string(), toml::Value::String(p.clone()));
    }
    if let Some(s) = cli.seed {
        let v = i64::try_from(s)
            .map_or_else(|_| toml::Value::String(s.to_string()), toml::Value::Integer);
        flags.insert("seed".to_string(), v);
    }
    for item in &cli.set {
        let (k, v) = parse_override(item)?;
        flags.insert(k, v);
    }
    layers.push(flags);
    RunConfig::resolve(&layers)
}

/// Runs a resolved configuration, writing artifacts under `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let mut a = Artifacts::create(out)?;
    a.write(RESOLVED_CONFIG, &cfg.echo())?;
    let ok = match cfg.mode {
        Mode::Maps => modes::maps(cfg, &mut a).map(|_| true),
        Mode::FoMaps => modes::f_o_maps(cfg, &mut a).map(|_| true),
        Mode::Campaign => modes::campaign(cfg, &mut a).map(|_| true),
        Mode::Legacy => modes::legacy(cfg, &mut a).map(|_| true),
        Mode::Selfcheck => modes::selfcheck(cfg, &mut a),
    }?;
    let files = a.finish()?;
    if ok {
        Ok(files)
    } else {
        Err(CliError::SelfCheck)
    }
}

pub fn main_with(cli: Cli) -> i32 {
    let result = load(&cli).and_then(|cfg| run(&cfg, &cli.out));
    match result {
        Ok(files) => {
            eprintln!("wrote {} files to {}", files.len() + 1, cli.out.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
