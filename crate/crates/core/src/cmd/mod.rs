//! Subcommands of the `latprog` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use latprog::{Error, Result};

mod evaluate;
mod ingest;
mod invert;
mod predict;
mod risk;
mod simulate;
mod train;

#[derive(Parser)]
#[command(name = "latprog", version, about = "Latent-trajectory disease progression toolkit")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Diagnostic verbosity.
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Subcommand)]
pub enum Command {
    /// Render a synthetic longitudinal cohort.
    Simulate(simulate::Args),
    /// Train the toy GAN on a directory of PGM images.
    TrainToy(train::Args),
    /// Recover the latent of one image.
    Invert(invert::Args),
    /// Build a latent dictionary from visit metadata and images or latent stores.
    Ingest(ingest::Args),
    /// Extrapolate a knee's latent and render the predicted image.
    Predict(predict::Args),
    /// Progression risk trajectories from grade probabilities.
    Risk(risk::Args),
    /// Compare two score columns with bootstrap intervals and a permutation test.
    Evaluate(evaluate::Args),
}

pub fn init_logging(level: LogLevel) {
    let filter = match level {
        LogLevel::Error => log::LevelFilter::Error,
        LogLevel::Warn => log::LevelFilter::Warn,
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(filter).try_init();
}

/// Applies `LP_THREADS` to the global thread pool.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("LP_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// One JSON line on stderr.
pub fn report(e: &Error) {
    let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{line}");
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate::run(a),
        Command::TrainToy(a) => train::run(a),
        Command::Invert(a) => invert::run(a),
        Command::Ingest(a) => ingest::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Risk(a) => risk::run(a),
        Command::Evaluate(a) => evaluate::run(a),
    }
}

/// Provenance record written next to every command's outputs.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the effective configuration serialized as JSON.
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
}

pub struct Run {
    command: &'static str,
    started: Instant,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        log::info!("{command} started");
        Self {
            command,
            started: Instant::now(),
        }
    }

    pub fn finish<C: Serialize>(
        self,
        config: &C,
        seeds: Vec<u64>,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        manifest_path: &Path,
    ) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config_digest: digest(config)?,
            seeds,
            inputs,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(manifest_path, &manifest)?;
        log::info!("{} finished in {:.2}s", self.command, manifest.wall_time_seconds);
        Ok(())
    }
}

fn digest<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    text.push('\n');
    ensure_parent(path)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// `path` with `suffix` appended to its file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// File name of a visit image inside a cohort directory.
pub fn image_name(subject_id: &str, side: latprog::latent::Side, month: u32) -> String {
    format!("{subject_id}_{side}_{month:03}.pgm")
}

pub fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    ensure_parent(path)?;
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Inversion settings from an optional TOML file with flag overrides.
#[derive(clap::Args, Clone, Debug)]
pub struct InversionArgs {
    /// TOML file with inversion settings.
    #[arg(long)]
    pub inversion_config: Option<PathBuf>,
    /// Optimization steps per image.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Peak learning rate.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Samples used for the latent mean and spread.
    #[arg(long)]
    pub n_z: Option<usize>,
    /// Keep the exploration noise at full amplitude.
    #[arg(long)]
    pub constant_exploration: bool,
}

impl InversionArgs {
    pub fn resolve(&self) -> Result<latprog::inversion::InversionConfig> {
        let mut cfg = match &self.inversion_config {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| Error::format("inversion config", e.to_string()))?
            }
            None => latprog::inversion::InversionConfig::default(),
        };
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.n_z {
            cfg.n_z = v;
        }
        cfg.constant_exploration |= self.constant_exploration;
        cfg.validate()?;
        Ok(cfg)
    }
}
