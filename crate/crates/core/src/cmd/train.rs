use std::path::{Path, PathBuf};

use latprog::gan::{train_toy_gan, write_model, TrainConfig};
use latprog::image::{read_pgm, Image};
use latprog::{Error, Result};

use super::{with_suffix, write_json, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of PGM training images (searched recursively).
    #[arg(long)]
    images: PathBuf,
    /// TOML training config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_g: Option<f64>,
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    pl_weight: Option<f64>,
    #[arg(long)]
    lazy_k: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Only use images whose file name contains this string, e.g. `_000.pgm`.
    #[arg(long)]
    filter: Option<String>,
    /// Model file to write; the training log goes to `<out>.log.json`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: Args) -> Result<()> {
    let run = Run::start("train-toy");
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_file(p)?,
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { cfg.$f = v; })* };
    }
    set!(steps, batch_size, lr_g, lr_d, gamma, pl_weight, lazy_k, eval_every, seed);
    cfg.validate()?;

    let paths = pgm_files(&a.images, a.filter.as_deref())?;
    let images = paths.iter().map(read_pgm).collect::<Result<Vec<Image>>>()?;
    log::info!("training on {} images for {} steps", images.len(), cfg.steps);
    let (params, log) = train_toy_gan(&cfg, &images)?;
    write_model(&a.out, &params)?;
    let log_path = with_suffix(&a.out, ".log.json");
    write_json(&log_path, &log)?;
    let mut inputs = vec![a.images.clone()];
    inputs.extend(a.config.clone());
    run.finish(&cfg, vec![cfg.seed], inputs, vec![a.out.clone(), log_path.clone()], &with_suffix(&a.out, ".manifest.json"))
}

/// Sorted PGM files under `dir`.
pub fn pgm_files(dir: &Path, filter: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "pgm")
                && filter.is_none_or(|f| path.file_name().is_some_and(|n| n.to_string_lossy().contains(f)))
            {
                out.push(path);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(format!("no PGM images under {}", dir.display())));
    }
    out.sort();
    Ok(out)
}
