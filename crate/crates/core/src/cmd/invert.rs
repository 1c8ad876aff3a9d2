use std::path::PathBuf;

use serde::Serialize;

use latprog::gan::read_model;
use latprog::image::read_pgm;
use latprog::inversion::invert_generator;
use latprog::latent::{write_store, KneeRecord, LatentDictionary, Side};
use latprog::stats::{ssim, DEFAULT_SSIM_WINDOW};
use latprog::{Error, Result};

use super::{create, with_suffix, write_json, InversionArgs, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Model file written by `train-toy`.
    #[arg(long)]
    gan: PathBuf,
    /// PGM image to invert.
    #[arg(long)]
    target: PathBuf,
    /// Subject id stored with the latent (default: target file stem).
    #[arg(long)]
    subject: Option<String>,
    #[arg(long, default_value = "right")]
    side: Side,
    #[arg(long, default_value_t = 0)]
    month: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    inversion: InversionArgs,
    /// Latent store to write; a JSON summary goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    final_loss: f64,
    ssim: f64,
    steps: usize,
    seed: u64,
}

pub fn run(a: Args) -> Result<()> {
    let run = Run::start("invert");
    let cfg = a.inversion.resolve()?;
    let params = read_model(&a.gan)?;
    let target = read_pgm(&a.target)?;
    let result = invert_generator(&params, &target, &cfg, a.seed)?;
    let recon = params.synthesize(result.w.as_slice(), Some(&result.noise))?;
    let score = ssim(&target, &recon, DEFAULT_SSIM_WINDOW)?;

    let subject = match a.subject {
        Some(s) => s,
        None => a
            .target
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidArgument("target has no file name".into()))?,
    };
    let dict = LatentDictionary::from_records(vec![KneeRecord {
        subject_id: subject,
        side: a.side,
        visit_month: a.month,
        kls: None,
        latent: result.w,
    }])?;
    write_store(&dict, create(&a.out)?)?;
    let summary_path = with_suffix(&a.out, ".json");
    write_json(
        &summary_path,
        &Summary {
            final_loss: result.final_loss,
            ssim: score,
            steps: cfg.steps,
            seed: a.seed,
        },
    )?;
    run.finish(
        &cfg,
        vec![a.seed],
        vec![a.gan.clone(), a.target.clone()],
        vec![a.out.clone(), summary_path],
        &with_suffix(&a.out, ".manifest.json"),
    )
}
