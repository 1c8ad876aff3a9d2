use std::collections::HashMap;
use std::path::PathBuf;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use latprog::gan::read_model;
use latprog::image::read_pgm;
use latprog::inversion::{invert_with_stats, latent_statistics, InversionConfig};
use latprog::latent::{build_dictionary, read_metadata, read_store, write_store, LatentVector, VisitKey};
use latprog::{rng, Error, Result};

use super::{create, image_name, open, with_suffix, InversionArgs, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Visit metadata CSV.
    #[arg(long)]
    meta: PathBuf,
    /// Directory of `<subject>_<side>_<month>.pgm` images to invert.
    #[arg(long, requires = "gan", conflicts_with = "latents")]
    images: Option<PathBuf>,
    /// Model file used to invert `--images`.
    #[arg(long)]
    gan: Option<PathBuf>,
    /// Existing latent stores to merge instead of inverting images.
    #[arg(long, num_args = 1.., required_unless_present = "images")]
    latents: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    inversion: InversionArgs,
    /// Dictionary file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    mode: &'a str,
    inversion: Option<&'a InversionConfig>,
}

pub fn run(a: Args) -> Result<()> {
    let run = Run::start("ingest");
    let meta = read_metadata(open(&a.meta)?)?;
    let mut inputs = vec![a.meta.clone()];
    let (latents, cfg) = match (&a.images, &a.gan) {
        (Some(dir), Some(gan)) => {
            let cfg = a.inversion.resolve()?;
            let params = read_model(gan)?;
            let stats = latent_statistics(&params, cfg.n_z, rng::substream(a.seed, 0).next_u64())?;
            let jobs: Vec<(usize, VisitKey, PathBuf)> = meta
                .iter()
                .enumerate()
                .map(|(i, m)| (i, m.key(), dir.join(image_name(&m.subject_id, m.side, m.visit_month))))
                .collect();
            log::info!("inverting {} images", jobs.len());
            let latents = jobs
                .par_iter()
                .map(|(i, key, path)| {
                    let target = read_pgm(path)?;
                    let seed = rng::substream(a.seed, 1 + *i as u64).next_u64();
                    let res = invert_with_stats(&params, &target, &cfg, &stats, seed)?;
                    log::debug!("{key}: loss {:.3e}", res.final_loss);
                    Ok((key.clone(), res.w))
                })
                .collect::<Result<HashMap<VisitKey, LatentVector>>>()?;
            inputs.extend([dir.clone(), gan.clone()]);
            (latents, Some(cfg))
        }
        _ => {
            let mut latents = HashMap::new();
            for path in &a.latents {
                for r in read_store(open(path)?)?.records() {
                    if latents.insert(r.visit_key(), r.latent.clone()).is_some() {
                        return Err(Error::DuplicateVisit(r.visit_key().to_string()));
                    }
                }
                inputs.push(path.clone());
            }
            (latents, None)
        }
    };
    let dict = build_dictionary(&meta, &latents)?;
    write_store(&dict, create(&a.out)?)?;
    log::info!("dictionary holds {} visits", dict.len());
    let config = Config {
        mode: if cfg.is_some() { "invert" } else { "merge" },
        inversion: cfg.as_ref(),
    };
    run.finish(&config, vec![a.seed], inputs, vec![a.out.clone()], &with_suffix(&a.out, ".manifest.json"))
}
