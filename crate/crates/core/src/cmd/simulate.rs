use std::path::PathBuf;

use serde::Serialize;

use latprog::cohort::{simulate_cohort, SyntheticSubject, DEFAULT_VISITS};
use latprog::image::{write_pgm, BitDepth};
use latprog::latent::write_metadata;
use latprog::Result;

use super::{create, image_name, write_json, Run};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    subjects: usize,
    /// Fraction of progressing knees.
    #[arg(long)]
    progressors: f64,
    #[arg(long)]
    seed: u64,
    /// Visit months, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_VISITS)]
    visits: Vec<u32>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Config<'a> {
    subjects: usize,
    progressors: f64,
    visits: &'a [u32],
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    seed: u64,
    visits: &'a [u32],
    subjects: &'a [SyntheticSubject],
}

pub fn run(a: Args) -> Result<()> {
    let run = Run::start("simulate");
    let cohort = simulate_cohort(a.subjects, a.progressors, &a.visits, a.seed)?;
    let images = a.out.join("images");
    std::fs::create_dir_all(&images)?;
    for v in &cohort.visits {
        let m = &v.meta;
        write_pgm(images.join(image_name(&m.subject_id, m.side, m.visit_month)), &v.image, BitDepth::Sixteen)?;
    }
    let meta_path = a.out.join("metadata.csv");
    write_metadata(&cohort.metadata(), create(&meta_path)?)?;
    let truth_path = a.out.join("ground_truth.json");
    write_json(
        &truth_path,
        &GroundTruth {
            seed: a.seed,
            visits: &a.visits,
            subjects: &cohort.subjects,
        },
    )?;
    log::info!("wrote {} images for {} subjects", cohort.visits.len(), cohort.subjects.len());
    let config = Config {
        subjects: a.subjects,
        progressors: a.progressors,
        visits: &a.visits,
    };
    run.finish(&config, vec![a.seed], vec![], vec![images, meta_path, truth_path], &a.out.join("manifest.json"))
}
