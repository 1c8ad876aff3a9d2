use std::path::PathBuf;

use latprog::gan::read_model;
use latprog::image::{read_pgm, write_pgm, BitDepth};
use latprog::latent::{read_store, KneeKey};
use latprog::trajectory::{predict_future, PredictConfig, Query, ScalingMode};
use latprog::Result;

use super::{open, with_suffix, write_json, InversionArgs, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Latent dictionary.
    #[arg(long)]
    dict: PathBuf,
    /// Model file.
    #[arg(long)]
    gan: PathBuf,
    /// A PGM image to invert, or `subject:side` of a knee in the dictionary.
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 1)]
    neighbors: usize,
    /// Prediction horizon in months.
    #[arg(long, default_value_t = 96)]
    horizon: i64,
    #[arg(long, default_value = "as-written")]
    scaling: ScalingMode,
    /// Allow a knee to be its own neighbour.
    #[arg(long)]
    include_self: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    inversion: InversionArgs,
    /// Output prefix: writes `<out>.pgm` and `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: Args) -> Result<()> {
    let run = Run::start("predict");
    let cfg = PredictConfig {
        neighbors: a.neighbors,
        horizon_months: a.horizon,
        scaling: a.scaling,
        exclude_self: !a.include_self,
        exclude: None,
        inversion: a.inversion.resolve()?,
        seed: a.seed,
    };
    let params = read_model(&a.gan)?;
    let dict = read_store(open(&a.dict)?)?;
    let query_path = PathBuf::from(&a.query);
    let query = if query_path.extension().is_some_and(|e| e == "pgm") {
        Query::Image(read_pgm(&query_path)?)
    } else {
        Query::Knee(a.query.parse::<KneeKey>()?)
    };
    let (result, image) = predict_future(&params, &dict, &query, &cfg)?;
    let image_path = with_suffix(&a.out, ".pgm");
    let json_path = with_suffix(&a.out, ".json");
    super::ensure_parent(&image_path)?;
    write_pgm(&image_path, &image, BitDepth::Sixteen)?;
    write_json(&json_path, &result)?;
    let mut inputs = vec![a.dict.clone(), a.gan.clone()];
    if matches!(query, Query::Image(_)) {
        inputs.push(query_path);
    }
    run.finish(&cfg, vec![a.seed], inputs, vec![image_path, json_path], &with_suffix(&a.out, ".manifest.json"))
}
