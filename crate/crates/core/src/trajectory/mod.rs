//! Nearest-neighbour extrapolation of latent trajectories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::ToyGanParams;
use crate::image::Image;
use crate::inversion::{invert_with_stats, latent_statistics, InversionConfig, LatentStats};
use crate::latent::{KneeKey, LatentDictionary, LatentVector, TrajectoryPair};

/// Euclidean distance between the unit-normalized vectors, in [0, 2].
pub fn normalized_cosine_distance(w_x: &LatentVector, w_y: &LatentVector) -> Result<f64> {
    if w_x.dim() != w_y.dim() {
        return Err(Error::DimensionMismatch {
            expected: w_x.dim(),
            actual: w_y.dim(),
        });
    }
    Ok(unit_distance(&unit(w_x.as_slice())?, &unit(w_y.as_slice())?))
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroNormVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn unit_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt().min(2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborHit {
    pub key: KneeKey,
    pub distance: f64,
    /// Baseline to latest follow-up of the neighbouring knee.
    pub pair: TrajectoryPair,
}

/// Baseline latents of every knee with a follow-up, with cached unit vectors.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    entries: Vec<(TrajectoryPair, Vec<f64>)>,
    dimension: usize,
}

impl NeighborIndex {
    pub fn new(dict: &LatentDictionary) -> Result<Self> {
        let entries = crate::latent::latest_trajectories(dict)
            .into_iter()
            .map(|p| {
                let u = unit(p.baseline.as_slice())?;
                Ok((p, u))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            entries,
            dimension: dict.dimension(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `m` closest baselines, ordered by distance and then by key.
    pub fn nearest(&self, query: &LatentVector, m: usize, exclude: Option<&KneeKey>) -> Result<Vec<NeighborHit>> {
        if query.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: query.dim(),
            });
        }
        let q = unit(query.as_slice())?;
        let mut hits: Vec<(f64, &TrajectoryPair)> = self
            .entries
            .iter()
            .filter(|(p, _)| exclude != Some(&p.key))
            .map(|(p, u)| (unit_distance(&q, u), p))
            .collect();
        if m == 0 || m > hits.len() {
            return Err(Error::NotEnoughNeighbors {
                requested: m,
                available: hits.len(),
            });
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.key.cmp(&b.1.key)));
        Ok(hits
            .into_iter()
            .take(m)
            .map(|(d, p)| NeighborHit {
                key: p.key.clone(),
                distance: d,
                pair: p.clone(),
            })
            .collect())
    }
}

/// Exhaustive neighbour search; see [`NeighborIndex::nearest`].
pub fn nearest_neighbors(
    dict: &LatentDictionary,
    query_w: &LatentVector,
    m: usize,
    exclude: Option<&KneeKey>,
) -> Result<Vec<NeighborHit>> {
    NeighborIndex::new(dict)?.nearest(query_w, m, exclude)
}

/// How a neighbour's displacement is rescaled to the prediction horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// Factor `dt_i / horizon`.
    #[default]
    AsWritten,
    /// Factor `horizon / dt_i`, i.e. constant velocity in time.
    LinearTime,
}

impl fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingMode::AsWritten => "as-written",
            ScalingMode::LinearTime => "linear-time",
        })
    }
}

impl FromStr for ScalingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-written" => Ok(ScalingMode::AsWritten),
            "linear-time" => Ok(ScalingMode::LinearTime),
            _ => Err(Error::InvalidArgument(format!("unknown scaling mode {s:?}"))),
        }
    }
}

/// `(1/m) * sum_i s_i (followup_i - baseline_i)`.
pub fn extrapolation_vector(neighbors: &[NeighborHit], horizon: i64, mode: ScalingMode) -> Result<LatentVector> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborSet);
    }
    if horizon <= 0 {
        return Err(Error::NonPositiveHorizon(horizon));
    }
    let d = neighbors[0].pair.baseline.dim();
    let mut delta = vec![0.0; d];
    for n in neighbors {
        let p = &n.pair;
        if p.delta_t == 0 {
            return Err(Error::InvalidArgument(format!("neighbour {} has no elapsed time", n.key)));
        }
        if p.baseline.dim() != d || p.followup.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.baseline.dim().max(p.followup.dim()),
            });
        }
        let s = match mode {
            ScalingMode::AsWritten => p.delta_t as f64 / horizon as f64,
            ScalingMode::LinearTime => horizon as f64 / p.delta_t as f64,
        };
        for ((acc, f), b) in delta.iter_mut().zip(p.followup.as_slice()).zip(p.baseline.as_slice()) {
            *acc += s * (f - b);
        }
    }
    let m = neighbors.len() as f64;
    delta.iter_mut().for_each(|v| *v /= m);
    LatentVector::new(delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationResult {
    pub query_w: LatentVector,
    pub delta_w: LatentVector,
    /// `query_w + delta_w`.
    pub predicted_w: LatentVector,
    pub neighbors_used: Vec<NeighborHit>,
    pub horizon_months: i64,
}

/// What to extrapolate from.
#[derive(Clone, Debug)]
pub enum Query {
    /// Inverted first.
    Image(Image),
    Latent(LatentVector),
    /// Baseline latent of a knee stored in the dictionary.
    Knee(KneeKey),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    pub neighbors: usize,
    pub horizon_months: i64,
    pub scaling: ScalingMode,
    /// Keep a knee out of its own neighbour set when the query identifies it.
    pub exclude_self: bool,
    /// Knee to leave out, overriding the one derived from the query.
    pub exclude: Option<KneeKey>,
    pub inversion: InversionConfig,
    pub seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            neighbors: 1,
            horizon_months: 96,
            scaling: ScalingMode::AsWritten,
            exclude_self: true,
            exclude: None,
            inversion: InversionConfig::default(),
            seed: 0,
        }
    }
}

/// Moves a latent along the averaged neighbour displacement.
pub fn extrapolate(index: &NeighborIndex, query_w: &LatentVector, exclude: Option<&KneeKey>, cfg: &PredictConfig) -> Result<ExtrapolationResult> {
    let hits = index.nearest(query_w, cfg.neighbors, exclude)?;
    let delta = extrapolation_vector(&hits, cfg.horizon_months, cfg.scaling)?;
    let predicted = query_w.as_slice().iter().zip(delta.as_slice()).map(|(q, d)| q + d).collect();
    Ok(ExtrapolationResult {
        query_w: query_w.clone(),
        delta_w: delta,
        predicted_w: LatentVector::new(predicted)?,
        neighbors_used: hits,
        horizon_months: cfg.horizon_months,
    })
}

/// Resolves the query to a latent (inverting images), extrapolates it and
/// renders the predicted latent with all noise maps at zero.
pub fn predict_future(
    params: &ToyGanParams,
    dict: &LatentDictionary,
    query: &Query,
    cfg: &PredictConfig,
) -> Result<(ExtrapolationResult, Image)> {
    let stats: Option<LatentStats> = match query {
        Query::Image(_) => Some(latent_statistics(params, cfg.inversion.n_z, cfg.seed)?),
        _ => None,
    };
    let (w, own_key) = match query {
        Query::Latent(w) => (w.clone(), None),
        Query::Knee(k) => {
            let baseline = dict
                .visits(k)
                .first()
                .map(|r| r.latent.clone())
                .ok_or_else(|| Error::MissingLatent(k.to_string()))?;
            (baseline, Some(k.clone()))
        }
        Query::Image(img) => (
            invert_with_stats(params, img, &cfg.inversion, stats.as_ref().expect("image query"), cfg.seed)?.w,
            None,
        ),
    };
    let exclude = cfg.exclude.clone().or(if cfg.exclude_self { own_key } else { None });
    let index = NeighborIndex::new(dict)?;
    let result = extrapolate(&index, &w, exclude.as_ref(), cfg)?;
    let image = params.synthesize(result.predicted_w.as_slice(), Some(&params.zero_noise()))?;
    Ok((result, image))
}
