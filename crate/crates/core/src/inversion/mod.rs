//! Generator inversion: recover the latent and noise maps that reproduce an
//! image, by Adam on a perceptual loss plus a noise auto-correlation penalty.

mod noise_reg;
mod perceptual;

pub use noise_reg::{noise_regularization, noise_regularization_grad};
pub use perceptual::{perceptual_distance, PerceptualEmbedder};

use std::f64::consts::PI;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::ToyGanParams;
use crate::image::Image;
use crate::latent::LatentVector;
use crate::nn::NoiseMap;
use crate::optim::{adam_step, AdamState};
use crate::rng::{self, Rng};

/// Mean of the mapped latent distribution and its scalar spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub mu_w: LatentVector,
    /// Root of the mean squared distance of mapped samples from `mu_w`.
    pub sigma_w: f64,
}

/// Statistics of `mapping(z)` over `n_z` standard-normal `z` of length `dim`.
pub fn latent_statistics_with<F>(dim: usize, mapping: F, n_z: usize, seed: u64) -> Result<LatentStats>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n_z < 2 {
        return Err(Error::InvalidCount(format!("latent statistics need n_z >= 2, got {n_z}")));
    }
    let mut g = rng::seeded(seed);
    let mut samples = Vec::with_capacity(n_z);
    for _ in 0..n_z {
        samples.push(mapping(&rng::normal_vec(&mut g, dim))?);
    }
    let d = samples[0].len();
    let mut mu = vec![0.0; d];
    for s in &samples {
        if s.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: s.len() });
        }
        for (m, v) in mu.iter_mut().zip(s) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n_z as f64);
    let var = samples
        .iter()
        .map(|s| s.iter().zip(&mu).map(|(v, m)| (v - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n_z as f64;
    Ok(LatentStats {
        mu_w: LatentVector::new(mu)?,
        sigma_w: var.sqrt(),
    })
}

/// Statistics of the model's mapping network.
pub fn latent_statistics(params: &ToyGanParams, n_z: usize, seed: u64) -> Result<LatentStats> {
    latent_statistics_with(params.latent_dim(), |z| params.map(z), n_z, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    /// Peak learning rate.
    pub eta: f64,
    /// Weight of the noise auto-correlation penalty.
    pub alpha: f64,
    pub n_z: usize,
    pub steps: usize,
    /// Fraction of the steps over which the exploration amplitude decays to 0.
    pub noise_ramp: f64,
    /// Keep the exploration amplitude at its initial value throughout.
    pub constant_exploration: bool,
    pub rampup: f64,
    pub rampdown: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            alpha: 1e5,
            n_z: 10_000,
            steps: 1000,
            noise_ramp: 0.75,
            constant_exploration: false,
            rampup: 0.05,
            rampdown: 0.25,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta > 0.0
            && self.eta.is_finite()
            && self.alpha >= 0.0
            && self.alpha.is_finite()
            && self.n_z >= 2
            && self.noise_ramp > 0.0
            && (0.0..=1.0).contains(&self.rampup)
            && (0.0..=1.0).contains(&self.rampdown);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("inversion config out of range".into()))
        }
    }

    /// Learning rate at `step`: linear warm-up over the first `rampup` of the
    /// run and a cosine decay over the last `rampdown`.
    pub fn learning_rate(&self, step: usize) -> f64 {
        let t = step as f64 / self.steps.max(1) as f64;
        let down = if self.rampdown > 0.0 { ((1.0 - t) / self.rampdown).min(1.0) } else { 1.0 };
        let up = if self.rampup > 0.0 { (t / self.rampup).min(1.0) } else { 1.0 };
        self.eta * (0.5 - 0.5 * (down * PI).cos()) * up
    }

    /// Exploration amplitude `t` in [0, 1] at `step`.
    pub fn exploration(&self, step: usize) -> f64 {
        if self.constant_exploration {
            return 1.0;
        }
        let t = step as f64 / self.steps.max(1) as f64;
        (1.0 - t / self.noise_ramp).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionResult {
    pub w: LatentVector,
    pub noise: Vec<NoiseMap>,
    /// Total loss at the returned iterate.
    pub final_loss: f64,
    /// Perceptual part of `final_loss`.
    pub perceptual: f64,
    /// Step at which the returned iterate was reached (0 = initialization).
    pub best_step: usize,
}

/// Loss and gradients at one point of the search.
pub struct Evaluation {
    pub loss: f64,
    pub perceptual: f64,
    pub grad_w: Vec<f64>,
    pub grad_noise: Vec<NoiseMap>,
}

/// The inversion loop over an arbitrary differentiable objective.
///
/// Each step evaluates `objective` at `w` plus Gaussian exploration noise of
/// scale `0.05 * sigma_w * t`, takes one Adam step on `w` and the noise maps
/// jointly, and keeps the iterate with the lowest unperturbed loss.
pub fn optimize<F>(
    w0: &[f64],
    noise0: Vec<NoiseMap>,
    sigma_w: f64,
    cfg: &InversionConfig,
    rng: &mut Rng,
    mut objective: F,
) -> Result<InversionResult>
where
    F: FnMut(&[f64], &[NoiseMap]) -> Result<Evaluation>,
{
    let d = w0.len();
    let mut w = w0.to_vec();
    let mut noise = noise0;
    let noise_len: usize = noise.iter().map(|m| m.data.len()).sum();
    let mut adam = AdamState::new(d + noise_len);
    let mut flat = vec![0.0; d + noise_len];
    let mut grad = vec![0.0; d + noise_len];

    let mut best: Option<InversionResult> = None;
    let consider = |best: &mut Option<InversionResult>, w: &[f64], noise: &[NoiseMap], e: &Evaluation, step| -> Result<()> {
        if best.as_ref().is_none_or(|b| e.loss < b.final_loss) {
            *best = Some(InversionResult {
                w: LatentVector::new(w.to_vec())?,
                noise: noise.to_vec(),
                final_loss: e.loss,
                perceptual: e.perceptual,
                best_step: step,
            });
        }
        Ok(())
    };

    for step in 0..cfg.steps {
        let scale = 0.05 * sigma_w * cfg.exploration(step);
        let e = if scale > 0.0 {
            let clean = objective(&w, &noise)?;
            if !clean.loss.is_finite() {
                return Err(Error::NonFiniteLoss(step));
            }
            consider(&mut best, &w, &noise, &clean, step)?;
            let probe: Vec<f64> = w.iter().map(|v| v + scale * rng::normal(rng)).collect();
            objective(&probe, &noise)?
        } else {
            let e = objective(&w, &noise)?;
            if e.loss.is_finite() {
                consider(&mut best, &w, &noise, &e, step)?;
            }
            e
        };
        if !e.loss.is_finite() {
            return Err(Error::NonFiniteLoss(step));
        }

        flat[..d].copy_from_slice(&w);
        grad[..d].copy_from_slice(&e.grad_w);
        let mut at = d;
        for (m, g) in noise.iter().zip(&e.grad_noise) {
            flat[at..at + m.data.len()].copy_from_slice(&m.data);
            grad[at..at + m.data.len()].copy_from_slice(&g.data);
            at += m.data.len();
        }
        adam_step(&mut adam, &mut flat, &grad, cfg.learning_rate(step))?;
        w.copy_from_slice(&flat[..d]);
        let mut at = d;
        for m in &mut noise {
            let n = m.data.len();
            m.data.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
    }
    let last = objective(&w, &noise)?;
    if last.loss.is_finite() {
        consider(&mut best, &w, &noise, &last, cfg.steps)?;
    }
    best.ok_or(Error::NonFiniteLoss(cfg.steps))
}

/// Inverts `target` under the model: starts from the mean latent and
/// standard-normal noise maps, minimizes perceptual distance plus
/// `alpha` times the noise penalty, and returns the best iterate.
pub fn invert_generator(params: &ToyGanParams, target: &Image, cfg: &InversionConfig, seed: u64) -> Result<InversionResult> {
    cfg.validate()?;
    let s = params.image_size();
    if target.height() != s || target.width() != s {
        return Err(Error::DimensionMismatch {
            expected: s * s,
            actual: target.len(),
        });
    }
    let stats = latent_statistics(params, cfg.n_z, rng::substream(seed, 0).next_u64())?;
    invert_with_stats(params, target, cfg, &stats, seed)
}

/// As [`invert_generator`] with precomputed latent statistics, which many
/// inversions against one model can share.
pub fn invert_with_stats(
    params: &ToyGanParams,
    target: &Image,
    cfg: &InversionConfig,
    stats: &LatentStats,
    seed: u64,
) -> Result<InversionResult> {
    cfg.validate()?;
    let s = params.image_size();
    if target.height() != s || target.width() != s {
        return Err(Error::DimensionMismatch {
            expected: s * s,
            actual: target.len(),
        });
    }
    if stats.mu_w.dim() != params.latent_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.latent_dim(),
            actual: stats.mu_w.dim(),
        });
    }
    let embedder = PerceptualEmbedder::for_image(s, s);
    let target_features = embedder.embed(target)?;
    let syn = &params.synthesis;
    let mut g = rng::substream(seed, 1);
    let noise0 = syn.random_noise(&mut g);
    let alpha = cfg.alpha;
    optimize(stats.mu_w.as_slice(), noise0, stats.sigma_w, cfg, &mut g, |w, noise| {
        let trace = syn.forward(w, Some(noise))?;
        let (perceptual, gimg) = embedder.distance_grad(&target_features, trace.output())?;
        let (reg, mut grad_noise) = noise_regularization_grad(noise);
        grad_noise.iter_mut().for_each(|m| m.data.iter_mut().for_each(|v| *v *= alpha));
        let grad_w = syn.backward(&trace, &gimg, Some(noise), None, Some(&mut grad_noise));
        Ok(Evaluation {
            loss: perceptual + alpha * reg,
            perceptual,
            grad_w,
            grad_noise,
        })
    })
}
