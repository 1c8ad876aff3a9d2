//! Alternating discriminator/generator training with lazy regularization.

use std::path::Path;

use log::{debug, info};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::NoiseMap;
use crate::optim::{adam_step, AdamState};
use crate::rng::{self, Rng};

use super::frechet::{frechet_distance, FeatureProjector, FRECHET_FEATURES};
use super::loss::{discriminator_loss_grad, gan_losses, generator_loss_grad};
use super::penalty::{path_length_penalty_with, r1_penalty_with_grad, PenaltyState};
use super::{GanArchitecture, ToyGanParams};

/// Seed of the feature projection shared by every run, so Fréchet values
/// from different training seeds are comparable.
const PROJECTOR_SEED: u64 = 0x5eed_f7ec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub gamma: f64,
    /// Path-length weight per output pixel: the penalty uses unscaled
    /// standard-normal `y`, so its weight is divided by the pixel count.
    pub pl_weight: f64,
    /// Penalties are evaluated every `lazy_k` steps with weight scaled by `lazy_k`.
    pub lazy_k: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub pl_decay: f64,
    /// Generated samples per Fréchet evaluation.
    pub eval_samples: usize,
    /// Learning-rate multiplier of the mapping network relative to `lr_g`.
    pub mapping_lr_scale: f64,
    /// Decay of the exponential moving average of the generator weights
    /// that is evaluated and returned; 0 uses the raw weights.
    pub g_ema_decay: f64,
    pub architecture: GanArchitecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 32,
            lr_g: 0.0025,
            lr_d: 0.0025,
            gamma: super::DEFAULT_GAMMA,
            pl_weight: 2.0,
            lazy_k: 16,
            seed: 0,
            eval_every: 100,
            pl_decay: 0.99,
            eval_samples: 200,
            mapping_lr_scale: 0.01,
            g_ema_decay: 0.99,
            architecture: GanArchitecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidArgument(format!("training config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.lazy_k == 0 || self.eval_every == 0 {
            return bad("lazy_k and eval_every must be positive");
        }
        if self.eval_samples < 2 {
            return bad("eval_samples must be at least 2");
        }
        for (name, v) in [
            ("lr_g", self.lr_g),
            ("lr_d", self.lr_d),
            ("gamma", self.gamma),
            ("pl_weight", self.pl_weight),
            ("mapping_lr_scale", self.mapping_lr_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be finite and non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.g_ema_decay) {
            return bad("g_ema_decay must lie in [0, 1)");
        }
        PenaltyState::new(self.pl_decay)?;
        self.architecture.validate()
    }
}

/// Evaluation record. Losses and R1 use a fixed evaluation batch, so they
/// change only when the parameters do; the path-length fields report the
/// most recent training evaluation of that term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub r1: f64,
    pub path_length: f64,
    pub path_length_ema: f64,
    pub frechet: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<TrainLogEntry>,
}

impl TrainingLog {
    pub fn at_step(&self, step: usize) -> Option<&TrainLogEntry> {
        self.entries.iter().find(|e| e.step == step)
    }

    pub fn last(&self) -> Option<&TrainLogEntry> {
        self.entries.last()
    }
}

struct Evaluator {
    projector: FeatureProjector,
    real_summary: super::GaussianSummary,
    real_batch: Vec<Image>,
    z: Vec<Vec<f64>>,
    noise: Vec<Vec<NoiseMap>>,
    gamma: f64,
}

impl Evaluator {
    fn new(cfg: &TrainConfig, params: &ToyGanParams, data: &[Image]) -> Result<Self> {
        let projector = FeatureProjector::new(data[0].len(), FRECHET_FEATURES, PROJECTOR_SEED);
        let real_summary = projector.summarize(data)?;
        let mut r = rng::substream(cfg.seed, 2);
        let z = (0..cfg.eval_samples).map(|_| rng::normal_vec(&mut r, params.latent_dim())).collect();
        let noise = (0..cfg.eval_samples).map(|_| params.synthesis.random_noise(&mut r)).collect();
        let real_batch = data.iter().take(cfg.batch_size.max(2)).cloned().collect();
        Ok(Self {
            projector,
            real_summary,
            real_batch,
            z,
            noise,
            gamma: cfg.gamma,
        })
    }

    fn frechet(&self, params: &ToyGanParams) -> Result<f64> {
        let fakes = self
            .z
            .iter()
            .zip(&self.noise)
            .map(|(z, n)| params.synthesize(&params.map(z)?, Some(n)))
            .collect::<Result<Vec<_>>>()?;
        frechet_distance(&self.real_summary, &self.projector.summarize(&fakes)?)
    }

    fn entry(&self, step: usize, params: &ToyGanParams, pl: (f64, PenaltyState)) -> Result<TrainLogEntry> {
        let n = self.real_batch.len().min(self.z.len());
        let losses = gan_losses(params, &self.real_batch, &self.z[..n], Some(&self.noise[..n]))?;
        let xs: Vec<&[f64]> = self.real_batch.iter().map(|i| i.pixels()).collect();
        let r1 = r1_penalty_with_grad(&params.discriminator, &xs, self.gamma.max(f64::MIN_POSITIVE))?.value;
        Ok(TrainLogEntry {
            step,
            loss_d: losses.discriminator,
            loss_g: losses.generator,
            r1,
            path_length: pl.0,
            path_length_ema: pl.1.path_length_ema,
            frechet: self.frechet(params)?,
        })
    }
}

fn check(step: usize, what: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DivergenceDetected { step, what })
    }
}

fn add_scaled(acc: &mut [f64], g: &[f64], s: f64) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += s * b;
    }
}

/// Trains a fresh model on `data` (single-channel images of the configured
/// size). Deterministic given the config. The returned generator is the
/// moving average of the trained weights; the discriminator is the final one.
pub fn train_toy_gan(cfg: &TrainConfig, data: &[Image]) -> Result<(ToyGanParams, TrainingLog)> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 2 images, got {}",
            data.len()
        )));
    }
    let size = cfg.architecture.image_size;
    if let Some(bad) = data.iter().find(|i| i.height() != size || i.width() != size) {
        return Err(Error::ShapeMismatch {
            expected: size * size,
            actual: bad.len(),
        });
    }
    let mut params = ToyGanParams::new(cfg.architecture, rng::substream(cfg.seed, 0).random())?;
    let mut rng: Rng = rng::substream(cfg.seed, 1);
    let eval = Evaluator::new(cfg, &params, data)?;

    let mut adam_d = AdamState::with_betas(params.discriminator.param_count(), 0.0, 0.99, 1e-8);
    let mut adam_m = AdamState::with_betas(params.mapping.param_count(), 0.0, 0.99, 1e-8);
    let mut adam_s = AdamState::with_betas(params.synthesis.param_count(), 0.0, 0.99, 1e-8);
    let mut pl_state = PenaltyState::new(cfg.pl_decay)?;
    let mut last_pl = 0.0;
    let k = cfg.lazy_k as f64;
    let mut log = TrainingLog::default();
    log.entries.push(eval.entry(0, &params, (last_pl, pl_state))?);
    let mut averaged = params.clone();

    for step in 0..cfg.steps {
        let lazy = step % cfg.lazy_k == 0;

        // discriminator
        let real: Vec<Image> = (0..cfg.batch_size)
            .map(|_| data[rng.random_range(0..data.len())].clone())
            .collect();
        let (z, noise) = sample_latents(&params, cfg.batch_size, &mut rng);
        let fake = z
            .iter()
            .zip(&noise)
            .map(|(z, n)| params.synthesize(&params.map(z)?, Some(n)))
            .collect::<Result<Vec<_>>>()?;
        let (loss_d, mut grad_d) = discriminator_loss_grad(&params, &real, &fake)?;
        check(step, "discriminator loss", loss_d)?;
        if lazy && cfg.gamma > 0.0 {
            let xs: Vec<&[f64]> = real.iter().map(|i| i.pixels()).collect();
            let r1 = r1_penalty_with_grad(&params.discriminator, &xs, cfg.gamma)?;
            check(step, "R1 penalty", r1.value)?;
            add_scaled(&mut grad_d, &r1.grad, k);
        }
        adam_step(&mut adam_d, &mut params.discriminator.params, &grad_d, cfg.lr_d)?;

        // generator
        let (z, noise) = sample_latents(&params, cfg.batch_size, &mut rng);
        let mut g = generator_loss_grad(&params, &z, &noise)?;
        check(step, "generator loss", g.loss)?;
        if lazy && cfg.pl_weight > 0.0 {
            let y: Vec<Vec<f64>> = (0..z.len())
                .map(|_| rng::normal_vec(&mut rng, params.synthesis.output_len()))
                .collect();
            let (pl, st) = path_length_penalty_with(&params.synthesis, &g.w_batch, &noise, &y, pl_state)?;
            last_pl = check(step, "path-length penalty", pl.value)?;
            pl_state = st;
            let pixels = params.synthesis.output_len() as f64;
            add_scaled(&mut g.synthesis, &pl.grad, cfg.pl_weight / pixels * k);
        }
        adam_step(&mut adam_m, &mut params.mapping.params, &g.mapping, cfg.lr_g * cfg.mapping_lr_scale)?;
        adam_step(&mut adam_s, &mut params.synthesis.params, &g.synthesis, cfg.lr_g)?;
        if !params.is_finite() {
            return Err(Error::DivergenceDetected { step, what: "parameters" });
        }
        let rate = 1.0 - cfg.g_ema_decay;
        for (avg, cur) in [(&mut averaged.mapping, &params.mapping), (&mut averaged.synthesis, &params.synthesis)] {
            for (a, c) in avg.params.iter_mut().zip(&cur.params) {
                *a += rate * (c - *a);
            }
        }
        averaged.discriminator.params.copy_from_slice(&params.discriminator.params);
        debug!("step {step}: L_D {loss_d:.4} L_G {:.4}", g.loss);

        let done = step + 1;
        if done % cfg.eval_every == 0 || done == cfg.steps {
            let e = eval.entry(done, &averaged, (last_pl, pl_state))?;
            info!(
                "step {done}: L_D {:.4} L_G {:.4} R1 {:.4} PL {:.4} Frechet {:.5}",
                e.loss_d, e.loss_g, e.r1, e.path_length, e.frechet
            );
            log.entries.push(e);
        }
    }
    Ok((averaged, log))
}

fn sample_latents(params: &ToyGanParams, n: usize, rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<Vec<NoiseMap>>) {
    let z = (0..n).map(|_| rng::normal_vec(rng, params.latent_dim())).collect();
    let noise = (0..n).map(|_| params.synthesis.random_noise(rng)).collect();
    (z, noise)
}
