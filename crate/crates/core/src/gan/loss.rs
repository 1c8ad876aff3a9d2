//! Non-saturating logistic GAN losses with a floor inside the logarithms.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{sigmoid, NoiseMap};

use super::ToyGanParams;

/// Lower bound applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-7;

/// A batch-mean loss and its derivative with respect to each logit.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanLosses {
    pub discriminator: f64,
    pub generator: f64,
}

/// `-ln max(sigmoid(l), floor)` and its derivative in `l`.
fn neg_log_sigmoid(l: f64) -> (f64, f64) {
    let p = sigmoid(l);
    if p > LOG_FLOOR {
        (-p.ln(), -sigmoid(-l))
    } else {
        (-LOG_FLOOR.ln(), 0.0)
    }
}

fn mean_terms(logits: &[f64], sign: f64) -> Result<LossGrad> {
    if logits.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = logits.len() as f64;
    let mut value = 0.0;
    let grad = logits
        .iter()
        .map(|&l| {
            let (v, d) = neg_log_sigmoid(sign * l);
            value += v;
            sign * d / n
        })
        .collect();
    Ok(LossGrad { value: value / n, grad })
}

/// `mean[-log D(x_real)] + mean[-log(1 - D(G(z)))]` on logits; gradients are
/// returned for the real logits followed by the fake logits.
pub fn discriminator_loss_from_logits(real: &[f64], fake: &[f64]) -> Result<LossGrad> {
    let r = mean_terms(real, 1.0)?;
    let f = mean_terms(fake, -1.0)?;
    let mut grad = r.grad;
    grad.extend(f.grad);
    Ok(LossGrad {
        value: r.value + f.value,
        grad,
    })
}

/// `mean[-log D(G(z))]` on the fake logits.
pub fn generator_loss_from_logits(fake: &[f64]) -> Result<LossGrad> {
    mean_terms(fake, 1.0)
}

fn logits(params: &ToyGanParams, images: &[Image]) -> Result<Vec<f64>> {
    images.iter().map(|img| params.discriminator_logit(img)).collect()
}

fn fakes(params: &ToyGanParams, z_batch: &[Vec<f64>], noise: Option<&[Vec<NoiseMap>]>) -> Result<Vec<Image>> {
    z_batch
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let w = params.map(z)?;
            params.synthesize(&w, noise.map(|n| n[i].as_slice()))
        })
        .collect()
}

pub fn discriminator_loss(params: &ToyGanParams, real: &[Image], fake: &[Image]) -> Result<f64> {
    Ok(discriminator_loss_from_logits(&logits(params, real)?, &logits(params, fake)?)?.value)
}

pub fn generator_loss(params: &ToyGanParams, fake: &[Image]) -> Result<f64> {
    Ok(generator_loss_from_logits(&logits(params, fake)?)?.value)
}

/// Both losses for a real batch and a batch of input latents `z`, generated
/// with the given per-sample noise maps (zero noise when `None`).
pub fn gan_losses(
    params: &ToyGanParams,
    real_batch: &[Image],
    z_batch: &[Vec<f64>],
    noise: Option<&[Vec<NoiseMap>]>,
) -> Result<GanLosses> {
    if real_batch.is_empty() || z_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some(n) = noise {
        if n.len() != z_batch.len() {
            return Err(Error::LengthMismatch(z_batch.len(), n.len()));
        }
    }
    let fake = fakes(params, z_batch, noise)?;
    let fake_logits = logits(params, &fake)?;
    let real_logits = logits(params, real_batch)?;
    Ok(GanLosses {
        discriminator: discriminator_loss_from_logits(&real_logits, &fake_logits)?.value,
        generator: generator_loss_from_logits(&fake_logits)?.value,
    })
}

/// `L_D` and its gradient with respect to the discriminator parameters.
pub fn discriminator_loss_grad(params: &ToyGanParams, real: &[Image], fake: &[Image]) -> Result<(f64, Vec<f64>)> {
    let disc = &params.discriminator;
    let mut traces = Vec::with_capacity(real.len() + fake.len());
    for img in real.iter().chain(fake) {
        traces.push(disc.forward(img.pixels(), None)?);
    }
    let ls: Vec<f64> = traces.iter().map(|t| t.output()[0]).collect();
    let loss = discriminator_loss_from_logits(&ls[..real.len()], &ls[real.len()..])?;
    let mut grad = vec![0.0; disc.param_count()];
    for (t, &g) in traces.iter().zip(&loss.grad) {
        if g != 0.0 {
            disc.backward(t, &[g], None, Some(&mut grad), None);
        }
    }
    Ok((loss.value, grad))
}

/// Gradients of `L_G` for one generator batch.
#[derive(Clone, Debug)]
pub struct GeneratorGrad {
    pub loss: f64,
    pub mapping: Vec<f64>,
    pub synthesis: Vec<f64>,
    /// Intermediate latents `w = f(z)` of the batch, reused by the path-length term.
    pub w_batch: Vec<Vec<f64>>,
}

/// `L_G` and its gradient with respect to the mapping and synthesis parameters.
pub fn generator_loss_grad(
    params: &ToyGanParams,
    z_batch: &[Vec<f64>],
    noise: &[Vec<NoiseMap>],
) -> Result<GeneratorGrad> {
    if z_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if noise.len() != z_batch.len() {
        return Err(Error::LengthMismatch(z_batch.len(), noise.len()));
    }
    let mut map_traces = Vec::with_capacity(z_batch.len());
    let mut syn_traces = Vec::with_capacity(z_batch.len());
    let mut disc_traces = Vec::with_capacity(z_batch.len());
    for (z, n) in z_batch.iter().zip(noise) {
        let mt = params.mapping.forward(z, None)?;
        let st = params.synthesis.forward(mt.output(), Some(n))?;
        let dt = params.discriminator.forward(st.output(), None)?;
        map_traces.push(mt);
        syn_traces.push(st);
        disc_traces.push(dt);
    }
    let ls: Vec<f64> = disc_traces.iter().map(|t| t.output()[0]).collect();
    let loss = generator_loss_from_logits(&ls)?;
    let mut g_map = vec![0.0; params.mapping.param_count()];
    let mut g_syn = vec![0.0; params.synthesis.param_count()];
    for i in 0..z_batch.len() {
        let g = loss.grad[i];
        if g == 0.0 {
            continue;
        }
        let gx = params.discriminator.backward(&disc_traces[i], &[g], None, None, None);
        let gw = params
            .synthesis
            .backward(&syn_traces[i], &gx, Some(&noise[i]), Some(&mut g_syn), None);
        params.mapping.backward(&map_traces[i], &gw, None, Some(&mut g_map), None);
    }
    Ok(GeneratorGrad {
        loss: loss.value,
        mapping: g_map,
        synthesis: g_syn,
        w_batch: map_traces.into_iter().map(|t| t.into_output()).collect(),
    })
}
