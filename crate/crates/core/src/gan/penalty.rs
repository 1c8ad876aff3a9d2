//! R1 gradient penalty on real samples and path-length regularization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{Network, NoiseMap};
use crate::rng::{self, Rng};

use super::ToyGanParams;

/// Default R1 weight.
pub const DEFAULT_GAMMA: f64 = 10.0;

/// A penalty value and its gradient with respect to one network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Penalty {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Running average `a` of the path length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyState {
    pub path_length_ema: f64,
    pub ema_decay: f64,
}

impl Default for PenaltyState {
    fn default() -> Self {
        Self {
            path_length_ema: 0.0,
            ema_decay: 0.99,
        }
    }
}

impl PenaltyState {
    pub fn new(ema_decay: f64) -> Result<Self> {
        if !(ema_decay > 0.0 && ema_decay < 1.0) {
            return Err(Error::InvalidArgument(format!("ema decay {ema_decay} outside (0, 1)")));
        }
        Ok(Self {
            path_length_ema: 0.0,
            ema_decay,
        })
    }

    /// A zero average means nothing has been observed yet; the first batch
    /// mean then seeds it instead of being shrunk toward zero.
    fn updated(self, batch_mean: f64) -> Self {
        let path_length_ema = if self.path_length_ema == 0.0 {
            batch_mean
        } else {
            self.ema_decay * self.path_length_ema + (1.0 - self.ema_decay) * batch_mean
        };
        Self { path_length_ema, ..self }
    }
}

/// `(gamma/2) * mean ||grad_x D(x)||^2` over real images, with `D` the
/// discriminator logit, plus its parameter gradient.
pub fn r1_penalty_with_grad(disc: &Network, real: &[&[f64]], gamma: f64) -> Result<Penalty> {
    if real.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if disc.output_len() != 1 {
        return Err(Error::ShapeMismatch {
            expected: 1,
            actual: disc.output_len(),
        });
    }
    let b = real.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; disc.param_count()];
    for x in real {
        let trace = disc.forward(x, None)?;
        let g = disc.backward(&trace, &[1.0], None, None, None);
        value += g.iter().map(|v| v * v).sum::<f64>();
        // d/dθ ||g||^2 = 2 d/dθ (J g) with the tangent g held fixed
        let dual = disc.forward_dual(x, &g, None)?;
        disc.backward_dual(&dual, &[0.0], &[gamma / b], None, Some(&mut grad));
    }
    Ok(Penalty {
        value: 0.5 * gamma * value / b,
        grad,
    })
}

/// R1 penalty of the model's discriminator on a batch of real images.
pub fn r1_penalty(params: &ToyGanParams, real_batch: &[Image], gamma: f64) -> Result<f64> {
    let xs: Vec<&[f64]> = real_batch.iter().map(|i| i.pixels()).collect();
    Ok(r1_penalty_with_grad(&params.discriminator, &xs, gamma)?.value)
}

/// Path-length penalty for given noise maps and projection images `y`.
///
/// The running average is updated with this batch's mean length first and
/// the penalty `mean (||J_w^T y|| - a)^2` is taken against the updated value.
/// The gradient is with respect to the synthesis parameters.
pub fn path_length_penalty_with(
    synthesis: &Network,
    w_batch: &[Vec<f64>],
    noise: &[Vec<NoiseMap>],
    y_batch: &[Vec<f64>],
    state: PenaltyState,
) -> Result<(Penalty, PenaltyState)> {
    if w_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if noise.len() != w_batch.len() {
        return Err(Error::LengthMismatch(w_batch.len(), noise.len()));
    }
    if y_batch.len() != w_batch.len() {
        return Err(Error::LengthMismatch(w_batch.len(), y_batch.len()));
    }
    let mut jty = Vec::with_capacity(w_batch.len());
    for ((w, n), y) in w_batch.iter().zip(noise).zip(y_batch) {
        if y.len() != synthesis.output_len() {
            return Err(Error::ShapeMismatch {
                expected: synthesis.output_len(),
                actual: y.len(),
            });
        }
        let trace = synthesis.forward(w, Some(n))?;
        jty.push(synthesis.backward(&trace, y, Some(n), None, None));
    }
    let lengths: Vec<f64> = jty.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let b = w_batch.len() as f64;
    let state = state.updated(lengths.iter().sum::<f64>() / b);
    let a = state.path_length_ema;
    let value = lengths.iter().map(|l| (l - a).powi(2)).sum::<f64>() / b;

    let mut grad = vec![0.0; synthesis.param_count()];
    for i in 0..w_batch.len() {
        let l = lengths[i];
        if l == 0.0 {
            continue;
        }
        let c = 2.0 * (l - a) / (l * b);
        let gy: Vec<f64> = y_batch[i].iter().map(|v| c * v).collect();
        let dual = synthesis.forward_dual(&w_batch[i], &jty[i], Some(&noise[i]))?;
        let zeros = vec![0.0; synthesis.output_len()];
        synthesis.backward_dual(&dual, &zeros, &gy, Some(&noise[i]), Some(&mut grad));
    }
    Ok((Penalty { value, grad }, state))
}

/// Path-length penalty with one standard-normal `y` of image shape drawn per
/// sample, using zero noise maps.
pub fn path_length_penalty(
    params: &ToyGanParams,
    w_batch: &[Vec<f64>],
    state: PenaltyState,
    rng: &mut Rng,
) -> Result<(f64, PenaltyState)> {
    let syn = &params.synthesis;
    let y: Vec<Vec<f64>> = w_batch.iter().map(|_| rng::normal_vec(rng, syn.output_len())).collect();
    let noise = vec![syn.zero_noise(); w_batch.len()];
    let (p, s) = path_length_penalty_with(syn, w_batch, &noise, &y, state)?;
    Ok((p.value, s))
}
