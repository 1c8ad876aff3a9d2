//! Toy style-based GAN: mapping network, noise-injected synthesis network and
//! discriminator, with the non-saturating losses, the R1 gradient penalty and
//! path-length regularization.

mod frechet;
mod io;
mod loss;
mod penalty;
mod train;

pub use frechet::{frechet_distance, FeatureProjector, GaussianSummary, FRECHET_FEATURES};
pub use io::{read_model, read_model_from, write_model, write_model_to, MODEL_MAGIC, MODEL_VERSION};
pub use loss::{
    discriminator_loss, discriminator_loss_from_logits, gan_losses, generator_loss,
    discriminator_loss_grad, generator_loss_from_logits, generator_loss_grad, GanLosses, GeneratorGrad,
    LossGrad, LOG_FLOOR,
};
pub use penalty::{
    path_length_penalty, path_length_penalty_with, r1_penalty, r1_penalty_with_grad, Penalty, PenaltyState,
    DEFAULT_GAMMA,
};
pub use train::{train_toy_gan, TrainConfig, TrainLogEntry, TrainingLog};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::latent::LatentVector;
use crate::nn::{Network, NetworkBuilder, NoiseMap, Shape};
use crate::rng;

/// Negative slope of every leaky rectifier in the model.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Layer widths of the toy model. The generator starts from a dense layer at
/// a quarter of the output side and doubles twice; the discriminator mirrors it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanArchitecture {
    pub latent_dim: usize,
    pub image_size: usize,
    pub base_channels: usize,
    pub mid_channels: usize,
    pub top_channels: usize,
    pub disc_channels: [usize; 2],
}

impl Default for GanArchitecture {
    fn default() -> Self {
        Self {
            latent_dim: crate::latent::DEFAULT_LATENT_DIM,
            image_size: 32,
            base_channels: 8,
            mid_channels: 8,
            top_channels: 4,
            disc_channels: [4, 8],
        }
    }
}

impl GanArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 2 {
            return Err(Error::InvalidArgument("latent_dim must be at least 2".into()));
        }
        if self.image_size < 4 || self.image_size % 4 != 0 {
            return Err(Error::InvalidArgument("image_size must be a positive multiple of 4".into()));
        }
        let widths = [
            self.base_channels,
            self.mid_channels,
            self.top_channels,
            self.disc_channels[0],
            self.disc_channels[1],
        ];
        if widths.contains(&0) {
            return Err(Error::InvalidArgument("channel counts must be positive".into()));
        }
        Ok(())
    }

    pub fn image_shape(&self) -> Shape {
        Shape::new(1, self.image_size, self.image_size)
    }

    pub fn mapping(&self) -> Network {
        let d = Shape::flat(self.latent_dim);
        NetworkBuilder::new(d)
            .dense(d)
            .leaky_relu(LEAKY_SLOPE)
            .dense(d)
            .leaky_relu(LEAKY_SLOPE)
            .build()
    }

    pub fn synthesis(&self) -> Network {
        let base = self.image_size / 4;
        NetworkBuilder::new(Shape::flat(self.latent_dim))
            .dense(Shape::new(self.base_channels, base, base))
            .leaky_relu(LEAKY_SLOPE)
            .upsample()
            .conv(self.mid_channels, 3)
            .noise()
            .leaky_relu(LEAKY_SLOPE)
            .upsample()
            .conv(self.top_channels, 3)
            .noise()
            .leaky_relu(LEAKY_SLOPE)
            .conv(1, 1)
            .sigmoid()
            .build()
    }

    pub fn discriminator(&self) -> Network {
        let [c1, c2] = self.disc_channels;
        NetworkBuilder::new(self.image_shape())
            .conv(c1, 3)
            .leaky_relu(LEAKY_SLOPE)
            .avg_pool()
            .conv(c2, 3)
            .leaky_relu(LEAKY_SLOPE)
            .avg_pool()
            .dense(Shape::flat(1))
            .build()
    }
}

/// Weights of the mapping network `f`, the synthesis network `G` and the
/// discriminator `D` (which outputs a logit).
#[derive(Clone, Debug, PartialEq)]
pub struct ToyGanParams {
    pub architecture: GanArchitecture,
    pub mapping: Network,
    pub synthesis: Network,
    pub discriminator: Network,
}

impl ToyGanParams {
    /// Fresh model: standard-normal weights, zero biases and noise strengths.
    pub fn new(architecture: GanArchitecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeroed(architecture)?;
        let mut rng = rng::seeded(seed);
        p.mapping.init(&mut rng);
        p.synthesis.init(&mut rng);
        p.discriminator.init(&mut rng);
        Ok(p)
    }

    /// Every weight zero.
    pub fn zeroed(architecture: GanArchitecture) -> Result<Self> {
        architecture.validate()?;
        Ok(Self {
            architecture,
            mapping: architecture.mapping(),
            synthesis: architecture.synthesis(),
            discriminator: architecture.discriminator(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.architecture.latent_dim
    }

    pub fn image_size(&self) -> usize {
        self.architecture.image_size
    }

    pub fn zero_noise(&self) -> Vec<NoiseMap> {
        self.synthesis.zero_noise()
    }

    pub fn is_finite(&self) -> bool {
        [&self.mapping, &self.synthesis, &self.discriminator]
            .iter()
            .all(|n| n.params.iter().all(|p| p.is_finite()))
    }

    /// `w = f(z)`.
    pub fn map(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.mapping.output(z, None)
    }

    /// Generator output for a raw latent slice.
    pub fn synthesize(&self, w: &[f64], noise: Option<&[NoiseMap]>) -> Result<Image> {
        let pixels = self.synthesis.output(w, noise)?;
        let s = self.image_size();
        Ok(Image::new(s, s, pixels)?.clamped())
    }

    pub fn discriminator_logit(&self, img: &Image) -> Result<f64> {
        Ok(self.discriminator.output(img.pixels(), None)?[0])
    }
}

/// `G(w, noise)`; pure in its inputs, pixels in [0, 1].
pub fn generator_forward(params: &ToyGanParams, w: &LatentVector, noise: &[NoiseMap]) -> Result<Image> {
    if w.dim() != params.latent_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.latent_dim(),
            actual: w.dim(),
        });
    }
    params.synthesize(w.as_slice(), Some(noise))
}
