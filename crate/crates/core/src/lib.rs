//! Latent-trajectory disease progression toolkit.
//!
//! A small regularized GAN is trained on joint images, images are embedded in
//! the generator's intermediate latent space by optimization, and the future
//! appearance of a knee is extrapolated from the trajectories of its nearest
//! neighbours in that space. Progression risk is scored from pairs of grade
//! probability vectors and evaluated with bootstrap and permutation statistics.

pub mod cohort;
pub mod error;
pub mod gan;
pub mod image;
pub mod inversion;
pub mod latent;
pub mod nn;
pub mod optim;
pub mod risk;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
