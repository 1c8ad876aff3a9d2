//! Distance between deep embeddings of a fixed, seeded random conv net.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{Network, NetworkBuilder, Shape, Trace};
use crate::rng;

const EMBEDDER_SEED: u64 = 0x1b_5eed;
const SLOPE: f64 = 0.2;

/// Three conv stages; the distance compares the output of every stage.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualEmbedder {
    stages: Vec<Network>,
}

impl PerceptualEmbedder {
    /// `image` must have sides divisible by 4.
    pub fn new(image: Shape, seed: u64) -> Self {
        let mut g = rng::seeded(seed);
        let s1 = NetworkBuilder::new(image).conv(4, 3).leaky_relu(SLOPE).build();
        let s2 = NetworkBuilder::new(s1.output_shape())
            .avg_pool()
            .conv(8, 3)
            .leaky_relu(SLOPE)
            .build();
        let s3 = NetworkBuilder::new(s2.output_shape())
            .avg_pool()
            .conv(8, 3)
            .leaky_relu(SLOPE)
            .build();
        let mut stages = vec![s1, s2, s3];
        for s in &mut stages {
            s.init(&mut g);
        }
        Self { stages }
    }

    /// The shared embedder for single-channel images of this size.
    pub fn for_image(height: usize, width: usize) -> Self {
        Self::new(Shape::new(1, height, width), EMBEDDER_SEED)
    }

    pub fn input_len(&self) -> usize {
        self.stages[0].input_len()
    }

    fn traces(&self, x: &[f64]) -> Result<Vec<Trace>> {
        let mut out: Vec<Trace> = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            let input = out.last().map_or(x, |t| t.output());
            let t = s.forward(input, None)?;
            out.push(t);
        }
        Ok(out)
    }

    /// Per-stage feature maps.
    pub fn embed(&self, img: &Image) -> Result<Vec<Vec<f64>>> {
        Ok(self.traces(img.pixels())?.into_iter().map(Trace::into_output).collect())
    }

    /// `sqrt(sum over stages of mean squared feature difference)`.
    pub fn distance(&self, a: &Image, b: &Image) -> Result<f64> {
        a.same_shape(b)?;
        self.check(a)?;
        let (ea, eb) = (self.embed(a)?, self.embed(b)?);
        let s: f64 = ea
            .iter()
            .zip(&eb)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / x.len() as f64)
            .sum();
        Ok(s.sqrt())
    }

    /// Distance from `x` to a fixed embedded target and its gradient in `x`.
    /// The gradient is zero where the distance is zero.
    pub fn distance_grad(&self, target: &[Vec<f64>], x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let traces = self.traces(x)?;
        let mut s = 0.0;
        let mut diffs = Vec::with_capacity(traces.len());
        for (t, y) in traces.iter().zip(target) {
            let n = y.len() as f64;
            let d: Vec<f64> = t.output().iter().zip(y).map(|(p, q)| p - q).collect();
            s += d.iter().map(|v| v * v).sum::<f64>() / n;
            diffs.push((d, n));
        }
        let dist = s.sqrt();
        if dist == 0.0 {
            return Ok((0.0, vec![0.0; x.len()]));
        }
        // d dist / d phi_l = (phi_l - target_l) / (n_l * dist)
        let mut carry: Option<Vec<f64>> = None;
        for (i, stage) in self.stages.iter().enumerate().rev() {
            let (d, n) = &diffs[i];
            let mut g: Vec<f64> = d.iter().map(|v| v / (n * dist)).collect();
            if let Some(c) = carry {
                for (a, b) in g.iter_mut().zip(c) {
                    *a += b;
                }
            }
            carry = Some(stage.backward(&traces[i], &g, None, None, None));
        }
        Ok((dist, carry.expect("three stages")))
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                actual: img.len(),
            });
        }
        Ok(())
    }
}

/// Distance under the shared embedder for the images' size.
pub fn perceptual_distance(img_a: &Image, img_b: &Image) -> Result<f64> {
    img_a.same_shape(img_b)?;
    if img_a.height() % 4 != 0 || img_a.width() % 4 != 0 || img_a.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "perceptual distance needs sides divisible by 4, got {}x{}",
            img_a.height(),
            img_a.width()
        )));
    }
    PerceptualEmbedder::for_image(img_a.height(), img_a.width()).distance(img_a, img_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testing::{numeric_grad, relative_error};

    fn random(seed: u64, n: usize) -> Image {
        let mut g = rng::seeded(seed);
        Image::new(n, n, (0..n * n).map(|_| 0.5 + 0.2 * rng::normal(&mut g)).collect()).unwrap()
    }

    #[test]
    fn identity_and_symmetry() {
        let (a, b) = (random(1, 16), random(2, 16));
        assert_eq!(perceptual_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(perceptual_distance(&a, &b).unwrap(), perceptual_distance(&b, &a).unwrap());
        assert!(perceptual_distance(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            perceptual_distance(&random(1, 16), &random(1, 8)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn increases_along_a_blend() {
        for seed in 0..10 {
            let target = random(seed, 16);
            let other = random(seed + 100, 16);
            let mut last = 0.0;
            for k in 1..=10 {
                let t = k as f64 / 10.0;
                let px = target.pixels().iter().zip(other.pixels()).map(|(a, b)| a + t * (b - a)).collect();
                let d = perceptual_distance(&target, &Image::new(16, 16, px).unwrap()).unwrap();
                assert!(d > last);
                last = d;
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let e = PerceptualEmbedder::for_image(8, 8);
        let target = e.embed(&random(3, 8)).unwrap();
        let mut x = random(4, 8).into_pixels();
        let (_, g) = e.distance_grad(&target, &x).unwrap();
        let n = numeric_grad(&mut x, 1e-6, |v| e.distance_grad(&target, v).unwrap().0);
        assert!(relative_error(&g, &n) < 1e-4);
    }
}
