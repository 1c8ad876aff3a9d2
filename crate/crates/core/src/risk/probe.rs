//! One-hidden-layer softmax classifier on latent vectors.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ProbabilityVector;
use crate::error::{Error, Result};
use crate::latent::LatentVector;
use crate::nn::{Network, NetworkBuilder, Shape};
use crate::optim::{adam_step, AdamState};
use crate::rng;

/// KOOS at or below this value counts as pain.
pub const KOOS_PAIN_THRESHOLD: f64 = 86.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeTask {
    /// Five grade classes.
    Kls,
    /// Binary pain indicator.
    Pain,
}

impl ProbeTask {
    pub fn classes(self) -> usize {
        match self {
            ProbeTask::Kls => super::GRADES,
            ProbeTask::Pain => 2,
        }
    }
}

pub fn pain_label(koos: f64) -> bool {
    koos <= KOOS_PAIN_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 32,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEpoch {
    pub train_loss: f64,
    /// `None` when no validation split was held out.
    pub validation_loss: Option<f64>,
}

/// Standardizes its input with stored per-coordinate statistics, then
/// applies `dense -> relu -> dense -> softmax`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentProbe {
    task: ProbeTask,
    mean: Vec<f64>,
    scale: Vec<f64>,
    network: Network,
    pub log: Vec<ProbeEpoch>,
}

fn architecture(dim: usize, hidden: usize, classes: usize) -> Network {
    NetworkBuilder::new(Shape::flat(dim))
        .dense(Shape::flat(hidden))
        .leaky_relu(0.0)
        .dense(Shape::flat(classes))
        .build()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl LatentProbe {
    /// Builds a probe from explicit parts. `network` must map `mean.len()`
    /// inputs to the task's class count.
    pub fn from_parts(task: ProbeTask, mean: Vec<f64>, scale: Vec<f64>, network: Network) -> Result<Self> {
        if scale.len() != mean.len() || network.input_len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: network.input_len().min(scale.len()),
            });
        }
        if network.output_len() != task.classes() {
            return Err(Error::ShapeMismatch {
                expected: task.classes(),
                actual: network.output_len(),
            });
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) || network.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("probe parts must be finite with positive scales".into()));
        }
        Ok(Self {
            task,
            mean,
            scale,
            network,
            log: Vec::new(),
        })
    }

    /// A probe with identity standardization and all weights zero.
    pub fn zeroed(task: ProbeTask, dim: usize, hidden: usize) -> Self {
        Self {
            task,
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
            network: architecture(dim, hidden, task.classes()),
            log: Vec::new(),
        }
    }

    pub fn task(&self) -> ProbeTask {
        self.task
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    fn standardize(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    /// Class probabilities for a raw latent slice.
    pub fn predict_proba(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: w.len(),
            });
        }
        Ok(softmax(&self.network.output(&self.standardize(w), None)?))
    }

    /// Mean cross-entropy over `(latent, class)` pairs.
    pub fn loss(&self, xs: &[&[f64]], labels: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            total -= self.predict_proba(x)?[y].max(f64::MIN_POSITIVE).ln();
        }
        Ok(total / xs.len().max(1) as f64)
    }

    pub fn accuracy(&self, xs: &[&[f64]], labels: &[usize]) -> Result<f64> {
        let mut hits = 0;
        for (x, &y) in xs.iter().zip(labels) {
            let p = self.predict_proba(x)?;
            let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
            hits += usize::from(best == y);
        }
        Ok(hits as f64 / xs.len().max(1) as f64)
    }
}

/// Grade distribution for a latent; only defined for grade probes.
pub fn probe_predict(probe: &LatentProbe, w: &LatentVector) -> Result<ProbabilityVector> {
    if probe.task != ProbeTask::Kls {
        return Err(Error::InvalidArgument("probe_predict needs a grade probe".into()));
    }
    ProbabilityVector::new(&probe.predict_proba(w.as_slice())?)
}

/// Cross-entropy training with Adam on shuffled minibatches. A seeded
/// `validation_fraction` of the samples is held out for the loss log.
pub fn train_latent_probe(
    latents: &[LatentVector],
    labels: &[usize],
    task: ProbeTask,
    cfg: &ProbeConfig,
) -> Result<LatentProbe> {
    if latents.len() != labels.len() {
        return Err(Error::LengthMismatch(latents.len(), labels.len()));
    }
    if latents.len() < 2 {
        return Err(Error::InsufficientData(format!("probe needs at least 2 samples, got {}", latents.len())));
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Error::InvalidArgument("probe config out of range".into()));
    }
    let k = task.classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidGrade(bad as i64));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::DegenerateLabels);
    }
    let d = latents[0].dim();
    if let Some(bad) = latents.iter().find(|w| w.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.dim(),
        });
    }

    let mut order: Vec<usize> = (0..latents.len()).collect();
    order.shuffle(&mut rng::substream(cfg.seed, 0));
    let n_val = (latents.len() as f64 * cfg.validation_fraction).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let n = train_idx.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in &train_idx {
        for (m, x) in mean.iter_mut().zip(latents[i].as_slice()) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; d];
    for &i in &train_idx {
        for ((s, x), m) in scale.iter_mut().zip(latents[i].as_slice()).zip(&mean) {
            *s += (x - m).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }

    let mut network = architecture(d, cfg.hidden, k);
    let mut init_rng = rng::substream(cfg.seed, 1);
    network.init(&mut init_rng);
    let mut probe = LatentProbe {
        task,
        mean,
        scale,
        network,
        log: Vec::with_capacity(cfg.epochs),
    };
    let inputs: Vec<Vec<f64>> = latents.iter().map(|w| probe.standardize(w.as_slice())).collect();
    let val_x: Vec<&[f64]> = val_idx.iter().map(|&i| latents[i].as_slice()).collect();
    let val_y: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut adam = AdamState::new(probe.network.param_count());
    let mut shuffle_rng = rng::substream(cfg.seed, 2);
    let mut grad = vec![0.0; probe.network.param_count()];
    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let b = batch.len() as f64;
            for &i in batch {
                let trace = probe.network.forward(&inputs[i], None)?;
                let mut p = softmax(trace.output());
                epoch_loss -= p[labels[i]].max(f64::MIN_POSITIVE).ln();
                p[labels[i]] -= 1.0;
                p.iter_mut().for_each(|v| *v /= b);
                probe.network.backward(&trace, &p, None, Some(&mut grad), None);
            }
            adam_step(&mut adam, &mut probe.network.params, &grad, cfg.learning_rate)?;
        }
        let train_loss = epoch_loss / n;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        let validation_loss = if val_x.is_empty() {
            None
        } else {
            Some(probe.loss(&val_x, &val_y)?)
        };
        probe.log.push(ProbeEpoch {
            train_loss,
            validation_loss,
        });
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters(n: usize, seed: u64) -> (Vec<LatentVector>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let mut v = rng::normal_vec(&mut r, 6);
            v.iter_mut().for_each(|x| *x *= 0.3);
            v[0] += if y == 1 { 2.0 } else { -2.0 };
            xs.push(LatentVector::new(v).unwrap());
            ys.push(y);
        }
        (xs, ys)
    }

    fn quick() -> ProbeConfig {
        ProbeConfig {
            hidden: 8,
            epochs: 30,
            learning_rate: 1e-2,
            ..Default::default()
        }
    }

    #[test]
    fn separable_clusters_are_learned() {
        let (xs, ys) = clusters(100, 1);
        let p = train_latent_probe(&xs, &ys, ProbeTask::Pain, &quick()).unwrap();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        assert!(p.accuracy(&refs, &ys).unwrap() >= 0.99);
        assert_eq!(p.log.len(), 30);
        assert!(p.log.last().unwrap().validation_loss.is_some());
    }

    #[test]
    fn deterministic_given_seed() {
        let (xs, ys) = clusters(40, 2);
        let a = train_latent_probe(&xs, &ys, ProbeTask::Kls, &quick()).unwrap();
        let b = train_latent_probe(&xs, &ys, ProbeTask::Kls, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn precondition_errors() {
        let (xs, _) = clusters(10, 3);
        assert!(matches!(
            train_latent_probe(&xs, &[1; 10], ProbeTask::Kls, &quick()),
            Err(Error::DegenerateLabels)
        ));
        assert!(matches!(
            train_latent_probe(&xs[..1], &[0], ProbeTask::Kls, &quick()),
            Err(Error::InsufficientData(_))
        ));
        let mut labels = vec![0; 10];
        labels[3] = 2;
        assert!(train_latent_probe(&xs, &labels, ProbeTask::Pain, &quick()).is_err());
    }

    #[test]
    fn zero_probe_is_uniform() {
        let p = LatentProbe::zeroed(ProbeTask::Kls, 4, 3);
        let w = LatentVector::new(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let q = probe_predict(&p, &w).unwrap();
        assert!(q.as_array().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn outputs_are_distributions() {
        let (xs, ys) = clusters(30, 4);
        let labels: Vec<usize> = ys.iter().enumerate().map(|(i, y)| y + 2 * (i % 3 == 0) as usize).collect();
        let p = train_latent_probe(&xs, &labels, ProbeTask::Kls, &quick()).unwrap();
        let mut r = rng::seeded(9);
        for _ in 0..20 {
            let w = LatentVector::new(rng::normal_vec(&mut r, 6)).unwrap();
            let s: f64 = probe_predict(&p, &w).unwrap().as_array().iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn hand_evaluated_tiny_probe() {
        // one hidden unit h = relu(x0 + x1) (gain 1/sqrt 2), logits = (h, -h) with gain 1
        let mut net = architecture(2, 1, 2);
        let s = 2f64.sqrt();
        net.params[..2].copy_from_slice(&[s, s]);
        net.params[3..5].copy_from_slice(&[1.0, -1.0]);
        let p = LatentProbe::from_parts(ProbeTask::Pain, vec![0.0; 2], vec![1.0; 2], net).unwrap();
        let h: f64 = 0.7 + 0.4;
        let expect = 1.0 / (1.0 + (-2.0 * h).exp());
        let got = p.predict_proba(&[0.7, 0.4]).unwrap();
        assert!((got[0] - expect).abs() < 1e-12);
        let neg = p.predict_proba(&[-0.7, -0.4]).unwrap();
        assert_eq!(neg, vec![0.5, 0.5]);
    }
}
