//! Synthetic joint images: two bright bands around a dark joint space whose
//! width narrows over time for planted progressors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::latent::VisitMeta;
use crate::latent::{KneeKey, Side};
use crate::rng;

pub const JOINT_SIZE: usize = 32;
pub const MIN_GAP: f64 = 1.0;
pub const MAX_GAP: f64 = 10.0;
pub const DEFAULT_VISITS: [u32; 6] = [0, 12, 24, 48, 72, 96];

const DARK: f64 = 0.08;
const TEXTURE: f64 = 0.015;
const DEFAULT_BRIGHTNESS: f64 = 0.75;

/// Baseline gaps. Progressors start in the widest grade and stable knees
/// below it, so progression is predictable from the baseline image.
const PROGRESSOR_BASELINE: std::ops::RangeInclusive<f64> = 8.2..=9.8;
const STABLE_BASELINE: std::ops::RangeInclusive<f64> = 1.5..=8.0;

/// Grade analog: (8,10]→0, (6,8]→1, (4,6]→2, (2,4]→3, [1,2]→4.
pub fn gap_bucket(gap: f64) -> Result<u8> {
    if !(MIN_GAP..=MAX_GAP).contains(&gap) {
        return Err(Error::GapOutOfRange(gap));
    }
    Ok(match gap {
        g if g > 8.0 => 0,
        g if g > 6.0 => 1,
        g if g > 4.0 => 2,
        g if g > 2.0 => 3,
        _ => 4,
    })
}

/// Renders a joint with the default band brightness.
pub fn render_joint(gap: f64, jitter_seed: u64) -> Result<Image> {
    render_joint_with(gap, DEFAULT_BRIGHTNESS, jitter_seed)
}

/// Bands of the given peak brightness, brightest next to the joint space,
/// separated by `gap` rows of dark space. The space bows slightly downward
/// toward the edges and its borders are antialiased by row coverage.
pub fn render_joint_with(gap: f64, brightness: f64, jitter_seed: u64) -> Result<Image> {
    if !(MIN_GAP..=MAX_GAP).contains(&gap) || !gap.is_finite() {
        return Err(Error::GapOutOfRange(gap));
    }
    let n = JOINT_SIZE;
    let half = n as f64 / 2.0;
    let mut r = rng::seeded(jitter_seed);
    let mut pixels = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let u = (col as f64 + 0.5 - half) / half;
            let center = half + 1.5 * u * u - 0.5;
            let (lo, hi) = (center - gap / 2.0, center + gap / 2.0);
            let top = row as f64;
            let coverage = (hi.min(top + 1.0) - lo.max(top)).clamp(0.0, 1.0);
            let dist = ((top + 0.5) - center).abs() - gap / 2.0;
            let band = brightness * (0.7 + 0.3 * (-dist.max(0.0) / 6.0).exp());
            let v = band * (1.0 - coverage) + DARK * coverage + TEXTURE * rng::normal(&mut r);
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    Image::new(n, n, pixels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubject {
    pub subject_id: String,
    pub side: Side,
    pub progressor: bool,
    pub gap_baseline: f64,
    pub gap_final: f64,
    pub horizon_months: u32,
    pub brightness: f64,
    pub noise_seed: u64,
}

impl SyntheticSubject {
    pub fn key(&self) -> KneeKey {
        KneeKey {
            subject_id: self.subject_id.clone(),
            side: self.side,
        }
    }

    /// Linear interpolation between the baseline and final gap, held after the horizon.
    pub fn gap_at(&self, month: u32) -> f64 {
        if self.horizon_months == 0 {
            return self.gap_baseline;
        }
        let t = (month as f64 / self.horizon_months as f64).min(1.0);
        self.gap_baseline + t * (self.gap_final - self.gap_baseline)
    }

    pub fn render(&self, month: u32) -> Result<Image> {
        render_joint_with(
            self.gap_at(month),
            self.brightness,
            self.noise_seed.wrapping_add(month as u64),
        )
    }
}

#[derive(Clone, Debug)]
pub struct SimulatedVisit {
    pub meta: VisitMeta,
    pub gap: f64,
    pub image: Image,
}

#[derive(Clone, Debug)]
pub struct Cohort {
    pub subjects: Vec<SyntheticSubject>,
    /// Ordered by subject, then visit month.
    pub visits: Vec<SimulatedVisit>,
}

impl Cohort {
    /// Planted progression labels per knee.
    pub fn labels(&self) -> BTreeMap<KneeKey, bool> {
        self.subjects.iter().map(|s| (s.key(), s.progressor)).collect()
    }

    pub fn metadata(&self) -> Vec<VisitMeta> {
        self.visits.iter().map(|v| v.meta.clone()).collect()
    }
}

/// One knee per subject, sides alternating. Exactly `round(n * fraction)`
/// subjects progress, chosen by a seeded shuffle.
pub fn simulate_cohort(n_subjects: usize, progressor_fraction: f64, visits: &[u32], seed: u64) -> Result<Cohort> {
    if n_subjects < 10 {
        return Err(Error::InvalidCount(format!("cohort needs at least 10 subjects, got {n_subjects}")));
    }
    if !(0.0..=1.0).contains(&progressor_fraction) {
        return Err(Error::InvalidFraction(progressor_fraction));
    }
    let mut months = visits.to_vec();
    months.sort_unstable();
    months.dedup();
    if months.first() != Some(&0) {
        return Err(Error::InvalidArgument("visit schedule must include month 0".into()));
    }
    let horizon = *months.last().unwrap();

    let n_prog = (n_subjects as f64 * progressor_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n_subjects).collect();
    order.shuffle(&mut rng::substream(seed, u64::MAX));
    let mut progressor = vec![false; n_subjects];
    for &i in &order[..n_prog] {
        progressor[i] = true;
    }

    let mut subjects = Vec::with_capacity(n_subjects);
    let mut out = Vec::with_capacity(n_subjects * months.len());
    for (i, &prog) in progressor.iter().enumerate() {
        let mut r = rng::substream(seed, i as u64);
        let (g0, g1) = if prog {
            let g0 = r.random_range(PROGRESSOR_BASELINE);
            (g0, g0 - r.random_range(4.5..=5.5))
        } else {
            let g0 = r.random_range(STABLE_BASELINE);
            (g0, g0 * (1.0 + r.random_range(-0.04..=0.04)))
        };
        let subject = SyntheticSubject {
            subject_id: format!("S{i:04}"),
            side: if i % 2 == 0 { Side::Right } else { Side::Left },
            progressor: prog,
            gap_baseline: g0,
            gap_final: g1,
            horizon_months: horizon,
            brightness: r.random_range(0.65..=0.85),
            noise_seed: r.random(),
        };
        for &m in &months {
            let gap = subject.gap_at(m);
            out.push(SimulatedVisit {
                meta: VisitMeta {
                    subject_id: subject.subject_id.clone(),
                    side: subject.side,
                    visit_month: m,
                    kls: Some(gap_bucket(gap)?),
                },
                gap,
                image: subject.render(m)?,
            });
        }
        subjects.push(subject);
    }
    Ok(Cohort { subjects, visits: out })
}
