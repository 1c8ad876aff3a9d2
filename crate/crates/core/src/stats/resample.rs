//! Percentile bootstrap and paired permutation test.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{percentile, ScoredCohort};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_REDRAWS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    /// Metric on the full cohort.
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub sd: f64,
    /// Resamples discarded because the metric was undefined on them.
    pub invalid_draws: usize,
}

/// 2.5/97.5 percentile interval and standard deviation of `metric` over
/// `redraws` resamples with replacement. Redraw `r` uses its own substream
/// of `seed`; resamples on which the metric fails (for example a single
/// class) are redrawn inside that substream and counted.
pub fn bootstrap_ci<F>(metric: F, cohort: &ScoredCohort, redraws: usize, seed: u64) -> Result<BootstrapCi>
where
    F: Fn(&ScoredCohort) -> Result<f64> + Sync,
{
    if redraws < MIN_REDRAWS {
        return Err(Error::TooFewRedraws(redraws));
    }
    let point = metric(cohort)?;
    let n = cohort.len();
    let draws: Vec<(Option<f64>, usize)> = (0..redraws)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::substream(seed, r as u64);
            let mut invalid = 0;
            // more than `redraws` failures in one slot already exceeds half of all attempts
            while invalid <= redraws {
                let idx: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
                let sample = cohort.select(&idx);
                if sample.has_both_classes() {
                    if let Ok(v) = metric(&sample) {
                        if v.is_finite() {
                            return (Some(v), invalid);
                        }
                    }
                }
                invalid += 1;
            }
            (None, invalid)
        })
        .collect();
    let invalid: usize = draws.iter().map(|d| d.1).sum();
    let attempts = redraws + invalid;
    if draws.iter().any(|d| d.0.is_none()) || 2 * invalid > attempts {
        return Err(Error::MetricUndefined { invalid, attempts });
    }
    let mut values: Vec<f64> = draws.iter().map(|d| d.0.unwrap()).collect();
    let mean = values.iter().sum::<f64>() / redraws as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (redraws - 1) as f64;
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        point,
        lo: percentile(&values, 0.025),
        hi: percentile(&values, 0.975),
        sd: var.sqrt(),
        invalid_draws: invalid,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    /// `metric(a) - metric(b)` on the observed predictions.
    pub observed_delta: f64,
    pub p_value: f64,
}

/// Two-sided paired permutation test: each permutation swaps the two models'
/// predictions for every sample independently with probability 1/2, and
/// `p = (1 + #{|delta_i| >= |delta|}) / (n_perm + 1)`.
pub fn permutation_pvalue<F>(
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[bool],
    metric: F,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationTest>
where
    F: Fn(&ScoredCohort) -> Result<f64> + Sync,
{
    if scores_a.len() != scores_b.len() {
        return Err(Error::LengthMismatch(scores_a.len(), scores_b.len()));
    }
    if scores_a.len() != labels.len() {
        return Err(Error::LengthMismatch(scores_a.len(), labels.len()));
    }
    if n_perm < MIN_REDRAWS {
        return Err(Error::TooFewRedraws(n_perm));
    }
    let delta = |a: Vec<f64>, b: Vec<f64>| -> Result<f64> {
        Ok(metric(&ScoredCohort::new(a, labels.to_vec())?)? - metric(&ScoredCohort::new(b, labels.to_vec())?)?)
    };
    let observed = delta(scores_a.to_vec(), scores_b.to_vec())?;
    let exceed: Vec<bool> = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::substream(seed, i as u64);
            let (mut a, mut b) = (scores_a.to_vec(), scores_b.to_vec());
            for j in 0..a.len() {
                if g.random_bool(0.5) {
                    std::mem::swap(&mut a[j], &mut b[j]);
                }
            }
            delta(a, b).map(|d| d.abs() >= observed.abs())
        })
        .collect::<Result<_>>()?;
    let count = exceed.iter().filter(|&&e| e).count();
    Ok(PermutationTest {
        observed_delta: observed,
        p_value: (1 + count) as f64 / (n_perm + 1) as f64,
    })
}
