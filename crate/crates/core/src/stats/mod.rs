//! Discrimination, agreement and image-similarity statistics.

mod agreement;
mod resample;
mod similarity;

pub use agreement::{cohens_kappa, fleiss_kappa};
pub use resample::{bootstrap_ci, permutation_pvalue, BootstrapCi, PermutationTest};
pub use similarity::{ssim, DEFAULT_SSIM_WINDOW};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores with binary labels (`true` = progressor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCohort {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredCohort {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch(scores.len(), labels.len()));
        }
        if scores.len() < 2 {
            return Err(Error::TooFewItems(scores.len()));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("score {s} is not finite")));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    fn require_both(&self) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(Error::SingleClass)
        }
    }

    /// Subset by index, repeats allowed.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            scores: idx.iter().map(|&i| self.scores[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half; computed from average ranks.
pub fn roc_auc(cohort: &ScoredCohort) -> Result<f64> {
    cohort.require_both()?;
    let n = cohort.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cohort.scores[a].total_cmp(&cohort.scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && cohort.scores[order[j + 1]] == cohort.scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| cohort.labels[k]).count() as f64;
        i = j + 1;
    }
    let p = cohort.positives() as f64;
    let q = (n - cohort.positives()) as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Threshold minimizing `(1 - sens)^2 + (1 - spec)^2`, with scores strictly
/// above the threshold called positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub objective: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Scans `-inf`, the midpoints between consecutive distinct scores and
/// `+inf`. Objective ties go to the higher specificity, then the lower threshold.
pub fn optimal_cutoff(cohort: &ScoredCohort) -> Result<Cutoff> {
    cohort.require_both()?;
    let mut uniq = cohort.scores.clone();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    candidates.extend(uniq.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    candidates.push(f64::INFINITY);

    let pos = cohort.positives();
    let neg = cohort.len() - pos;
    let mut best: Option<Cutoff> = None;
    for t in candidates {
        let (mut tp, mut fp) = (0, 0);
        for (&s, &l) in cohort.scores.iter().zip(&cohort.labels) {
            if s > t {
                if l {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let sens = tp as f64 / pos as f64;
        let spec = (neg - fp) as f64 / neg as f64;
        let c = Cutoff {
            threshold: t,
            sensitivity: sens,
            specificity: spec,
            objective: (1.0 - sens).powi(2) + (1.0 - spec).powi(2),
            true_positives: tp,
            false_positives: fp,
            true_negatives: neg - fp,
            false_negatives: pos - tp,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                c.objective < b.objective - 1e-12
                    || ((c.objective - b.objective).abs() <= 1e-12 && c.specificity > b.specificity)
            }
        };
        if better {
            best = Some(c);
        }
    }
    Ok(best.expect("at least two candidates"))
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(s: &[f64], l: &[u8]) -> ScoredCohort {
        ScoredCohort::new(s.to_vec(), l.iter().map(|&v| v == 1).collect()).unwrap()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&c(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1])).unwrap(), 1.0);
        assert_eq!(roc_auc(&c(&[0.5; 4], &[0, 1, 0, 1])).unwrap(), 0.5);
        assert_eq!(roc_auc(&c(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1])).unwrap(), 0.75);
        assert!(matches!(roc_auc(&c(&[0.1, 0.2], &[1, 1])), Err(Error::SingleClass)));
    }

    #[test]
    fn cutoff_examples() {
        let sep = optimal_cutoff(&c(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1])).unwrap();
        assert_eq!((sep.objective, sep.sensitivity, sep.specificity), (0.0, 1.0, 1.0));
        let tie = optimal_cutoff(&c(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1])).unwrap();
        assert_eq!((tie.sensitivity, tie.specificity), (0.5, 1.0));
        assert!((tie.objective - 0.25).abs() < 1e-15);
        assert!((tie.threshold - 0.6).abs() < 1e-15);
        let single = optimal_cutoff(&c(&[0.1, 0.2, 0.3, 0.9], &[0, 0, 0, 1])).unwrap();
        assert_eq!((single.sensitivity, single.specificity), (1.0, 1.0));
    }

    #[test]
    fn cohort_validation() {
        assert!(ScoredCohort::new(vec![0.1], vec![true]).is_err());
        assert!(ScoredCohort::new(vec![0.1, 0.2], vec![true]).is_err());
        assert!(ScoredCohort::new(vec![0.1, f64::NAN], vec![true, false]).is_err());
    }

    #[test]
    fn percentiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
    }

    fn cohort_strategy() -> impl Strategy<Value = ScoredCohort> {
        proptest::collection::vec((-5i32..5, any::<bool>()), 2..30)
            .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
            .prop_map(|v| ScoredCohort::new(v.iter().map(|x| x.0 as f64 / 2.0).collect(), v.iter().map(|x| x.1).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn auc_invariant_under_increasing_transform(c in cohort_strategy()) {
            let t = ScoredCohort::new(c.scores().iter().map(|s| (s * 0.7).exp() + 3.0).collect(), c.labels().to_vec()).unwrap();
            prop_assert!((roc_auc(&c).unwrap() - roc_auc(&t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn auc_complements_under_negation(v in proptest::collection::hash_set(-1000i32..1000, 2..25), seed in any::<u64>()) {
            let scores: Vec<f64> = v.into_iter().map(f64::from).collect();
            let labels: Vec<bool> = (0..scores.len()).map(|i| i == 0 || (i > 1 && (seed >> (i % 64)) & 1 == 1)).collect();
            let a = ScoredCohort::new(scores.clone(), labels.clone()).unwrap();
            let b = ScoredCohort::new(scores.iter().map(|s| -s).collect(), labels).unwrap();
            prop_assert!((roc_auc(&a).unwrap() + roc_auc(&b).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cutoff_counts_are_consistent(c in cohort_strategy()) {
            let k = optimal_cutoff(&c).unwrap();
            prop_assert!((0.0..=2.0).contains(&k.objective));
            let tp = c.scores().iter().zip(c.labels()).filter(|(s, l)| **l && **s > k.threshold).count();
            let fp = c.scores().iter().zip(c.labels()).filter(|(s, l)| !**l && **s > k.threshold).count();
            prop_assert_eq!(tp, k.true_positives);
            prop_assert_eq!(fp, k.false_positives);
            prop_assert_eq!(k.sensitivity, tp as f64 / c.positives() as f64);
            prop_assert_eq!(k.specificity, (c.len() - c.positives() - fp) as f64 / (c.len() - c.positives()) as f64);
        }
    }
}
