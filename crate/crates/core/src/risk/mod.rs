//! Progression risk from pairs of grade distributions, and the shallow latent
//! probe that produces such distributions from latent vectors.

mod probe;

pub use probe::{pain_label, probe_predict, train_latent_probe, LatentProbe, ProbeConfig, ProbeEpoch, ProbeTask};

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{check_grade, VisitKey};

pub const GRADES: usize = 5;
const SUM_TOLERANCE: f64 = 1e-6;

/// Distribution over grades 0..=4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector([f64; GRADES]);

impl ProbabilityVector {
    /// Validates entries in [0, 1] summing to 1 within 1e-6, then divides by
    /// the sum so the stored vector sums to 1 up to rounding.
    pub fn new(probs: &[f64]) -> Result<Self> {
        if probs.len() != GRADES {
            return Err(Error::InvalidProbability(format!("expected {GRADES} entries, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(format!("entry {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbability(format!("entries sum to {sum}")));
        }
        let mut p = [0.0; GRADES];
        for (a, b) in p.iter_mut().zip(probs) {
            *a = b / sum;
        }
        Ok(Self(p))
    }

    pub fn one_hot(grade: u8) -> Result<Self> {
        let g = check_grade(grade as i64)? as usize;
        let mut p = [0.0; GRADES];
        p[g] = 1.0;
        Ok(Self(p))
    }

    pub fn uniform() -> Self {
        Self([1.0 / GRADES as f64; GRADES])
    }

    pub fn as_array(&self) -> &[f64; GRADES] {
        &self.0
    }

    /// Most probable grade, lowest on ties.
    pub fn argmax(&self) -> u8 {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best as u8
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0.to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub p_progress: f64,
    pub p_stable: f64,
}

/// True when the grade rises by more than one.
pub fn progression_label(kls_baseline: i64, kls_followup: i64) -> Result<bool> {
    let a = check_grade(kls_baseline)?;
    let b = check_grade(kls_followup)?;
    Ok(b as i64 - a as i64 > 1)
}

/// Sums the joint probability `p_i[c_i] p_j[c_j]` over grade pairs with
/// `c_j - c_i > 1` (progress) and over all remaining pairs (stable).
pub fn progression_risk(p_i: &ProbabilityVector, p_j: &ProbabilityVector) -> RiskScore {
    let (mut progress, mut stable) = (0.0, 0.0);
    for (ci, &a) in p_i.0.iter().enumerate() {
        for (cj, &b) in p_j.0.iter().enumerate() {
            if cj as i64 - ci as i64 > 1 {
                progress += a * b;
            } else {
                stable += a * b;
            }
        }
    }
    RiskScore {
        p_progress: progress.clamp(0.0, 1.0),
        p_stable: stable.clamp(0.0, 1.0),
    }
}

/// Progress probability of each follow-up against the fixed baseline.
pub fn risk_trajectory(p_baseline: &ProbabilityVector, followups: &[ProbabilityVector]) -> Result<Vec<f64>> {
    if followups.is_empty() {
        return Err(Error::EmptyFollowups);
    }
    Ok(followups
        .iter()
        .map(|p| progression_risk(p_baseline, p).p_progress)
        .collect())
}

const PROB_HEADER: [&str; 8] = ["subject_id", "side", "visit_month", "p0", "p1", "p2", "p3", "p4"];

#[derive(Deserialize)]
struct ProbRow {
    subject_id: String,
    side: String,
    visit_month: u32,
    p0: f64,
    p1: f64,
    p2: f64,
    p3: f64,
    p4: f64,
}

/// Reads a `subject_id,side,visit_month,p0..p4` CSV.
pub fn read_probabilities<R: Read>(input: R) -> Result<Vec<(VisitKey, ProbabilityVector)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::format("probability csv", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != PROB_HEADER {
        return Err(Error::format("probability csv", format!("header must be {}", PROB_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<ProbRow>() {
        let r = row.map_err(|e| Error::format("probability csv", e.to_string()))?;
        let key = VisitKey::new(r.subject_id, r.side.parse()?, r.visit_month);
        out.push((key, ProbabilityVector::new(&[r.p0, r.p1, r.p2, r.p3, r.p4])?));
    }
    Ok(out)
}

pub fn write_probabilities<W: Write>(rows: &[(VisitKey, ProbabilityVector)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::format("probability csv", e.to_string());
    w.write_record(PROB_HEADER).map_err(err)?;
    for (k, p) in rows {
        let mut rec = vec![k.subject_id.clone(), k.side.to_string(), k.visit_month.to_string()];
        rec.extend(p.0.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
