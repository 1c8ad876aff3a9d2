//! Latent vectors, visit records and the immutable latent dictionary.

mod meta;
mod store;

pub use meta::{read_metadata, write_metadata, VisitMeta};
pub use store::{read_store, write_store, STORE_MAGIC, STORE_VERSION};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default dimension of the intermediate latent space.
pub const DEFAULT_LATENT_DIM: usize = 512;

/// A point in the generator's intermediate latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidLatent(format!(
                "dimension {} is below 2",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidLatent(format!("entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(2)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rounds every entry to the nearest `f32`, the precision of the on-disk store.
    pub fn to_single_precision(&self) -> Self {
        Self(self.0.iter().map(|&v| v as f32 as f64).collect())
    }
}

impl TryFrom<Vec<f64>> for LatentVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LatentVector> for Vec<f64> {
    fn from(v: LatentVector) -> Self {
        v.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(Error::format("side", format!("unknown side {other:?}"))),
        }
    }
}

/// Identifies one knee across visits.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KneeKey {
    pub subject_id: String,
    pub side: Side,
}

impl KneeKey {
    pub fn new(subject_id: impl Into<String>, side: Side) -> Self {
        Self {
            subject_id: subject_id.into(),
            side,
        }
    }
}

impl fmt::Display for KneeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.subject_id, self.side)
    }
}

impl FromStr for KneeKey {
    type Err = Error;
    /// Parses `subject:side`.
    fn from_str(s: &str) -> Result<Self> {
        let (id, side) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::format("knee key", format!("expected subject:side, got {s:?}")))?;
        if id.is_empty() {
            return Err(Error::format("knee key", "empty subject id"));
        }
        Ok(Self::new(id, side.parse()?))
    }
}

/// Identifies one imaging visit.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VisitKey {
    pub subject_id: String,
    pub side: Side,
    pub visit_month: u32,
}

impl VisitKey {
    pub fn new(subject_id: impl Into<String>, side: Side, visit_month: u32) -> Self {
        Self {
            subject_id: subject_id.into(),
            side,
            visit_month,
        }
    }

    pub fn knee(&self) -> KneeKey {
        KneeKey::new(self.subject_id.clone(), self.side)
    }
}

impl fmt::Display for VisitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.subject_id, self.side, self.visit_month)
    }
}

/// A KLS grade (or its synthetic analog), 0..=4.
pub fn check_grade(grade: i64) -> Result<u8> {
    if (0..=4).contains(&grade) {
        Ok(grade as u8)
    } else {
        Err(Error::InvalidGrade(grade))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KneeRecord {
    pub subject_id: String,
    pub side: Side,
    pub visit_month: u32,
    pub kls: Option<u8>,
    pub latent: LatentVector,
}

impl KneeRecord {
    pub fn visit_key(&self) -> VisitKey {
        VisitKey::new(self.subject_id.clone(), self.side, self.visit_month)
    }

    pub fn knee_key(&self) -> KneeKey {
        KneeKey::new(self.subject_id.clone(), self.side)
    }

    fn sort_key(&self) -> (&str, Side, u32) {
        (&self.subject_id, self.side, self.visit_month)
    }
}

/// Immutable store of embedded visits, sorted by (subject, side, month).
///
/// Latents are held at single precision, matching the on-disk store, so a
/// dictionary survives a save/load cycle bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDictionary {
    dimension: usize,
    records: Vec<KneeRecord>,
}

impl LatentDictionary {
    /// Validates and sorts `records`.
    pub fn from_records(mut records: Vec<KneeRecord>) -> Result<Self> {
        let dimension = records
            .first()
            .map(|r| r.latent.dim())
            .ok_or_else(|| Error::InsufficientData("dictionary has no records".into()))?;
        for r in &mut records {
            if r.latent.dim() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: r.latent.dim(),
                });
            }
            if let Some(k) = r.kls {
                check_grade(k as i64)?;
            }
            r.latent = r.latent.to_single_precision();
        }
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        for w in records.windows(2) {
            if w[0].sort_key() == w[1].sort_key() {
                return Err(Error::DuplicateVisit(w[1].visit_key().to_string()));
            }
        }
        Ok(Self { dimension, records })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn records(&self) -> &[KneeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &VisitKey) -> Option<&KneeRecord> {
        self.records
            .binary_search_by(|r| r.sort_key().cmp(&(&key.subject_id, key.side, key.visit_month)))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Records grouped per knee, each group in visit order.
    pub fn knees(&self) -> BTreeMap<KneeKey, Vec<&KneeRecord>> {
        let mut out: BTreeMap<KneeKey, Vec<&KneeRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.knee_key()).or_default().push(r);
        }
        out
    }

    /// Visits of one knee in month order.
    pub fn visits(&self, knee: &KneeKey) -> Vec<&KneeRecord> {
        self.records
            .iter()
            .filter(|r| r.subject_id == knee.subject_id && r.side == knee.side)
            .collect()
    }
}

/// Joins visit metadata with latents into a dictionary.
pub fn build_dictionary(
    meta: &[VisitMeta],
    latents: &HashMap<VisitKey, LatentVector>,
) -> Result<LatentDictionary> {
    let mut records = Vec::with_capacity(meta.len());
    for row in meta {
        let key = row.key();
        let latent = latents
            .get(&key)
            .ok_or_else(|| Error::MissingLatent(key.to_string()))?;
        records.push(KneeRecord {
            subject_id: row.subject_id.clone(),
            side: row.side,
            visit_month: row.visit_month,
            kls: row.kls,
            latent: latent.clone(),
        });
    }
    LatentDictionary::from_records(records)
}

/// Baseline-to-follow-up displacement of one knee.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPair {
    pub key: KneeKey,
    pub baseline: LatentVector,
    pub followup: LatentVector,
    pub baseline_month: u32,
    pub followup_month: u32,
    /// Months between the two visits, always positive.
    pub delta_t: u32,
}

impl TrajectoryPair {
    fn between(baseline: &KneeRecord, followup: &KneeRecord) -> Self {
        Self {
            key: baseline.knee_key(),
            baseline: baseline.latent.clone(),
            followup: followup.latent.clone(),
            baseline_month: baseline.visit_month,
            followup_month: followup.visit_month,
            delta_t: followup.visit_month - baseline.visit_month,
        }
    }
}

/// One pair per follow-up visit, each anchored at the knee's earliest visit.
pub fn pair_trajectories(dict: &LatentDictionary) -> Vec<TrajectoryPair> {
    let mut out = Vec::new();
    for visits in dict.knees().values() {
        let (first, rest) = visits.split_first().expect("groups are non-empty");
        out.extend(rest.iter().map(|f| TrajectoryPair::between(first, f)));
    }
    out
}

/// The pair from the earliest to the latest visit of every knee with a follow-up.
pub fn latest_trajectories(dict: &LatentDictionary) -> Vec<TrajectoryPair> {
    dict.knees()
        .values()
        .filter(|v| v.len() > 1)
        .map(|v| TrajectoryPair::between(v[0], v[v.len() - 1]))
        .collect()
}
