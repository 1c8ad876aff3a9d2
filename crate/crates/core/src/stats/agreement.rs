//! Chance-corrected agreement between raters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// `(p_o - p_e) / (1 - p_e)` for two raters over any category type.
pub fn cohens_kappa<T: Ord>(ratings_a: &[T], ratings_b: &[T]) -> Result<f64> {
    if ratings_a.len() != ratings_b.len() {
        return Err(Error::LengthMismatch(ratings_a.len(), ratings_b.len()));
    }
    if ratings_a.is_empty() {
        return Err(Error::TooFewItems(0));
    }
    let n = ratings_a.len() as f64;
    let mut margins: BTreeMap<&T, (f64, f64)> = BTreeMap::new();
    let mut agree = 0.0;
    for (a, b) in ratings_a.iter().zip(ratings_b) {
        margins.entry(a).or_default().0 += 1.0;
        margins.entry(b).or_default().1 += 1.0;
        if a == b {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = margins.values().map(|(x, y)| (x / n) * (y / n)).sum();
    if 1.0 - p_e <= f64::EPSILON {
        return Err(Error::DegenerateMarginals);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Fleiss' kappa for an items x raters matrix with the same number of
/// ratings per item.
pub fn fleiss_kappa<T: Ord>(matrix: &[Vec<T>]) -> Result<f64> {
    let raters = matrix.first().map_or(0, |r| r.len());
    if raters < 2 {
        return Err(Error::TooFewRaters(raters));
    }
    if matrix.len() < 2 {
        return Err(Error::TooFewItems(matrix.len()));
    }
    if let Some(row) = matrix.iter().find(|r| r.len() != raters) {
        return Err(Error::LengthMismatch(raters, row.len()));
    }
    let n = raters as f64;
    let items = matrix.len() as f64;
    let mut totals: BTreeMap<&T, f64> = BTreeMap::new();
    let mut p_bar = 0.0;
    for row in matrix {
        let mut counts: BTreeMap<&T, f64> = BTreeMap::new();
        for r in row {
            *counts.entry(r).or_default() += 1.0;
        }
        let sq: f64 = counts.values().map(|c| c * c).sum();
        p_bar += (sq - n) / (n * (n - 1.0));
        for (k, c) in counts {
            *totals.entry(k).or_default() += c;
        }
    }
    p_bar /= items;
    let p_e: f64 = totals.values().map(|t| (t / (items * n)).powi(2)).sum();
    if 1.0 - p_e <= f64::EPSILON {
        return Err(Error::DegenerateMarginals);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}
