//! Centralized one-stage sampling: keep each user's one-hot record with
//! probability `p`, tally, and divide by `p * n`.

use crate::error::{Error, Result};
use crate::field::EncodedRecord;
use crate::mech::FrequencyEstimate;
use crate::seed::{bernoulli, substream, StreamTag};
use rand::RngCore;

pub(crate) fn check_records(records: &[EncodedRecord]) -> Result<usize> {
    let first = records
        .first()
        .ok_or_else(|| Error::domain("empty record list"))?;
    let n_items = first.n_items();
    for r in records {
        if r.n_items() != n_items {
            return Err(Error::contract("records differ in item count"));
        }
        if r.is_zero() {
            return Err(Error::domain("input records must be one-hot, found zero record"));
        }
    }
    Ok(n_items)
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p = {p} outside (0, 1]")));
    }
    Ok(())
}

/// One-stage sampling with all participation draws taken from one stream,
/// in record order.
pub fn dpcs(
    records: &[EncodedRecord],
    p: f64,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<FrequencyEstimate> {
    let n_items = check_records(records)?;
    check_p(p)?;
    let mut counts = vec![0u64; n_items];
    for r in records {
        if bernoulli(rng, p) {
            counts[r.item().unwrap() - 1] += 1;
        }
    }
    Ok(FrequencyEstimate::from_counts(
        counts,
        p * records.len() as f64,
    ))
}

/// One-stage sampling with each user's participation draw taken as the first
/// draw of that user's own stream. Protocol simulations use the same streams
/// in the same order, so their estimates pair bit-identically with this one.
pub fn dpcs_seeded(records: &[EncodedRecord], p: f64, master_seed: u64) -> Result<FrequencyEstimate> {
    let n_items = check_records(records)?;
    check_p(p)?;
    let mut counts = vec![0u64; n_items];
    for (i, r) in records.iter().enumerate() {
        let mut rng = substream(master_seed, StreamTag::User, i as u64, 0);
        if bernoulli(&mut rng, p) {
            counts[r.item().unwrap() - 1] += 1;
        }
    }
    Ok(FrequencyEstimate::from_counts(
        counts,
        p * records.len() as f64,
    ))
}

/// Predicted estimator noise for one-stage sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePrediction {
    /// Per-item variance `(1 - p) / (p n^2) * count_i`.
    pub per_item: Vec<f64>,
    /// Expected squared L2 error `(1 - p) / (p n)`.
    pub total_l2: f64,
}

/// Variance of the one-stage estimator given the true per-item counts. The
/// boundaries are reported explicitly: `p = 1` means no sampling noise,
/// `p = 0` means nothing is ever observed (infinite error for any item that
/// actually occurs).
pub fn predict_variance_dpcs(p: f64, n: u64, counts: &[u64]) -> Result<VariancePrediction> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p = {p} outside [0, 1]")));
    }
    if n < 1 {
        return Err(Error::domain("need n >= 1"));
    }
    if counts.iter().sum::<u64>() != n {
        return Err(Error::contract("counts must sum to n"));
    }
    if p == 0.0 {
        return Ok(VariancePrediction {
            per_item: counts
                .iter()
                .map(|&c| if c > 0 { f64::INFINITY } else { 0.0 })
                .collect(),
            total_l2: f64::INFINITY,
        });
    }
    let factor = (1.0 - p) / (p * (n * n) as f64);
    Ok(VariancePrediction {
        per_item: counts.iter().map(|&c| factor * c as f64).collect(),
        total_l2: (1.0 - p) / (p * n as f64),
    })
}
