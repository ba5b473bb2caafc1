//! Gaussian baseline: exact normalized histogram plus calibrated Gaussian
//! noise, in centralized and distributed (per-user noise share) form.

use crate::error::{Error, Result};
use crate::field::EncodedRecord;
use crate::mech::calibrate::gaussian_params;
use crate::mech::FrequencyEstimate;
use rand::RngCore;
use rand_distr::{Distribution, Normal};

fn exact_histogram(records: &[EncodedRecord]) -> Result<(Vec<f64>, usize)> {
    let first = records
        .first()
        .ok_or_else(|| Error::domain("empty record list"))?;
    let n_items = first.n_items();
    let mut h = vec![0.0; n_items];
    for r in records {
        if r.n_items() != n_items {
            return Err(Error::contract("records differ in item count"));
        }
        let item = r
            .item()
            .ok_or_else(|| Error::domain("input records must be one-hot, found zero record"))?;
        h[item - 1] += 1.0 / records.len() as f64;
    }
    Ok((h, n_items))
}

/// Centralized variant: one noise draw per coordinate with standard
/// deviation `sensitivity * sigma`.
pub fn dpdg(
    records: &[EncodedRecord],
    epsilon: f64,
    delta: f64,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<FrequencyEstimate> {
    let (mut h, _) = exact_histogram(records)?;
    let g = gaussian_params(records.len() as u64, epsilon, delta)?;
    let noise = Normal::new(0.0, g.sensitivity * g.sigma).expect("positive scale");
    for v in &mut h {
        *v += noise.sample(rng);
    }
    Ok(FrequencyEstimate::from_values(h, records.len() as f64))
}

/// Distributed variant: each user perturbs its contribution to the
/// normalized histogram with noise of standard deviation
/// `sensitivity * sigma / sqrt(n)`, so the n-user aggregate carries exactly
/// the centralized noise variance. Draws are user-major, coordinate-minor.
pub fn dpdg_distributed(
    records: &[EncodedRecord],
    epsilon: f64,
    delta: f64,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<FrequencyEstimate> {
    let (mut h, _) = exact_histogram(records)?;
    let n = records.len() as u64;
    let g = gaussian_params(n, epsilon, delta)?;
    let noise = Normal::new(0.0, g.sensitivity * g.sigma / (n as f64).sqrt())
        .expect("positive scale");
    for _ in 0..n {
        for v in h.iter_mut() {
            *v += noise.sample(rng);
        }
    }
    Ok(FrequencyEstimate::from_values(h, n as f64))
}
