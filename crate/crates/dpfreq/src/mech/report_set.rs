//! Second-stage report-set sampling: uniform or adaptive subset reporting,
//! its exact distribution, and the resulting two-stage estimator.

use crate::error::{Error, Result};
use crate::field::EncodedRecord;
use crate::mech::{FrequencyEstimate, MechanismParams, Reporting};
use crate::seed::{bernoulli, sample_distinct, substream, StreamTag};
use num_rational::Ratio;
use rand::RngCore;

/// Report-set size `alpha * N`, rejecting non-integral products.
pub fn report_size(n_items: usize, alpha: f64) -> Result<usize> {
    if n_items < 1 {
        return Err(Error::domain("need N >= 1"));
    }
    if !(0.0 < alpha && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} outside (0, 1]")));
    }
    let exact = alpha * n_items as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(Error::domain(format!(
            "alpha * N = {exact} is not a positive integer"
        )));
    }
    Ok(rounded as usize)
}

/// Probability that a report set contains the reporter's true item:
/// `alpha` for uniform reporting, `alpha*gamma / (alpha*gamma + 1 - alpha)`
/// for adaptive reporting.
pub fn report_inclusion_prob(alpha: f64, chi: Reporting, gamma: f64) -> f64 {
    match chi {
        Reporting::Uniform => alpha,
        Reporting::Adaptive => alpha * gamma / (alpha * gamma + 1.0 - alpha),
    }
}

/// Overall per-user reporting probability: participation times inclusion.
pub fn q_chi(p: f64, p_chi: f64) -> f64 {
    p * p_chi
}

/// Worst-case log likelihood ratio of the report-set indicator across any
/// two true items: 0 for uniform reporting, `ln gamma` for adaptive.
pub fn adaptive_ldp_bound(gamma: f64, chi: Reporting) -> f64 {
    match chi {
        Reporting::Uniform => 0.0,
        Reporting::Adaptive => gamma.ln(),
    }
}

/// Variance of the two-stage estimator for any single item's frequency:
/// `(1 - q) / (n q)`. Boundaries report explicitly: `q = 1` has no noise,
/// `q = 0` observes nothing.
pub fn predict_variance_tss(q_chi: f64, n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain("need n >= 1"));
    }
    if !(0.0..=1.0).contains(&q_chi) {
        return Err(Error::domain(format!("q_chi = {q_chi} outside [0, 1]")));
    }
    if q_chi == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - q_chi) / (n as f64 * q_chi))
}

/// Draw a report set of size `alpha * N` (1-based item indices, sorted).
///
/// Uniform reporting, and any reporting for a zero record, draws uniformly
/// over all size-`alpha*N` subsets. Adaptive reporting with true item `j`
/// first decides `j`'s membership with probability
/// `gamma*m / (gamma*m + N - m)` (one Bernoulli draw), then fills the rest
/// uniformly; this reproduces the adaptive set distribution exactly.
pub fn sample_report_set(
    encoded: &EncodedRecord,
    alpha: f64,
    chi: Reporting,
    gamma: f64,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Vec<usize>> {
    let preferred = match chi {
        Reporting::Uniform => None,
        Reporting::Adaptive => {
            if gamma < 1.0 {
                return Err(Error::domain(format!("gamma = {gamma} below 1")));
            }
            encoded.item()
        }
    };
    let m = report_size(encoded.n_items(), alpha)?;
    Ok(draw_set(encoded.n_items(), m, preferred, gamma, rng))
}

/// Core subset draw; `preferred` is the 1-based item favored by factor
/// `gamma`, or `None` for the uniform draw.
fn draw_set(
    n_items: usize,
    m: usize,
    preferred: Option<usize>,
    gamma: f64,
    rng: &mut (impl RngCore + ?Sized),
) -> Vec<usize> {
    let mut set = match preferred {
        None => sample_distinct(rng, n_items, m),
        Some(j) => {
            let mf = m as f64;
            let p_in = gamma * mf / (gamma * mf + n_items as f64 - mf);
            if bernoulli(rng, p_in) {
                // Other members uniform over the N-1 remaining positions.
                let mut rest = sample_distinct(rng, n_items - 1, m - 1);
                for v in &mut rest {
                    if *v >= j - 1 {
                        *v += 1;
                    }
                }
                rest.push(j - 1);
                rest
            } else {
                let mut set = sample_distinct(rng, n_items - 1, m);
                for v in &mut set {
                    if *v >= j - 1 {
                        *v += 1;
                    }
                }
                set
            }
        }
    };
    set.iter_mut().for_each(|v| *v += 1);
    set.sort_unstable();
    set
}

fn binom(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Exact distribution of the report set as (subset, probability) pairs in
/// lexicographic order, with rational probabilities. `true_item = None`
/// enumerates the zero-record (uniform) case. Kept to small `N` so the
/// subset count stays enumerable.
pub fn enumerate_report_distribution(
    n_items: usize,
    report_size: usize,
    chi: Reporting,
    gamma: i64,
    true_item: Option<usize>,
) -> Result<Vec<(Vec<usize>, Ratio<i64>)>> {
    if n_items < 1 || n_items > 20 {
        return Err(Error::domain("enumeration supports 1 <= N <= 20"));
    }
    if report_size < 1 || report_size > n_items {
        return Err(Error::domain("need 1 <= report size <= N"));
    }
    if gamma < 1 {
        return Err(Error::domain("need gamma >= 1"));
    }
    if let Some(j) = true_item {
        if j == 0 || j > n_items {
            return Err(Error::domain("true item out of range"));
        }
    }
    let (n, m) = (n_items as u64, report_size as u64);
    let uniform_prob = Ratio::new(1, binom(n, m).unwrap() as i64);
    let adaptive = match (chi, true_item) {
        (Reporting::Adaptive, Some(j)) => {
            let d = gamma * binom(n - 1, m - 1).unwrap() as i64 + binom(n - 1, m).unwrap() as i64;
            Some((j, Ratio::new(gamma, d), Ratio::new(1, d)))
        }
        _ => None,
    };
    let mut out = Vec::with_capacity(binom(n, m).unwrap() as usize);
    // Lexicographic subset enumeration over 1-based items.
    let mut idx: Vec<usize> = (1..=report_size).collect();
    loop {
        let prob = match &adaptive {
            Some((j, hit, miss)) => {
                if idx.contains(j) {
                    *hit
                } else {
                    *miss
                }
            }
            None => uniform_prob,
        };
        out.push((idx.clone(), prob));
        // Advance to the next combination.
        let mut k = report_size;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if idx[k] < n_items - (report_size - 1 - k) {
                idx[k] += 1;
                for t in k + 1..report_size {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

pub(crate) fn check_one_hot(records: &[EncodedRecord]) -> Result<usize> {
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

/// Tally assuming records were already validated as one-hot.
fn tss_tally(
    records: &[EncodedRecord],
    params: &MechanismParams,
    mut user_rng: impl FnMut(usize) -> (bool, Vec<usize>),
) -> FrequencyEstimate {
    let mut counts = vec![0u64; records[0].n_items()];
    for (i, r) in records.iter().enumerate() {
        let (active, set) = user_rng(i);
        if active {
            let j = r.item().expect("one-hot checked by caller");
            if set.contains(&j) {
                counts[j - 1] += 1;
            }
        }
    }
    FrequencyEstimate::from_counts(counts, params.q_chi() * records.len() as f64)
}

/// One user's first- and second-stage draws: participation first, then the
/// report set. Inactive users hold a zero record, so their set is uniform
/// under either reporting distribution. The protocol simulation consumes
/// each user's stream in exactly this order.
pub(crate) fn user_report(
    r: &EncodedRecord,
    params: &MechanismParams,
    report_size: usize,
    rng: &mut (impl RngCore + ?Sized),
) -> (bool, Vec<usize>) {
    let active = bernoulli(rng, params.p);
    let preferred = match (active, params.chi) {
        (true, Reporting::Adaptive) => r.item(),
        _ => None,
    };
    let set = draw_set(r.n_items(), report_size, preferred, params.gamma, rng);
    (active, set)
}

/// Two-stage sampling collapsed to its tallies, without the protocol
/// machinery: each user participates with probability `p`, draws a report
/// set (uniform when inactive), and contributes to its true item's count
/// only when active and the set covers that item. Estimates are normalized
/// by the configured `q_chi * n`.
pub fn tss_mechanism(
    records: &[EncodedRecord],
    params: &MechanismParams,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<FrequencyEstimate> {
    let n_items = check_one_hot(records)?;
    params.validate(n_items)?;
    let m = params.report_size(n_items)?;
    Ok(tss_tally(records, params, |i| {
        user_report(&records[i], params, m, rng)
    }))
}

/// [`tss_mechanism`] with each user's draws taken from that user's own
/// stream, matching the protocol simulation's stream layout exactly.
pub fn tss_mechanism_seeded(
    records: &[EncodedRecord],
    params: &MechanismParams,
    master_seed: u64,
) -> Result<FrequencyEstimate> {
    let n_items = check_one_hot(records)?;
    params.validate(n_items)?;
    let m = params.report_size(n_items)?;
    Ok(tss_tally(records, params, |i| {
        let mut rng = substream(master_seed, StreamTag::User, i as u64, 0);
        user_report(&records[i], params, m, &mut rng)
    }))
}
