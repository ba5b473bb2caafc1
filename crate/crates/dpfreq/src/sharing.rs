//! Additive secret sharing over a prime field, with homomorphic aggregation
//! and coalition views for privacy testing.
//!
//! Randomness contract: [`share`] consumes exactly `(m - 1) * N` uniform
//! residues from the caller's stream, ordered share-major (all `N` entries of
//! share 1, then share 2, and so on). The final share, always at index `m`,
//! is the secret minus the sum of the others, so the bundle reconstructs
//! exactly. Any `m - 1` shares are jointly uniform and carry no information
//! about the secret.

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use rand::RngCore;

/// All `m` additive shares of one secret vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareBundle {
    field: FieldSpec,
    shares: Vec<Vec<u64>>,
}

impl ShareBundle {
    /// Build a bundle from explicit shares, validating shape and reduction.
    pub fn from_shares(field: FieldSpec, shares: Vec<Vec<u64>>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(Error::domain("a sharing needs at least 2 parties"));
        }
        let n = shares[0].len();
        for s in &shares {
            if s.len() != n {
                return Err(Error::contract("shares differ in length"));
            }
            if s.iter().any(|&e| e >= field.q()) {
                return Err(Error::contract("share entry not reduced mod q"));
            }
        }
        Ok(ShareBundle { field, shares })
    }

    pub fn m(&self) -> usize {
        self.shares.len()
    }

    pub fn n_entries(&self) -> usize {
        self.shares[0].len()
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn shares(&self) -> &[Vec<u64>] {
        &self.shares
    }

    /// Share held by `party` (1-based).
    pub fn share(&self, party: usize) -> &[u64] {
        &self.shares[party - 1]
    }
}

/// Split `secret` into `m` additive shares over `field`.
pub fn share(
    secret: &[u64],
    m: usize,
    field: FieldSpec,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<ShareBundle> {
    if m < 2 {
        return Err(Error::domain("a sharing needs at least 2 parties"));
    }
    if secret.iter().any(|&e| e >= field.q()) {
        return Err(Error::domain("secret entry not reduced mod q"));
    }
    let n = secret.len();
    let mut shares = Vec::with_capacity(m);
    let mut last = secret.to_vec();
    for _ in 0..m - 1 {
        let s = field.uniform_vec(n, rng);
        field.sub_assign(&mut last, &s);
        shares.push(s);
    }
    shares.push(last);
    Ok(ShareBundle { field, shares })
}

/// Entry-wise field sum of all shares: the secret.
pub fn reconstruct(bundle: &ShareBundle) -> Vec<u64> {
    let mut acc = vec![0u64; bundle.n_entries()];
    for s in &bundle.shares {
        bundle.field.add_assign(&mut acc, s);
    }
    acc
}

/// Reconstruction from an explicit share list. Errors when fewer than
/// `expected_m` shares are supplied, since a partial share set determines
/// nothing about the secret.
pub fn reconstruct_parts(
    field: FieldSpec,
    expected_m: usize,
    parts: &[&[u64]],
) -> Result<Vec<u64>> {
    if parts.len() < expected_m {
        return Err(Error::IncompleteBundle(format!(
            "have {} of {} shares",
            parts.len(),
            expected_m
        )));
    }
    let n = parts[0].len();
    let mut acc = vec![0u64; n];
    for p in parts {
        if p.len() != n {
            return Err(Error::contract("shares differ in length"));
        }
        field.add_assign(&mut acc, p);
    }
    Ok(acc)
}

/// Homomorphic aggregation: party `t`'s output is the field sum of the
/// `t`-th shares of every contribution. Reconstructing the aggregated shares
/// yields the field sum of all contributed secrets.
pub fn aggregate_shares(bundles: &[ShareBundle]) -> Result<Vec<Vec<u64>>> {
    let first = bundles
        .first()
        .ok_or_else(|| Error::domain("no contributions to aggregate"))?;
    let (m, n, field) = (first.m(), first.n_entries(), first.field);
    for b in bundles {
        if b.m() != m || b.n_entries() != n || b.field != field {
            return Err(Error::contract(
                "contributions disagree on party count, length, or field",
            ));
        }
    }
    let mut out = vec![vec![0u64; n]; m];
    for b in bundles {
        for (acc, s) in out.iter_mut().zip(&b.shares) {
            field.add_assign(acc, s);
        }
    }
    Ok(out)
}

/// The shares a coalition of parties holds for one bundle, and nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionView {
    party_ids: Vec<usize>,
    observed: Vec<Vec<u64>>,
}

impl CoalitionView {
    pub fn party_ids(&self) -> &[usize] {
        &self.party_ids
    }

    pub fn observed(&self) -> &[Vec<u64>] {
        &self.observed
    }

    /// The joint observation as one flat residue tuple, for distribution
    /// tests over repeated draws.
    pub fn flattened(&self) -> Vec<u64> {
        self.observed.iter().flatten().copied().collect()
    }

    /// Reconstruct the secret; only a full coalition of all `m` parties can.
    pub fn try_reconstruct(&self, field: FieldSpec, m: usize) -> Result<Vec<u64>> {
        let parts: Vec<&[u64]> = self.observed.iter().map(|s| s.as_slice()).collect();
        reconstruct_parts(field, m, &parts)
    }
}

/// Extract exactly the shares held by `party_ids` (1-based, distinct).
pub fn coalition_view(bundle: &ShareBundle, party_ids: &[usize]) -> Result<CoalitionView> {
    let mut seen = vec![false; bundle.m()];
    for &p in party_ids {
        if p == 0 || p > bundle.m() {
            return Err(Error::domain(format!(
                "party {p} out of range 1..={}",
                bundle.m()
            )));
        }
        if seen[p - 1] {
            return Err(Error::domain(format!("party {p} listed twice")));
        }
        seen[p - 1] = true;
    }
    Ok(CoalitionView {
        party_ids: party_ids.to_vec(),
        observed: party_ids
            .iter()
            .map(|&p| bundle.share(p).to_vec())
            .collect(),
    })
}
