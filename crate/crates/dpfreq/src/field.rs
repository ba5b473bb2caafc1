//! Prime-field arithmetic over a small modulus and one-hot encoding of
//! categorical responses.
//!
//! The modulus is the smallest prime exceeding the population size, so the
//! field sum of any multiset of one-hot records equals the plain integer
//! histogram: counts can never wrap around.

use crate::error::{Error, Result};
use rand::RngCore;

/// Deterministic trial-division primality test. Cost is O(sqrt(x)), intended
/// for the small moduli used here (a population bound plus a few).
pub fn is_prime(x: u64) -> bool {
    if x < 4 {
        return x >= 2;
    }
    if x % 2 == 0 || x % 3 == 0 {
        return false;
    }
    let mut d = 5u64;
    while d * d <= x {
        if x % d == 0 || x % (d + 2) == 0 {
            return false;
        }
        d += 6;
    }
    true
}

/// A prime modulus `q` together with the population bound it was chosen for.
/// Construction guarantees `q` is the smallest prime strictly above the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpec {
    q: u64,
    n_bound: u64,
}

impl FieldSpec {
    /// Smallest prime strictly greater than `n`.
    ///
    /// The modulus is capped at 32 bits so sums of residues can never
    /// overflow the 64-bit arithmetic used throughout.
    pub fn smallest_prime_above(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("population bound must be at least 1"));
        }
        if n >= u32::MAX as u64 {
            return Err(Error::domain(format!(
                "population bound {n} exceeds the 32-bit modulus search range"
            )));
        }
        let mut q = n + 1;
        while !is_prime(q) {
            q += 1;
        }
        Ok(FieldSpec { q, n_bound: n })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn n_bound(&self) -> u64 {
        self.n_bound
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.q);
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// Entry-wise sum of two residue sequences of equal length.
    pub fn add_vec(&self, a: &[u64], b: &[u64]) -> Result<Vec<u64>> {
        self.check_len(a, b)?;
        Ok(a.iter().zip(b).map(|(&x, &y)| self.add(x, y)).collect())
    }

    /// Entry-wise difference of two residue sequences of equal length.
    pub fn sub_vec(&self, a: &[u64], b: &[u64]) -> Result<Vec<u64>> {
        self.check_len(a, b)?;
        Ok(a.iter().zip(b).map(|(&x, &y)| self.sub(x, y)).collect())
    }

    /// Entry-wise negation of a residue sequence.
    pub fn neg_vec(&self, a: &[u64]) -> Vec<u64> {
        a.iter().map(|&x| self.neg(x)).collect()
    }

    fn check_len(&self, a: &[u64], b: &[u64]) -> Result<()> {
        if a.len() != b.len() {
            return Err(Error::contract(format!(
                "residue sequences of length {} and {} cannot be combined",
                a.len(),
                b.len()
            )));
        }
        Ok(())
    }

    /// In-place entry-wise accumulation, for aggregation hot paths.
    pub(crate) fn add_assign(&self, acc: &mut [u64], rhs: &[u64]) {
        debug_assert_eq!(acc.len(), rhs.len());
        for (a, &r) in acc.iter_mut().zip(rhs) {
            *a = self.add(*a, r);
        }
    }

    pub(crate) fn sub_assign(&self, acc: &mut [u64], rhs: &[u64]) {
        debug_assert_eq!(acc.len(), rhs.len());
        for (a, &r) in acc.iter_mut().zip(rhs) {
            *a = self.sub(*a, r);
        }
    }

    /// Uniform residue by rejection sampling from 64-bit words.
    ///
    /// A word is accepted when it falls below the largest multiple of `q`
    /// representable in 64 bits, which leaves every residue exactly equally
    /// likely; with the small moduli used here the rejection probability is
    /// negligible, so one draw is consumed almost surely.
    pub fn uniform(&self, rng: &mut (impl RngCore + ?Sized)) -> u64 {
        let accept_below = (u64::MAX / self.q) * self.q;
        loop {
            let x = rng.next_u64();
            if x < accept_below {
                return x % self.q;
            }
        }
    }

    /// A sequence of `len` independent uniform residues.
    pub fn uniform_vec(&self, len: usize, rng: &mut (impl RngCore + ?Sized)) -> Vec<u64> {
        (0..len).map(|_| self.uniform(rng)).collect()
    }
}

/// A user's encoded response: either the one-hot vector marking a held item,
/// or the all-zero vector expressing non-participation. Item indices are
/// 1-based; vector coordinate `k` belongs to item `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRecord {
    entries: Vec<u64>,
    item: Option<usize>,
}

impl EncodedRecord {
    /// One-hot record for `item` (1-based) over a domain of `n_items` items.
    pub fn one_hot(item: usize, n_items: usize) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::domain("item domain must be non-empty"));
        }
        if item == 0 || item > n_items {
            return Err(Error::domain(format!(
                "item {item} out of range 1..={n_items}"
            )));
        }
        let mut entries = vec![0u64; n_items];
        entries[item - 1] = 1;
        Ok(EncodedRecord {
            entries,
            item: Some(item),
        })
    }

    /// The all-zero record of a non-participating user.
    pub fn zero(n_items: usize) -> Self {
        assert!(n_items >= 1, "item domain must be non-empty");
        EncodedRecord {
            entries: vec![0u64; n_items],
            item: None,
        }
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    /// The held item (1-based), absent for the zero record.
    pub fn item(&self) -> Option<usize> {
        self.item
    }

    pub fn n_items(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.item.is_none()
    }
}
