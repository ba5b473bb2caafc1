//! Per-party operation tallies. Arithmetic and sampling are counted where
//! they happen; traffic is counted per field element, id, or bit, split by
//! direction so the audit can apply either accounting convention.

use std::ops::AddAssign;

/// Raw operation counts for one party over one protocol run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    /// Field additions and subtractions.
    pub field_add: u64,
    /// Real-number multiplications (normalization only).
    pub real_mul: u64,
    /// Bernoulli participation draws.
    pub bernoulli_draw: u64,
    /// Report-set draws (one per sampled set).
    pub set_draw: u64,
    /// Uniform field-element draws.
    pub field_draw: u64,
    /// Small-integer additions while tallying reporter counts.
    pub small_add: u64,
    /// Uniform draws over the user-index range.
    pub small_draw: u64,
    /// User ids sent / received.
    pub id_sent: u64,
    pub id_recv: u64,
    /// Item ids sent / received.
    pub item_sent: u64,
    pub item_recv: u64,
    /// Single bits sent / received.
    pub bit_sent: u64,
    pub bit_recv: u64,
    /// Field residues sent / received.
    pub residue_sent: u64,
    pub residue_recv: u64,
}

impl OpCounters {
    /// All counts divided by `denom`, e.g. to average over users or trials.
    pub fn scaled(&self, denom: f64) -> OpAverages {
        let d = |x: u64| x as f64 / denom;
        OpAverages {
            field_add: d(self.field_add),
            real_mul: d(self.real_mul),
            bernoulli_draw: d(self.bernoulli_draw),
            set_draw: d(self.set_draw),
            field_draw: d(self.field_draw),
            small_add: d(self.small_add),
            small_draw: d(self.small_draw),
            id_sent: d(self.id_sent),
            id_recv: d(self.id_recv),
            item_sent: d(self.item_sent),
            item_recv: d(self.item_recv),
            bit_sent: d(self.bit_sent),
            bit_recv: d(self.bit_recv),
            residue_sent: d(self.residue_sent),
            residue_recv: d(self.residue_recv),
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.field_add += rhs.field_add;
        self.real_mul += rhs.real_mul;
        self.bernoulli_draw += rhs.bernoulli_draw;
        self.set_draw += rhs.set_draw;
        self.field_draw += rhs.field_draw;
        self.small_add += rhs.small_add;
        self.small_draw += rhs.small_draw;
        self.id_sent += rhs.id_sent;
        self.id_recv += rhs.id_recv;
        self.item_sent += rhs.item_sent;
        self.item_recv += rhs.item_recv;
        self.bit_sent += rhs.bit_sent;
        self.bit_recv += rhs.bit_recv;
        self.residue_sent += rhs.residue_sent;
        self.residue_recv += rhs.residue_recv;
    }
}

/// [`OpCounters`] after averaging, so fractional per-user means are exact.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OpAverages {
    pub field_add: f64,
    pub real_mul: f64,
    pub bernoulli_draw: f64,
    pub set_draw: f64,
    pub field_draw: f64,
    pub small_add: f64,
    pub small_draw: f64,
    pub id_sent: f64,
    pub id_recv: f64,
    pub item_sent: f64,
    pub item_recv: f64,
    pub bit_sent: f64,
    pub bit_recv: f64,
    pub residue_sent: f64,
    pub residue_recv: f64,
}
