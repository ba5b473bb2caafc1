//! Operation accounting in the cost categories of the protocol comparison
//! table: arithmetic (field additions, real multiplications), sampling
//! (Bernoulli, report-set, field, user-index draws), tallying additions,
//! and traffic by element kind (user ids, item ids, bits, field residues).
//!
//! Traffic conventions follow the comparison table: the one-stage
//! protocol's user row counts both directions (self-delivery included on
//! both sides), every other row counts sent elements only.

use crate::sim::counters::OpCounters;
use crate::sim::{PartyId, ProtocolKind, Transcript};
use std::collections::BTreeMap;

/// One party's (or party class's average) costs in table categories.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TableRow {
    pub field_add: f64,
    pub real_mul: f64,
    pub bernoulli: f64,
    pub set_sample: f64,
    pub field_draw: f64,
    pub small_add: f64,
    pub small_draw: f64,
    pub id_comm: f64,
    pub item_comm: f64,
    pub bit_comm: f64,
    pub residue_comm: f64,
    /// Rounds in which this party sends, fixed by the protocol phases.
    pub rounds: u32,
}

fn row(c: &OpCounters, two_sided: bool, rounds: u32, denom: f64) -> TableRow {
    let comm = |sent: u64, recv: u64| {
        if two_sided {
            (sent + recv) as f64 / denom
        } else {
            sent as f64 / denom
        }
    };
    TableRow {
        field_add: c.field_add as f64 / denom,
        real_mul: c.real_mul as f64 / denom,
        bernoulli: c.bernoulli_draw as f64 / denom,
        set_sample: c.set_draw as f64 / denom,
        field_draw: c.field_draw as f64 / denom,
        small_add: c.small_add as f64 / denom,
        small_draw: c.small_draw as f64 / denom,
        id_comm: comm(c.id_sent, c.id_recv),
        item_comm: comm(c.item_sent, c.item_recv),
        bit_comm: comm(c.bit_sent, c.bit_recv),
        residue_comm: comm(c.residue_sent, c.residue_recv),
        rounds,
    }
}

/// Counters of a finished run, grouped into table rows.
#[derive(Debug, Clone)]
pub struct ComplexityAudit {
    /// Raw two-direction counters for every party.
    pub per_party: BTreeMap<PartyId, OpCounters>,
    /// One-stage server row (one-stage transcripts only).
    pub server: Option<TableRow>,
    /// Election server row (two-stage transcripts only).
    pub s1: Option<TableRow>,
    /// Aggregation server row (two-stage transcripts only).
    pub s2: Option<TableRow>,
    /// Sum of all user counters.
    pub user_total: OpCounters,
    /// Per-user average row.
    pub user_mean: TableRow,
}

/// Group a transcript's counters into comparison-table rows.
pub fn audit_complexity(transcript: &Transcript) -> ComplexityAudit {
    let per_party = transcript.counters().clone();
    let n = transcript.n_users() as f64;
    let mut user_total = OpCounters::default();
    for (p, c) in &per_party {
        if matches!(p, PartyId::User(_)) {
            user_total += *c;
        }
    }
    let get = |p: PartyId| per_party.get(&p).copied().unwrap_or_default();
    let (server, s1, s2, user_mean) = match transcript.protocol() {
        ProtocolKind::Dpds => (
            Some(row(&get(PartyId::Server), false, 0, 1.0)),
            None,
            None,
            row(&user_total, true, 2, n),
        ),
        ProtocolKind::Tss | ProtocolKind::TssPrime => (
            None,
            Some(row(&get(PartyId::S1), false, 1, 1.0)),
            Some(row(&get(PartyId::S2), false, 0, 1.0)),
            row(&user_total, false, 3, n),
        ),
    };
    ComplexityAudit {
        per_party,
        server,
        s1,
        s2,
        user_total,
        user_mean,
    }
}

/// The comparison table's closed forms for both protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedComplexity {
    pub dpds_server: TableRow,
    pub dpds_user: TableRow,
    pub tss_s1: TableRow,
    pub tss_s2: TableRow,
    pub tss_user: TableRow,
}

/// Closed-form per-party costs for `n` users and `n_items` items, with
/// report fraction `alpha` and single-item reporting rate `p_chi`
/// (`alpha` itself under uniform reporting). User rows for the two-stage
/// protocol are expectations; the aggregation server's additions assume
/// every item is reported at least once.
pub fn expected_complexity(n: u64, n_items: u64, alpha: f64, p_chi: f64) -> ExpectedComplexity {
    assert!(n >= 1, "need at least one user");
    let (nf, big_n) = (n as f64, n_items as f64);
    let shares = (nf - 1.0) * big_n;
    let dpds_server = TableRow {
        field_add: shares,
        real_mul: big_n,
        ..TableRow::default()
    };
    let dpds_user = TableRow {
        field_add: 2.0 * shares,
        bernoulli: 1.0,
        field_draw: shares,
        residue_comm: 2.0 * nf * big_n + big_n,
        rounds: 2,
        ..TableRow::default()
    };
    let tss_s1 = TableRow {
        small_add: shares,
        small_draw: alpha * nf * big_n,
        id_comm: alpha * nf * big_n * (nf + 1.0),
        item_comm: (nf + 1.0) * big_n,
        rounds: 1,
        ..TableRow::default()
    };
    let tss_s2 = TableRow {
        field_add: (alpha * nf - 1.0) * big_n,
        real_mul: big_n,
        ..TableRow::default()
    };
    let tss_user = TableRow {
        field_add: (p_chi * nf - 1.0) * (p_chi + alpha) * big_n,
        bernoulli: 1.0,
        set_sample: 1.0,
        field_draw: (p_chi * nf - 1.0) * alpha * big_n,
        bit_comm: big_n,
        item_comm: alpha * big_n * (1.0 + p_chi * nf),
        residue_comm: alpha * big_n * (1.0 + p_chi * nf),
        rounds: 3,
        ..TableRow::default()
    };
    ExpectedComplexity {
        dpds_server,
        dpds_user,
        tss_s1,
        tss_s2,
        tss_user,
    }
}
