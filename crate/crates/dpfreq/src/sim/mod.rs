//! Deterministic in-process simulation of the distributed estimation
//! protocols: one-stage sampling over additive shares, and two-stage
//! sampling with elected per-item aggregators (plain and padded).
//!
//! Every run is a sequence of barrier-synchronized rounds: all messages of
//! round `r` are delivered before any round `r + 1` processing, and all
//! randomness comes from per-party substreams of one master seed, so a
//! transcript is reproducible bit-for-bit from `(inputs, master_seed)`.
//! Parties exchange value copies only; no party reads another's state.
//!
//! User ids are 0-based record indices; items are 1-based, matching
//! [`crate::EncodedRecord`]. Message bodies are kept only when requested via
//! [`SimOptions::record_messages`]; operation counters are always kept.

mod adversary;
mod complexity;
mod counters;
mod dpds;
mod tss;

pub use adversary::{adversary_view, AdversaryView, Coalition};
pub use complexity::{
    audit_complexity, expected_complexity, ComplexityAudit, ExpectedComplexity, TableRow,
};
pub use counters::{OpAverages, OpCounters};
pub use dpds::{run_dpds, run_dpds_with, DpdsRun};
pub use tss::{
    run_tss, run_tss_prime, run_tss_prime_with, run_tss_with, ElectionResult, ItemElection, TssRun,
};

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use std::collections::BTreeMap;
use std::fmt;

/// A protocol participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartyId {
    /// Estimation participant, identified by its 0-based record index.
    User(usize),
    /// The single aggregation server of the one-stage protocol.
    Server,
    /// The election server of the two-stage protocols.
    S1,
    /// The aggregation server of the two-stage protocols.
    S2,
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::User(i) => write!(f, "user{i}"),
            PartyId::Server => write!(f, "server"),
            PartyId::S1 => write!(f, "s1"),
            PartyId::S2 => write!(f, "s2"),
        }
    }
}

/// Which protocol produced a transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    /// One-stage sampling over additive shares.
    Dpds,
    /// Two-stage sampling with elected aggregators.
    Tss,
    /// Two-stage sampling with elected-set padding.
    TssPrime,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolKind::Dpds => f.write_str("dpds"),
            ProtocolKind::Tss => f.write_str("tss"),
            ProtocolKind::TssPrime => f.write_str("tss-prime"),
        }
    }
}

/// One message body. Traffic costs are derived from the variant, not from
/// the in-memory representation (a report set is an item-indicator bit
/// vector on the wire, so it costs one bit per item).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// One additive share vector of a user's encoded record.
    ShareVector(Vec<u64>),
    /// A user's field-sum of every share vector it received.
    AggregateVector(Vec<u64>),
    /// The items of a user's report set, as indicated to the election server.
    ReportSet(Vec<usize>),
    /// Election notice for one item: the elected aggregator ids, plus the
    /// raw reporter count when padding makes the list length uninformative.
    Election {
        item: usize,
        reporters: Option<usize>,
        elected: Vec<usize>,
    },
    /// One scalar share of a user's contribution to one item.
    ItemShare { item: usize, residue: u64 },
    /// An elected aggregator's field-sum for one item.
    ItemAggregate { item: usize, residue: u64 },
}

impl Payload {
    /// Short category tag for logs.
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::ShareVector(_) => "share-vector",
            Payload::AggregateVector(_) => "aggregate-vector",
            Payload::ReportSet(_) => "report-set",
            Payload::Election { .. } => "election",
            Payload::ItemShare { .. } => "item-share",
            Payload::ItemAggregate { .. } => "item-aggregate",
        }
    }

    /// FNV-1a digest of a canonical byte encoding, for transcript logs.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv1a::new();
        match self {
            Payload::ShareVector(v) => {
                h.byte(1);
                v.iter().for_each(|&x| h.word(x));
            }
            Payload::AggregateVector(v) => {
                h.byte(2);
                v.iter().for_each(|&x| h.word(x));
            }
            Payload::ReportSet(s) => {
                h.byte(3);
                s.iter().for_each(|&x| h.word(x as u64));
            }
            Payload::Election {
                item,
                reporters,
                elected,
            } => {
                h.byte(4);
                h.word(*item as u64);
                h.word(reporters.map_or(u64::MAX, |m| m as u64));
                elected.iter().for_each(|&x| h.word(x as u64));
            }
            Payload::ItemShare { item, residue } => {
                h.byte(5);
                h.word(*item as u64);
                h.word(*residue);
            }
            Payload::ItemAggregate { item, residue } => {
                h.byte(6);
                h.word(*item as u64);
                h.word(*residue);
            }
        }
        h.finish()
    }
}

/// One recorded message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub round: u32,
    pub from: PartyId,
    pub to: PartyId,
    pub payload: Payload,
}

/// Knobs for a single protocol run.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Keep full message bodies in the transcript (required for adversary
    /// views and log export). Off by default: counters alone are cheap.
    pub record_messages: bool,
    /// Share arithmetic field. Defaults to the smallest prime above the
    /// user count; any override must still exceed the user count so
    /// reconstructed tallies are exact.
    pub field: Option<FieldSpec>,
}

/// Everything observable about one finished run: configuration, per-party
/// operation counters, the reconstructed integer tallies, and (optionally)
/// every message exchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    protocol: ProtocolKind,
    master_seed: u64,
    n_users: usize,
    n_items: usize,
    field: FieldSpec,
    phi: Option<usize>,
    recorded: bool,
    messages: Vec<Message>,
    counters: BTreeMap<PartyId, OpCounters>,
    raw_counts: Vec<u64>,
}

impl Transcript {
    pub fn protocol(&self) -> ProtocolKind {
        self.protocol
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    /// Padding parameter, present only for the padded protocol.
    pub fn phi(&self) -> Option<usize> {
        self.phi
    }

    /// Whether message bodies were kept.
    pub fn recorded(&self) -> bool {
        self.recorded
    }

    /// All messages in delivery order. Empty unless recorded.
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn counters(&self) -> &BTreeMap<PartyId, OpCounters> {
        &self.counters
    }

    /// The aggregation server's reconstructed integer tally per item,
    /// before normalization.
    pub fn raw_counts(&self) -> &[u64] {
        &self.raw_counts
    }

    /// Line-per-message debug log: `round\tfrom\tto\tkind\tdigest`.
    /// The format is for humans and tests, not a stability guarantee.
    pub fn export_log(&self) -> Result<String> {
        if !self.recorded {
            return Err(Error::contract(
                "transcript was not recorded with message logging",
            ));
        }
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:016x}\n",
                m.round,
                m.from,
                m.to,
                m.payload.kind(),
                m.payload.digest()
            ));
        }
        Ok(out)
    }
}

/// FNV-1a, 64-bit.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    fn byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x100000001b3);
    }

    fn word(&mut self, w: u64) {
        w.to_le_bytes().iter().for_each(|&b| self.byte(b));
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Message fabric for one run: counts traffic on both endpoints and keeps
/// bodies only when recording.
pub(crate) struct Net {
    counters: BTreeMap<PartyId, OpCounters>,
    messages: Vec<Message>,
    record: bool,
    n_items: usize,
    round: u32,
}

impl Net {
    pub(crate) fn new(n_items: usize, record: bool) -> Self {
        Net {
            counters: BTreeMap::new(),
            messages: Vec::new(),
            record,
            n_items,
            round: 0,
        }
    }

    /// Advance to the next barrier-synchronized round.
    pub(crate) fn next_round(&mut self) -> u32 {
        self.round += 1;
        self.round
    }

    pub(crate) fn tally(&mut self, party: PartyId) -> &mut OpCounters {
        self.counters.entry(party).or_default()
    }

    /// Deliver one message: charge the sender's and receiver's traffic
    /// counters by payload category, and log the body if recording.
    pub(crate) fn send(&mut self, from: PartyId, to: PartyId, payload: Payload) {
        let (ids, items, bits, residues) = match &payload {
            Payload::ShareVector(v) | Payload::AggregateVector(v) => (0, 0, 0, v.len() as u64),
            Payload::ReportSet(_) => (0, 0, self.n_items as u64, 0),
            Payload::Election {
                reporters, elected, ..
            } => (
                elected.len() as u64 + u64::from(reporters.is_some()),
                1,
                0,
                0,
            ),
            Payload::ItemShare { .. } | Payload::ItemAggregate { .. } => (0, 1, 0, 1),
        };
        {
            let s = self.tally(from);
            s.id_sent += ids;
            s.item_sent += items;
            s.bit_sent += bits;
            s.residue_sent += residues;
        }
        {
            let r = self.tally(to);
            r.id_recv += ids;
            r.item_recv += items;
            r.bit_recv += bits;
            r.residue_recv += residues;
        }
        if self.record {
            self.messages.push(Message {
                round: self.round,
                from,
                to,
                payload,
            });
        }
    }

    pub(crate) fn into_transcript(
        self,
        protocol: ProtocolKind,
        master_seed: u64,
        n_users: usize,
        field: FieldSpec,
        phi: Option<usize>,
        raw_counts: Vec<u64>,
    ) -> Transcript {
        Transcript {
            protocol,
            master_seed,
            n_users,
            n_items: self.n_items,
            field,
            phi,
            recorded: self.record,
            messages: self.messages,
            counters: self.counters,
            raw_counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_digest_separates_kinds_and_contents() {
        let a = Payload::ShareVector(vec![1, 2]);
        let b = Payload::AggregateVector(vec![1, 2]);
        let c = Payload::ShareVector(vec![2, 1]);
        assert_ne!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest(), Payload::ShareVector(vec![1, 2]).digest());
    }

    #[test]
    fn net_counts_both_directions() {
        let mut net = Net::new(4, true);
        net.next_round();
        net.send(PartyId::User(0), PartyId::S1, Payload::ReportSet(vec![1, 3]));
        net.send(
            PartyId::User(0),
            PartyId::User(1),
            Payload::ItemShare { item: 3, residue: 9 },
        );
        let u0 = net.counters[&PartyId::User(0)];
        assert_eq!(u0.bit_sent, 4);
        assert_eq!(u0.item_sent, 1);
        assert_eq!(u0.residue_sent, 1);
        assert_eq!(net.counters[&PartyId::S1].bit_recv, 4);
        assert_eq!(net.counters[&PartyId::User(1)].residue_recv, 1);
        assert_eq!(net.messages.len(), 2);
    }

    #[test]
    fn election_traffic_counts_ids_and_optional_reporter_count() {
        let mut net = Net::new(2, false);
        net.next_round();
        net.send(
            PartyId::S1,
            PartyId::User(0),
            Payload::Election {
                item: 1,
                reporters: None,
                elected: vec![4, 7],
            },
        );
        assert_eq!(net.counters[&PartyId::S1].id_sent, 2);
        assert_eq!(net.counters[&PartyId::S1].item_sent, 1);
        net.send(
            PartyId::S1,
            PartyId::User(1),
            Payload::Election {
                item: 1,
                reporters: Some(2),
                elected: vec![4, 7, 9],
            },
        );
        assert_eq!(net.counters[&PartyId::S1].id_sent, 2 + 4);
        assert!(net.messages.is_empty());
    }
}
