//! Honest-but-curious coalition views over recorded transcripts: exactly
//! the messages that crossed into the coalition from outside, which is all
//! a passive coalition learns beyond its own inputs and randomness.

use crate::error::{Error, Result};
use crate::sim::{Message, PartyId, Payload, ProtocolKind, Transcript};

/// A passive coalition whose view is being extracted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coalition {
    /// Colluding users, by 0-based id.
    Users(Vec<usize>),
    /// The one-stage protocol's aggregation server.
    Server,
    /// The two-stage protocols' election server.
    S1,
    /// The two-stage protocols' aggregation server.
    S2,
}

/// Everything a coalition observes: the inbound messages crossing its
/// boundary, in delivery order.
#[derive(Debug, Clone)]
pub struct AdversaryView {
    parties: Vec<PartyId>,
    messages: Vec<Message>,
}

impl AdversaryView {
    pub fn parties(&self) -> &[PartyId] {
        &self.parties
    }

    /// Messages received by coalition members from non-members.
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Every field residue in the view, flattened in delivery order.
    /// Useful for distribution tests over observed share material.
    pub fn external_residues(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for m in &self.messages {
            match &m.payload {
                Payload::ShareVector(v) | Payload::AggregateVector(v) => out.extend(v),
                Payload::ItemShare { residue, .. } | Payload::ItemAggregate { residue, .. } => {
                    out.push(*residue)
                }
                Payload::ReportSet(_) | Payload::Election { .. } => {}
            }
        }
        out
    }
}

/// Extract the view of a coalition, refusing coalitions outside the
/// protocol's guarantee boundary: up to `n - 1` users or the server for the
/// one-stage protocol; S1 or S2 for the two-stage protocols, plus up to
/// `phi` users under padding.
pub fn adversary_view(transcript: &Transcript, coalition: &Coalition) -> Result<AdversaryView> {
    if !transcript.recorded() {
        return Err(Error::contract(
            "adversary views need a transcript recorded with message logging",
        ));
    }
    let parties = coalition_parties(transcript, coalition)?;
    let inside = |p: &PartyId| parties.contains(p);
    let messages = transcript
        .messages()
        .iter()
        .filter(|m| inside(&m.to) && !inside(&m.from))
        .cloned()
        .collect();
    Ok(AdversaryView { parties, messages })
}

fn coalition_parties(transcript: &Transcript, coalition: &Coalition) -> Result<Vec<PartyId>> {
    let n = transcript.n_users();
    let unsupported =
        |why: &str| Err(Error::UnsupportedCoalition(format!("{}: {why}", transcript.protocol())));
    match (transcript.protocol(), coalition) {
        (_, Coalition::Users(ids)) => {
            if ids.is_empty() {
                return unsupported("an empty coalition observes nothing");
            }
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ids.len() {
                return Err(Error::domain("duplicate user id in coalition"));
            }
            if sorted.last().copied().unwrap_or(0) >= n {
                return Err(Error::domain("coalition user id out of range"));
            }
            let cap = match transcript.protocol() {
                ProtocolKind::Dpds => n - 1,
                ProtocolKind::Tss => {
                    return unsupported(
                        "user coalitions are only covered by the padded variant",
                    )
                }
                ProtocolKind::TssPrime => transcript.phi().unwrap_or(0),
            };
            if sorted.len() > cap {
                return unsupported(&format!(
                    "at most {cap} colluding users are inside the guarantee"
                ));
            }
            Ok(sorted.into_iter().map(PartyId::User).collect())
        }
        (ProtocolKind::Dpds, Coalition::Server) => Ok(vec![PartyId::Server]),
        (ProtocolKind::Dpds, _) => unsupported("the one-stage protocol has a single server"),
        (ProtocolKind::Tss | ProtocolKind::TssPrime, Coalition::S1) => Ok(vec![PartyId::S1]),
        (ProtocolKind::Tss | ProtocolKind::TssPrime, Coalition::S2) => Ok(vec![PartyId::S2]),
        (ProtocolKind::Tss | ProtocolKind::TssPrime, Coalition::Server) => {
            unsupported("the two-stage protocols have servers S1 and S2")
        }
    }
}
