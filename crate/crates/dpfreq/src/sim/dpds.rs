//! One-stage sampling as a distributed protocol: every user additively
//! shares its (possibly zeroed) record to all users, each user forwards the
//! field-sum of what it received to the server, and the server reconstructs
//! the participant tally and normalizes it.

use crate::error::{Error, Result};
use crate::field::{EncodedRecord, FieldSpec};
use crate::mech::dpcs::{check_p, check_records};
use crate::mech::FrequencyEstimate;
use crate::seed::{bernoulli, substream, StreamTag};
use crate::sharing::share;
use crate::sim::{Net, PartyId, Payload, ProtocolKind, SimOptions, Transcript};

/// Outcome of one protocol run.
#[derive(Debug, Clone)]
pub struct DpdsRun {
    pub estimate: FrequencyEstimate,
    pub transcript: Transcript,
}

/// Run the one-stage sharing protocol with counters only.
pub fn run_dpds(records: &[EncodedRecord], p: f64, master_seed: u64) -> Result<DpdsRun> {
    run_dpds_with(records, p, master_seed, &SimOptions::default())
}

/// [`run_dpds`] with explicit options (message recording, field override).
pub fn run_dpds_with(
    records: &[EncodedRecord],
    p: f64,
    master_seed: u64,
    options: &SimOptions,
) -> Result<DpdsRun> {
    let n_items = check_records(records)?;
    check_p(p)?;
    let n = records.len();
    if n < 2 {
        return Err(Error::domain("the sharing protocol needs at least 2 users"));
    }
    let field = match options.field {
        Some(f) => f,
        None => FieldSpec::smallest_prime_above(n as u64)?,
    };
    if field.q() <= n as u64 {
        return Err(Error::domain(
            "field modulus must exceed the user count so tallies reconstruct exactly",
        ));
    }

    let mut net = Net::new(n_items, options.record_messages);
    let vec_ops = ((n - 1) * n_items) as u64;

    // Round 1: each user draws participation, encodes its contribution, and
    // shares it to every user (itself included).
    net.next_round();
    let mut inboxes: Vec<Vec<Vec<u64>>> = vec![Vec::with_capacity(n); n];
    for (i, r) in records.iter().enumerate() {
        let mut rng = substream(master_seed, StreamTag::User, i as u64, 0);
        let active = bernoulli(&mut rng, p);
        let contribution = if active {
            r.clone()
        } else {
            EncodedRecord::zero(n_items)
        };
        let bundle = share(contribution.entries(), n, field, &mut rng)?;
        {
            let t = net.tally(PartyId::User(i));
            t.bernoulli_draw += 1;
            t.field_draw += vec_ops;
            t.field_add += vec_ops;
        }
        for k in 0..n {
            let piece = bundle.share(k + 1).to_vec();
            net.send(PartyId::User(i), PartyId::User(k), Payload::ShareVector(piece.clone()));
            inboxes[k].push(piece);
        }
    }

    // Round 2: each user field-sums its inbox and uplinks the aggregate.
    net.next_round();
    let mut uplinks: Vec<Vec<u64>> = Vec::with_capacity(n);
    for (k, inbox) in inboxes.into_iter().enumerate() {
        let mut acc = vec![0u64; n_items];
        for v in &inbox {
            field.add_assign(&mut acc, v);
        }
        net.tally(PartyId::User(k)).field_add += vec_ops;
        net.send(PartyId::User(k), PartyId::Server, Payload::AggregateVector(acc.clone()));
        uplinks.push(acc);
    }

    // Server: reconstruct the tally and normalize by the expected
    // participant count.
    let mut counts = vec![0u64; n_items];
    for v in &uplinks {
        field.add_assign(&mut counts, v);
    }
    {
        let t = net.tally(PartyId::Server);
        t.field_add += vec_ops;
        t.real_mul += n_items as u64;
    }
    let estimate = FrequencyEstimate::from_counts(counts.clone(), p * n as f64);
    let transcript = net.into_transcript(ProtocolKind::Dpds, master_seed, n, field, None, counts);
    Ok(DpdsRun {
        estimate,
        transcript,
    })
}
