//! Two-stage sampling as a distributed protocol. Users send report-set
//! indicators to an election server (S1), which elects per-item aggregator
//! sets and publishes them. Every user then shares its per-item
//! contribution (1 for its own item when participating, 0 otherwise) to the
//! elected aggregators, who forward field-sums per item to the aggregation
//! server (S2). S2 reconstructs the tally and normalizes by the configured
//! expected reporting rate.
//!
//! The padded variant elects `max(phi + 1, m_j)` aggregators per item and
//! publishes the raw reporter count alongside, so list lengths never leak
//! whether an item had few reporters.

use crate::error::{Error, Result};
use crate::field::{EncodedRecord, FieldSpec};
use crate::mech::report_set::{check_one_hot, user_report};
use crate::mech::{FrequencyEstimate, MechanismParams};
use crate::seed::{sample_distinct, substream, StreamTag};
use crate::sharing::share;
use crate::sim::{Net, PartyId, Payload, ProtocolKind, SimOptions, Transcript};

/// Election outcome for one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemElection {
    /// 1-based item id.
    pub item: usize,
    /// Reporter count `m_j`: users whose report set covers the item.
    pub reporters: usize,
    /// Elected aggregator ids (0-based), distinct; length is `m_j`, or
    /// `max(phi + 1, m_j)` under padding.
    pub elected: Vec<usize>,
}

/// Per-item election outcomes, in item order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionResult {
    items: Vec<ItemElection>,
}

impl ElectionResult {
    pub fn items(&self) -> &[ItemElection] {
        &self.items
    }

    /// Election for a 1-based item id.
    pub fn for_item(&self, item: usize) -> &ItemElection {
        &self.items[item - 1]
    }
}

/// Outcome of one two-stage protocol run.
#[derive(Debug, Clone)]
pub struct TssRun {
    pub estimate: FrequencyEstimate,
    pub election: ElectionResult,
    pub transcript: Transcript,
}

/// Run the two-stage protocol; `params.phi` is ignored (no padding).
pub fn run_tss(
    records: &[EncodedRecord],
    params: &MechanismParams,
    master_seed: u64,
) -> Result<TssRun> {
    run_tss_with(records, params, master_seed, &SimOptions::default())
}

/// [`run_tss`] with explicit options.
pub fn run_tss_with(
    records: &[EncodedRecord],
    params: &MechanismParams,
    master_seed: u64,
    options: &SimOptions,
) -> Result<TssRun> {
    run_two_stage(records, params, master_seed, false, options)
}

/// Run the padded two-stage protocol: every item gets at least
/// `params.phi + 1` elected aggregators.
pub fn run_tss_prime(
    records: &[EncodedRecord],
    params: &MechanismParams,
    master_seed: u64,
) -> Result<TssRun> {
    run_tss_prime_with(records, params, master_seed, &SimOptions::default())
}

/// [`run_tss_prime`] with explicit options.
pub fn run_tss_prime_with(
    records: &[EncodedRecord],
    params: &MechanismParams,
    master_seed: u64,
    options: &SimOptions,
) -> Result<TssRun> {
    run_two_stage(records, params, master_seed, true, options)
}

fn run_two_stage(
    records: &[EncodedRecord],
    params: &MechanismParams,
    master_seed: u64,
    padded: bool,
    options: &SimOptions,
) -> Result<TssRun> {
    let n_items = check_one_hot(records)?;
    params.validate(n_items)?;
    let m_report = params.report_size(n_items)?;
    let n = records.len();
    if n < 2 {
        return Err(Error::domain("the sharing protocol needs at least 2 users"));
    }
    if padded && params.phi + 1 > n {
        return Err(Error::domain(format!(
            "padding phi = {} needs phi + 1 <= n = {n} distinct aggregators",
            params.phi
        )));
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

    // Round 1: every user (participating or not) draws its two sampling
    // stages from its own stream and indicates its report set to S1.
    net.next_round();
    let mut user_rngs: Vec<_> = (0..n)
        .map(|i| substream(master_seed, StreamTag::User, i as u64, 0))
        .collect();
    let mut active = vec![false; n];
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let (a, set) = user_report(&records[i], params, m_report, &mut user_rngs[i]);
        active[i] = a;
        {
            let t = net.tally(PartyId::User(i));
            t.bernoulli_draw += 1;
            t.set_draw += 1;
        }
        net.send(PartyId::User(i), PartyId::S1, Payload::ReportSet(set.clone()));
        sets.push(set);
    }

    // S1 tallies reporter counts: summing n indicator vectors coordinate
    // by coordinate.
    let mut reporters = vec![0usize; n_items];
    for set in &sets {
        for &j in set {
            reporters[j - 1] += 1;
        }
    }
    net.tally(PartyId::S1).small_add += ((n - 1) * n_items) as u64;

    // Round 2: S1 elects aggregators per item from all users and publishes
    // each election to every user and to S2.
    net.next_round();
    let mut s1_rng = substream(master_seed, StreamTag::Server, 1, 0);
    let mut elections = Vec::with_capacity(n_items);
    for (idx, &m_j) in reporters.iter().enumerate() {
        let item = idx + 1;
        let target = if padded {
            m_j.max(params.phi + 1)
        } else {
            m_j
        };
        let elected = if target > 0 {
            net.tally(PartyId::S1).small_draw += target as u64;
            sample_distinct(&mut s1_rng, n, target)
        } else {
            Vec::new()
        };
        if target > 0 {
            let notice = Payload::Election {
                item,
                reporters: padded.then_some(m_j),
                elected: elected.clone(),
            };
            for k in 0..n {
                net.send(PartyId::S1, PartyId::User(k), notice.clone());
            }
            net.send(PartyId::S1, PartyId::S2, notice);
        }
        elections.push(ItemElection {
            item,
            reporters: m_j,
            elected,
        });
    }

    // Round 3: every user splits its contribution to each item of its
    // report set into one scalar share per elected aggregator. The
    // contribution is 1 exactly when the user participates and the item is
    // its own; inactive users share zeros so traffic reveals nothing.
    net.next_round();
    let mut received: Vec<Vec<Vec<u64>>> = elections
        .iter()
        .map(|e| vec![Vec::new(); e.elected.len()])
        .collect();
    for i in 0..n {
        for &j in &sets[i] {
            let el = &elections[j - 1];
            let m_eff = el.elected.len();
            if m_eff == 0 {
                continue;
            }
            let v = u64::from(active[i] && records[i].item() == Some(j));
            let pieces: Vec<u64> = if m_eff == 1 {
                vec![v]
            } else {
                let bundle = share(&[v], m_eff, field, &mut user_rngs[i])?;
                (1..=m_eff).map(|t| bundle.share(t)[0]).collect()
            };
            {
                let t = net.tally(PartyId::User(i));
                t.field_draw += (m_eff - 1) as u64;
                t.field_add += (m_eff - 1) as u64;
            }
            for (t, &residue) in pieces.iter().enumerate() {
                net.send(
                    PartyId::User(i),
                    PartyId::User(el.elected[t]),
                    Payload::ItemShare { item: j, residue },
                );
                received[j - 1][t].push(residue);
            }
        }
    }

    // Round 4: each elected aggregator field-sums what it received for its
    // item and forwards one residue to S2. Padded aggregators with no
    // reporters forward zero.
    net.next_round();
    let mut s2_inbox: Vec<Vec<u64>> = vec![Vec::new(); n_items];
    for (idx, el) in elections.iter().enumerate() {
        for (t, &u) in el.elected.iter().enumerate() {
            let residues = &received[idx][t];
            let mut s = 0u64;
            for &r in residues {
                s = field.add(s, r);
            }
            net.tally(PartyId::User(u)).field_add += (residues.len().max(1) - 1) as u64;
            net.send(
                PartyId::User(u),
                PartyId::S2,
                Payload::ItemAggregate {
                    item: el.item,
                    residue: s,
                },
            );
            s2_inbox[idx].push(s);
        }
    }

    // S2: reconstruct per-item tallies and normalize by the configured
    // expected reporting rate, never the realized one.
    let mut counts = vec![0u64; n_items];
    for (idx, parts) in s2_inbox.iter().enumerate() {
        let mut s = 0u64;
        for &r in parts {
            s = field.add(s, r);
        }
        counts[idx] = s;
        net.tally(PartyId::S2).field_add += (parts.len().max(1) - 1) as u64;
    }
    net.tally(PartyId::S2).real_mul += n_items as u64;
    let estimate = FrequencyEstimate::from_counts(counts.clone(), params.q_chi() * n as f64);

    let kind = if padded {
        ProtocolKind::TssPrime
    } else {
        ProtocolKind::Tss
    };
    let transcript = net.into_transcript(
        kind,
        master_seed,
        n,
        field,
        padded.then_some(params.phi),
        counts,
    );
    Ok(TssRun {
        estimate,
        election: ElectionResult { items: elections },
        transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech::report_set::tss_mechanism_seeded;
    use crate::mech::Reporting;
    use crate::sim::adversary::{adversary_view, Coalition};
    use crate::stats::chi_square_two_sample;
    use std::collections::BTreeMap;

    fn records(counts: &[usize]) -> Vec<EncodedRecord> {
        let n_items = counts.len();
        let mut out = Vec::new();
        for (j, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                out.push(EncodedRecord::one_hot(j + 1, n_items).unwrap());
            }
        }
        out
    }

    fn uniform_params(p: f64, alpha: f64) -> MechanismParams {
        MechanismParams::two_stage(p, alpha, Reporting::Uniform, 1.0)
    }

    #[test]
    fn saturated_run_reproduces_exact_histogram() {
        let rs = records(&[8, 4, 8]);
        let params = uniform_params(1.0, 1.0);
        let run = run_tss(&rs, &params, 5).unwrap();
        assert_eq!(run.transcript.raw_counts(), &[8, 4, 8]);
        assert_eq!(run.estimate.normalized(), &[0.4, 0.2, 0.4]);
        for e in run.election.items() {
            assert_eq!(e.reporters, rs.len());
            assert_eq!(e.elected.len(), rs.len());
        }
    }

    #[test]
    fn same_seed_same_transcript() {
        let rs = records(&[3, 2, 2, 2]);
        let params = MechanismParams::two_stage(0.6, 0.5, Reporting::Adaptive, 2.0);
        let opts = SimOptions {
            record_messages: true,
            ..SimOptions::default()
        };
        let a = run_tss_with(&rs, &params, 77, &opts).unwrap();
        let b = run_tss_with(&rs, &params, 77, &opts).unwrap();
        assert_eq!(a.transcript, b.transcript);
        assert_eq!(a.election, b.election);
        assert_eq!(a.estimate.normalized(), b.estimate.normalized());
    }

    #[test]
    fn estimate_matches_collapsed_sampler_bit_for_bit() {
        let rs = records(&[10, 8, 6, 4, 3]);
        for chi in [Reporting::Uniform, Reporting::Adaptive] {
            let params = MechanismParams::two_stage(0.5, 0.4, chi, 2.0);
            for master in 0..50u64 {
                let run = run_tss(&rs, &params, master).unwrap();
                let twin = tss_mechanism_seeded(&rs, &params, master).unwrap();
                assert_eq!(
                    run.estimate.raw_counts(),
                    twin.raw_counts(),
                    "chi {chi:?} master {master}"
                );
                assert_eq!(run.estimate.normalized(), twin.normalized());
            }
        }
    }

    #[test]
    fn padded_elections_meet_floor_and_preserve_estimates() {
        let rs = records(&[14, 10, 8, 5, 3]);
        let mut params = MechanismParams::two_stage(0.5, 0.4, Reporting::Adaptive, 2.0);
        params.phi = 5;
        for master in 0..30u64 {
            let plain = run_tss(&rs, &params, master).unwrap();
            let padded = run_tss_prime(&rs, &params, master).unwrap();
            for (pe, pp) in plain.election.items().iter().zip(padded.election.items()) {
                assert_eq!(pe.reporters, pp.reporters);
                assert_eq!(pp.elected.len(), pe.reporters.max(6));
                let mut ids = pp.elected.clone();
                ids.sort_unstable();
                ids.dedup();
                assert_eq!(ids.len(), pp.elected.len(), "elected ids must be distinct");
            }
            assert_eq!(
                plain.estimate.raw_counts(),
                padded.estimate.raw_counts(),
                "padding must not change the tally (master {master})"
            );
        }
    }

    #[test]
    fn padded_run_publishes_reporter_counts() {
        let rs = records(&[5, 4, 3]);
        let mut params = uniform_params(0.5, 1.0);
        params.phi = 2;
        let opts = SimOptions {
            record_messages: true,
            ..SimOptions::default()
        };
        let run = run_tss_prime_with(&rs, &params, 9, &opts).unwrap();
        let mut seen = 0;
        for m in run.transcript.messages() {
            if let Payload::Election { item, reporters, .. } = &m.payload {
                assert_eq!(reporters.unwrap(), run.election.for_item(*item).reporters);
                seen += 1;
            }
        }
        assert_eq!(seen, 3 * (rs.len() + 1));
    }

    #[test]
    fn items_nobody_reports_stay_zero() {
        // Two users, singleton report sets over four items: at least two
        // items have no reporter, no election, and a zero tally.
        let rs = records(&[1, 1, 0, 0]);
        let params = uniform_params(1.0, 0.25);
        let seed = 0x7a31;
        let run = run_tss(&rs, &params, seed).unwrap();
        let empty: Vec<usize> = run
            .election
            .items()
            .iter()
            .filter(|e| e.reporters == 0)
            .map(|e| e.item)
            .collect();
        assert!(empty.len() >= 2, "expected unreported items, got {empty:?}");
        for &j in &empty {
            assert!(run.election.for_item(j).elected.is_empty());
            assert_eq!(run.transcript.raw_counts()[j - 1], 0);
        }
        // Padding elects aggregators even for unreported items, without
        // changing the tally.
        let mut padded_params = params.clone();
        padded_params.phi = 0;
        let padded = run_tss_prime(&rs, &padded_params, seed).unwrap();
        for &j in &empty {
            assert_eq!(padded.election.for_item(j).elected.len(), 1);
        }
        assert_eq!(padded.transcript.raw_counts(), run.transcript.raw_counts());
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let rs = records(&[2, 2]);
        let mut params = uniform_params(0.5, 0.5);
        params.phi = 4;
        assert!(run_tss_prime(&rs, &params, 1).is_err(), "phi + 1 > n");
        assert!(run_tss(&records(&[1, 0]), &uniform_params(0.5, 0.5), 1).is_err());
        let bad_alpha = uniform_params(0.5, 0.3);
        assert!(run_tss(&records(&[3, 2]), &bad_alpha, 1).is_err());
        let mut zeroed = records(&[2, 2]);
        zeroed[0] = EncodedRecord::zero(2);
        assert!(run_tss(&zeroed, &uniform_params(0.5, 0.5), 1).is_err());
    }

    #[test]
    fn l2_error_tracks_variance_prediction_at_reduced_scale() {
        let rs = records(&[34, 34, 33, 33, 33, 33]);
        let n = rs.len() as f64;
        let truth: Vec<f64> = rs
            .iter()
            .fold(vec![0.0; 6], |mut acc, r| {
                acc[r.item().unwrap() - 1] += 1.0 / n;
                acc
            });
        let params = uniform_params(0.5, 0.5);
        let q = params.q_chi();
        let trials = 400u64;
        let mut total = 0.0;
        for t in 0..trials {
            let run = run_tss(&rs, &params, 0x51aa_0000 + t).unwrap();
            total += run
                .estimate
                .normalized()
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let mean = total / trials as f64;
        let predicted = (1.0 - q) / (q * n);
        assert!(
            (mean - predicted).abs() <= 0.15 * predicted,
            "mean {mean} vs predicted {predicted}"
        );
    }

    #[test]
    fn adaptive_reporting_beats_uniform_mse() {
        let rs = records(&[150, 60, 40, 30, 20]);
        let n = rs.len() as f64;
        let truth: Vec<f64> = vec![150.0, 60.0, 40.0, 30.0, 20.0]
            .into_iter()
            .map(|c| c / n)
            .collect();
        let mse = |chi: Reporting, gamma: f64| {
            let params = MechanismParams::two_stage(0.5, 0.4, chi, gamma);
            let mut acc = 0.0;
            for t in 0..20u64 {
                let run = run_tss(&rs, &params, 0xada7_0000 + t).unwrap();
                acc += run
                    .estimate
                    .normalized()
                    .iter()
                    .zip(&truth)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / truth.len() as f64;
            }
            acc / 20.0
        };
        let uniform = mse(Reporting::Uniform, 1.0);
        let adaptive = mse(Reporting::Adaptive, 2.0);
        assert!(
            adaptive < uniform,
            "adaptive {adaptive} should beat uniform {uniform}"
        );
    }

    #[test]
    fn election_server_view_is_invariant_to_items_under_uniform_reporting() {
        // Under uniform reporting the indicators S1 sees are drawn without
        // looking at records, so swapping one user's item leaves S1's view
        // distribution unchanged.
        let opts = SimOptions {
            record_messages: true,
            ..SimOptions::default()
        };
        let params = uniform_params(0.5, 0.5);
        let mut tallies: Vec<BTreeMap<Vec<usize>, u64>> = vec![BTreeMap::new(), BTreeMap::new()];
        for (d, first_item) in [1usize, 2].into_iter().enumerate() {
            let mut rs = records(&[0, 1, 2, 0]);
            rs.insert(0, EncodedRecord::one_hot(first_item, 4).unwrap());
            for t in 0..20_000u64 {
                let run = run_tss_with(&rs, &params, 0x51ee_0000 + t, &opts).unwrap();
                let view = adversary_view(&run.transcript, &Coalition::S1).unwrap();
                let set = view
                    .messages()
                    .iter()
                    .find_map(|m| match (&m.from, &m.payload) {
                        (PartyId::User(0), Payload::ReportSet(s)) => Some(s.clone()),
                        _ => None,
                    })
                    .unwrap();
                *tallies[d].entry(set).or_insert(0) += 1;
            }
        }
        let keys: Vec<Vec<usize>> = tallies[0].keys().cloned().collect();
        assert_eq!(keys.len(), 6, "C(4, 2) possible report sets");
        let a: Vec<u64> = keys.iter().map(|k| tallies[0][k]).collect();
        let b: Vec<u64> = keys.iter().map(|k| *tallies[1].get(k).unwrap_or(&0)).collect();
        let test = chi_square_two_sample(&a, &b);
        assert!(
            test.p_value > 1e-3,
            "views distinguish items: chi2 {} p {}",
            test.statistic,
            test.p_value
        );
    }
}
