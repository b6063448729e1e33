use std::collections::{HashMap, HashSet};

use primitive_types::U256;

use super::record::*;
use super::vocab::AddressVocab;
use crate::ingest::{Address, RawTransaction, TxHash, TxStatus};

/// Default de-duplication window.
pub const DEDUP_WINDOW_HOURS: u64 = 72;

/// Build an owner's sequence: a dummy head, then every involved transaction
/// newest first (ties by ascending hash). Self-transfers and contract
/// creations have no counterparty and are skipped. Features are left
/// unbinned; see [`bin_sequence`].
pub fn build_sequence(
    owner: Address,
    involved: &[&RawTransaction],
    vocab: &AddressVocab,
    contracts: &HashSet<Address>,
) -> TxSequence {
    let owner_id = vocab.id(&owner);
    let mut txs: Vec<&RawTransaction> = involved
        .iter()
        .copied()
        .filter(|t| match t.to_address {
            Some(to) => (t.from_address == owner) != (to == owner),
            None => false,
        })
        .collect();
    txs.sort_by(|a, b| {
        b.block_timestamp
            .cmp(&a.block_timestamp)
            .then_with(|| a.tx_hash.cmp(&b.tx_hash))
    });
    let body = txs.into_iter().map(|t| {
        let out = t.from_address == owner;
        let other = if out {
            t.to_address.expect("filtered above")
        } else {
            t.from_address
        };
        TxRecord {
            counterparty: vocab.id(&other),
            direction: if out { Direction::Out } else { Direction::In },
            counterparty_kind: if contracts.contains(&other) {
                CounterpartyKind::Contract
            } else {
                CounterpartyKind::Eoa
            },
            amount_bin: 0,
            count_bin: 0,
            time_bin: 0,
            position: 0,
            raw_timestamp: t.block_timestamp,
            raw_amount_wei: t.value_wei,
            agg_count: 1,
            token_recipients: Vec::new(),
            tx_hashes: vec![t.tx_hash],
            failed: t.status == TxStatus::Failed,
        }
    });
    TxSequence::from_body(owner_id, body)
}

/// Drop failed transactions, then merge runs of consecutive records with the
/// same counterparty and direction whose chronological span is within
/// `window_secs` (inclusive). A run starts at its oldest record; the merged
/// record keeps that timestamp, sums amounts and counts, and concatenates
/// hashes and token recipients.
pub fn deduplicate(seq: &TxSequence, window_secs: u64) -> TxSequence {
    // Walk oldest to newest so runs anchor at their first timestamp.
    let mut merged: Vec<TxRecord> = Vec::with_capacity(seq.len());
    let mut run_start: u64 = 0;
    for r in seq.body().iter().rev().filter(|r| !r.failed) {
        if let Some(last) = merged.last_mut() {
            if last.counterparty == r.counterparty
                && last.direction == r.direction
                && r.raw_timestamp.saturating_sub(run_start) <= window_secs
            {
                last.raw_amount_wei = last.raw_amount_wei.saturating_add(r.raw_amount_wei);
                last.agg_count += r.agg_count;
                last.tx_hashes.extend_from_slice(&r.tx_hashes);
                last.token_recipients.extend_from_slice(&r.token_recipients);
                continue;
            }
        }
        run_start = r.raw_timestamp;
        merged.push(r.clone());
    }
    merged.reverse();
    TxSequence::from_body(seq.owner, merged)
}

/// Counts behind [`repetitiveness_ratio`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RepetitionCount {
    pub repeats: u64,
    pub comparisons: u64,
}

impl RepetitionCount {
    pub fn ratio(&self) -> f64 {
        if self.comparisons == 0 {
            0.0
        } else {
            self.repeats as f64 / self.comparisons as f64
        }
    }
}

pub fn repetition_count(seq: &TxSequence) -> RepetitionCount {
    let body = seq.body();
    RepetitionCount {
        repeats: body
            .windows(2)
            .filter(|w| w[0].counterparty == w[1].counterparty)
            .count() as u64,
        comparisons: body.len().saturating_sub(1) as u64,
    }
}

/// Fraction of non-first records whose counterparty equals the previous
/// record's, pooled over all sequences.
pub fn repetitiveness_ratio<'a>(corpus: impl IntoIterator<Item = &'a TxSequence>) -> f64 {
    corpus
        .into_iter()
        .map(repetition_count)
        .fold(RepetitionCount::default(), |a, b| RepetitionCount {
            repeats: a.repeats + b.repeats,
            comparisons: a.comparisons + b.comparisons,
        })
        .ratio()
}

fn decimal_digits(v: &U256) -> u32 {
    // bits * log10(2) gives the digit count up to one; fix up exactly.
    let bits = v.bits() as u32;
    let mut d = ((bits.saturating_sub(1)) as f64 * std::f64::consts::LOG10_2) as u32 + 1;
    let ten = U256::from(10u8);
    if d < 78 && *v >= ten.pow(U256::from(d)) {
        d += 1;
    }
    d
}

/// `0` for zero, else `floor(log10(wei / 1e18)) + 10` clamped to `[1, 20]`.
pub fn amount_bin(wei: &U256) -> u8 {
    if wei.is_zero() {
        return 0;
    }
    let log10_floor = decimal_digits(wei) as i64 - 1;
    (log10_floor - 18 + 10).clamp(1, 20) as u8
}

/// `floor(log2(count))` clamped to `[0, 10]`.
pub fn count_bin(agg_count: u32) -> u8 {
    let c = agg_count.max(1);
    (31 - c.leading_zeros()).min(10) as u8
}

/// `floor(log2(1 + days))` clamped to `[0, 15]` where `days` is the age
/// relative to the newest transaction in the sequence.
pub fn time_bin(timestamp: u64, newest: u64) -> u8 {
    let days = newest.saturating_sub(timestamp) as f64 / 86_400.0;
    ((1.0 + days).log2().floor() as i64).clamp(0, 15) as u8
}

/// Binned features for one record.
pub fn bin_features(record: &TxRecord, newest: u64) -> (u8, u8, u8) {
    if record.is_head() {
        return (AMOUNT_NULL, COUNT_NULL, TIME_NULL);
    }
    (
        amount_bin(&record.raw_amount_wei),
        count_bin(record.agg_count),
        time_bin(record.raw_timestamp, newest),
    )
}

/// Fill the binned features of every record.
pub fn bin_sequence(seq: &mut TxSequence) {
    let newest = seq.body().iter().map(|r| r.raw_timestamp).max().unwrap_or(0);
    for r in &mut seq.records {
        let (a, c, t) = bin_features(r, newest);
        r.amount_bin = a;
        r.count_bin = c;
        r.time_bin = t;
    }
}

/// Attach ERC-20 recipient EOAs to the outgoing records whose originating
/// transactions emitted transfers.
pub fn attach_token_recipients(seq: &TxSequence, events_by_txhash: &HashMap<TxHash, Vec<u32>>) -> TxSequence {
    let mut out = seq.clone();
    for r in out.records.iter_mut().filter(|r| r.direction == Direction::Out) {
        r.token_recipients = r
            .tx_hashes
            .iter()
            .filter_map(|h| events_by_txhash.get(h))
            .flatten()
            .copied()
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TxHash;

    const H: u64 = 3600;

    fn tx(i: u64, from: u64, to: u64, wei: u64, ts: u64, ok: bool) -> RawTransaction {
        RawTransaction {
            tx_hash: TxHash::from_index(i),
            from_address: Address::from_index(from),
            to_address: Some(Address::from_index(to)),
            value_wei: U256::from(wei),
            block_timestamp: ts,
            status: if ok { TxStatus::Success } else { TxStatus::Failed },
        }
    }

    fn vocab(n: u64) -> AddressVocab {
        AddressVocab::new((0..n).map(Address::from_index).collect())
    }

    fn id(v: &AddressVocab, i: u64) -> u32 {
        v.id(&Address::from_index(i))
    }

    #[test]
    fn empty_history_is_head_only() {
        let v = vocab(3);
        let s = build_sequence(Address::from_index(0), &[], &v, &HashSet::new());
        assert_eq!(s.len(), 1);
        assert!(s.records[0].is_head());
        assert_eq!(s.records[0].counterparty, id(&v, 0));
    }

    #[test]
    fn build_orders_newest_first() {
        // owner A=0 sends to B=1 at t=5, receives from C=2 at t=9.
        let v = vocab(3);
        let txs = [tx(1, 0, 1, 1, 5, true), tx(2, 2, 0, 1, 9, true)];
        let refs: Vec<_> = txs.iter().collect();
        let s = build_sequence(Address::from_index(0), &refs, &v, &HashSet::new());
        let got: Vec<_> = s
            .records
            .iter()
            .map(|r| (r.counterparty, r.direction, r.raw_timestamp, r.position))
            .collect();
        assert_eq!(
            got,
            vec![
                (id(&v, 0), Direction::SelfTx, 0, 0),
                (id(&v, 2), Direction::In, 9, 1),
                (id(&v, 1), Direction::Out, 5, 2)
            ]
        );
    }

    #[test]
    fn equal_timestamps_tie_break_on_hash() {
        let v = vocab(3);
        let txs = [tx(9, 0, 1, 1, 5, true), tx(3, 0, 2, 1, 5, true)];
        let refs: Vec<_> = txs.iter().collect();
        let s = build_sequence(Address::from_index(0), &refs, &v, &HashSet::new());
        assert_eq!(s.records[1].tx_hashes[0], TxHash::from_index(3));
        assert_eq!(s.records[2].tx_hashes[0], TxHash::from_index(9));
    }

    #[test]
    fn dedup_hand_trace() {
        let v = vocab(2);
        let t0 = 1_000_000;
        let txs = [
            tx(1, 0, 1, 1, t0, true),
            tx(2, 0, 1, 2, t0 + 10 * H, true),
            tx(3, 0, 1, 4, t0 + 20 * H, false),
            tx(4, 1, 0, 5, t0 + 30 * H, true),
        ];
        let refs: Vec<_> = txs.iter().collect();
        let s = build_sequence(Address::from_index(0), &refs, &v, &HashSet::new());
        let d = deduplicate(&s, DEDUP_WINDOW_HOURS * H);
        let b = id(&v, 1);
        let got: Vec<_> = d
            .body()
            .iter()
            .map(|r| (r.counterparty, r.direction, r.raw_amount_wei.as_u64(), r.agg_count, r.raw_timestamp))
            .collect();
        assert_eq!(
            got,
            vec![(b, Direction::In, 5, 1, t0 + 30 * H), (b, Direction::Out, 3, 2, t0)]
        );
        assert_eq!(d.records[2].position, 2);
    }

    #[test]
    fn dedup_respects_window() {
        let v = vocab(2);
        let txs = [tx(1, 0, 1, 1, 1000, true), tx(2, 0, 1, 1, 1000 + 80 * H, true)];
        let refs: Vec<_> = txs.iter().collect();
        let s = build_sequence(Address::from_index(0), &refs, &v, &HashSet::new());
        assert_eq!(deduplicate(&s, 72 * H).len(), 3);
        // Boundary is inclusive.
        let txs = [tx(1, 0, 1, 1, 1000, true), tx(2, 0, 1, 1, 1000 + 72 * H, true)];
        let refs: Vec<_> = txs.iter().collect();
        let s = build_sequence(Address::from_index(0), &refs, &v, &HashSet::new());
        assert_eq!(deduplicate(&s, 72 * H).len(), 2);
    }

    #[test]
    fn dedup_identity_on_distinct_counterparties() {
        let v = vocab(6);
        let txs: Vec<_> = (1..6).map(|i| tx(i, 0, i, i, 100 * i, true)).collect();
        let refs: Vec<_> = txs.iter().collect();
        let s = build_sequence(Address::from_index(0), &refs, &v, &HashSet::new());
        assert_eq!(deduplicate(&s, 72 * H), s);
    }

    fn seq_of(counterparties: &[u32]) -> TxSequence {
        TxSequence::from_body(
            0,
            counterparties.iter().enumerate().map(|(i, &c)| {
                let mut r = TxRecord::head(0);
                r.direction = Direction::Out;
                r.counterparty = c;
                r.raw_timestamp = 1000 - i as u64;
                r
            }),
        )
    }

    #[test]
    fn repetitiveness_examples() {
        assert!((repetitiveness_ratio([&seq_of(&[5, 5, 6, 5])]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(repetitiveness_ratio([&seq_of(&[5, 5, 5])]), 1.0);
        assert_eq!(repetitiveness_ratio([&seq_of(&[5]), &seq_of(&[])]), 0.0);
    }

    #[test]
    fn binning_examples() {
        assert_eq!(amount_bin(&U256::exp10(18)), 10);
        assert_eq!(amount_bin(&U256::zero()), 0);
        assert_eq!(amount_bin(&U256::from(1u8)), 1);
        assert_eq!(amount_bin(&(U256::exp10(19) - 1)), 10);
        assert_eq!(amount_bin(&U256::exp10(19)), 11);
        assert_eq!(amount_bin(&U256::MAX), 20);
        assert_eq!(count_bin(1), 0);
        assert_eq!(count_bin(5), 2);
        assert_eq!(count_bin(u32::MAX), 10);
        assert_eq!(time_bin(500, 500), 0);
        assert_eq!(time_bin(0, 86_400), 1);
        assert_eq!(time_bin(0, 86_400 * 100_000), 15);
    }

    #[test]
    fn decimal_digits_exact_at_powers_of_ten() {
        for k in 0..78 {
            let p = U256::exp10(k);
            assert_eq!(decimal_digits(&p), k as u32 + 1);
            if k > 0 {
                assert_eq!(decimal_digits(&(p - 1)), k as u32);
            }
        }
    }

    #[test]
    fn token_recipients_only_on_out_records() {
        let v = vocab(8);
        let txs = [tx(1, 0, 1, 1, 10, true), tx(2, 1, 0, 1, 20, true), tx(3, 0, 2, 1, 30, true)];
        let refs: Vec<_> = txs.iter().collect();
        let s = build_sequence(Address::from_index(0), &refs, &v, &HashSet::new());
        let events: HashMap<TxHash, Vec<u32>> = [
            (TxHash::from_index(1), vec![5, 6, 7]),
            (TxHash::from_index(2), vec![5]),
        ]
        .into();
        let a = attach_token_recipients(&s, &events);
        let by_hash = |h: u64| a.records.iter().find(|r| r.tx_hashes == [TxHash::from_index(h)]).unwrap();
        assert_eq!(by_hash(1).token_recipients.len(), 3);
        assert!(by_hash(2).token_recipients.is_empty()); // incoming
        assert!(by_hash(3).token_recipients.is_empty()); // no events
    }
}
