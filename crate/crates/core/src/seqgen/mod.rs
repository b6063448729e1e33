//! Per-account transaction sequences.

mod io;
mod ops;
mod record;
mod views;
mod vocab;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use io::*;
pub use ops::*;
pub use record::*;
pub use views::*;
pub use vocab::*;

use crate::ingest::{self, Address, Corpus, Label, TxHash};
use crate::par;

/// Settings for [`build_sequences`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqConfig {
    pub max_seq_len: usize,
    pub dedup_window_hours: u64,
    /// `false` skips failed-transaction removal and run merging.
    pub dedup: bool,
    pub min_tx: usize,
    pub max_tx: usize,
    pub excluded_labels: Vec<Label>,
}

impl Default for SeqConfig {
    fn default() -> Self {
        SeqConfig {
            max_seq_len: MAX_SEQ_LEN,
            dedup_window_hours: DEDUP_WINDOW_HOURS,
            dedup: true,
            min_tx: ingest::MIN_TX,
            max_tx: ingest::MAX_TX,
            excluded_labels: vec![Label::Excluded],
        }
    }
}

/// Statistics gathered while building sequences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeqSummary {
    pub accounts: usize,
    pub records_raw: usize,
    pub records_final: usize,
    pub repetitiveness_raw: f64,
    pub repetitiveness_final: f64,
    pub unknown_token_events: usize,
}

/// Sequences for every kept account plus the address vocabulary.
#[derive(Clone, Debug, Default)]
pub struct SequenceSet {
    pub sequences: Vec<TxSequence>,
    /// Labels aligned with `sequences`.
    pub labels: Vec<Label>,
    pub vocab: AddressVocab,
    pub summary: SeqSummary,
}

impl SequenceSet {
    pub fn owner_address(&self, i: usize) -> Address {
        self.vocab.address(self.sequences[i].owner).unwrap_or_default()
    }
}

/// Count counterparty occurrences into `vocab.frequency`.
pub fn count_frequencies(vocab: &mut AddressVocab, seqs: &[TxSequence]) {
    vocab.frequency.iter_mut().for_each(|f| *f = 0);
    for s in seqs {
        for r in s.body() {
            vocab.frequency[r.counterparty as usize] += 1;
        }
    }
}

/// Run the whole sequence-generation stage over a corpus.
pub fn build_sequences(corpus: &Corpus, cfg: &SeqConfig) -> SequenceSet {
    let txs: Vec<_> = corpus
        .transactions
        .iter()
        .filter(|t| t.to_address.is_some())
        .cloned()
        .collect();
    let counts = ingest::involved_counts(&txs);
    let eoa_accounts: Vec<_> = corpus
        .accounts
        .iter()
        .filter(|a| a.kind == ingest::AccountKind::Eoa)
        .copied()
        .collect();
    let kept = ingest::filter_accounts(&eoa_accounts, &counts, cfg.min_tx, cfg.max_tx, &cfg.excluded_labels);
    let slot: HashMap<Address, usize> = kept.iter().enumerate().map(|(i, a)| (a.address, i)).collect();

    let mut involved: Vec<Vec<&ingest::RawTransaction>> = vec![Vec::new(); kept.len()];
    let mut addresses: HashSet<Address> = kept.iter().map(|a| a.address).collect();
    let mut used_hashes: HashSet<TxHash> = HashSet::new();
    for t in &txs {
        let to = t.to_address.expect("filtered");
        let a = slot.get(&t.from_address);
        let b = slot.get(&to);
        if a.is_none() && b.is_none() {
            continue;
        }
        if let Some(&i) = a {
            involved[i].push(t);
        }
        if let Some(&i) = b {
            if to != t.from_address {
                involved[i].push(t);
            }
        }
        addresses.insert(t.from_address);
        addresses.insert(to);
        used_hashes.insert(t.tx_hash);
    }

    let mut unknown_token_events = 0;
    let mut kept_events = Vec::new();
    for e in &corpus.token_transfers {
        if used_hashes.contains(&e.tx_hash) {
            addresses.insert(e.recipient_eoa);
            kept_events.push(e);
        } else {
            unknown_token_events += 1;
        }
    }
    if unknown_token_events > 0 {
        log::warn!("{unknown_token_events} token transfer events reference transactions outside the kept set");
    }

    let mut vocab = AddressVocab::new(addresses.into_iter().collect());
    let mut events: HashMap<TxHash, Vec<u32>> = HashMap::new();
    for e in kept_events {
        events.entry(e.tx_hash).or_default().push(vocab.id(&e.recipient_eoa));
    }
    let contracts: HashSet<Address> = corpus.contracts.iter().copied().collect();
    let window = cfg.dedup_window_hours * 3600;

    let built = par::map(&kept, |i, a| {
        let raw = build_sequence(a.address, &involved[i], &vocab, &contracts);
        let mut s = if cfg.dedup { deduplicate(&raw, window) } else { raw.clone() };
        s = attach_token_recipients(&s, &events);
        bin_sequence(&mut s);
        (repetition_count(&raw), raw.len() - 1, s)
    });

    let mut raw_rep = RepetitionCount::default();
    let mut records_raw = 0;
    let mut sequences = Vec::with_capacity(built.len());
    for (rc, n, s) in built {
        raw_rep.repeats += rc.repeats;
        raw_rep.comparisons += rc.comparisons;
        records_raw += n;
        sequences.push(s);
    }
    count_frequencies(&mut vocab, &sequences);
    let summary = SeqSummary {
        accounts: sequences.len(),
        records_raw,
        records_final: sequences.iter().map(|s| s.len() - 1).sum(),
        repetitiveness_raw: raw_rep.ratio(),
        repetitiveness_final: repetitiveness_ratio(&sequences),
        unknown_token_events,
    };
    SequenceSet {
        labels: kept.iter().map(|a| a.label).collect(),
        sequences,
        vocab,
        summary,
    }
}
