use rand::Rng;

use super::record::*;
use super::vocab::MASK_ID;
use crate::error::{Error, Result};

/// Default masking ratio.
pub const MASK_RATIO: f64 = 0.8;
/// Default maximum sequence length (head included).
pub const MAX_SEQ_LEN: usize = 100;

/// Split into the incoming and outgoing sub-sequences, each behind its own
/// head. Internal order is preserved and positions are re-indexed.
pub fn separate_in_out(seq: &TxSequence) -> (TxSequence, TxSequence) {
    let pick = |d: Direction| {
        TxSequence::from_body(
            seq.owner,
            seq.body().iter().filter(|r| r.direction == d).cloned(),
        )
    };
    (pick(Direction::In), pick(Direction::Out))
}

/// Chunk the body into pieces of at most `max_len - 1` records, each behind
/// its own head. A head-only sequence yields itself.
pub fn split_long(seq: &TxSequence, max_len: usize) -> Vec<TxSequence> {
    assert!(max_len >= 2, "max_len must leave room for a record");
    let body = seq.body();
    if body.is_empty() {
        return vec![seq.clone()];
    }
    body.chunks(max_len - 1)
        .map(|c| TxSequence::from_body(seq.owner, c.iter().cloned()))
        .collect()
}

/// A sequence whose selected counterparties were replaced by `[MASK]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedSequence {
    /// The sequence as fed to the encoder.
    pub base: TxSequence,
    /// Ascending, never 0.
    pub masked_positions: Vec<usize>,
    /// Original counterparty at each masked position.
    pub positives: Vec<u32>,
}

impl MaskedSequence {
    /// A view with nothing masked (for inference).
    pub fn unmasked(seq: TxSequence) -> Self {
        MaskedSequence {
            base: seq,
            masked_positions: Vec::new(),
            positives: Vec::new(),
        }
    }

    /// Restore the original sequence.
    pub fn unmask(&self) -> TxSequence {
        let mut s = self.base.clone();
        for (&p, &id) in self.masked_positions.iter().zip(&self.positives) {
            s.records[p].counterparty = id;
        }
        s
    }

    /// Sub-views by direction, carrying the masks along.
    pub fn separate_in_out(&self) -> (MaskedSequence, MaskedSequence) {
        let view = |d: Direction| {
            let mut base = TxSequence::head_only(self.base.owner);
            let mut masked_positions = Vec::new();
            let mut positives = Vec::new();
            let mut next_mask = 0;
            for r in self.base.body() {
                let src = r.position as usize;
                while next_mask < self.masked_positions.len() && self.masked_positions[next_mask] < src {
                    next_mask += 1;
                }
                if r.direction != d {
                    continue;
                }
                let dst = base.records.len();
                if next_mask < self.masked_positions.len() && self.masked_positions[next_mask] == src {
                    masked_positions.push(dst);
                    positives.push(self.positives[next_mask]);
                }
                base.records.push(r.clone());
            }
            base.reindex();
            MaskedSequence {
                base,
                masked_positions,
                positives,
            }
        };
        (view(Direction::In), view(Direction::Out))
    }
}

/// Number of positions masked in a sequence of `len` records at `ratio`.
pub fn mask_count(len: usize, ratio: f64) -> usize {
    let body = len.saturating_sub(1);
    ((ratio * body as f64).round() as usize).clamp(1, body.max(1))
}

/// Mask `max(1, round(ratio * (len - 1)))` distinct non-head positions chosen
/// uniformly without replacement. Only the address is replaced.
pub fn mask_sequence<R: Rng + ?Sized>(seq: &TxSequence, ratio: f64, rng: &mut R) -> Result<MaskedSequence> {
    if seq.len() < 2 {
        return Err(Error::invalid("cannot mask a head-only sequence"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("mask ratio {ratio} outside (0, 1]")));
    }
    let body = seq.len() - 1;
    let m = mask_count(seq.len(), ratio);
    let mut masked_positions: Vec<usize> = rand::seq::index::sample(rng, body, m)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    masked_positions.sort_unstable();
    let mut base = seq.clone();
    let positives = masked_positions
        .iter()
        .map(|&p| std::mem::replace(&mut base.records[p].counterparty, MASK_ID))
        .collect();
    Ok(MaskedSequence {
        base,
        masked_positions,
        positives,
    })
}
