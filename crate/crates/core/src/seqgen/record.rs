use primitive_types::U256;
use serde::{Deserialize, Serialize};

use crate::ingest::TxHash;

/// Who initiated the transaction relative to the sequence owner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    In,
    Out,
    /// Only the dummy head at position 0.
    SelfTx,
}

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::In => 0,
            Direction::Out => 1,
            Direction::SelfTx => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CounterpartyKind {
    Eoa,
    Contract,
    Null,
}

impl CounterpartyKind {
    pub fn index(self) -> usize {
        match self {
            CounterpartyKind::Eoa => 0,
            CounterpartyKind::Contract => 1,
            CounterpartyKind::Null => 2,
        }
    }
}

/// Number of real amount bins (0..=20); the null bin follows.
pub const AMOUNT_BINS: usize = 21;
pub const AMOUNT_NULL: u8 = AMOUNT_BINS as u8;
/// Number of real count bins (0..=10).
pub const COUNT_BINS: usize = 11;
pub const COUNT_NULL: u8 = COUNT_BINS as u8;
/// Number of real recency bins (0..=15).
pub const TIME_BINS: usize = 16;
pub const TIME_NULL: u8 = TIME_BINS as u8;

/// One counterparty interaction in an account's sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxRecord {
    /// Address-vocabulary id of the other party (the owner for the head).
    pub counterparty: u32,
    pub direction: Direction,
    pub counterparty_kind: CounterpartyKind,
    pub amount_bin: u8,
    pub count_bin: u8,
    pub time_bin: u8,
    pub position: u16,
    pub raw_timestamp: u64,
    pub raw_amount_wei: U256,
    pub agg_count: u32,
    /// EOAs that received ERC-20 tokens through this (outgoing) call.
    pub token_recipients: Vec<u32>,
    /// Originating transactions; several after de-duplication.
    pub tx_hashes: Vec<TxHash>,
    pub failed: bool,
}

impl TxRecord {
    /// The dummy self-transaction placed at the head of every sequence.
    pub fn head(owner: u32) -> Self {
        TxRecord {
            counterparty: owner,
            direction: Direction::SelfTx,
            counterparty_kind: CounterpartyKind::Null,
            amount_bin: AMOUNT_NULL,
            count_bin: COUNT_NULL,
            time_bin: TIME_NULL,
            position: 0,
            raw_timestamp: 0,
            raw_amount_wei: U256::zero(),
            agg_count: 1,
            token_recipients: Vec::new(),
            tx_hashes: Vec::new(),
            failed: false,
        }
    }

    pub fn is_head(&self) -> bool {
        self.direction == Direction::SelfTx
    }
}

/// An account's transactions, newest first, behind a dummy head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxSequence {
    pub owner: u32,
    pub records: Vec<TxRecord>,
}

impl TxSequence {
    pub fn head_only(owner: u32) -> Self {
        TxSequence {
            owner,
            records: vec![TxRecord::head(owner)],
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records after the head.
    pub fn body(&self) -> &[TxRecord] {
        &self.records[1..]
    }

    /// Rebuild from a head and body, re-indexing positions.
    pub fn from_body(owner: u32, body: impl IntoIterator<Item = TxRecord>) -> Self {
        let mut records = vec![TxRecord::head(owner)];
        records.extend(body);
        let mut s = TxSequence { owner, records };
        s.reindex();
        s
    }

    pub fn reindex(&mut self) {
        for (i, r) in self.records.iter_mut().enumerate() {
            r.position = i as u16;
        }
    }

    /// Earliest transaction time, if any.
    pub fn first_timestamp(&self) -> Option<u64> {
        self.body().iter().map(|r| r.raw_timestamp).min()
    }
}
