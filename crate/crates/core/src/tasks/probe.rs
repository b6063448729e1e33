//! Multi-hop proximity probe on a five-node chain plus a control.
//!
//! Topology: `A - B - C - D` is a chain, so B, C and D sit one, two and
//! three hops from the probe node A. The control E only transacts with its
//! own private counterparties F and G and is disconnected from the chain.
//! Both components sit in a background population of unrelated accounts so
//! that negative pools are drawn mostly from strangers, as on a full chain.

use ndarray::Array1;
use primitive_types::U256;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{AccountKind, AccountMeta, Address, Corpus, Label, RawTransaction, TxHash, TxStatus};
use crate::model::{extract_representation, Float, ModelParams, RepresentationSource};
use crate::negsample::build_frequency_table;
use crate::rng;
use crate::seqgen::{build_sequences, SeqConfig, SequenceSet};
use crate::trainer::{pretrain, PretrainData, TrainConfig};

pub const PROBE_NODES: [&str; 7] = ["A", "B", "C", "D", "E", "F", "G"];
const EDGES: [(usize, usize); 5] = [(0, 1), (1, 2), (2, 3), (4, 5), (4, 6)];
const NEIGHBORS: [(usize, usize); 3] = [(1, 1), (2, 2), (3, 3)];
const CONTROL: usize = 4;
pub const BACKGROUND_ACCOUNTS: usize = 100;
const BACKGROUND_PARTNERS: usize = 3;
const BACKGROUND_SEED: u64 = 0xB6;

pub fn node_address(i: usize) -> Address {
    Address::from_index(0xF1_0000 + i as u64)
}

fn background_address(i: usize) -> Address {
    Address::from_index(0xB0_0000 + i as u64)
}

/// The micro-corpus with `per_edge` transfers on every edge, spaced beyond
/// the de-duplication window and alternating in direction, plus a fixed
/// background where each account trades with a few random others.
pub fn micro_corpus(per_edge: usize) -> Corpus {
    const GAP: u64 = 4 * 24 * 3600;
    let mut transactions = Vec::new();
    let mut push = |from: Address, to: Address, value: u64, t: u64| {
        transactions.push(RawTransaction {
            tx_hash: TxHash::from_index(transactions.len() as u64 + 1),
            from_address: from,
            to_address: Some(to),
            value_wei: U256::from(value),
            block_timestamp: t,
            status: TxStatus::Success,
        });
    };
    let mut t = 1_600_000_000u64;
    for rep in 0..per_edge {
        for &(a, b) in &EDGES {
            let (from, to) = if rep % 2 == 0 { (a, b) } else { (b, a) };
            push(node_address(from), node_address(to), 10u64.pow(15 + (rep % 4) as u32), t);
            t += GAP;
        }
    }
    let mut r = rng::stream(BACKGROUND_SEED, &[]);
    let mut t = 1_600_000_000u64 + 1;
    for i in 0..BACKGROUND_ACCOUNTS {
        for _ in 0..BACKGROUND_PARTNERS {
            let j = (i + r.random_range(1..BACKGROUND_ACCOUNTS)) % BACKGROUND_ACCOUNTS;
            for rep in 0..4 {
                let (from, to) = if rep % 2 == 0 { (i, j) } else { (j, i) };
                push(background_address(from), background_address(to), 10u64.pow(16), t);
                t += GAP + 1;
            }
        }
    }
    let account = |address| AccountMeta {
        address,
        kind: AccountKind::Eoa,
        label: Label::Normal,
    };
    Corpus {
        transactions,
        token_transfers: Vec::new(),
        accounts: (0..PROBE_NODES.len())
            .map(node_address)
            .chain((0..BACKGROUND_ACCOUNTS).map(background_address))
            .map(account)
            .collect(),
        contracts: Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeDistances {
    pub mode: RepresentationSource,
    /// `(node, hops, distance)` from the probe node.
    pub neighbors: Vec<(String, usize, f64)>,
    pub control: f64,
    pub mean_neighbor: f64,
}

impl ProbeDistances {
    pub fn separates(&self) -> bool {
        self.mean_neighbor < self.control
    }
}

/// Cosine distance; representations and embeddings differ in scale and are
/// only ever compared through dot products during training.
fn distance(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    1.0 - a.dot(b) / (a.dot(a).sqrt() * b.dot(b).sqrt())
}

/// Distances from node A's vector under `mode` to the address embeddings of
/// B, C, D and of the control E.
pub fn three_hop_probe<T: Float>(params: &ModelParams<T>, set: &SequenceSet, mode: RepresentationSource) -> Result<ProbeDistances> {
    let id = |node: usize| set.vocab.id(&node_address(node));
    let seq = set
        .sequences
        .iter()
        .find(|s| s.owner == id(0))
        .ok_or_else(|| crate::Error::invalid("probe node A has no sequence"))?;
    let probe = extract_representation(seq, params, mode)?.vector;
    let embedding = |node: usize| -> Array1<f64> { params.address.row(id(node) as usize).mapv(|x| x.as_f64()) };
    let neighbors: Vec<_> = NEIGHBORS
        .iter()
        .map(|&(node, hops)| (PROBE_NODES[node].to_string(), hops, distance(&probe, &embedding(node))))
        .collect();
    let mean_neighbor = neighbors.iter().map(|n| n.2).sum::<f64>() / neighbors.len() as f64;
    Ok(ProbeDistances {
        mode,
        control: distance(&probe, &embedding(CONTROL)),
        neighbors,
        mean_neighbor,
    })
}

/// Training settings suited to the micro-corpus.
pub fn probe_config(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: 16,
        layers: 2,
        pool_size: 20,
        unshared_pool_size: 20,
        batch_size: 8,
        epochs: 150,
        learning_rate: 3e-3,
        init_std: 0.1,
        seed,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub runs: Vec<[ProbeDistances; 2]>,
    /// Mean over runs of `(mean neighbor distance, control distance)` for
    /// representation and address-embedding modes.
    pub representation: (f64, f64),
    pub address: (f64, f64),
}

/// Pre-train on the micro-corpus once per seed and probe both modes.
pub fn probe_experiment(seeds: &[u64], per_edge: usize, base: &TrainConfig) -> Result<ProbeSummary> {
    let corpus = micro_corpus(per_edge);
    let set = build_sequences(&corpus, &SeqConfig::default());
    let table = build_frequency_table(&set.sequences)?;
    let vocab_hash = set.vocab.content_hash();
    let mut runs = Vec::new();
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..base.clone() };
        let data = PretrainData {
            sequences: &set.sequences,
            vocab_size: set.vocab.len(),
            vocab_hash: &vocab_hash,
            frequency: &table,
        };
        let report = pretrain(&data, &cfg)?;
        let p = &report.checkpoint.params;
        runs.push([
            three_hop_probe(p, &set, RepresentationSource::SelfToken)?,
            three_hop_probe(p, &set, RepresentationSource::AddressEmbedding)?,
        ]);
    }
    let mean = |k: usize| {
        let n = runs.len() as f64;
        (
            runs.iter().map(|r| r[k].mean_neighbor).sum::<f64>() / n,
            runs.iter().map(|r| r[k].control).sum::<f64>() / n,
        )
    };
    Ok(ProbeSummary {
        representation: mean(0),
        address: mean(1),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn micro_corpus_keeps_every_node() {
        let c = micro_corpus(6);
        let set = build_sequences(&c, &SeqConfig::default());
        assert_eq!(set.sequences.len(), PROBE_NODES.len() + BACKGROUND_ACCOUNTS);
        assert_eq!(set.summary.records_raw, set.summary.records_final);
        let b = set.vocab.id(&node_address(1));
        let seq = set.sequences.iter().find(|s| s.owner == b).unwrap();
        assert_eq!(seq.len(), 13);
    }
}
