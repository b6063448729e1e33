//! Address frequency table and negative pools.
//!
//! Negatives for the masked address prediction loss are drawn i.i.d. (with
//! replacement) from one of three distributions over the ranked addresses:
//!
//! * uniform;
//! * frequent(b): `p_i = f_i^b / sum_j f_j^b`;
//! * Zipfan: `p(r) = (ln(r + 2) - ln(r + 1)) / ln(max_rank + 1)` for 0-based
//!   rank `r`, which telescopes to 1 over all ranks.
//!
//! With intra-batch sharing one pool is drawn per batch and every masked
//! position in the batch scores against it.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqgen::{AddressVocab, TxSequence};

/// Default pool size (negative-to-positive ratio with sharing).
pub const POOL_SIZE: usize = 5000;
/// Per-sequence pool size when intra-batch sharing is off.
pub const UNSHARED_POOL_SIZE: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    /// Vocabulary ids ordered by rank (descending frequency, ascending id).
    ranked: Vec<u32>,
    /// Frequency per rank.
    freqs: Vec<u64>,
    /// Rank per vocabulary id (`u32::MAX` if unranked).
    rank_of: Vec<u32>,
}

impl FrequencyTable {
    /// Build from explicit `(id, frequency)` pairs; zero frequencies and
    /// special ids are dropped.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let mut ranked: Vec<u32> = (0..counts.len() as u32)
            .filter(|&id| !AddressVocab::is_special(id) && counts[id as usize] > 0)
            .collect();
        if ranked.is_empty() {
            return Err(Error::invalid("frequency table would be empty"));
        }
        ranked.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
        let freqs = ranked.iter().map(|&id| counts[id as usize]).collect();
        let mut rank_of = vec![u32::MAX; counts.len()];
        for (r, &id) in ranked.iter().enumerate() {
            rank_of[id as usize] = r as u32;
        }
        Ok(FrequencyTable {
            ranked,
            freqs,
            rank_of,
        })
    }

    /// Number of ranked addresses.
    pub fn max_rank(&self) -> usize {
        self.ranked.len()
    }

    pub fn id_at(&self, rank: usize) -> u32 {
        self.ranked[rank]
    }

    pub fn frequency_at(&self, rank: usize) -> u64 {
        self.freqs[rank]
    }

    pub fn rank(&self, id: u32) -> Option<usize> {
        self.rank_of
            .get(id as usize)
            .filter(|&&r| r != u32::MAX)
            .map(|&r| r as usize)
    }

    pub fn frequency(&self, id: u32) -> Option<u64> {
        self.rank(id).map(|r| self.freqs[r])
    }

    pub fn ranked_ids(&self) -> &[u32] {
        &self.ranked
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freqs
    }
}

/// Count counterparty occurrences across all sequences and rank them.
pub fn build_frequency_table(corpus: &[TxSequence]) -> Result<FrequencyTable> {
    let max_id = corpus
        .iter()
        .flat_map(|s| s.body().iter().map(|r| r.counterparty))
        .max()
        .ok_or_else(|| Error::invalid("cannot build a frequency table from an empty corpus"))?;
    let mut counts = vec![0u64; max_id as usize + 1];
    for s in corpus {
        for r in s.body() {
            counts[r.counterparty as usize] += 1;
        }
    }
    FrequencyTable::from_counts(&counts)
}

/// Zipfan probability of the address at 0-based `rank` among `max_rank`.
pub fn zipfan_prob(rank: usize, max_rank: usize) -> Result<f64> {
    if max_rank < 1 {
        return Err(Error::invalid("max_rank must be at least 1"));
    }
    if rank >= max_rank {
        return Err(Error::invalid(format!("rank {rank} out of range for {max_rank}")));
    }
    let r = rank as f64;
    Ok(((r + 2.0).ln() - (r + 1.0).ln()) / (max_rank as f64 + 1.0).ln())
}

/// Frequency-power distribution `f_i^b / sum_j f_j^b`.
pub fn frequent_prob(freqs: &[u64], b: f64) -> Result<Vec<f64>> {
    if freqs.is_empty() {
        return Err(Error::invalid("empty frequency list"));
    }
    if b.is_nan() || b < 0.0 {
        return Err(Error::invalid(format!("exponent {b} must be non-negative")));
    }
    if b == 0.0 {
        return Ok(vec![1.0 / freqs.len() as f64; freqs.len()]);
    }
    let w: Vec<f64> = freqs.iter().map(|&f| (f as f64).powf(b)).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Uniform,
    Frequent(f64),
    #[default]
    Zipfan,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "uniform" => Ok(Strategy::Uniform),
            "zipfan" | "zipf" => Ok(Strategy::Zipfan),
            _ => match s.strip_prefix("freq") {
                Some(b) => b
                    .trim_start_matches(['(', ':'])
                    .trim_end_matches(')')
                    .parse::<f64>()
                    .map(Strategy::Frequent)
                    .map_err(|_| Error::invalid(format!("bad frequent exponent in {s:?}"))),
                None => Err(Error::invalid(format!("unknown negative strategy {s:?}"))),
            },
        }
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Uniform => f.write_str("uniform"),
            Strategy::Zipfan => f.write_str("zipfan"),
            Strategy::Frequent(b) => write!(f, "freq{b:?}"),
        }
    }
}

/// Probability per rank under `strategy`.
pub fn rank_probabilities(table: &FrequencyTable, strategy: Strategy) -> Result<Vec<f64>> {
    let n = table.max_rank();
    match strategy {
        Strategy::Uniform => Ok(vec![1.0 / n as f64; n]),
        Strategy::Frequent(b) => frequent_prob(table.frequencies(), b),
        Strategy::Zipfan => (0..n).map(|r| zipfan_prob(r, n)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativePool {
    pub ids: Vec<u32>,
}

/// Exact sampler over the ranked addresses.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    ids: Vec<u32>,
    strategy: Strategy,
    weighted: Option<WeightedIndex<f64>>,
}

impl NegativeSampler {
    pub fn new(table: &FrequencyTable, strategy: Strategy) -> Result<Self> {
        let weighted = match strategy {
            Strategy::Uniform | Strategy::Frequent(0.0) => None,
            _ => Some(
                WeightedIndex::new(rank_probabilities(table, strategy)?)
                    .map_err(|e| Error::invalid(format!("bad sampling weights: {e}")))?,
            ),
        };
        Ok(NegativeSampler {
            ids: table.ranked_ids().to_vec(),
            strategy,
            weighted,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn draw_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.weighted {
            Some(w) => w.sample(rng),
            None => rng.random_range(0..self.ids.len()),
        }
    }

    /// `pool_size` i.i.d. draws.
    pub fn sample_pool<R: Rng + ?Sized>(&self, pool_size: usize, rng: &mut R) -> NegativePool {
        NegativePool {
            ids: (0..pool_size).map(|_| self.ids[self.draw_rank(rng)]).collect(),
        }
    }
}

/// Draw one pool of `pool_size` negatives under `strategy`.
pub fn sample_pool<R: Rng + ?Sized>(
    table: &FrequencyTable,
    strategy: Strategy,
    pool_size: usize,
    rng: &mut R,
) -> Result<NegativePool> {
    if pool_size == 0 {
        return Err(Error::invalid("pool size must be at least 1"));
    }
    Ok(NegativeSampler::new(table, strategy)?.sample_pool(pool_size, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::seqgen::{Direction, TxRecord};

    fn seq(cps: &[u32]) -> TxSequence {
        TxSequence::from_body(
            3,
            cps.iter().map(|&c| {
                let mut r = TxRecord::head(c);
                r.direction = Direction::Out;
                r
            }),
        )
    }

    #[test]
    fn table_from_single_sequence() {
        let t = build_frequency_table(&[seq(&[10, 10, 11])]).unwrap();
        assert_eq!(t.max_rank(), 2);
        assert_eq!((t.id_at(0), t.frequency_at(0)), (10, 2));
        assert_eq!((t.id_at(1), t.frequency_at(1)), (11, 1));
        assert_eq!(t.rank(3), None);
    }

    #[test]
    fn equal_frequencies_rank_by_id() {
        let t = build_frequency_table(&[seq(&[9, 5, 7])]).unwrap();
        assert_eq!(t.ranked_ids(), &[5, 7, 9]);
    }

    #[test]
    fn extra_occurrence_of_top_keeps_rank_zero() {
        let t = build_frequency_table(&[seq(&[4, 4, 5, 5, 6])]).unwrap();
        let top = t.id_at(0);
        let mut cps = vec![4, 4, 5, 5, 6];
        cps.push(top);
        assert_eq!(build_frequency_table(&[seq(&cps)]).unwrap().id_at(0), top);
    }

    #[test]
    fn specials_and_empty() {
        assert!(build_frequency_table(&[seq(&[])]).is_err());
        assert!(build_frequency_table(&[seq(&[1, 2])]).is_err());
    }

    #[test]
    fn zipfan_closed_forms() {
        let p0 = zipfan_prob(0, 10).unwrap();
        assert!((p0 - 2f64.ln() / 11f64.ln()).abs() < 1e-15);
        assert!((p0 - 0.28906).abs() < 1e-5);
        let p9 = zipfan_prob(9, 10).unwrap();
        assert!((p9 - (1.0 - 10f64.ln() / 11f64.ln())).abs() < 1e-15);
        assert!((p9 - 0.03975).abs() < 1e-5);
        let total: f64 = (0..10).map(|r| zipfan_prob(r, 10).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(zipfan_prob(0, 0).is_err());
    }

    #[test]
    fn frequent_closed_forms() {
        assert_eq!(frequent_prob(&[3, 1], 1.0).unwrap(), vec![0.75, 0.25]);
        let p = frequent_prob(&[4, 1], 0.5).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(frequent_prob(&[7, 2, 1], 0.0).unwrap(), vec![1.0 / 3.0; 3]);
        assert!(frequent_prob(&[], 1.0).is_err());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("zipfan".parse::<Strategy>().unwrap(), Strategy::Zipfan);
        assert_eq!("freq0.5".parse::<Strategy>().unwrap(), Strategy::Frequent(0.5));
        assert_eq!("freq1.0".parse::<Strategy>().unwrap(), Strategy::Frequent(1.0));
        assert_eq!(Strategy::Frequent(0.5).to_string(), "freq0.5");
        assert!("bogus".parse::<Strategy>().is_err());
    }

    #[test]
    fn single_address_pool() {
        let t = build_frequency_table(&[seq(&[8])]).unwrap();
        for s in [Strategy::Uniform, Strategy::Zipfan, Strategy::Frequent(1.0)] {
            let p = sample_pool(&t, s, 1, &mut rng::stream(0, &[])).unwrap();
            assert_eq!(p.ids, vec![8]);
        }
        assert!(sample_pool(&t, Strategy::Zipfan, 0, &mut rng::stream(0, &[])).is_err());
    }

    #[test]
    fn monotone_in_rank() {
        let counts: Vec<u64> = (0..60).map(|i| if i < 3 { 0 } else { 1 + (997 * i % 41) as u64 }).collect();
        let t = FrequencyTable::from_counts(&counts).unwrap();
        for s in [Strategy::Frequent(0.5), Strategy::Frequent(1.0), Strategy::Uniform] {
            let p = rank_probabilities(&t, s).unwrap();
            assert!(p.windows(2).all(|w| w[0] >= w[1]));
        }
        let z = rank_probabilities(&t, Strategy::Zipfan).unwrap();
        assert!(z.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn zipfan_monte_carlo_rank0_mass() {
        let counts: Vec<u64> = (0..13).map(|i| if i < 3 { 0 } else { 100 - i as u64 }).collect();
        let t = FrequencyTable::from_counts(&counts).unwrap();
        let s = NegativeSampler::new(&t, Strategy::Zipfan).unwrap();
        let mut rng = rng::stream(11, &[]);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| s.draw_rank(&mut rng) == 0).count();
        let expect = 2f64.ln() / 11f64.ln();
        assert!((hits as f64 / n as f64 - expect).abs() < 0.01);
    }

    #[test]
    fn seeded_pools_reproduce() {
        let t = build_frequency_table(&[seq(&[5, 6, 6, 7, 7, 7])]).unwrap();
        let a = sample_pool(&t, Strategy::Zipfan, 50, &mut rng::stream(3, &[1])).unwrap();
        let b = sample_pool(&t, Strategy::Zipfan, 50, &mut rng::stream(3, &[1])).unwrap();
        assert_eq!(a, b);
    }
}
