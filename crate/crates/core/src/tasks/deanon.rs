use std::io::Read;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::metrics::{MetricsReport, RetrievalMetrics};
use crate::error::{Error, Result};
use crate::ingest::Address;
use crate::par;

/// A ground-truth pair of accounts belonging to one user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub query: u32,
    pub target: u32,
    /// Candidates must have transacted at or before this time.
    pub cutoff_timestamp: Option<u64>,
}

/// Pair rows as addresses, before resolution to account ids.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct PairRow {
    pub query: Address,
    pub target: Address,
    #[serde(default)]
    pub cutoff_timestamp: Option<u64>,
}

/// Parse `query,target,cutoff_timestamp` (the last column may be empty or
/// absent).
pub fn parse_pairs<R: Read>(input: R) -> Result<Vec<PairRow>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    for col in ["query", "target"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema(format!("pair file lacks column {col:?}")));
        }
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let get = |name: &str| headers.iter().position(|h| h == name).and_then(|p| row.get(p)).unwrap_or("");
        let line = i as u64 + 2;
        let parse = |s: &str| {
            s.parse::<Address>().map_err(|e| Error::Row {
                line,
                message: e.to_string(),
            })
        };
        let cutoff = match get("cutoff_timestamp") {
            "" => None,
            s => Some(s.parse::<u64>().map_err(|e| Error::Row {
                line,
                message: format!("bad cutoff: {e}"),
            })?),
        };
        out.push(PairRow {
            query: parse(get("query"))?,
            target: parse(get("target"))?,
            cutoff_timestamp: cutoff,
        });
    }
    Ok(out)
}

/// Accounts that can be retrieved, with their representations.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub ids: Vec<u32>,
    pub vectors: Array2<f64>,
    /// Earliest activity per candidate, for cut-off filters.
    pub first_timestamp: Vec<Option<u64>>,
}

impl CandidateSet {
    fn position(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    fn admissible(&self, i: usize, cutoff: Option<u64>) -> bool {
        match cutoff {
            None => true,
            Some(c) => self.first_timestamp[i].is_some_and(|t| t <= c),
        }
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Outcome for one pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PairOutcome {
    Ranked { rank: usize, candidates: usize },
    Skipped(String),
}

/// 1-based rank of the target among admissible candidates by ascending
/// Euclidean distance to the query, ties broken by ascending id. The query
/// itself is never a candidate.
pub fn rank_pair(pair: &EvalPair, set: &CandidateSet) -> PairOutcome {
    let (Some(q), Some(t)) = (set.position(pair.query), set.position(pair.target)) else {
        return PairOutcome::Skipped(format!("pair ({}, {}) has no representation", pair.query, pair.target));
    };
    if pair.query == pair.target {
        return PairOutcome::Skipped(format!("pair ({}, {}) has query equal to target", pair.query, pair.target));
    }
    if !set.admissible(t, pair.cutoff_timestamp) {
        return PairOutcome::Skipped(format!("target {} falls outside its candidate filter", pair.target));
    }
    let qv = set.vectors.row(q);
    let dt = sq_dist(qv, set.vectors.row(t));
    let mut rank = 1;
    let mut candidates = 0;
    for i in 0..set.ids.len() {
        if i == q || !set.admissible(i, pair.cutoff_timestamp) {
            continue;
        }
        candidates += 1;
        if i == t {
            continue;
        }
        let d = sq_dist(qv, set.vectors.row(i));
        if d < dt || (d == dt && set.ids[i] < pair.target) {
            rank += 1;
        }
    }
    PairOutcome::Ranked { rank, candidates }
}

/// HR@k and mean rank over all pairs; skipped pairs are counted and logged.
pub fn deanon_eval(pairs: &[EvalPair], set: &CandidateSet, ks: &[usize]) -> MetricsReport {
    let outcomes = par::map(pairs, |_, p| rank_pair(p, set));
    let mut ranks = Vec::new();
    let mut sizes = Vec::new();
    let mut skipped = 0;
    for o in outcomes {
        match o {
            PairOutcome::Ranked { rank, candidates } => {
                ranks.push(rank);
                sizes.push(candidates);
            }
            PairOutcome::Skipped(why) => {
                log::warn!("{why}");
                skipped += 1;
            }
        }
    }
    MetricsReport {
        classification: None,
        f1_mean: None,
        f1_std: None,
        runs: Vec::new(),
        baseline_f1: None,
        retrieval: Some(RetrievalMetrics::from_ranks(&ranks, &sizes, ks, skipped)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn set(vectors: Array2<f64>) -> CandidateSet {
        let n = vectors.nrows();
        CandidateSet {
            ids: (0..n as u32).map(|i| i + 10).collect(),
            vectors,
            first_timestamp: (0..n as u64).map(|i| Some(i * 100)).collect(),
        }
    }

    fn pair(q: u32, t: u32) -> EvalPair {
        EvalPair {
            query: q,
            target: t,
            cutoff_timestamp: None,
        }
    }

    #[test]
    fn nearest_target_ranks_first() {
        let s = set(array![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        assert_eq!(rank_pair(&pair(10, 11), &s), PairOutcome::Ranked { rank: 1, candidates: 2 });
        let r = deanon_eval(&[pair(10, 11)], &s, &[1]);
        assert_eq!(r.retrieval.unwrap().hr(1), Some(1.0));
    }

    #[test]
    fn ties_go_to_lower_id() {
        // Candidate 11 and target 12 are equidistant from the query.
        let s = set(array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(rank_pair(&pair(10, 12), &s), PairOutcome::Ranked { rank: 2, candidates: 2 });
        assert_eq!(rank_pair(&pair(10, 11), &s), PairOutcome::Ranked { rank: 1, candidates: 2 });
    }

    #[test]
    fn cutoff_filters_candidates_and_skips_bad_targets() {
        let s = set(array![[0.0], [5.0], [1.0], [2.0]]);
        let p = EvalPair {
            query: 10,
            target: 11,
            cutoff_timestamp: Some(100),
        };
        assert_eq!(rank_pair(&p, &s), PairOutcome::Ranked { rank: 1, candidates: 1 });
        let p = EvalPair {
            query: 10,
            target: 13,
            cutoff_timestamp: Some(100),
        };
        assert!(matches!(rank_pair(&p, &s), PairOutcome::Skipped(_)));
        let r = deanon_eval(&[p], &s, &[1]).retrieval.unwrap();
        assert_eq!((r.pairs, r.skipped), (0, 1));
    }

    #[test]
    fn pair_file_parsing() {
        let text = "query,target,cutoff_timestamp\n0x00000000000000000000000000000000000000aa,0x00000000000000000000000000000000000000BB,\n0x00000000000000000000000000000000000000aa,0x00000000000000000000000000000000000000cc,77\n";
        let rows = parse_pairs(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].cutoff_timestamp, None);
        assert_eq!(rows[1].cutoff_timestamp, Some(77));
        assert!(parse_pairs("a,b\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn ranks_survive_translation(
            pts in proptest::collection::vec((-10i32..10, -10i32..10), 4..25),
            shift in (-50i32..50, -50i32..50),
        ) {
            // Integer coordinates keep every distance exact after the shift.
            let n = pts.len();
            let v = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { pts[i].0 as f64 } else { pts[i].1 as f64 });
            let mut moved = v.clone();
            moved.column_mut(0).mapv_inplace(|x| x + shift.0 as f64);
            moved.column_mut(1).mapv_inplace(|x| x + shift.1 as f64);
            let (base, moved) = (set(v), set(moved));
            for t in 1..n as u32 {
                let p = pair(10, 10 + t);
                prop_assert_eq!(rank_pair(&p, &base), rank_pair(&p, &moved));
            }
        }

        #[test]
        fn ranks_survive_scaling(pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 4..25)) {
            let n = pts.len();
            let v = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { pts[i].0 } else { pts[i].1 });
            let (base, scaled) = (set(v.clone()), set(v.mapv(|x| x * 3.7)));
            for t in 1..n as u32 {
                let p = pair(10, 10 + t);
                prop_assert_eq!(rank_pair(&p, &base), rank_pair(&p, &scaled));
            }
        }
    }
}
