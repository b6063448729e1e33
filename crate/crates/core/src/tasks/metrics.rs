use serde::{Deserialize, Serialize};

/// Cut-offs reported by default for retrieval.
pub const DEFAULT_KS: [usize; 6] = [1, 3, 5, 10, 100, 1000];
/// Decision threshold on classifier probabilities.
pub const PHISH_THRESHOLD: f64 = 0.3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_scores(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// Zero when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn metrics(&self, threshold: f64) -> ClassificationMetrics {
        ClassificationMetrics {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            threshold,
            confusion: *self,
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: Confusion,
}

/// F1 of predicting every account positive, given the positive share.
pub fn all_positive_f1(positive_share: f64) -> f64 {
    if positive_share <= 0.0 {
        0.0
    } else {
        2.0 * positive_share / (1.0 + positive_share)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    /// `(k, HR@k)` in ascending `k`.
    pub hit_ratio: Vec<(usize, f64)>,
    pub mean_rank: f64,
    pub pairs: usize,
    pub skipped: usize,
    pub mean_candidates: f64,
    pub min_candidates: usize,
    pub max_candidates: usize,
}

impl RetrievalMetrics {
    /// From 1-based ranks and the candidate-set size of each evaluated pair.
    pub fn from_ranks(ranks: &[usize], candidates: &[usize], ks: &[usize], skipped: usize) -> Self {
        let mut ks = ks.to_vec();
        ks.sort_unstable();
        ks.dedup();
        let n = ranks.len();
        RetrievalMetrics {
            hit_ratio: ks
                .iter()
                .map(|&k| (k, ratio(ranks.iter().filter(|&&r| r <= k).count(), n)))
                .collect(),
            mean_rank: if n == 0 { 0.0 } else { ranks.iter().sum::<usize>() as f64 / n as f64 },
            pairs: n,
            skipped,
            mean_candidates: if n == 0 { 0.0 } else { candidates.iter().sum::<usize>() as f64 / n as f64 },
            min_candidates: candidates.iter().copied().min().unwrap_or(0),
            max_candidates: candidates.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn hr(&self, k: usize) -> Option<f64> {
        self.hit_ratio.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

/// Summary over repeated runs; `best` is the run with the highest F1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classification: Option<ClassificationMetrics>,
    pub f1_mean: Option<f64>,
    pub f1_std: Option<f64>,
    pub runs: Vec<ClassificationMetrics>,
    pub baseline_f1: Option<f64>,
    pub retrieval: Option<RetrievalMetrics>,
}

impl MetricsReport {
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = Vec::new();
        if let Some(c) = &self.classification {
            rows.push(("threshold".into(), format!("{}", c.threshold)));
            rows.push(("precision".into(), format!("{:.4}", c.precision)));
            rows.push(("recall".into(), format!("{:.4}", c.recall)));
            rows.push(("f1".into(), format!("{:.4}", c.f1)));
        }
        if let (Some(m), Some(s)) = (self.f1_mean, self.f1_std) {
            rows.push(("f1_mean".into(), format!("{m:.4}")));
            rows.push(("f1_std".into(), format!("{s:.4}")));
            rows.push(("runs".into(), self.runs.len().to_string()));
        }
        if let Some(b) = self.baseline_f1 {
            rows.push(("all_positive_f1".into(), format!("{b:.4}")));
        }
        if let Some(r) = &self.retrieval {
            for (k, v) in &r.hit_ratio {
                rows.push((format!("hr@{k}"), format!("{v:.4}")));
            }
            rows.push(("mean_rank".into(), format!("{:.2}", r.mean_rank)));
            rows.push(("pairs".into(), r.pairs.to_string()));
            rows.push(("skipped".into(), r.skipped.to_string()));
            rows.push(("mean_candidates".into(), format!("{:.1}", r.mean_candidates)));
            rows.push(("min_candidates".into(), r.min_candidates.to_string()));
            rows.push(("max_candidates".into(), r.max_candidates.to_string()));
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in self.rows() {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(6);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    (m, v.sqrt())
}
