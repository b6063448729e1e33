//! Downstream evaluation on account representations.

mod attention;
mod deanon;
mod metrics;
mod phish;
mod probe;

pub use attention::{attention_by_rank, write_buckets_csv, RankBucket, RANK_BUCKETS};
pub use deanon::{deanon_eval, parse_pairs, rank_pair, CandidateSet, EvalPair, PairOutcome, PairRow};
pub use metrics::{
    all_positive_f1, mean_std, ClassificationMetrics, Confusion, MetricsReport, RetrievalMetrics, DEFAULT_KS,
    PHISH_THRESHOLD,
};
pub use phish::{fixed_train_eval, stratified_split, Split};
pub use probe::{
    micro_corpus, node_address, probe_config, probe_experiment, three_hop_probe, ProbeDistances, ProbeSummary,
    BACKGROUND_ACCOUNTS, PROBE_NODES,
};
