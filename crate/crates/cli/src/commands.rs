use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ethseq::ingest::{ingest_files, Corpus, Label};
use ethseq::model::{extract_representation, RepresentationSource};
use ethseq::negsample::{build_frequency_table, Strategy};
use ethseq::rng;
use ethseq::seqgen::{build_sequences, SeqConfig, TxSequence};
use ethseq::synthgen::{generate, SynthConfig};
use ethseq::tasks::{
    all_positive_f1, attention_by_rank, deanon_eval, fixed_train_eval, parse_pairs, probe_config, probe_experiment,
    rank_pair, stratified_split, write_buckets_csv, CandidateSet, Confusion, EvalPair, MetricsReport, PairOutcome,
};
use ethseq::trainer::{
    finetune, head_scores, initial_params, pretrain, representations, write_metrics_csv, Checkpoint, HeadTraining,
    PretrainData, TrainConfig,
};
use ethseq::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::*;
use crate::manifest::RunManifest;
use crate::{Cli, Command, Format, Global, TrainFlags};

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Run(e) if e.is_numeric() => 3,
            Failure::Run(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn usage(e: impl fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

pub fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Synthgen(a) => synthgen(g, a),
        Command::Ingest(a) => ingest(g, a),
        Command::BuildSeqs(a) => build_seqs(g, a),
        Command::Pretrain(a) => pretrain_cmd(g, a),
        Command::Finetune(a) => finetune_cmd(g, a),
        Command::Extract(a) => extract(g, a),
        Command::EvalPhish(a) => eval_phish(g, a),
        Command::EvalDeanon(a) => eval_deanon(g, a),
        Command::DiagAttention(a) => diag_attention(g, a),
        Command::Probe3hop(a) => probe(g, a),
    }
}

fn out_dir(p: &Path) -> Outcome<PathBuf> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    Ok(p.to_path_buf())
}

/// Overlay the keys of a TOML file on a preset.
fn layered<T: Serialize + DeserializeOwned>(base: T, file: Option<&Path>) -> Outcome<T> {
    let Some(path) = file else { return Ok(base) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let overlay: toml::Table = text.parse().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut merged = toml::Table::try_from(&base).map_err(usage)?;
    merged.extend(overlay);
    merged
        .try_into()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn train_config(g: &Global, flags: &TrainFlags) -> Outcome<TrainConfig> {
    let preset = TrainConfig::preset(g.preset.as_deref().unwrap_or("desk")).map_err(usage)?;
    let mut cfg = layered(preset, g.config.as_deref())?;
    if let Some(m) = flags.mask_ratio {
        cfg.mask_ratio = m;
    }
    if let Some(s) = &flags.neg_strategy {
        cfg.neg_strategy = s.parse::<Strategy>().map_err(usage)?;
    }
    if flags.no_batch_sharing {
        cfg.batch_sharing = false;
    }
    if flags.no_tranx_features {
        cfg.tranx_features = false;
    }
    if flags.inout {
        cfg.in_out_separation = true;
    }
    if flags.erc20 {
        cfg.erc20_gate = true;
    }
    if let Some(e) = flags.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = flags.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn write_report(dir: &Path, report: &MetricsReport, format: Format, m: &mut RunManifest) -> Outcome {
    let path = match format {
        Format::Csv => {
            let p = dir.join("report.csv");
            std::fs::write(&p, report.to_csv()).map_err(|e| Error::io(&p, e))?;
            p
        }
        Format::Json => {
            let p = dir.join("report.json");
            write_json(&p, report)?;
            p
        }
    };
    m.output(&path);
    print!("{}", report.to_table());
    Ok(())
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    Ok(File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))?)
}

fn synthgen(g: &Global, a: &crate::SynthArgs) -> Outcome {
    let preset = SynthConfig::preset(g.preset.as_deref().unwrap_or("desk")).map_err(usage)?;
    let mut cfg = layered(preset, g.config.as_deref())?;
    if let Some(v) = a.n_accounts {
        cfg.n_accounts = v;
    }
    if let Some(v) = a.n_tx {
        cfg.n_tx = v;
    }
    if let Some(v) = a.n_pairs {
        cfg.n_pairs = v;
    }
    if let Some(v) = a.burst_rate {
        cfg.burst_rate = v;
    }
    if let Some(v) = a.phisher_fraction {
        cfg.phisher_fraction = v;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(usage)?;
    let dir = out_dir(&a.out)?;
    let corpus = generate(&cfg)?;
    corpus.write_dir(&dir)?;
    let stats = corpus.stats();
    write_json(&dir.join("synth_stats.json"), &stats)?;
    let mut m = RunManifest::new("synthgen", cfg.seed, g.threads, &cfg);
    for f in ["transactions.csv", "token_transfers.csv", "labels.csv", "kinds.csv", "pairs.csv", "synth_stats.json"] {
        m.output(&dir.join(f));
    }
    m.write(&dir)?;
    println!(
        "{} accounts, {} transactions, {} token transfers; in/out ratio phishers {:.3}, normals {:.3}",
        cfg.n_accounts, stats.transactions, stats.token_transfers, stats.phisher_in_out, stats.normal_in_out
    );
    Ok(())
}

fn ingest(g: &Global, a: &crate::IngestArgs) -> Outcome {
    if !a.input.is_dir() {
        return Err(Error::io(
            &a.input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input directory not found"),
        )
        .into());
    }
    let dir = out_dir(&a.out)?;
    let corpus_path = dir.join(CORPUS_FILE);
    let s = ingest_files(&a.input, &corpus_path)?;
    let diag_path = dir.join("diagnostics.csv");
    let mut w = csv::Writer::from_writer(create(&diag_path)?);
    w.write_record(["file", "line", "message"]).map_err(Error::from)?;
    for (file, d) in &s.diagnostics {
        w.write_record([file.clone(), d.line.to_string(), d.message.clone()])
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    let summary = serde_json::json!({
        "transactions": s.transactions,
        "token_transfers": s.token_transfers,
        "token_transfers_dropped": s.token_transfers_dropped,
        "accounts": s.accounts,
        "diagnostics": s.diagnostics.len(),
    });
    write_json(&dir.join("ingest_summary.json"), &summary)?;
    let mut m = RunManifest::new("ingest", g.seed.unwrap_or(0), g.threads, &serde_json::json!({})).input(&a.input);
    m.output(&corpus_path);
    m.output(&diag_path);
    m.output(&dir.join("ingest_summary.json"));
    m.write(&dir)?;
    println!(
        "{} transactions, {} token transfers ({} dropped), {} accounts, {} malformed rows",
        s.transactions,
        s.token_transfers,
        s.token_transfers_dropped,
        s.accounts,
        s.diagnostics.len()
    );
    Ok(())
}

fn build_seqs(g: &Global, a: &crate::BuildSeqsArgs) -> Outcome {
    let corpus_path = resolve(&a.corpus, CORPUS_FILE)?;
    let mut cfg = SeqConfig {
        dedup: !a.no_dedup,
        ..SeqConfig::default()
    };
    if let Some(v) = a.max_seq_len {
        cfg.max_seq_len = v;
    }
    if let Some(v) = a.min_tx {
        cfg.min_tx = v;
    }
    if let Some(v) = a.max_tx {
        cfg.max_tx = v;
    }
    if let Some(v) = a.dedup_window_hours {
        cfg.dedup_window_hours = v;
    }
    if cfg.max_seq_len < 2 || cfg.min_tx > cfg.max_tx {
        return Err(usage("need max_seq_len >= 2 and min_tx <= max_tx"));
    }
    let corpus = Corpus::load(&corpus_path)?;
    let dir = out_dir(&a.out)?;
    let set = build_sequences(&corpus, &cfg);
    let s = set.summary.clone();
    let seqs = SeqDir::from_set(set, cfg.clone());
    seqs.save(&dir)?;
    let mut m = RunManifest::new("build-seqs", g.seed.unwrap_or(0), g.threads, &cfg).input(&corpus_path);
    for f in [SEQUENCES_FILE, VOCAB_FILE, ACCOUNTS_FILE, SUMMARY_FILE] {
        m.output(&dir.join(f));
    }
    m.write(&dir)?;
    println!(
        "{} accounts, {} -> {} records, repetitiveness {:.4} -> {:.4}",
        s.accounts, s.records_raw, s.records_final, s.repetitiveness_raw, s.repetitiveness_final
    );
    Ok(())
}

fn load_seqs(path: &Path) -> Outcome<SeqDir> {
    Ok(SeqDir::load(path)?)
}

fn pretrain_cmd(g: &Global, a: &crate::PretrainArgs) -> Outcome {
    let mut cfg = train_config(g, &a.train)?;
    let seqs = load_seqs(&a.seqs)?;
    cfg.dedup = seqs.meta.config.dedup;
    let dir = out_dir(&a.out)?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let mut m = RunManifest::new(
        "pretrain",
        cfg.seed,
        g.threads,
        &serde_json::json!({ "train": &cfg, "no_pretrain": a.train.no_pretrain }),
    )
    .input(&a.seqs);
    m.output(&ck_path);

    if a.train.no_pretrain {
        let ck = Checkpoint {
            params: initial_params(&cfg, seqs.vocab.len()),
            config: cfg.clone(),
            vocab_hash: seqs.meta.vocab_hash.clone(),
            epoch: 0,
            loss_history: Vec::new(),
            head: None,
        };
        ck.save(&ck_path)?;
        m.write(&dir)?;
        println!("wrote untrained checkpoint ({} parameters)", ck.params.num_parameters());
        return Ok(());
    }

    let table = build_frequency_table(&seqs.sequences)?;
    let data = PretrainData {
        sequences: &seqs.sequences,
        vocab_size: seqs.vocab.len(),
        vocab_hash: &seqs.meta.vocab_hash,
        frequency: &table,
    };
    let report = pretrain(&data, &cfg)?;
    report.checkpoint.save(&ck_path)?;
    let metrics = dir.join("metrics.csv");
    write_metrics_csv(create(&metrics)?, &report.steps)?;
    m.output(&metrics);
    m.write(&dir)?;
    if let Some(why) = report.diverged {
        return Err(Error::Numeric(format!("training diverged: {why}; last finite checkpoint saved")).into());
    }
    println!(
        "{} epochs, {} steps, epoch losses {:?}",
        report.checkpoint.epoch,
        report.steps.len(),
        report.checkpoint.loss_history
    );
    Ok(())
}

fn phishing_labels(labels: &[Label]) -> Vec<bool> {
    labels.iter().map(|l| *l == Label::Phishing).collect()
}

fn finetune_cmd(g: &Global, a: &crate::FinetuneArgs) -> Outcome {
    let mut cfg = train_config(g, &a.train)?;
    let seqs = load_seqs(&a.seqs)?;
    let start = match (&a.checkpoint, a.train.no_pretrain) {
        (_, true) => None,
        (Some(p), false) => Some(Checkpoint::load(&resolve(p, CHECKPOINT_FILE)?)?),
        (None, false) => return Err(usage("finetune needs --checkpoint or --no-pretrain")),
    };
    if let Some(c) = &start {
        if c.vocab_hash != seqs.meta.vocab_hash {
            return Err(Error::Format("checkpoint was trained on a different vocabulary".into()).into());
        }
        // The architecture comes from the checkpoint.
        let arch = &c.config;
        cfg.hidden = arch.hidden;
        cfg.layers = arch.layers;
        cfg.heads = arch.heads;
        cfg.ff_dim = arch.ff_dim;
        cfg.max_seq_len = arch.max_seq_len;
        cfg.tranx_features = arch.tranx_features;
        cfg.in_out_separation = arch.in_out_separation;
        cfg.erc20_gate = arch.erc20_gate;
    }
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(usage("--test-fraction must lie in [0, 1)"));
    }
    let labels = phishing_labels(&seqs.labels);
    let split = stratified_split(&labels, a.test_fraction, cfg.seed);
    let pick = |idx: &[usize]| -> (Vec<TxSequence>, Vec<bool>) {
        (
            idx.iter().map(|&i| seqs.sequences[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (train_x, train_y) = pick(&split.train);
    let (test_x, test_y) = pick(&split.test);
    let ck = finetune(
        start.as_ref(),
        &train_x,
        &train_y,
        seqs.vocab.len(),
        &seqs.meta.vocab_hash,
        &cfg,
    )?;
    let head = ck.head.as_ref().expect("fine-tuned checkpoints carry a head");
    let scores = head_scores(head, &representations(&ck, &test_x)?);
    let metrics = Confusion::from_scores(&scores, &test_y, a.threshold).metrics(a.threshold);
    let prior = test_y.iter().filter(|&&y| y).count() as f64 / test_y.len().max(1) as f64;
    let report = MetricsReport {
        classification: Some(metrics),
        f1_mean: None,
        f1_std: None,
        runs: vec![metrics],
        baseline_f1: Some(all_positive_f1(prior)),
        retrieval: None,
    };
    let dir = out_dir(&a.out)?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    ck.save(&ck_path)?;
    let mut m = RunManifest::new(
        "finetune",
        cfg.seed,
        g.threads,
        &serde_json::json!({
            "train": &cfg,
            "test_fraction": a.test_fraction,
            "threshold": a.threshold,
            "from_checkpoint": start.is_some(),
            "format": format!("{:?}", g.format),
        }),
    )
    .input(&a.seqs);
    if let Some(p) = &a.checkpoint {
        m = m.input(p);
    }
    m.output(&ck_path);
    write_report(&dir, &report, g.format, &mut m)?;
    m.write(&dir)?;
    Ok(())
}

fn extract(g: &Global, a: &crate::ExtractArgs) -> Outcome {
    let mode: RepresentationSource = a.mode.parse().map_err(usage)?;
    let ck_path = resolve(&a.checkpoint, CHECKPOINT_FILE)?;
    let ck = Checkpoint::load(&ck_path)?;
    let seqs = load_seqs(&a.seqs)?;
    if ck.vocab_hash != seqs.meta.vocab_hash {
        return Err(Error::Format("checkpoint was trained on a different vocabulary".into()).into());
    }
    let vectors = match mode {
        RepresentationSource::SelfToken => representations(&ck, &seqs.sequences)?.mapv(f64::from),
        RepresentationSource::AddressEmbedding => {
            let d = ck.params.config.hidden;
            let mut out = ndarray::Array2::zeros((seqs.sequences.len(), d));
            for (i, s) in seqs.sequences.iter().enumerate() {
                out.row_mut(i).assign(&extract_representation(s, &ck.params, mode)?.vector);
            }
            out
        }
    };
    let table = RepTable {
        addresses: seqs.sequences.iter().map(|s| seqs.vocab.address(s.owner).unwrap_or_default()).collect(),
        labels: seqs.labels.clone(),
        first_timestamp: seqs.sequences.iter().map(|s| s.first_timestamp()).collect(),
        vectors,
    };
    let dir = out_dir(&a.out)?;
    let path = dir.join(REPRESENTATIONS_FILE);
    table.write(&path)?;
    let mut m = RunManifest::new("extract", ck.config.seed, g.threads, &serde_json::json!({ "mode": a.mode }))
        .input(&ck_path)
        .input(&a.seqs);
    m.output(&path);
    m.write(&dir)?;
    println!("{} representations of dimension {}", table.addresses.len(), table.vectors.ncols());
    Ok(())
}

fn eval_phish(g: &Global, a: &crate::EvalPhishArgs) -> Outcome {
    let cfg = train_config(g, &TrainFlags::default())?;
    if a.runs == 0 {
        return Err(usage("--runs must be positive"));
    }
    if !(0.0..1.0).contains(&a.test_fraction) || a.test_fraction == 0.0 {
        return Err(usage("--test-fraction must lie in (0, 1)"));
    }
    let reps_path = resolve(&a.reps, REPRESENTATIONS_FILE)?;
    let reps = RepTable::read(&reps_path)?;
    let labels = phishing_labels(&reps.labels);
    let split = stratified_split(&labels, a.test_fraction, cfg.seed);
    let mut head = HeadTraining {
        hidden: cfg.head_hidden,
        dropout: cfg.head_dropout,
        ..HeadTraining::default()
    };
    if let Some(e) = a.head_epochs {
        head.epochs = e;
    }
    let seeds: Vec<u64> = (0..a.runs as u64).map(|r| rng::derive(cfg.seed, &[r])).collect();
    let report = fixed_train_eval(&reps.vectors, &labels, &split, a.threshold, &head, &seeds)?;
    let dir = out_dir(&a.out)?;
    let mut m = RunManifest::new(
        "eval-phish",
        cfg.seed,
        g.threads,
        &serde_json::json!({
            "runs": a.runs,
            "test_fraction": a.test_fraction,
            "threshold": a.threshold,
            "head_hidden": head.hidden,
            "head_dropout": head.dropout,
            "head_epochs": head.epochs,
            "head_learning_rate": head.learning_rate,
            "head_batch_size": head.batch_size,
            "format": format!("{:?}", g.format),
        }),
    )
    .input(&reps_path);
    write_report(&dir, &report, g.format, &mut m)?;
    m.write(&dir)?;
    Ok(())
}

fn eval_deanon(g: &Global, a: &crate::EvalDeanonArgs) -> Outcome {
    if a.ks.is_empty() || a.ks.contains(&0) {
        return Err(usage("--ks must list positive cut-offs"));
    }
    let reps_path = resolve(&a.reps, REPRESENTATIONS_FILE)?;
    let reps = RepTable::read(&reps_path)?;
    let pairs_path = resolve(&a.pairs, "pairs.csv")?;
    let rows = parse_pairs(File::open(&pairs_path).map_err(|e| Error::io(&pairs_path, e))?)?;
    let index: std::collections::HashMap<_, u32> =
        reps.addresses.iter().enumerate().map(|(i, a)| (*a, i as u32)).collect();
    let lookup = |a| index.get(&a).copied().unwrap_or(u32::MAX);
    let pairs: Vec<EvalPair> = rows
        .iter()
        .map(|r| EvalPair {
            query: lookup(r.query),
            target: lookup(r.target),
            cutoff_timestamp: r.cutoff_timestamp,
        })
        .collect();
    let set = CandidateSet {
        ids: (0..reps.addresses.len() as u32).collect(),
        vectors: reps.vectors.clone(),
        first_timestamp: reps.first_timestamp.clone(),
    };
    let report = deanon_eval(&pairs, &set, &a.ks);
    let dir = out_dir(&a.out)?;
    let ranks_path = dir.join("ranks.csv");
    let mut w = csv::Writer::from_writer(create(&ranks_path)?);
    w.write_record(["query", "target", "rank", "candidates", "note"]).map_err(Error::from)?;
    for (row, p) in rows.iter().zip(&pairs) {
        let (rank, cands, note) = match rank_pair(p, &set) {
            PairOutcome::Ranked { rank, candidates } => (rank.to_string(), candidates.to_string(), String::new()),
            PairOutcome::Skipped(why) => (String::new(), String::new(), why),
        };
        w.write_record([row.query.to_string(), row.target.to_string(), rank, cands, note])
            .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    let mut m = RunManifest::new(
        "eval-deanon",
        g.seed.unwrap_or(0),
        g.threads,
        &serde_json::json!({ "ks": a.ks, "format": format!("{:?}", g.format) }),
    )
    .input(&reps_path)
    .input(&pairs_path);
    m.output(&ranks_path);
    write_report(&dir, &report, g.format, &mut m)?;
    m.write(&dir)?;
    Ok(())
}

fn diag_attention(g: &Global, a: &crate::DiagAttentionArgs) -> Outcome {
    let ck_path = resolve(&a.checkpoint, CHECKPOINT_FILE)?;
    let ck = Checkpoint::load(&ck_path)?;
    let seqs = load_seqs(&a.seqs)?;
    if a.layer == 0 || a.layer > ck.params.config.layers {
        return Err(usage(format!("--layer must lie in 1..={}", ck.params.config.layers)));
    }
    let table = build_frequency_table(&seqs.sequences)?;
    let buckets = attention_by_rank(&ck.params, &seqs.sequences, &table, a.layer - 1)?;
    let dir = out_dir(&a.out)?;
    let mut m = RunManifest::new(
        "diag-attention",
        ck.config.seed,
        g.threads,
        &serde_json::json!({ "layer": a.layer, "format": format!("{:?}", g.format) }),
    )
    .input(&ck_path)
    .input(&a.seqs);
    let csv_path = dir.join("attention.csv");
    write_buckets_csv(create(&csv_path)?, &buckets)?;
    m.output(&csv_path);
    if g.format == Format::Json {
        let p = dir.join("attention.json");
        write_json(&p, &buckets)?;
        m.output(&p);
    }
    m.write(&dir)?;
    for b in &buckets {
        println!("{:<8} {:.6} ({} occurrences)", b.rank_bucket, b.mean_attention, b.occurrences);
    }
    Ok(())
}

fn probe(g: &Global, a: &crate::ProbeArgs) -> Outcome {
    if a.seeds == 0 || a.per_edge < 2 {
        return Err(usage("need --seeds >= 1 and --per-edge >= 2"));
    }
    let base_seed = g.seed.unwrap_or(0);
    let mut cfg = layered(probe_config(base_seed), g.config.as_deref())?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.validate().map_err(usage)?;
    let seeds: Vec<u64> = (0..a.seeds).map(|s| base_seed + s).collect();
    let summary = probe_experiment(&seeds, a.per_edge, &cfg)?;
    let dir = out_dir(&a.out)?;
    let mut m = RunManifest::new(
        "probe-3hop",
        base_seed,
        g.threads,
        &serde_json::json!({ "train": &cfg, "seeds": a.seeds, "per_edge": a.per_edge, "format": format!("{:?}", g.format) }),
    );
    let path = match g.format {
        Format::Json => {
            let p = dir.join("probe.json");
            write_json(&p, &summary)?;
            p
        }
        Format::Csv => {
            let p = dir.join("probe.csv");
            let mut w = csv::Writer::from_writer(create(&p)?);
            w.write_record(["seed", "mode", "node", "hops", "distance"]).map_err(Error::from)?;
            for (seed, run) in seeds.iter().zip(&summary.runs) {
                for d in run {
                    let mode = format!("{:?}", d.mode);
                    for (node, hops, dist) in &d.neighbors {
                        w.write_record([seed.to_string(), mode.clone(), node.clone(), hops.to_string(), dist.to_string()])
                            .map_err(Error::from)?;
                    }
                    w.write_record([seed.to_string(), mode, "E".into(), "control".into(), d.control.to_string()])
                        .map_err(Error::from)?;
                }
            }
            w.flush().map_err(Error::from)?;
            p
        }
    };
    m.output(&path);
    m.write(&dir)?;
    let (rn, rc) = summary.representation;
    let (an, ac) = summary.address;
    println!("representation: mean neighbor distance {rn:.4}, control {rc:.4}");
    println!("address embedding: mean neighbor distance {an:.4}, control {ac:.4}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_the_preset_and_others_survive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "epochs = 9\nmask_ratio = 0.3\n").unwrap();
        let base = TrainConfig::preset("tiny").unwrap();
        let cfg = layered(base.clone(), Some(&path)).unwrap();
        assert_eq!(cfg.epochs, 9);
        assert_eq!(cfg.mask_ratio, 0.3);
        assert_eq!(cfg.hidden, base.hidden);
    }

    #[test]
    fn unknown_file_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "epoch = 9\n").unwrap();
        let err = layered(TrainConfig::preset("tiny").unwrap(), Some(&path)).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
