//! On-disk layout shared between stages.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ethseq::ingest::{Address, Label};
use ethseq::seqgen::{load_sequences, save_sequences, AddressVocab, SeqConfig, SeqSummary, SequenceSet, TxSequence};
use ethseq::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub const CORPUS_FILE: &str = "corpus.bin";
pub const SEQUENCES_FILE: &str = "sequences.bin";
pub const VOCAB_FILE: &str = "vocab.csv";
pub const ACCOUNTS_FILE: &str = "accounts.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const REPRESENTATIONS_FILE: &str = "representations.csv";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Accept either a stage directory or the named file inside it.
pub fn resolve(path: &Path, file: &str) -> Result<PathBuf> {
    let p = if path.is_dir() { path.join(file) } else { path.to_path_buf() };
    if !p.exists() {
        return Err(Error::io(
            &p,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    Ok(p)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeqMeta {
    pub config: SeqConfig,
    pub summary: SeqSummary,
    pub vocab_hash: String,
}

/// Everything `build-seqs` writes.
pub struct SeqDir {
    pub sequences: Vec<TxSequence>,
    pub labels: Vec<Label>,
    pub vocab: AddressVocab,
    pub meta: SeqMeta,
}

impl SeqDir {
    pub fn from_set(set: SequenceSet, config: SeqConfig) -> Self {
        let meta = SeqMeta {
            config,
            summary: set.summary.clone(),
            vocab_hash: set.vocab.content_hash(),
        };
        SeqDir {
            sequences: set.sequences,
            labels: set.labels,
            vocab: set.vocab,
            meta,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        save_sequences(&dir.join(SEQUENCES_FILE), &self.sequences)?;
        self.vocab.write_csv(create(&dir.join(VOCAB_FILE))?)?;
        let mut w = csv::Writer::from_writer(create(&dir.join(ACCOUNTS_FILE))?);
        w.write_record(["address", "label"])?;
        for (s, l) in self.sequences.iter().zip(&self.labels) {
            let a = self.vocab.address(s.owner).unwrap_or_default();
            w.write_record([a.to_string(), l.to_string()])?;
        }
        w.flush()?;
        write_json(&dir.join(SUMMARY_FILE), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let dir = if dir.is_dir() {
            dir.to_path_buf()
        } else {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "sequence directory not found"),
            ));
        };
        let sequences = load_sequences(&resolve(&dir, SEQUENCES_FILE)?)?;
        let vocab = AddressVocab::read_csv(open(&resolve(&dir, VOCAB_FILE)?)?)?;
        let meta: SeqMeta = read_json(&resolve(&dir, SUMMARY_FILE)?)?;
        let mut labels = Vec::with_capacity(sequences.len());
        let mut r = csv::Reader::from_reader(open(&resolve(&dir, ACCOUNTS_FILE)?)?);
        for row in r.records() {
            let row = row?;
            labels.push(row.get(1).unwrap_or("").parse::<Label>()?);
        }
        if labels.len() != sequences.len() {
            return Err(Error::Format(format!(
                "{} lists {} accounts for {} sequences",
                ACCOUNTS_FILE,
                labels.len(),
                sequences.len()
            )));
        }
        if vocab.content_hash() != meta.vocab_hash {
            return Err(Error::Format("vocabulary does not match its summary".into()));
        }
        Ok(SeqDir {
            sequences,
            labels,
            vocab,
            meta,
        })
    }
}

/// Representations with their account metadata, one row per account.
#[derive(Clone, Debug, PartialEq)]
pub struct RepTable {
    pub addresses: Vec<Address>,
    pub labels: Vec<Label>,
    pub first_timestamp: Vec<Option<u64>>,
    pub vectors: Array2<f64>,
}

impl RepTable {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(create(path)?);
        let mut header = vec!["address".to_string(), "label".into(), "first_timestamp".into()];
        header.extend((0..self.vectors.ncols()).map(|j| format!("v{j}")));
        w.write_record(&header)?;
        for (i, row) in self.vectors.rows().into_iter().enumerate() {
            let mut rec = vec![
                self.addresses[i].to_string(),
                self.labels[i].to_string(),
                self.first_timestamp[i].map(|t| t.to_string()).unwrap_or_default(),
            ];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(open(path)?);
        let dim = r.headers()?.len().saturating_sub(3);
        let (mut addresses, mut labels, mut first, mut values) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, row) in r.records().enumerate() {
            let row = row?;
            let line = i as u64 + 2;
            let bad = |m: String| Error::Row { line, message: m };
            if row.len() != dim + 3 {
                return Err(bad(format!("expected {} columns, found {}", dim + 3, row.len())));
            }
            addresses.push(row[0].parse::<Address>()?);
            labels.push(row[1].parse::<Label>()?);
            first.push(match &row[2] {
                "" => None,
                s => Some(s.parse::<u64>().map_err(|e| bad(e.to_string()))?),
            });
            for v in row.iter().skip(3) {
                values.push(v.parse::<f64>().map_err(|e| bad(e.to_string()))?);
            }
        }
        let vectors = Array2::from_shape_vec((addresses.len(), dim), values).map_err(|e| Error::Format(e.to_string()))?;
        Ok(RepTable {
            addresses,
            labels,
            first_timestamp: first,
            vectors,
        })
    }
}
