use std::collections::{HashMap, HashSet};
use std::io::Read;

use csv::StringRecord;
use primitive_types::U256;

use super::types::*;
use crate::error::{Error, Result};

/// A malformed row that was skipped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub line: u64,
    pub message: String,
}

/// Records parsed from one CSV stream plus the rows that were rejected.
#[derive(Clone, Debug)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub diagnostics: Vec<RowDiagnostic>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            records: Vec::new(),
            diagnostics: Vec::new(),
        }
    }
}

struct Columns(Vec<usize>);

impl Columns {
    fn resolve(headers: &StringRecord, required: &[&str]) -> Result<Self> {
        let mut idx = Vec::with_capacity(required.len());
        for name in required {
            match headers.iter().position(|h| h.trim() == *name) {
                Some(i) => idx.push(i),
                None => {
                    return Err(Error::Schema(format!(
                        "missing required column {name:?} (have: {})",
                        headers.iter().collect::<Vec<_>>().join(",")
                    )))
                }
            }
        }
        Ok(Columns(idx))
    }

    fn get<'r>(&self, rec: &'r StringRecord, i: usize) -> std::result::Result<&'r str, String> {
        rec.get(self.0[i])
            .map(str::trim)
            .ok_or_else(|| format!("row has {} fields, column {} missing", rec.len(), self.0[i]))
    }
}

fn parse_u256(s: &str) -> std::result::Result<U256, String> {
    if s.is_empty() {
        return Err("empty integer".into());
    }
    if s.starts_with('-') {
        return Err(format!("negative value {s:?}"));
    }
    // Ethereum-ETL occasionally writes integral floats such as "1e+18";
    // only plain decimal digits are accepted.
    U256::from_dec_str(s).map_err(|e| format!("bad integer {s:?}: {e:?}"))
}

fn parse_timestamp(s: &str) -> std::result::Result<u64, String> {
    let t: u64 = s.parse().map_err(|e| format!("bad timestamp {s:?}: {e}"))?;
    if t == 0 {
        return Err("timestamp must be positive".into());
    }
    Ok(t)
}

fn addr(s: &str) -> std::result::Result<Address, String> {
    s.parse::<Address>().map_err(|e| e.to_string())
}

/// Streaming reader over an Ethereum-ETL `transactions.csv`.
pub struct TransactionReader<R: Read> {
    inner: csv::Reader<R>,
    cols: Columns,
    record: StringRecord,
}

impl<R: Read> TransactionReader<R> {
    pub const COLUMNS: [&'static str; 6] = [
        "hash",
        "from_address",
        "to_address",
        "value",
        "block_timestamp",
        "receipt_status",
    ];

    pub fn new(stream: R) -> Result<Self> {
        let mut inner = csv::ReaderBuilder::new().flexible(true).from_reader(stream);
        let cols = Columns::resolve(inner.headers()?, &Self::COLUMNS)?;
        Ok(Self {
            inner,
            cols,
            record: StringRecord::new(),
        })
    }

    fn convert(&self) -> std::result::Result<RawTransaction, String> {
        let r = &self.record;
        let c = &self.cols;
        let tx_hash = c.get(r, 0)?.parse::<TxHash>().map_err(|e| e.to_string())?;
        let from_raw = c.get(r, 1)?;
        if from_raw.is_empty() {
            return Err("from_address is empty".into());
        }
        let from_address = addr(from_raw)?;
        let to_raw = c.get(r, 2)?;
        let to_address = if to_raw.is_empty() {
            None
        } else {
            Some(addr(to_raw)?)
        };
        let value_wei = parse_u256(c.get(r, 3)?)?;
        let block_timestamp = parse_timestamp(c.get(r, 4)?)?;
        let status = match c.get(r, 5)? {
            "0" => TxStatus::Failed,
            // Pre-Byzantium receipts carry no status.
            "1" | "" => TxStatus::Success,
            other => return Err(format!("bad receipt_status {other:?}")),
        };
        Ok(RawTransaction {
            tx_hash,
            from_address,
            to_address,
            value_wei,
            block_timestamp,
            status,
        })
    }

    /// Next well-formed row, or a diagnostic for a malformed one.
    pub fn next_row(&mut self) -> Option<std::result::Result<RawTransaction, RowDiagnostic>> {
        match self.inner.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => {
                let line = self.record.position().map_or(0, |p| p.line());
                Some(
                    self.convert()
                        .map_err(|message| RowDiagnostic { line, message }),
                )
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                Some(Err(RowDiagnostic {
                    line,
                    message: e.to_string(),
                }))
            }
        }
    }
}

fn collect<T>(mut next: impl FnMut() -> Option<std::result::Result<T, RowDiagnostic>>) -> Parsed<T> {
    let mut out = Parsed::default();
    while let Some(row) = next() {
        match row {
            Ok(r) => out.records.push(r),
            Err(d) => out.diagnostics.push(d),
        }
    }
    out
}

/// Parse a whole `transactions.csv` stream, preserving row order.
pub fn parse_transactions<R: Read>(stream: R) -> Result<Parsed<RawTransaction>> {
    let mut reader = TransactionReader::new(stream)?;
    Ok(collect(|| reader.next_row()))
}

/// Streaming reader over an Ethereum-ETL `token_transfers.csv`. Events whose
/// recipient is a known contract are skipped silently.
pub struct TokenTransferReader<'c, R: Read> {
    inner: csv::Reader<R>,
    cols: Columns,
    record: StringRecord,
    contracts: &'c HashSet<Address>,
    dropped: u64,
}

impl<'c, R: Read> TokenTransferReader<'c, R> {
    pub const COLUMNS: [&'static str; 4] = ["transaction_hash", "token_address", "to_address", "value"];

    pub fn new(stream: R, contracts: &'c HashSet<Address>) -> Result<Self> {
        let mut inner = csv::ReaderBuilder::new().flexible(true).from_reader(stream);
        let cols = Columns::resolve(inner.headers()?, &Self::COLUMNS)?;
        Ok(Self {
            inner,
            cols,
            record: StringRecord::new(),
            contracts,
            dropped: 0,
        })
    }

    /// Number of events dropped because the recipient is not an EOA.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    fn convert(&self) -> std::result::Result<TokenTransferEvent, String> {
        let r = &self.record;
        let c = &self.cols;
        Ok(TokenTransferEvent {
            tx_hash: c.get(r, 0)?.parse::<TxHash>().map_err(|e| e.to_string())?,
            contract_address: addr(c.get(r, 1)?)?,
            recipient_eoa: addr(c.get(r, 2)?)?,
            value_raw: parse_u256(c.get(r, 3)?)?,
        })
    }

    pub fn next_row(&mut self) -> Option<std::result::Result<TokenTransferEvent, RowDiagnostic>> {
        loop {
            match self.inner.read_record(&mut self.record) {
                Ok(false) => return None,
                Ok(true) => {
                    let line = self.record.position().map_or(0, |p| p.line());
                    match self.convert() {
                        Ok(ev) => {
                            if self.contracts.contains(&ev.recipient_eoa)
                                || ev.recipient_eoa == ev.contract_address
                            {
                                self.dropped += 1;
                                continue;
                            }
                            return Some(Ok(ev));
                        }
                        Err(message) => return Some(Err(RowDiagnostic { line, message })),
                    }
                }
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Some(Err(RowDiagnostic {
                        line,
                        message: e.to_string(),
                    }));
                }
            }
        }
    }
}

/// Parse ERC-20 transfer events, keeping only transfers to EOAs. Recipients
/// absent from `contracts` are treated as EOAs.
pub fn parse_token_transfers<R: Read>(
    stream: R,
    contracts: &HashSet<Address>,
) -> Result<Parsed<TokenTransferEvent>> {
    let mut reader = TokenTransferReader::new(stream, contracts)?;
    Ok(collect(|| reader.next_row()))
}

fn parse_pairs_file<R: Read, V>(
    stream: R,
    value_col: &str,
    parse: impl Fn(&str) -> Result<V>,
) -> Result<Parsed<(Address, V)>> {
    let mut inner = csv::ReaderBuilder::new().flexible(true).from_reader(stream);
    let cols = Columns::resolve(inner.headers()?, &["address", value_col])?;
    let mut record = StringRecord::new();
    let mut seen = HashSet::new();
    let mut out = Parsed::default();
    loop {
        match inner.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                let row = (|| -> std::result::Result<(Address, V), String> {
                    let a = addr(cols.get(&record, 0)?)?;
                    let v = parse(cols.get(&record, 1)?).map_err(|e| e.to_string())?;
                    Ok((a, v))
                })();
                match row {
                    Ok((a, v)) if seen.insert(a) => out.records.push((a, v)),
                    Ok((a, _)) => out.diagnostics.push(RowDiagnostic {
                        line,
                        message: format!("duplicate address {a}"),
                    }),
                    Err(message) => out.diagnostics.push(RowDiagnostic { line, message }),
                }
            }
            Err(e) => out.diagnostics.push(RowDiagnostic {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Parse a labels file (`address,label`).
pub fn parse_labels<R: Read>(stream: R) -> Result<Parsed<(Address, Label)>> {
    parse_pairs_file(stream, "label", |s| s.parse())
}

/// Parse an address-kind file (`address,kind`).
pub fn parse_kinds<R: Read>(stream: R) -> Result<Parsed<(Address, AccountKind)>> {
    parse_pairs_file(stream, "kind", |s| s.parse())
}

/// Resolve account metadata for every labeled address; unlisted kinds
/// default to EOA.
pub fn join_accounts(labels: &[(Address, Label)], kinds: &[(Address, AccountKind)]) -> Vec<AccountMeta> {
    let kind_of: HashMap<Address, AccountKind> = kinds.iter().copied().collect();
    labels
        .iter()
        .map(|&(address, label)| AccountMeta {
            address,
            kind: kind_of.get(&address).copied().unwrap_or(AccountKind::Eoa),
            label,
        })
        .collect()
}
