//! On-disk intermediate corpus.
//!
//! Layout: the 8-byte magic `ETHSEQ1\n`, then a stream of records, each a
//! little-endian `u32` payload length followed by the payload. The first
//! payload byte is a record tag:
//!
//! | tag | record | payload after tag |
//! |-----|--------|-------------------|
//! | 1 | transaction | hash[32] from[20] has_to[1] to[20] value[32, BE] ts[u64] status[1] |
//! | 2 | token transfer | hash[32] contract[20] recipient[20] value[32, BE] |
//! | 3 | account | address[20] kind[1] label[1] |
//! | 4 | contract | address[20] |

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use primitive_types::U256;

use super::parse::{
    join_accounts, parse_kinds, parse_labels, RowDiagnostic, TokenTransferReader, TransactionReader,
};
use super::types::*;
use crate::error::{Error, Result};

pub const CORPUS_MAGIC: &[u8; 8] = b"ETHSEQ1\n";

const TAG_TX: u8 = 1;
const TAG_TOKEN: u8 = 2;
const TAG_ACCOUNT: u8 = 3;
const TAG_CONTRACT: u8 = 4;

/// Everything downstream stages need from the raw exports.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub transactions: Vec<RawTransaction>,
    pub token_transfers: Vec<TokenTransferEvent>,
    pub accounts: Vec<AccountMeta>,
    /// Addresses known to be contracts; everything else is an EOA.
    pub contracts: Vec<Address>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CorpusRecord {
    Transaction(RawTransaction),
    TokenTransfer(TokenTransferEvent),
    Account(AccountMeta),
    Contract(Address),
}

fn u256_bytes(v: &U256) -> [u8; 32] {
    v.to_big_endian()
}

fn label_code(l: Label) -> u8 {
    match l {
        Label::Normal => 0,
        Label::Phishing => 1,
        Label::PairedA => 2,
        Label::PairedB => 3,
        Label::Excluded => 4,
    }
}

fn label_from(c: u8) -> Result<Label> {
    Ok(match c {
        0 => Label::Normal,
        1 => Label::Phishing,
        2 => Label::PairedA,
        3 => Label::PairedB,
        4 => Label::Excluded,
        _ => return Err(Error::Format(format!("bad label code {c}"))),
    })
}

fn encode(rec: &CorpusRecord, buf: &mut Vec<u8>) {
    buf.clear();
    match rec {
        CorpusRecord::Transaction(t) => {
            buf.push(TAG_TX);
            buf.extend_from_slice(&t.tx_hash.0);
            buf.extend_from_slice(&t.from_address.0);
            match t.to_address {
                Some(a) => {
                    buf.push(1);
                    buf.extend_from_slice(&a.0);
                }
                None => {
                    buf.push(0);
                    buf.extend_from_slice(&[0u8; 20]);
                }
            }
            buf.extend_from_slice(&u256_bytes(&t.value_wei));
            buf.extend_from_slice(&t.block_timestamp.to_le_bytes());
            buf.push(matches!(t.status, TxStatus::Failed) as u8);
        }
        CorpusRecord::TokenTransfer(e) => {
            buf.push(TAG_TOKEN);
            buf.extend_from_slice(&e.tx_hash.0);
            buf.extend_from_slice(&e.contract_address.0);
            buf.extend_from_slice(&e.recipient_eoa.0);
            buf.extend_from_slice(&u256_bytes(&e.value_raw));
        }
        CorpusRecord::Account(a) => {
            buf.push(TAG_ACCOUNT);
            buf.extend_from_slice(&a.address.0);
            buf.push(matches!(a.kind, AccountKind::Contract) as u8);
            buf.push(label_code(a.label));
        }
        CorpusRecord::Contract(a) => {
            buf.push(TAG_CONTRACT);
            buf.extend_from_slice(&a.0);
        }
    }
}

fn take<const N: usize>(p: &mut &[u8]) -> Result<[u8; N]> {
    if p.len() < N {
        return Err(Error::Format("truncated record".into()));
    }
    let mut out = [0u8; N];
    out.copy_from_slice(&p[..N]);
    *p = &p[N..];
    Ok(out)
}

fn decode(mut p: &[u8]) -> Result<CorpusRecord> {
    let [tag] = take::<1>(&mut p)?;
    let rec = match tag {
        TAG_TX => {
            let tx_hash = TxHash(take(&mut p)?);
            let from_address = Address(take(&mut p)?);
            let [has_to] = take::<1>(&mut p)?;
            let to = Address(take(&mut p)?);
            let value_wei = U256::from_big_endian(&take::<32>(&mut p)?);
            let block_timestamp = u64::from_le_bytes(take(&mut p)?);
            let [status] = take::<1>(&mut p)?;
            CorpusRecord::Transaction(RawTransaction {
                tx_hash,
                from_address,
                to_address: (has_to == 1).then_some(to),
                value_wei,
                block_timestamp,
                status: if status == 1 {
                    TxStatus::Failed
                } else {
                    TxStatus::Success
                },
            })
        }
        TAG_TOKEN => CorpusRecord::TokenTransfer(TokenTransferEvent {
            tx_hash: TxHash(take(&mut p)?),
            contract_address: Address(take(&mut p)?),
            recipient_eoa: Address(take(&mut p)?),
            value_raw: U256::from_big_endian(&take::<32>(&mut p)?),
        }),
        TAG_ACCOUNT => {
            let address = Address(take(&mut p)?);
            let [kind, label] = take::<2>(&mut p)?;
            CorpusRecord::Account(AccountMeta {
                address,
                kind: if kind == 1 {
                    AccountKind::Contract
                } else {
                    AccountKind::Eoa
                },
                label: label_from(label)?,
            })
        }
        TAG_CONTRACT => CorpusRecord::Contract(Address(take(&mut p)?)),
        t => return Err(Error::Format(format!("unknown record tag {t}"))),
    };
    if !p.is_empty() {
        return Err(Error::Format("trailing bytes in record".into()));
    }
    Ok(rec)
}

/// Append-only corpus writer.
pub struct CorpusWriter<W: Write> {
    out: W,
    buf: Vec<u8>,
    written: u64,
}

impl<W: Write> CorpusWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        out.write_all(CORPUS_MAGIC)?;
        Ok(Self {
            out,
            buf: Vec::with_capacity(128),
            written: 0,
        })
    }

    pub fn write(&mut self, rec: &CorpusRecord) -> Result<()> {
        encode(rec, &mut self.buf);
        self.out.write_u32::<LittleEndian>(self.buf.len() as u32)?;
        self.out.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn records_written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming corpus reader.
pub struct CorpusReader<R: Read> {
    inner: R,
    buf: Vec<u8>,
}

impl<R: Read> CorpusReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        inner
            .read_exact(&mut magic)
            .map_err(|_| Error::Format("file too short for corpus magic".into()))?;
        if &magic != CORPUS_MAGIC {
            return Err(Error::Format("not a corpus file (bad magic)".into()));
        }
        Ok(Self {
            inner,
            buf: Vec::new(),
        })
    }

    pub fn next_record(&mut self) -> Result<Option<CorpusRecord>> {
        let len = match self.inner.read_u32::<LittleEndian>() {
            Ok(l) => l as usize,
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        self.buf.resize(len, 0);
        self.inner
            .read_exact(&mut self.buf)
            .map_err(|_| Error::Format("truncated corpus record".into()))?;
        decode(&self.buf).map(Some)
    }
}

impl Corpus {
    pub fn write_to<W: Write>(&self, out: W) -> Result<W> {
        let mut w = CorpusWriter::new(out)?;
        for a in &self.accounts {
            w.write(&CorpusRecord::Account(*a))?;
        }
        for a in &self.contracts {
            w.write(&CorpusRecord::Contract(*a))?;
        }
        for t in &self.transactions {
            w.write(&CorpusRecord::Transaction(t.clone()))?;
        }
        for e in &self.token_transfers {
            w.write(&CorpusRecord::TokenTransfer(e.clone()))?;
        }
        w.finish()
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = CorpusReader::new(input)?;
        let mut c = Corpus::default();
        while let Some(rec) = r.next_record()? {
            match rec {
                CorpusRecord::Transaction(t) => c.transactions.push(t),
                CorpusRecord::TokenTransfer(e) => c.token_transfers.push(e),
                CorpusRecord::Account(a) => c.accounts.push(a),
                CorpusRecord::Contract(a) => c.contracts.push(a),
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

/// Input file names inside an export directory.
pub const TRANSACTIONS_CSV: &str = "transactions.csv";
pub const TOKEN_TRANSFERS_CSV: &str = "token_transfers.csv";
pub const LABELS_CSV: &str = "labels.csv";
pub const KINDS_CSV: &str = "kinds.csv";
pub const PAIRS_CSV: &str = "pairs.csv";

/// Counts reported by [`ingest_files`].
#[derive(Clone, Debug, Default)]
pub struct IngestSummary {
    pub transactions: u64,
    pub token_transfers: u64,
    pub token_transfers_dropped: u64,
    pub accounts: u64,
    pub diagnostics: Vec<(String, RowDiagnostic)>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Stream the CSV exports in `dir` into a corpus file at `out`. Only the
/// label and kind files are held in memory; transactions and transfers are
/// copied record by record. The token-transfer file is optional.
pub fn ingest_files(dir: &Path, out: &Path) -> Result<IngestSummary> {
    let mut summary = IngestSummary::default();

    let labels = parse_labels(open(&dir.join(LABELS_CSV))?)?;
    let kinds_path = dir.join(KINDS_CSV);
    let kinds = if kinds_path.exists() {
        parse_kinds(open(&kinds_path)?)?
    } else {
        Default::default()
    };
    for d in labels.diagnostics {
        summary.diagnostics.push((LABELS_CSV.into(), d));
    }
    for d in kinds.diagnostics {
        summary.diagnostics.push((KINDS_CSV.into(), d));
    }
    let contracts: HashSet<Address> = kinds
        .records
        .iter()
        .filter(|(_, k)| *k == AccountKind::Contract)
        .map(|(a, _)| *a)
        .collect();

    let f = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = CorpusWriter::new(BufWriter::new(f))?;
    for meta in join_accounts(&labels.records, &kinds.records) {
        w.write(&CorpusRecord::Account(meta))?;
        summary.accounts += 1;
    }
    let mut contract_list: Vec<Address> = contracts.iter().copied().collect();
    contract_list.sort_unstable();
    for a in contract_list {
        w.write(&CorpusRecord::Contract(a))?;
    }

    let mut txs = TransactionReader::new(open(&dir.join(TRANSACTIONS_CSV))?)?;
    while let Some(row) = txs.next_row() {
        match row {
            Ok(t) => {
                w.write(&CorpusRecord::Transaction(t))?;
                summary.transactions += 1;
            }
            Err(d) => summary.diagnostics.push((TRANSACTIONS_CSV.into(), d)),
        }
    }

    let token_path = dir.join(TOKEN_TRANSFERS_CSV);
    if token_path.exists() {
        let mut tr = TokenTransferReader::new(open(&token_path)?, &contracts)?;
        while let Some(row) = tr.next_row() {
            match row {
                Ok(e) => {
                    w.write(&CorpusRecord::TokenTransfer(e))?;
                    summary.token_transfers += 1;
                }
                Err(d) => summary.diagnostics.push((TOKEN_TRANSFERS_CSV.into(), d)),
            }
        }
        summary.token_transfers_dropped = tr.dropped();
    }
    w.finish()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_magic_is_rejected() {
        assert!(matches!(
            Corpus::read_from(&b"ETHSEQ2\nxxxx"[..]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn roundtrip_small_corpus() {
        let c = Corpus {
            transactions: vec![RawTransaction {
                tx_hash: TxHash::from_index(9),
                from_address: Address::from_index(1),
                to_address: None,
                value_wei: U256::MAX,
                block_timestamp: 1,
                status: TxStatus::Failed,
            }],
            token_transfers: vec![],
            contracts: vec![Address::from_index(4)],
            accounts: vec![AccountMeta {
                address: Address::from_index(1),
                kind: AccountKind::Contract,
                label: Label::PairedB,
            }],
        };
        let bytes = c.write_to(Vec::new()).unwrap();
        assert_eq!(&bytes[..8], CORPUS_MAGIC);
        assert_eq!(Corpus::read_from(&bytes[..]).unwrap(), c);
    }
}
