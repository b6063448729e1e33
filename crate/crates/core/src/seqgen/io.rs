//! Sequence file: magic `ETHSEQ-SQ1\n`, a little-endian `u64` sequence
//! count, then each sequence as `owner:u32 n_records:u32` followed by its
//! records. All integers little-endian; amounts are 32 big-endian bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use primitive_types::U256;

use super::record::*;
use crate::error::{Error, Result};
use crate::ingest::TxHash;

pub const SEQ_MAGIC: &[u8; 11] = b"ETHSEQ-SQ1\n";

fn direction_code(d: Direction) -> u8 {
    d.index() as u8
}

fn direction_from(c: u8) -> Result<Direction> {
    Ok(match c {
        0 => Direction::In,
        1 => Direction::Out,
        2 => Direction::SelfTx,
        _ => return Err(Error::Format(format!("bad direction code {c}"))),
    })
}

fn kind_from(c: u8) -> Result<CounterpartyKind> {
    Ok(match c {
        0 => CounterpartyKind::Eoa,
        1 => CounterpartyKind::Contract,
        2 => CounterpartyKind::Null,
        _ => return Err(Error::Format(format!("bad kind code {c}"))),
    })
}

fn write_record<W: Write>(w: &mut W, r: &TxRecord) -> std::io::Result<()> {
    w.write_u32::<LE>(r.counterparty)?;
    w.write_u8(direction_code(r.direction))?;
    w.write_u8(r.counterparty_kind.index() as u8)?;
    w.write_u8(r.amount_bin)?;
    w.write_u8(r.count_bin)?;
    w.write_u8(r.time_bin)?;
    w.write_u16::<LE>(r.position)?;
    w.write_u64::<LE>(r.raw_timestamp)?;
    w.write_all(&r.raw_amount_wei.to_big_endian())?;
    w.write_u32::<LE>(r.agg_count)?;
    w.write_u8(r.failed as u8)?;
    w.write_u32::<LE>(r.token_recipients.len() as u32)?;
    for &t in &r.token_recipients {
        w.write_u32::<LE>(t)?;
    }
    w.write_u32::<LE>(r.tx_hashes.len() as u32)?;
    for h in &r.tx_hashes {
        w.write_all(&h.0)?;
    }
    Ok(())
}

fn read_record<R: Read>(r: &mut R) -> Result<TxRecord> {
    let counterparty = r.read_u32::<LE>()?;
    let direction = direction_from(r.read_u8()?)?;
    let counterparty_kind = kind_from(r.read_u8()?)?;
    let amount_bin = r.read_u8()?;
    let count_bin = r.read_u8()?;
    let time_bin = r.read_u8()?;
    let position = r.read_u16::<LE>()?;
    let raw_timestamp = r.read_u64::<LE>()?;
    let mut amount = [0u8; 32];
    r.read_exact(&mut amount)?;
    let agg_count = r.read_u32::<LE>()?;
    let failed = r.read_u8()? != 0;
    let n = r.read_u32::<LE>()? as usize;
    let token_recipients = (0..n).map(|_| r.read_u32::<LE>()).collect::<std::io::Result<_>>()?;
    let n = r.read_u32::<LE>()? as usize;
    let mut tx_hashes = Vec::with_capacity(n);
    for _ in 0..n {
        let mut h = [0u8; 32];
        r.read_exact(&mut h)?;
        tx_hashes.push(TxHash(h));
    }
    Ok(TxRecord {
        counterparty,
        direction,
        counterparty_kind,
        amount_bin,
        count_bin,
        time_bin,
        position,
        raw_timestamp,
        raw_amount_wei: U256::from_big_endian(&amount),
        agg_count,
        token_recipients,
        tx_hashes,
        failed,
    })
}

pub fn write_sequences<W: Write>(mut w: W, seqs: &[TxSequence]) -> Result<W> {
    w.write_all(SEQ_MAGIC)?;
    w.write_u64::<LE>(seqs.len() as u64)?;
    for s in seqs {
        w.write_u32::<LE>(s.owner)?;
        w.write_u32::<LE>(s.records.len() as u32)?;
        for r in &s.records {
            write_record(&mut w, r)?;
        }
    }
    w.flush()?;
    Ok(w)
}

pub fn read_sequences<R: Read>(mut r: R) -> Result<Vec<TxSequence>> {
    let mut magic = [0u8; 11];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short for sequence magic".into()))?;
    if &magic != SEQ_MAGIC {
        return Err(Error::Format("not a sequence file (bad magic)".into()));
    }
    let n = r.read_u64::<LE>()? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let owner = r.read_u32::<LE>()?;
        let len = r.read_u32::<LE>()? as usize;
        let records = (0..len).map(|_| read_record(&mut r)).collect::<Result<_>>()?;
        out.push(TxSequence { owner, records });
    }
    Ok(out)
}

pub fn save_sequences(path: &Path, seqs: &[TxSequence]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sequences(BufWriter::new(f), seqs)?;
    Ok(())
}

pub fn load_sequences(path: &Path) -> Result<Vec<TxSequence>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sequences(BufReader::new(f))
}
