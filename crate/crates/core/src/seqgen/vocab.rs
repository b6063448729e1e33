use std::collections::HashMap;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::Address;

pub const PAD_ID: u32 = 0;
pub const MASK_ID: u32 = 1;
pub const UNK_ID: u32 = 2;
pub const FIRST_ADDRESS_ID: u32 = 3;

const SPECIAL_NAMES: [&str; 3] = ["[PAD]", "[MASK]", "[UNK]"];

/// Address vocabulary: ids 0..3 are the specials, real addresses follow in
/// ascending byte order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AddressVocab {
    addresses: Vec<Address>,
    index: HashMap<Address, u32>,
    /// Counterparty occurrences per id (specials stay 0).
    pub frequency: Vec<u64>,
}

impl AddressVocab {
    pub fn new(mut addresses: Vec<Address>) -> Self {
        addresses.sort_unstable();
        addresses.dedup();
        let index = addresses
            .iter()
            .enumerate()
            .map(|(i, a)| (*a, i as u32 + FIRST_ADDRESS_ID))
            .collect();
        let frequency = vec![0; addresses.len() + FIRST_ADDRESS_ID as usize];
        AddressVocab {
            addresses,
            index,
            frequency,
        }
    }

    /// Total id count including specials.
    pub fn len(&self) -> usize {
        self.addresses.len() + FIRST_ADDRESS_ID as usize
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    /// Id of `a`, or `[UNK]` for unseen addresses.
    pub fn id(&self, a: &Address) -> u32 {
        self.index.get(a).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, a: &Address) -> Option<u32> {
        self.index.get(a).copied()
    }

    pub fn address(&self, id: u32) -> Option<Address> {
        id.checked_sub(FIRST_ADDRESS_ID)
            .and_then(|i| self.addresses.get(i as usize))
            .copied()
    }

    pub fn is_special(id: u32) -> bool {
        id < FIRST_ADDRESS_ID
    }

    /// Stable content hash (addresses in id order).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.addresses {
            h.update(a.0);
        }
        hex::encode(h.finalize())
    }

    /// CSV `id,address,frequency`, specials included by name.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "address", "frequency"])?;
        for (i, name) in SPECIAL_NAMES.iter().enumerate() {
            w.write_record([i.to_string(), name.to_string(), "0".into()])?;
        }
        for (i, a) in self.addresses.iter().enumerate() {
            let id = i + FIRST_ADDRESS_ID as usize;
            w.write_record([id.to_string(), a.to_string(), self.frequency[id].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut addresses = Vec::new();
        let mut freqs = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |m: &str| Error::Row {
                line: line as u64 + 2,
                message: m.to_string(),
            };
            let id: u32 = rec.get(0).ok_or_else(|| bad("missing id"))?.parse().map_err(|_| bad("bad id"))?;
            let addr = rec.get(1).ok_or_else(|| bad("missing address"))?;
            let freq: u64 = rec
                .get(2)
                .ok_or_else(|| bad("missing frequency"))?
                .parse()
                .map_err(|_| bad("bad frequency"))?;
            if id < FIRST_ADDRESS_ID {
                continue;
            }
            if id as usize != addresses.len() + FIRST_ADDRESS_ID as usize {
                return Err(bad("ids must be dense and ascending"));
            }
            addresses.push(addr.parse::<Address>()?);
            freqs.push(freq);
        }
        let mut v = AddressVocab::new(addresses.clone());
        if v.addresses != addresses {
            return Err(Error::Format("vocabulary addresses are not sorted".into()));
        }
        for (i, f) in freqs.into_iter().enumerate() {
            v.frequency[i + FIRST_ADDRESS_ID as usize] = f;
        }
        Ok(v)
    }
}
