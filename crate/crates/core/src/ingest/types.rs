use std::fmt;
use std::str::FromStr;

use primitive_types::U256;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amount in wei.
pub type Wei = U256;

fn parse_hex_fixed<const N: usize>(s: &str) -> Result<[u8; N]> {
    let s = s.trim();
    let body = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    if body.len() != 2 * N {
        return Err(Error::invalid(format!(
            "expected {} hex digits, got {:?}",
            2 * N,
            s
        )));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(body, &mut out)
        .map_err(|e| Error::invalid(format!("bad hex {s:?}: {e}")))?;
    Ok(out)
}

/// 20-byte account address. Parsing accepts any hex casing; display is
/// lower-case with a `0x` prefix.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub fn from_index(i: u64) -> Self {
        let mut b = [0u8; 20];
        b[12..].copy_from_slice(&i.to_be_bytes());
        b[0] = 0xa0;
        Address(b)
    }
}

impl FromStr for Address {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_hex_fixed::<20>(s).map(Address)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

/// 32-byte transaction hash.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct TxHash(pub [u8; 32]);

impl TxHash {
    pub fn from_index(i: u64) -> Self {
        let mut b = [0u8; 32];
        b[24..].copy_from_slice(&i.to_be_bytes());
        TxHash(b)
    }
}

impl FromStr for TxHash {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_hex_fixed::<32>(s).map(TxHash)
    }
}

impl fmt::Display for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxHash({self})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxStatus {
    Success,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawTransaction {
    pub tx_hash: TxHash,
    pub from_address: Address,
    /// `None` for contract creation.
    pub to_address: Option<Address>,
    pub value_wei: Wei,
    pub block_timestamp: u64,
    pub status: TxStatus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenTransferEvent {
    pub tx_hash: TxHash,
    pub contract_address: Address,
    pub recipient_eoa: Address,
    /// Ingested but not embedded downstream.
    pub value_raw: U256,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccountKind {
    Eoa,
    Contract,
}

impl FromStr for AccountKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eoa" => Ok(AccountKind::Eoa),
            "contract" => Ok(AccountKind::Contract),
            other => Err(Error::invalid(format!("unknown account kind {other:?}"))),
        }
    }
}

impl fmt::Display for AccountKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccountKind::Eoa => "eoa",
            AccountKind::Contract => "contract",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Phishing,
    PairedA,
    PairedB,
    Excluded,
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Label::Normal),
            "phishing" | "phish" => Ok(Label::Phishing),
            "paired_a" | "paireda" => Ok(Label::PairedA),
            "paired_b" | "pairedb" => Ok(Label::PairedB),
            "excluded" => Ok(Label::Excluded),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Phishing => "phishing",
            Label::PairedA => "paired_a",
            Label::PairedB => "paired_b",
            Label::Excluded => "excluded",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccountMeta {
    pub address: Address,
    pub kind: AccountKind,
    pub label: Label,
}
