//! Checkpoint file: magic `ETHSEQCK`, a little-endian `u64` header length,
//! a JSON header, then every tensor as little-endian `f32` in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::head::ClassifierHead;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ETHSEQCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub config: TrainConfig,
    pub vocab_hash: String,
    pub epoch: usize,
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
    pub head: Option<ClassifierHead<f32>>,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model: ModelConfig,
    train: TrainConfig,
    config_hash: String,
    vocab_hash: String,
    epoch: usize,
    loss_history: Vec<f64>,
    tensors: Vec<TensorInfo>,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut named = self.params.named();
        let mut shapes = self.params.shapes();
        if let Some(h) = &self.head {
            named.extend(h.named());
            shapes.extend(h.shapes());
        }
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            model: self.params.config.clone(),
            train: self.config.clone(),
            config_hash: self.config.hash(),
            vocab_hash: self.vocab_hash.clone(),
            epoch: self.epoch,
            loss_history: self.loss_history.clone(),
            tensors: named
                .iter()
                .zip(&shapes)
                .map(|((n, _), s)| TensorInfo {
                    name: n.clone(),
                    shape: s.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_u64::<LE>(json.len() as u64)?;
        w.write_all(&json)?;
        for (_, data) in &named {
            for &x in *data {
                w.write_f32::<LE>(x)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("file too short for checkpoint magic".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let len = r.read_u64::<LE>()? as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", header.format_version)));
        }
        let mut params = ModelParams::<f32>::zeros(&header.model);
        let n_model = params.shapes().len();
        if header.tensors.len() < n_model {
            return Err(Error::Format("checkpoint lists too few tensors".into()));
        }
        for (info, expected) in header.tensors.iter().zip(params.shapes()) {
            if info.shape != expected {
                return Err(Error::Format(format!("tensor {} has shape {:?}, expected {expected:?}", info.name, info.shape)));
            }
        }
        let head_infos = &header.tensors[n_model..];
        let mut head = match head_infos {
            [] => None,
            [w1, b1, w2, b2] if w1.shape.len() == 2 => Some(ClassifierHead {
                w1: Array2::zeros((w1.shape[0], w1.shape[1])),
                b1: Array1::zeros(b1.shape[0]),
                w2: Array1::zeros(w2.shape[0]),
                b2: Array1::zeros(b2.shape[0]),
            }),
            _ => return Err(Error::Format("unrecognized classifier tensors".into())),
        };
        let mut slices = params.slices_mut();
        if let Some(h) = &mut head {
            slices.extend(h.slices_mut());
        }
        for s in slices {
            r.read_f32_into::<LE>(s)
                .map_err(|_| Error::Format("checkpoint truncated".into()))?;
        }
        Ok(Checkpoint {
            params,
            config: header.train,
            vocab_hash: header.vocab_hash,
            epoch: header.epoch,
            loss_history: header.loss_history,
            head,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample(with_head: bool) -> Checkpoint {
        let config = TrainConfig::tiny();
        let mc = ModelConfig {
            erc20_gate: true,
            in_out_separation: true,
            ..config.model_config(20)
        };
        let mut r = rng::stream(8, &[]);
        Checkpoint {
            params: ModelParams::init(&mc, &mut r),
            config,
            vocab_hash: "abc".into(),
            epoch: 3,
            loss_history: vec![1.0 / 3.0, 0.1 + 0.2, f64::MIN_POSITIVE],
            head: with_head.then(|| ClassifierHead::init(48, 8, &mut r)),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for with_head in [false, true] {
            let c = sample(with_head);
            let mut buf = Vec::new();
            c.write_to(&mut buf).unwrap();
            let back = Checkpoint::read_from(&buf[..]).unwrap();
            assert_eq!(back, c);
            let mut again = Vec::new();
            back.write_to(&mut again).unwrap();
            assert_eq!(again, buf);
        }
    }

    #[test]
    fn truncated_and_foreign_files_fail() {
        let mut buf = Vec::new();
        sample(false).write_to(&mut buf).unwrap();
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
        assert!(Checkpoint::read_from(&b"ETHSEQ1\nxxxxxxxx"[..]).is_err());
    }
}
