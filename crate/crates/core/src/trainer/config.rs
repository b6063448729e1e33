use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::negsample::{Strategy, POOL_SIZE, UNSHARED_POOL_SIZE};
use crate::seqgen::{MASK_RATIO, MAX_SEQ_LEN};

/// Training hyper-parameters and ablation switches. Every key may appear in
/// a TOML config file; missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mask_ratio: f64,
    pub dropout: f64,
    pub neg_strategy: Strategy,
    /// Shared pool size per batch.
    pub pool_size: usize,
    /// Pool size per sequence when `batch_sharing` is off.
    pub unshared_pool_size: usize,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    /// Feed-forward width; 0 means `hidden`.
    pub ff_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub clip_norm: f64,
    pub init_std: f64,
    pub seed: u64,
    /// Recorded for provenance; applied when sequences are built.
    pub dedup: bool,
    pub batch_sharing: bool,
    pub tranx_features: bool,
    pub in_out_separation: bool,
    pub erc20_gate: bool,
    pub finetune_epochs: usize,
    pub finetune_learning_rate: f64,
    pub finetune_batch_size: usize,
    pub head_hidden: usize,
    pub head_dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mask_ratio: MASK_RATIO,
            dropout: 0.2,
            neg_strategy: Strategy::Zipfan,
            pool_size: POOL_SIZE,
            unshared_pool_size: UNSHARED_POOL_SIZE,
            batch_size: 256,
            max_seq_len: MAX_SEQ_LEN,
            layers: 8,
            heads: 2,
            hidden: 64,
            ff_dim: 0,
            epochs: 10,
            learning_rate: 1e-4,
            warmup_fraction: 0.01,
            clip_norm: 5.0,
            init_std: 0.02,
            seed: 0,
            dedup: true,
            batch_sharing: true,
            tranx_features: true,
            in_out_separation: false,
            erc20_gate: false,
            finetune_epochs: 5,
            finetune_learning_rate: 1e-4,
            finetune_batch_size: 64,
            head_hidden: 128,
            head_dropout: 0.2,
        }
    }
}

impl TrainConfig {
    /// Single-core desk budget: narrower, shallower, fewer negatives.
    pub fn desk() -> Self {
        TrainConfig {
            hidden: 32,
            layers: 2,
            pool_size: 500,
            batch_size: 64,
            epochs: 4,
            learning_rate: 1e-3,
            init_std: 0.05,
            finetune_learning_rate: 1e-3,
            ..Self::default()
        }
    }

    /// Smallest useful configuration, for smoke tests.
    pub fn tiny() -> Self {
        TrainConfig {
            hidden: 16,
            layers: 1,
            pool_size: 100,
            batch_size: 16,
            epochs: 3,
            learning_rate: 2e-3,
            init_std: 0.05,
            finetune_epochs: 3,
            finetune_learning_rate: 2e-3,
            finetune_batch_size: 16,
            head_hidden: 32,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" | "default" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            "tiny" => Ok(Self::tiny()),
            other => Err(Error::invalid(format!("unknown training preset {other:?}"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(self.mask_ratio > 0.0 && self.mask_ratio <= 1.0) {
            return bad(format!("mask_ratio {} outside (0, 1]", self.mask_ratio));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.head_dropout) {
            return bad("dropout ratios must lie in [0, 1)".into());
        }
        if self.pool_size == 0 || self.unshared_pool_size == 0 || self.batch_size == 0 || self.finetune_batch_size == 0 {
            return bad("pool and batch sizes must be positive".into());
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 || self.finetune_learning_rate.is_nan() || self.finetune_learning_rate < 0.0 {
            return bad("learning rates must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) || self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("warmup_fraction in [0, 1] and clip_norm > 0 required".into());
        }
        self.model_config(4).validate()
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            hidden: self.hidden,
            layers: self.layers,
            heads: self.heads,
            ff_dim: if self.ff_dim == 0 { self.hidden } else { self.ff_dim },
            max_len: self.max_seq_len,
            tranx_features: self.tranx_features,
            in_out_separation: self.in_out_separation,
            erc20_gate: self.erc20_gate,
            init_std: self.init_std,
            layer_norm_eps: 1e-6,
        }
    }

    /// Lines describing the computation this configuration performs; two
    /// configurations differing in one switch differ in exactly the lines
    /// naming that component.
    pub fn describe(&self, vocab_size: usize) -> Vec<String> {
        let mut lines = self.model_config(vocab_size).describe();
        lines.push(format!("masking: ratio {}", self.mask_ratio));
        lines.push(format!("dropout: {}", self.dropout));
        lines.push(format!("negatives: {}", self.neg_strategy));
        if self.batch_sharing {
            lines.push(format!("pool: one per batch of {}, size {}", self.batch_size, self.pool_size));
        } else {
            lines.push(format!(
                "pool: one per sequence, size {}, batch {}",
                self.unshared_pool_size, self.batch_size
            ));
        }
        lines.push(format!("dedup: {}", self.dedup));
        lines
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 of a value's JSON serialization, hex encoded.
pub fn config_hash<S: Serialize>(value: &S) -> String {
    let json = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_setup() {
        let c = TrainConfig::default();
        assert_eq!((c.hidden, c.layers, c.heads, c.batch_size), (64, 8, 2, 256));
        assert_eq!((c.max_seq_len, c.pool_size), (100, 5000));
        assert_eq!((c.mask_ratio, c.dropout), (0.8, 0.2));
        assert_eq!(c.neg_strategy, Strategy::Zipfan);
        assert!(c.batch_sharing && c.tranx_features && c.dedup);
        assert!(!c.in_out_separation && !c.erc20_gate);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = TrainConfig::desk();
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
        let p = TrainConfig::from_toml("hidden = 16\nneg_strategy = \"freq0.75\"\n").unwrap();
        assert_eq!(p.hidden, 16);
        assert_eq!(p.neg_strategy, Strategy::Frequent(0.75));
        assert_eq!(p.layers, 8);
        assert!(TrainConfig::from_toml("hiden = 3").is_err());
    }

    #[test]
    fn each_switch_changes_only_its_component() {
        let base = TrainConfig::desk();
        let lines = base.describe(100);
        let cases: Vec<(TrainConfig, &str)> = vec![
            (TrainConfig { tranx_features: false, ..base.clone() }, "features"),
            (TrainConfig { in_out_separation: true, ..base.clone() }, "views"),
            (TrainConfig { erc20_gate: true, ..base.clone() }, "erc20"),
            (TrainConfig { batch_sharing: false, ..base.clone() }, "pool"),
            (TrainConfig { neg_strategy: Strategy::Uniform, ..base.clone() }, "negatives"),
            (TrainConfig { mask_ratio: 0.15, ..base.clone() }, "masking"),
            (TrainConfig { dedup: false, ..base.clone() }, "dedup"),
        ];
        for (c, key) in cases {
            let other = c.describe(100);
            let removed: Vec<_> = lines.iter().filter(|l| !other.contains(l)).collect();
            let added: Vec<_> = other.iter().filter(|l| !lines.contains(l)).collect();
            let changed: Vec<_> = removed.iter().chain(added.iter()).collect();
            assert!(!changed.is_empty(), "{key} changed nothing");
            // In/out separation also widens the encoder count line.
            for l in changed {
                assert!(l.contains(key) || (key == "views" && l.starts_with("encoder")), "{key}: {l}");
            }
        }
    }

    #[test]
    fn hash_tracks_settings() {
        let a = TrainConfig::desk();
        let b = TrainConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), TrainConfig::desk().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
