use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::optim::{clip_factor, learning_rate, Adam};
use crate::error::{Error, Result};
use crate::model::{loss_positions, sequence_loss_and_grad, DropoutPlan, Gradients, ModelParams, PoolEmbedding};
use crate::negsample::{FrequencyTable, NegativeSampler};
use crate::par;
use crate::rng;
use crate::seqgen::{mask_sequence, split_long, MaskedSequence, TxSequence};

/// Work units folded together before a merge; fixed so reductions do not
/// depend on the thread count.
pub const REDUCE_CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetric {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct PretrainReport {
    pub checkpoint: Checkpoint,
    pub steps: Vec<StepMetric>,
    /// Set when training stopped on a non-finite loss or gradient; the
    /// checkpoint then holds the parameters before the failing step.
    pub diverged: Option<String>,
}

/// A trainable piece of an account's sequence.
#[derive(Clone, Debug)]
pub struct Piece {
    pub account: usize,
    pub index: usize,
    pub seq: TxSequence,
}

/// Split every sequence to the length limit, keeping pieces with at least
/// one transaction.
pub fn training_pieces(seqs: &[TxSequence], max_len: usize) -> Vec<Piece> {
    seqs.iter()
        .enumerate()
        .flat_map(|(account, s)| {
            split_long(s, max_len)
                .into_iter()
                .enumerate()
                .filter(|(_, p)| p.len() >= 2)
                .map(move |(index, seq)| Piece { account, index, seq })
        })
        .collect()
}

/// Everything pre-training reads besides the configuration.
pub struct PretrainData<'a> {
    pub sequences: &'a [TxSequence],
    pub vocab_size: usize,
    pub vocab_hash: &'a str,
    pub frequency: &'a FrequencyTable,
}

/// Deterministic views of the stage's random streams.
struct Streams {
    base: u64,
}

impl Streams {
    fn init(&self) -> rng::StreamRng {
        rng::stream(self.base, &[0])
    }
    fn mask(&self, p: &Piece, epoch: usize) -> rng::StreamRng {
        rng::stream(self.base, &[1, p.account as u64, p.index as u64, epoch as u64])
    }
    fn shuffle(&self, epoch: usize) -> rng::StreamRng {
        rng::stream(self.base, &[2, epoch as u64])
    }
    fn pool(&self, epoch: usize, batch: usize, unit: usize) -> rng::StreamRng {
        rng::stream(self.base, &[3, epoch as u64, batch as u64, unit as u64])
    }
    fn dropout(&self, epoch: usize, batch: usize, unit: usize) -> u64 {
        rng::derive(self.base, &[4, epoch as u64, batch as u64, unit as u64])
    }
}

/// Fresh parameters for a configuration, seeded from the stage seed.
pub fn initial_params(cfg: &TrainConfig, vocab_size: usize) -> ModelParams<f32> {
    let streams = Streams {
        base: rng::stage_seed(cfg.seed, "pretrain"),
    };
    ModelParams::init(&cfg.model_config(vocab_size), &mut streams.init())
}

/// Masked address prediction pre-training from fresh parameters.
pub fn pretrain(data: &PretrainData, cfg: &TrainConfig) -> Result<PretrainReport> {
    pretrain_from(initial_params(cfg, data.vocab_size), data, cfg)
}

pub fn pretrain_from(mut params: ModelParams<f32>, data: &PretrainData, cfg: &TrainConfig) -> Result<PretrainReport> {
    cfg.validate()?;
    let streams = Streams {
        base: rng::stage_seed(cfg.seed, "pretrain"),
    };
    let pieces = training_pieces(data.sequences, cfg.max_seq_len);
    if pieces.is_empty() {
        return Err(Error::invalid("no sequence has a transaction to mask"));
    }
    let sampler = NegativeSampler::new(data.frequency, cfg.neg_strategy)?;
    let batches_per_epoch = pieces.len().div_ceil(cfg.batch_size);
    let total_steps = (batches_per_epoch * cfg.epochs) as u64;
    let warmup = (total_steps as f64 * cfg.warmup_fraction).ceil() as u64;
    let in_out = cfg.in_out_separation;

    let mut adam = Adam::default();
    let mut steps = Vec::with_capacity(total_steps as usize);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut diverged = None;
    let mut epochs_done = 0;

    'epochs: for epoch in 0..cfg.epochs {
        let masked: Vec<MaskedSequence> = par::map(&pieces, |_, p| {
            mask_sequence(&p.seq, cfg.mask_ratio, &mut streams.mask(p, epoch)).expect("pieces have a body")
        });
        let mut order: Vec<usize> = (0..masked.len()).collect();
        order.shuffle(&mut streams.shuffle(epoch));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let positions: usize = batch.iter().map(|&i| loss_positions(&masked[i], in_out)).sum();
            let scale = 1.0 / positions as f64;
            let shared = cfg
                .batch_sharing
                .then(|| PoolEmbedding::gather(&sampler.sample_pool(cfg.pool_size, &mut streams.pool(epoch, b, 0)).ids, &params.address));
            let params_ref = &params;
            let units: Vec<(usize, usize)> = batch.iter().copied().enumerate().collect();
            let reduced = par::chunked_reduce(
                &units,
                REDUCE_CHUNK,
                |_, chunk| -> Result<(f64, Gradients<f32>)> {
                    let mut acc = (0.0, Gradients::zeros(&params_ref.config));
                    for &(u, i) in chunk {
                        let own;
                        let pool = match &shared {
                            Some(p) => p,
                            None => {
                                let ids = sampler.sample_pool(cfg.unshared_pool_size, &mut streams.pool(epoch, b, u + 1)).ids;
                                own = PoolEmbedding::gather(&ids, &params_ref.address);
                                &own
                            }
                        };
                        let drop = DropoutPlan {
                            ratio: cfg.dropout,
                            seed: streams.dropout(epoch, b, u),
                        };
                        let (l, g) = sequence_loss_and_grad(params_ref, &masked[i], pool, scale, drop)?;
                        acc = (acc.0 + l, acc.1.merge(g));
                    }
                    Ok(acc)
                },
                |a, b| match (a, b) {
                    (Ok(a), Ok(b)) => Ok((a.0 + b.0, a.1.merge(b.1))),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                },
            )
            .expect("non-empty batch");
            let (loss, mut grads) = reduced?;
            let step = steps.len() as u64;
            let lr = learning_rate(cfg.learning_rate, step, warmup);
            if !loss.is_finite() || !grads.all_finite() {
                diverged = Some(format!("non-finite loss or gradient at epoch {epoch}, step {step} (loss {loss})"));
                break 'epochs;
            }
            let factor = clip_factor(grads.global_norm(), cfg.clip_norm);
            if factor < 1.0 {
                grads.scale(factor as f32);
            }
            apply_update(&mut adam, &mut params, &grads, lr);
            steps.push(StepMetric { step, loss, lr });
            epoch_loss += loss;
        }
        loss_history.push(epoch_loss / batches_per_epoch as f64);
        epochs_done = epoch + 1;
        log::info!("epoch {epoch}: mean loss {:.5}", loss_history[epoch]);
    }

    Ok(PretrainReport {
        checkpoint: Checkpoint {
            params,
            config: cfg.clone(),
            vocab_hash: data.vocab_hash.to_string(),
            epoch: epochs_done,
            loss_history,
            head: None,
        },
        steps,
        diverged,
    })
}

pub(crate) fn apply_update(adam: &mut Adam, params: &mut ModelParams<f32>, grads: &Gradients<f32>, lr: f64) {
    let address = grads.address.to_dense(params.config.vocab_size);
    let mut g: Vec<&[f32]> = vec![address.as_slice().expect("standard layout")];
    let dense = grads.dense.named();
    g.extend(dense.iter().map(|(_, s)| *s));
    adam.update(params.slices_mut(), &g, lr);
}

/// Write per-step metrics as `step,loss,lr`.
pub fn write_metrics_csv<W: std::io::Write>(out: W, steps: &[StepMetric]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in steps {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
