use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::head::{bce_with_logits, ClassifierHead};
use super::optim::{clip_factor, Adam};
use super::pretrain::{apply_update, initial_params, REDUCE_CHUNK};
use crate::error::{Error, Result};
use crate::model::{represent, represent_backward, DropoutPlan, Float, Gradients, NoDropout, SampledDropout};
use crate::par;
use crate::rng;
use crate::seqgen::TxSequence;

fn check_labels(labels: &[bool]) -> Result<()> {
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::invalid("labels must contain both classes"));
    }
    Ok(())
}

/// Train a classifier head jointly with the encoder on binary labels.
/// Without `start` the encoder starts from fresh parameters.
pub fn finetune(
    start: Option<&Checkpoint>,
    sequences: &[TxSequence],
    labels: &[bool],
    vocab_size: usize,
    vocab_hash: &str,
    cfg: &TrainConfig,
) -> Result<Checkpoint> {
    cfg.validate()?;
    check_labels(labels)?;
    if sequences.len() != labels.len() {
        return Err(Error::invalid("sequences and labels differ in length"));
    }
    let (mut params, history) = match start {
        Some(c) => (c.params.clone(), c.loss_history.clone()),
        None => (initial_params(cfg, vocab_size), Vec::new()),
    };
    let base = rng::stage_seed(cfg.seed, "finetune");
    let mut head = ClassifierHead::<f32>::init(params.config.representation_dim(), cfg.head_hidden, &mut rng::stream(base, &[0]));
    let mut adam = Adam::default();
    let mut head_adam = Adam::default();
    let mut history = history;
    let n_batches = labels.len().div_ceil(cfg.finetune_batch_size);

    for epoch in 0..cfg.finetune_epochs {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng::stream(base, &[1, epoch as u64]));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.finetune_batch_size).enumerate() {
            let n = batch.len() as f64;
            let units: Vec<(usize, usize)> = batch.iter().copied().enumerate().collect();
            let (p_ref, h_ref) = (&params, &head);
            let reduced = par::chunked_reduce(
                &units,
                REDUCE_CHUNK,
                |_, chunk| -> Result<(f64, Gradients<f32>, ClassifierHead<f32>)> {
                    let mut g = Gradients::zeros(&p_ref.config);
                    let mut hg = h_ref.zeros_like();
                    let mut loss = 0.0;
                    for &(u, i) in chunk {
                        let seed = rng::derive(base, &[2, epoch as u64, b as u64, u as u64]);
                        let drop = DropoutPlan { ratio: cfg.dropout, seed };
                        let (rep, trace) = represent(p_ref, &sequences[i], drop)?;
                        let x = rep.insert_axis(ndarray::Axis(0));
                        let mut head_rng = rng::stream(seed, &[1]);
                        let mut hd = SampledDropout {
                            p: cfg.head_dropout,
                            rng: &mut head_rng,
                        };
                        let (z, cache) = h_ref.forward(&x, &mut hd);
                        let y = if labels[i] { 1.0 } else { 0.0 };
                        let (l, mut dz) = bce_with_logits(&z, &[y]);
                        dz /= n as f32;
                        loss += l / n;
                        let dx = h_ref.backward(&dz, &cache, &mut hg);
                        represent_backward(p_ref, &trace, &dx.row(0).to_owned(), &mut g);
                    }
                    Ok((loss, g, hg))
                },
                |a, b| match (a, b) {
                    (Ok(a), Ok(b)) => {
                        let mut hg = a.2;
                        hg.add_assign(&b.2);
                        Ok((a.0 + b.0, a.1.merge(b.1), hg))
                    }
                    (Err(e), _) | (_, Err(e)) => Err(e),
                },
            )
            .expect("non-empty batch");
            let (loss, mut grads, mut hg) = reduced?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Numeric(format!("non-finite fine-tuning loss at epoch {epoch}")));
            }
            let norm = (grads.global_norm().powi(2) + hg.sum_squares()).sqrt();
            let factor = clip_factor(norm, cfg.clip_norm) as f32;
            if factor < 1.0 {
                grads.scale(factor);
                hg.scale(factor);
            }
            let lr = cfg.finetune_learning_rate;
            apply_update(&mut adam, &mut params, &grads, lr);
            let hgs = hg.named();
            let hgs: Vec<&[f32]> = hgs.iter().map(|(_, s)| *s).collect();
            head_adam.update(head.slices_mut(), &hgs, lr);
            epoch_loss += loss;
        }
        history.push(epoch_loss / n_batches as f64);
    }

    Ok(Checkpoint {
        params,
        config: cfg.clone(),
        vocab_hash: vocab_hash.to_string(),
        epoch: start.map_or(0, |c| c.epoch) + cfg.finetune_epochs,
        loss_history: history,
        head: Some(head),
    })
}

/// Settings for training a head on frozen representations.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadTraining {
    pub hidden: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for HeadTraining {
    fn default() -> Self {
        HeadTraining {
            hidden: 128,
            dropout: 0.2,
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Fit a head on fixed representations (rows of `x`).
pub fn fit_head<T: Float>(x: &Array2<T>, labels: &[bool], opts: &HeadTraining) -> Result<ClassifierHead<T>> {
    check_labels(labels)?;
    if x.nrows() != labels.len() {
        return Err(Error::invalid("representations and labels differ in length"));
    }
    let base = rng::stage_seed(opts.seed, "fit-head");
    let mut head = ClassifierHead::<T>::init(x.ncols(), opts.hidden, &mut rng::stream(base, &[0]));
    let mut adam = Adam::default();
    let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    for epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let mut r = rng::stream(base, &[1, epoch as u64]);
        order.shuffle(&mut r);
        for batch in order.chunks(opts.batch_size) {
            let xb = x.select(ndarray::Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let mut drop = SampledDropout { p: opts.dropout, rng: &mut r };
            let (z, cache) = head.forward(&xb, &mut drop);
            let (_, dz) = bce_with_logits(&z, &yb);
            let mut g = head.zeros_like();
            head.backward(&dz, &cache, &mut g);
            let gs = g.named();
            let gs: Vec<&[T]> = gs.iter().map(|(_, s)| *s).collect();
            adam.update(head.slices_mut(), &gs, opts.learning_rate);
        }
    }
    Ok(head)
}

/// Classifier probabilities for representations under a trained head.
pub fn head_scores<T: Float>(head: &ClassifierHead<T>, x: &Array2<T>) -> Vec<f64> {
    let (z, _) = head.forward(x, &mut NoDropout);
    z.iter().map(|&v| crate::model::sigmoid(v.as_f64())).collect()
}

/// Representations for a list of sequences with dropout off.
pub fn representations(ckpt: &Checkpoint, sequences: &[TxSequence]) -> Result<Array2<f32>> {
    let rows = par::map(sequences, |_, s| represent(&ckpt.params, s, DropoutPlan::OFF).map(|(v, _)| v));
    let dim = ckpt.params.config.representation_dim();
    let mut out = Array2::zeros((sequences.len(), dim));
    for (i, r) in rows.into_iter().enumerate() {
        let r: Array1<f32> = r?;
        out.row_mut(i).assign(&r);
    }
    Ok(out)
}
