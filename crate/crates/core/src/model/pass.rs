//! Full forward and backward passes for one sequence.

use ndarray::{Array2, Axis};
use rand::SeedableRng;

use super::embed::{embed_backward, embed_sequence, EmbedCache};
use super::encoder::{encoder_backward, encoder_forward, ForwardTrace};
use super::float::Float;
use super::layers::{DropoutSource, NoDropout, SampledDropout};
use super::loss::{map_terms, PoolEmbedding};
use super::params::{Gradients, ModelParams};
use crate::error::Result;
use crate::rng::{self, StreamRng};
use crate::seqgen::{MaskedSequence, TxSequence};

/// Which encoder stack a view goes through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum View {
    Full,
    In,
    Out,
}

impl View {
    pub fn encoder(self) -> usize {
        match self {
            View::Full => 0,
            View::In => 1,
            View::Out => 2,
        }
    }
}

/// Dropout ratio plus a seed that fixes every mask; the same seed replays
/// the same masks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutPlan {
    pub ratio: f64,
    pub seed: u64,
}

impl DropoutPlan {
    pub const OFF: DropoutPlan = DropoutPlan { ratio: 0.0, seed: 0 };

    fn rng(&self, coords: &[u64]) -> StreamRng {
        StreamRng::seed_from_u64(rng::derive(self.seed, coords))
    }
}

/// Trace of one view through embedding and encoder.
#[derive(Clone, Debug)]
pub struct ViewTrace<T> {
    pub view: View,
    embed: EmbedCache<T>,
    pub encoder: ForwardTrace<T>,
}

pub fn forward_view<T: Float>(
    params: &ModelParams<T>,
    seq: &TxSequence,
    view: View,
    dropout: DropoutPlan,
    piece: u64,
) -> Result<ViewTrace<T>> {
    let (h0, embed) = embed_sequence(seq, params)?;
    let cfg = &params.config;
    let stack = &params.dense.encoders[view.encoder()];
    let mut rng = dropout.rng(&[view.encoder() as u64, piece]);
    let mut sampled = SampledDropout {
        p: dropout.ratio,
        rng: &mut rng,
    };
    let drop: &mut dyn DropoutSource<T> = if dropout.ratio > 0.0 { &mut sampled } else { &mut NoDropout };
    let encoder = encoder_forward(h0, None, stack, cfg.heads, cfg.layer_norm_eps, drop);
    Ok(ViewTrace { view, embed, encoder })
}

pub fn backward_view<T: Float>(params: &ModelParams<T>, trace: &ViewTrace<T>, d_output: Array2<T>, grads: &mut Gradients<T>) {
    let e = trace.view.encoder();
    let d_h0 = encoder_backward(
        d_output,
        &trace.encoder,
        &params.dense.encoders[e],
        &mut grads.dense.encoders[e],
    );
    embed_backward(&d_h0, &trace.embed, params, grads);
}

/// The views a masked sequence contributes to the loss.
pub fn training_views(masked: &MaskedSequence, in_out: bool) -> Vec<(View, MaskedSequence)> {
    let mut out = vec![(View::Full, masked.clone())];
    if in_out {
        let (i, o) = masked.separate_in_out();
        out.push((View::In, i));
        out.push((View::Out, o));
    }
    out.retain(|(_, m)| !m.masked_positions.is_empty());
    out
}

/// Masked positions contributing to the loss, over all views.
pub fn loss_positions(masked: &MaskedSequence, in_out: bool) -> usize {
    training_views(masked, in_out)
        .iter()
        .map(|(_, m)| m.masked_positions.len())
        .sum()
}

/// Loss contribution of one masked sequence, scaled by `scale` (typically
/// one over the batch's masked-position count), and its gradient.
pub fn sequence_loss_and_grad<T: Float>(
    params: &ModelParams<T>,
    masked: &MaskedSequence,
    pool: &PoolEmbedding<T>,
    scale: f64,
    dropout: DropoutPlan,
) -> Result<(f64, Gradients<T>)> {
    let mut grads = Gradients::zeros(&params.config);
    let mut loss = 0.0;
    for (view, m) in training_views(masked, params.config.in_out_separation) {
        let trace = forward_view(params, &m.base, view, dropout, 0)?;
        let hidden = trace.encoder.output.select(Axis(0), &m.masked_positions);
        let terms = map_terms(hidden.view(), &m.positives, pool, &params.address, scale, &mut grads.address);
        loss += terms.loss_sum;
        let mut d_out = Array2::zeros(trace.encoder.output.raw_dim());
        for (row, &p) in terms.d_hidden.rows().into_iter().zip(&m.masked_positions) {
            d_out.row_mut(p).assign(&row);
        }
        backward_view(params, &trace, d_out, &mut grads);
    }
    Ok((loss, grads))
}

/// Loss only, with the same dropout masks as [`sequence_loss_and_grad`].
pub fn sequence_loss<T: Float>(
    params: &ModelParams<T>,
    masked: &MaskedSequence,
    pool_ids: &[u32],
    scale: f64,
    dropout: DropoutPlan,
) -> Result<f64> {
    let pool = PoolEmbedding::gather(pool_ids, &params.address);
    let mut loss = 0.0;
    let mut sink = super::params::RowGrads::new(params.config.hidden);
    for (view, m) in training_views(masked, params.config.in_out_separation) {
        let trace = forward_view(params, &m.base, view, dropout, 0)?;
        let hidden = trace.encoder.output.select(Axis(0), &m.masked_positions);
        loss += map_terms(hidden.view(), &m.positives, &pool, &params.address, scale, &mut sink).loss_sum;
    }
    Ok(loss)
}
