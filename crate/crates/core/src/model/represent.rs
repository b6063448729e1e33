//! Account representations.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use super::float::Float;
use super::params::{Gradients, ModelParams};
use super::pass::{backward_view, forward_view, DropoutPlan, View, ViewTrace};
use crate::error::Result;
use crate::seqgen::{separate_in_out, split_long, TxSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepresentationSource {
    /// Mean final hidden state of the self-transaction head over pieces.
    SelfToken,
    /// The owner's row of the address table.
    AddressEmbedding,
}

impl std::str::FromStr for RepresentationSource {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self" | "self-token" => Ok(RepresentationSource::SelfToken),
            "address" | "address-embedding" => Ok(RepresentationSource::AddressEmbedding),
            other => Err(crate::Error::invalid(format!("unknown representation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccountRepresentation {
    pub owner: u32,
    pub vector: Array1<f64>,
    pub source: RepresentationSource,
}

/// The encoder inputs for one account: per view, the split pieces.
pub fn account_views(seq: &TxSequence, in_out: bool, max_len: usize) -> Vec<(View, Vec<TxSequence>)> {
    let mut out = vec![(View::Full, split_long(seq, max_len))];
    if in_out {
        let (i, o) = separate_in_out(seq);
        out.push((View::In, split_long(&i, max_len)));
        out.push((View::Out, split_long(&o, max_len)));
    }
    out
}

/// Trace of a differentiable representation computation.
#[derive(Clone, Debug)]
pub struct RepresentationTrace<T> {
    views: Vec<Vec<ViewTrace<T>>>,
}

/// Self-token representation with its trace, under `dropout`.
pub fn represent<T: Float>(
    params: &ModelParams<T>,
    seq: &TxSequence,
    dropout: DropoutPlan,
) -> Result<(Array1<T>, RepresentationTrace<T>)> {
    let cfg = &params.config;
    let d = cfg.hidden;
    let mut vector = Array1::zeros(cfg.representation_dim());
    let mut traces = Vec::new();
    for (k, (view, pieces)) in account_views(seq, cfg.in_out_separation, cfg.max_len).into_iter().enumerate() {
        let share = T::one() / T::from_usize(pieces.len()).unwrap();
        let mut view_traces = Vec::with_capacity(pieces.len());
        for (i, piece) in pieces.iter().enumerate() {
            let t = forward_view(params, piece, view, dropout, i as u64)?;
            vector
                .slice_mut(s![k * d..(k + 1) * d])
                .scaled_add(share, &t.encoder.output.row(0));
            view_traces.push(t);
        }
        traces.push(view_traces);
    }
    Ok((vector, RepresentationTrace { views: traces }))
}

pub fn represent_backward<T: Float>(
    params: &ModelParams<T>,
    trace: &RepresentationTrace<T>,
    d_vector: &Array1<T>,
    grads: &mut Gradients<T>,
) {
    let d = params.config.hidden;
    for (k, pieces) in trace.views.iter().enumerate() {
        let share = T::one() / T::from_usize(pieces.len()).unwrap();
        let g = d_vector.slice(s![k * d..(k + 1) * d]).mapv(|x| x * share);
        for t in pieces {
            let mut d_out = Array2::zeros(t.encoder.output.raw_dim());
            d_out.row_mut(0).assign(&g);
            backward_view(params, t, d_out, grads);
        }
    }
}

/// Inference-time representation of an account from its unmasked sequence.
pub fn extract_representation<T: Float>(
    seq: &TxSequence,
    params: &ModelParams<T>,
    mode: RepresentationSource,
) -> Result<AccountRepresentation> {
    let vector = match mode {
        RepresentationSource::SelfToken => represent(params, seq, DropoutPlan::OFF)?.0.mapv(|x| x.as_f64()),
        RepresentationSource::AddressEmbedding => params.address.row(seq.owner as usize).mapv(|x| x.as_f64()),
    };
    Ok(AccountRepresentation {
        owner: seq.owner,
        vector,
        source: mode,
    })
}
