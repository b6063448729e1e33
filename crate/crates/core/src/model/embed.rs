//! Transaction embeddings and ERC-20 gate fusion.

use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};

use super::float::Float;
use super::layers::sigmoid;
use super::params::{GateParams, Gradients, ModelParams};
use crate::error::{Error, Result};
use crate::seqgen::{TxRecord, TxSequence, MASK_ID};

/// Values kept from [`gate_fuse`] for its backward pass.
#[derive(Clone, Debug)]
pub struct GateCache<T> {
    a_c: Array1<T>,
    a_u: Array1<T>,
    beta: Array1<T>,
    address: u32,
    recipients: Vec<u32>,
}

/// `beta * a_c + (1 - beta) * a_u`, with `a_u` the mean recipient embedding
/// and `beta = sigmoid(W [a_c ; a_u] + b)`.
pub fn gate_fuse<T: Float>(a_c: ArrayView1<T>, recipients: &[ArrayView1<T>], gate: &GateParams<T>) -> Result<Array1<T>> {
    if recipients.is_empty() {
        return Err(Error::invalid("gate fusion needs at least one recipient"));
    }
    let (out, _) = gate_fuse_cached(a_c, recipients, gate);
    Ok(out)
}

/// `a_c`, `a_u` and `beta` of one fusion.
type GateTrace<T> = (Array1<T>, Array1<T>, Array1<T>);

fn gate_fuse_cached<T: Float>(
    a_c: ArrayView1<T>,
    recipients: &[ArrayView1<T>],
    gate: &GateParams<T>,
) -> (Array1<T>, GateTrace<T>) {
    let mut a_u = Array1::zeros(a_c.len());
    for r in recipients {
        a_u += r;
    }
    a_u /= T::from_usize(recipients.len()).unwrap();
    let joint = concatenate![Axis(0), a_c, a_u];
    let beta = (gate.w.dot(&joint) + &gate.b).mapv(sigmoid);
    let out = &beta * &a_c + &beta.mapv(|b| T::one() - b) * &a_u;
    (out, (a_c.to_owned(), a_u, beta))
}

fn gate_backward<T: Float>(d_out: ArrayView1<T>, cache: &GateCache<T>, gate: &GateParams<T>, grads: &mut Gradients<T>) {
    let d = cache.a_c.len();
    let d_beta = &d_out * &(&cache.a_c - &cache.a_u);
    let dz = &d_beta * &cache.beta.mapv(|b| b * (T::one() - b));
    let g = grads.dense.gate.as_mut().expect("gate gradients allocated");
    let joint = concatenate![Axis(0), cache.a_c.view(), cache.a_u.view()];
    g.w += &dz
        .view()
        .insert_axis(Axis(1))
        .dot(&joint.view().insert_axis(Axis(0)));
    g.b += &dz;
    let d_joint = gate.w.t().dot(&dz);
    let d_ac = &d_out * &cache.beta + d_joint.slice(ndarray::s![..d]);
    let d_au = &d_out * &cache.beta.mapv(|b| T::one() - b) + d_joint.slice(ndarray::s![d..]);
    let share = T::one() / T::from_usize(cache.recipients.len()).unwrap();
    grads.address.add_row(cache.address, d_ac.iter().copied());
    for &r in &cache.recipients {
        grads.address.add_row(r, d_au.iter().map(|&x| x * share));
    }
}

/// Per-token lookups needed to scatter gradients back.
#[derive(Clone, Debug)]
struct TokenSlot<T> {
    address: u32,
    gate: Option<GateCache<T>>,
    /// Account type, direction, amount, count and time rows.
    features: [usize; 5],
    position: usize,
}

#[derive(Clone, Debug)]
pub struct EmbedCache<T> {
    slots: Vec<TokenSlot<T>>,
}

fn feature_rows(r: &TxRecord) -> [usize; 5] {
    [
        r.counterparty_kind.index(),
        r.direction.index(),
        r.amount_bin as usize,
        r.count_bin as usize,
        r.time_bin as usize,
    ]
}

fn check_row(name: &str, idx: usize, rows: usize) -> Result<()> {
    if idx >= rows {
        return Err(Error::invalid(format!("{name} id {idx} outside table of {rows} rows")));
    }
    Ok(())
}

/// Initial representation of one record: the (possibly gate-fused) address
/// embedding plus feature and position embeddings.
pub fn embed_transaction<T: Float>(record: &TxRecord, params: &ModelParams<T>) -> Result<Array1<T>> {
    let (h, _) = embed_record(record, params)?;
    Ok(h)
}

fn embed_record<T: Float>(r: &TxRecord, params: &ModelParams<T>) -> Result<(Array1<T>, TokenSlot<T>)> {
    let cfg = &params.config;
    let f = &params.dense.features;
    let id = r.counterparty as usize;
    check_row("address", id, params.address.nrows())?;
    let pos = r.position as usize;
    check_row("position", pos, f.position.nrows())?;
    let a_c = params.address.row(id);
    let mut gate = None;
    let mut h = match (&params.dense.gate, r.counterparty != MASK_ID && !r.token_recipients.is_empty()) {
        (Some(g), true) => {
            let mut views = Vec::with_capacity(r.token_recipients.len());
            for &u in &r.token_recipients {
                check_row("recipient", u as usize, params.address.nrows())?;
                views.push(params.address.row(u as usize));
            }
            let (out, (a_c, a_u, beta)) = gate_fuse_cached(a_c, &views, g);
            gate = Some(GateCache {
                a_c,
                a_u,
                beta,
                address: r.counterparty,
                recipients: r.token_recipients.clone(),
            });
            out
        }
        _ => a_c.to_owned(),
    };
    h += &f.position.row(pos);
    let rows = feature_rows(r);
    if cfg.tranx_features {
        let tables = [&f.account_type, &f.direction, &f.amount, &f.count, &f.time];
        let names = ["account type", "direction", "amount", "count", "time"];
        for ((t, &i), n) in tables.iter().zip(&rows).zip(names) {
            check_row(n, i, t.nrows())?;
            h += &t.row(i);
        }
    }
    Ok((
        h,
        TokenSlot {
            address: r.counterparty,
            gate,
            features: rows,
            position: pos,
        },
    ))
}

/// Stack record embeddings into `H^0`.
pub fn embed_sequence<T: Float>(seq: &TxSequence, params: &ModelParams<T>) -> Result<(Array2<T>, EmbedCache<T>)> {
    if seq.len() > params.config.max_len {
        return Err(Error::invalid(format!(
            "sequence of {} records exceeds max length {}",
            seq.len(),
            params.config.max_len
        )));
    }
    let d = params.config.hidden;
    let mut h = Array2::zeros((seq.len(), d));
    let mut slots = Vec::with_capacity(seq.len());
    for (i, r) in seq.records.iter().enumerate() {
        let (row, slot) = embed_record(r, params)?;
        h.row_mut(i).assign(&row);
        slots.push(slot);
    }
    Ok((h, EmbedCache { slots }))
}

pub fn embed_backward<T: Float>(d_h0: &Array2<T>, cache: &EmbedCache<T>, params: &ModelParams<T>, grads: &mut Gradients<T>) {
    let tranx = params.config.tranx_features;
    for (row, slot) in d_h0.rows().into_iter().zip(&cache.slots) {
        let f = &mut grads.dense.features;
        f.position.row_mut(slot.position).scaled_add(T::one(), &row);
        if tranx {
            let tables = [&mut f.account_type, &mut f.direction, &mut f.amount, &mut f.count, &mut f.time];
            for (t, &i) in tables.into_iter().zip(&slot.features) {
                t.row_mut(i).scaled_add(T::one(), &row);
            }
        }
        match &slot.gate {
            Some(gc) => gate_backward(row, gc, params.dense.gate.as_ref().expect("gate params"), grads),
            None => grads.address.add_row(slot.address, row.iter().copied()),
        }
    }
}
