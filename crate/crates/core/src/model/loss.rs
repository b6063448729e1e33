//! Masked address prediction loss over sampled negatives.

use ndarray::{Array2, ArrayView2, Axis};

use super::float::Float;
use super::params::RowGrads;
use crate::error::{Error, Result};

/// Negative ids together with their current embeddings.
#[derive(Clone, Debug)]
pub struct PoolEmbedding<T> {
    pub ids: Vec<u32>,
    /// `|pool| x d` rows of the address table.
    pub rows: Array2<T>,
}

impl<T: Float> PoolEmbedding<T> {
    pub fn gather(ids: &[u32], address: &Array2<T>) -> Self {
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        PoolEmbedding {
            ids: ids.to_vec(),
            rows: address.select(Axis(0), &idx),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Loss value and logits of a batch of masked positions.
#[derive(Clone, Debug)]
pub struct MapLoss {
    pub loss: f64,
    /// Positive logit per masked position.
    pub positive_logits: Vec<f64>,
    /// `M x |pool|` negative logits; `-inf` where the negative equals the
    /// position's positive.
    pub negative_logits: Array2<f64>,
}

/// Gradients of the summed, scaled loss terms.
pub(crate) struct MapTerms<T> {
    pub loss_sum: f64,
    pub d_hidden: Array2<T>,
}

fn logits<T: Float>(hidden: ArrayView2<T>, positives: &[u32], pool: &PoolEmbedding<T>, address: &Array2<T>) -> (Vec<f64>, Array2<f64>) {
    let pos: Vec<f64> = hidden
        .rows()
        .into_iter()
        .zip(positives)
        .map(|(h, &p)| h.dot(&address.row(p as usize)).as_f64())
        .collect();
    let mut neg = hidden.dot(&pool.rows.t()).mapv(|x| x.as_f64());
    for (mut row, &p) in neg.rows_mut().into_iter().zip(positives) {
        for (x, &id) in row.iter_mut().zip(&pool.ids) {
            if id == p {
                *x = f64::NEG_INFINITY;
            }
        }
    }
    (pos, neg)
}

/// Per-position softmax over `[positive, negatives...]`: returns
/// `-log p(positive)` and the softmax weights of positive and negatives.
fn softmax_terms(pos: f64, neg: ndarray::ArrayView1<f64>) -> (f64, f64, Vec<f64>) {
    let mx = neg.iter().copied().fold(pos, f64::max);
    let ep = (pos - mx).exp();
    let en: Vec<f64> = neg.iter().map(|&x| if x.is_finite() { (x - mx).exp() } else { 0.0 }).collect();
    let total = ep + en.iter().sum::<f64>();
    let nll = total.ln() - (pos - mx);
    (nll, ep / total, en.into_iter().map(|e| e / total).collect())
}

/// `-mean_m log(exp(h_m . a_p) / (exp(h_m . a_p) + sum_n exp(h_m . a_n)))`
/// with `a` rows drawn from the shared address table.
pub fn map_loss<T: Float>(hidden: ArrayView2<T>, positives: &[u32], pool: &PoolEmbedding<T>, address: &Array2<T>) -> Result<MapLoss> {
    if hidden.nrows() == 0 || hidden.nrows() != positives.len() {
        return Err(Error::invalid("masked set is empty or misaligned"));
    }
    let (pos, neg) = logits(hidden, positives, pool, address);
    let total: f64 = pos
        .iter()
        .zip(neg.rows())
        .map(|(&p, n)| softmax_terms(p, n).0)
        .sum();
    Ok(MapLoss {
        loss: total / positives.len() as f64,
        positive_logits: pos,
        negative_logits: neg,
    })
}

/// Loss terms multiplied by `scale`, their gradient with respect to
/// `hidden`, and address-row gradients accumulated into `rows`.
pub(crate) fn map_terms<T: Float>(
    hidden: ArrayView2<T>,
    positives: &[u32],
    pool: &PoolEmbedding<T>,
    address: &Array2<T>,
    scale: f64,
    rows: &mut RowGrads<T>,
) -> MapTerms<T> {
    let (pos, neg) = logits(hidden, positives, pool, address);
    let m = positives.len();
    let mut loss_sum = 0.0;
    let mut d_pos = vec![T::zero(); m];
    let mut d_neg = Array2::<T>::zeros((m, pool.len()));
    for (i, (&p, n)) in pos.iter().zip(neg.rows()).enumerate() {
        let (nll, sp, sn) = softmax_terms(p, n);
        loss_sum += nll * scale;
        d_pos[i] = T::lit((sp - 1.0) * scale);
        for (d, s) in d_neg.row_mut(i).iter_mut().zip(sn) {
            *d = T::lit(s * scale);
        }
    }
    let mut d_hidden = d_neg.dot(&pool.rows);
    for (i, &p) in positives.iter().enumerate() {
        let a = address.row(p as usize);
        d_hidden.row_mut(i).scaled_add(d_pos[i], &a);
        rows.add_row(p, hidden.row(i).iter().map(|&h| h * d_pos[i]));
    }
    let d_pool = d_neg.t().dot(&hidden);
    for (&id, g) in pool.ids.iter().zip(d_pool.rows()) {
        rows.add_row(id, g.iter().copied());
    }
    MapTerms { loss_sum, d_hidden }
}
