//! Post-norm Transformer encoder stack.

use ndarray::{Array1, Array2, Axis};

use super::float::Float;
use super::layers::{self, AttentionCache, DropoutSource, LayerNormCache};
use super::params::LayerParams;

/// Intermediate values of one encoder layer.
#[derive(Clone, Debug)]
pub struct LayerTrace<T> {
    pub input: Array2<T>,
    pub q: Array2<T>,
    pub k: Array2<T>,
    pub v: Array2<T>,
    pub attention: AttentionCache<T>,
    attn_mask: Option<Array2<T>>,
    ln1: LayerNormCache<T>,
    mid: Array2<T>,
    pre_act: Array2<T>,
    act: Array2<T>,
    ff_mask: Option<Array2<T>>,
    ln2: LayerNormCache<T>,
}

/// Everything a backward pass needs, including the dropout masks drawn.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub layers: Vec<LayerTrace<T>>,
    /// Final hidden states.
    pub output: Array2<T>,
    pub heads: usize,
}

impl<T: Float> ForwardTrace<T> {
    /// `H^0 .. H^L`.
    pub fn hidden_states(&self) -> Vec<&Array2<T>> {
        let mut out: Vec<&Array2<T>> = self.layers.iter().map(|l| &l.input).collect();
        out.push(&self.output);
        out
    }

    /// Attention weights of layer `l`, one `N x N` matrix per head.
    pub fn attention_weights(&self, l: usize) -> &[Array2<T>] {
        &self.layers[l].attention.probs
    }
}

pub fn encoder_forward<T: Float>(
    h0: Array2<T>,
    pad: Option<&[bool]>,
    stack: &[LayerParams<T>],
    heads: usize,
    eps: f64,
    drop: &mut dyn DropoutSource<T>,
) -> ForwardTrace<T> {
    let mut x = h0;
    let mut traces = Vec::with_capacity(stack.len());
    for p in stack {
        let q = x.dot(&p.wq);
        let k = x.dot(&p.wk);
        let v = x.dot(&p.wv);
        let (a, attention) = layers::attention(q.view(), k.view(), v.view(), heads, pad, drop);
        let (a, attn_mask) = layers::dropout(&a, drop);
        let (mid, ln1) = layers::layer_norm(&(&x + &a), &p.ln1_gamma, &p.ln1_beta, eps);
        let pre_act = mid.dot(&p.w1) + &p.b1;
        let act = pre_act.mapv(layers::gelu);
        let f = act.dot(&p.w2) + &p.b2;
        let (f, ff_mask) = layers::dropout(&f, drop);
        let (out, ln2) = layers::layer_norm(&(&mid + &f), &p.ln2_gamma, &p.ln2_beta, eps);
        traces.push(LayerTrace {
            input: x,
            q,
            k,
            v,
            attention,
            attn_mask,
            ln1,
            mid,
            pre_act,
            act,
            ff_mask,
            ln2,
        });
        x = out;
    }
    ForwardTrace {
        layers: traces,
        output: x,
        heads,
    }
}

/// Back-propagate `d_output` through the stack. Parameter gradients are
/// accumulated into `grads`; the gradient with respect to `H^0` is returned.
pub fn encoder_backward<T: Float>(
    d_output: Array2<T>,
    trace: &ForwardTrace<T>,
    stack: &[LayerParams<T>],
    grads: &mut [LayerParams<T>],
) -> Array2<T> {
    let mut dz = d_output;
    for ((t, p), g) in trace.layers.iter().zip(stack).zip(grads.iter_mut()).rev() {
        let ds2 = layers::layer_norm_backward(&dz, &t.ln2, &p.ln2_gamma, &mut g.ln2_gamma, &mut g.ln2_beta);
        let df = layers::mask_grad(ds2.clone(), &t.ff_mask);
        g.w2 += &t.act.t().dot(&df);
        g.b2 += &df.sum_axis(Axis(0));
        let dact = df.dot(&p.w2.t());
        let dpre = &dact * &t.pre_act.mapv(layers::gelu_grad);
        g.w1 += &t.mid.t().dot(&dpre);
        g.b1 += &dpre.sum_axis(Axis(0));
        let dmid = ds2 + dpre.dot(&p.w1.t());
        let ds1 = layers::layer_norm_backward(&dmid, &t.ln1, &p.ln1_gamma, &mut g.ln1_gamma, &mut g.ln1_beta);
        let da = layers::mask_grad(ds1.clone(), &t.attn_mask);
        let (dq, dk, dv) = layers::attention_backward(&da, &t.q, &t.k, &t.v, trace.heads, &t.attention);
        g.wq += &t.input.t().dot(&dq);
        g.wk += &t.input.t().dot(&dk);
        g.wv += &t.input.t().dot(&dv);
        dz = ds1 + dq.dot(&p.wq.t()) + dk.dot(&p.wk.t()) + dv.dot(&p.wv.t());
    }
    dz
}

/// Mean attention each key position receives, averaged over heads and
/// non-pad query rows of layer `l`.
pub fn attention_received<T: Float>(trace: &ForwardTrace<T>, l: usize) -> Array1<f64> {
    let probs = trace.attention_weights(l);
    let n = probs[0].nrows();
    let mut out = Array1::zeros(n);
    for p in probs {
        for row in p.rows() {
            for (o, &x) in out.iter_mut().zip(row.iter()) {
                *o += x.as_f64();
            }
        }
    }
    out / (n * probs.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::layers::NoDropout;
    use crate::model::params::{DenseParams, ModelConfig, ModelParams};
    use crate::rng;
    use ndarray::array;

    fn tiny(n_layers: usize) -> ModelParams<f64> {
        let mut cfg = ModelConfig::new(10);
        cfg.hidden = 4;
        cfg.heads = 2;
        cfg.layers = n_layers;
        cfg.ff_dim = 6;
        cfg.init_std = 0.5;
        ModelParams::init(&cfg, &mut rng::stream(3, &[]))
    }

    #[test]
    fn permutation_equivariant_without_positions() {
        let p = tiny(2);
        let stack = &p.dense.encoders[0];
        let h = array![[0.1, 0.2, -0.3, 0.5], [0.7, -0.1, 0.0, 0.2], [-0.4, 0.3, 0.9, -0.6]];
        let mut swapped = h.clone();
        swapped.row_mut(1).assign(&h.row(2));
        swapped.row_mut(2).assign(&h.row(1));
        let a = encoder_forward(h, None, stack, 2, 1e-6, &mut NoDropout).output;
        let b = encoder_forward(swapped, None, stack, 2, 1e-6, &mut NoDropout).output;
        for (i, j) in [(0, 0), (1, 2), (2, 1)] {
            for c in 0..4 {
                assert!((a[[i, c]] - b[[j, c]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_are_stochastic() {
        let p = tiny(2);
        let h = Array2::from_shape_fn((5, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6);
        let pad = [false, false, false, true, true];
        let t = encoder_forward(h, Some(&pad), &p.dense.encoders[0], 2, 1e-6, &mut NoDropout);
        for l in 0..2 {
            for probs in t.attention_weights(l) {
                for row in probs.rows() {
                    assert!((row.sum() - 1.0).abs() < 1e-6);
                    assert_eq!(row[3], 0.0);
                    assert_eq!(row[4], 0.0);
                }
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences_on_input() {
        let p = tiny(2);
        let stack = &p.dense.encoders[0];
        let h = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.25);
        let w = Array2::from_shape_fn((3, 4), |(i, j)| ((i + 2 * j) % 3) as f64 - 1.0);
        let f = |h: &Array2<f64>| {
            let out = encoder_forward(h.clone(), None, stack, 2, 1e-6, &mut NoDropout).output;
            (&out * &w).sum()
        };
        let trace = encoder_forward(h.clone(), None, stack, 2, 1e-6, &mut NoDropout);
        let mut grads = DenseParams::<f64>::zeros(&p.config).encoders.remove(0);
        let dh = encoder_backward(w.clone(), &trace, stack, &mut grads);
        let eps = 1e-5;
        for i in 0..3 {
            for j in 0..4 {
                let mut a = h.clone();
                a[[i, j]] += eps;
                let mut b = h.clone();
                b[[i, j]] -= eps;
                let fd = (f(&a) - f(&b)) / (2.0 * eps);
                assert!((fd - dh[[i, j]]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", dh[[i, j]]);
            }
        }
    }
}
