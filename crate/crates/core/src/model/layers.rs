//! Building blocks with hand-written backward passes.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::float::Float;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub fn gelu<T: Float>(x: T) -> T {
    let c = T::lit(SQRT_2_OVER_PI);
    let k = T::lit(GELU_C);
    let half = T::lit(0.5);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

pub fn gelu_grad<T: Float>(x: T) -> T {
    let c = T::lit(SQRT_2_OVER_PI);
    let k = T::lit(GELU_C);
    let half = T::lit(0.5);
    let t = (c * (x + k * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * k * x * x)
}

pub fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Cached statistics of a row-wise layer normalization.
#[derive(Clone, Debug)]
pub struct LayerNormCache<T> {
    pub xhat: Array2<T>,
    pub inv_std: Array1<T>,
}

pub fn layer_norm<T: Float>(x: &Array2<T>, gamma: &Array1<T>, beta: &Array1<T>, eps: f64) -> (Array2<T>, LayerNormCache<T>) {
    let d = T::from_usize(x.ncols()).unwrap();
    let eps = T::lit(eps);
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<T>() / d;
        *is = T::one() / (var + eps).sqrt();
        let k = *is;
        row.mapv_inplace(|v| v * k);
    }
    let y = &xhat * gamma + beta;
    (y, LayerNormCache { xhat, inv_std })
}

/// Returns `dx` and accumulates into `dgamma`, `dbeta`.
pub fn layer_norm_backward<T: Float>(
    dy: &Array2<T>,
    cache: &LayerNormCache<T>,
    gamma: &Array1<T>,
    dgamma: &mut Array1<T>,
    dbeta: &mut Array1<T>,
) -> Array2<T> {
    *dgamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0));
    let d = T::from_usize(dy.ncols()).unwrap();
    let mut dx = dy * gamma;
    for ((mut row, xh), &is) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mean_g = row.sum() / d;
        let mean_gx = row.iter().zip(xh.iter()).map(|(&g, &x)| g * x).sum::<T>() / d;
        for (g, &x) in row.iter_mut().zip(xh.iter()) {
            *g = is * (*g - mean_g - x * mean_gx);
        }
    }
    dx
}

/// Bernoulli keep-masks for inverted dropout.
pub trait DropoutSource<T> {
    /// A mask of `0` / `1/(1-p)` entries, or `None` when dropout is off.
    fn mask(&mut self, rows: usize, cols: usize) -> Option<Array2<T>>;
}

/// No dropout (inference).
pub struct NoDropout;

impl<T> DropoutSource<T> for NoDropout {
    fn mask(&mut self, _: usize, _: usize) -> Option<Array2<T>> {
        None
    }
}

/// Masks sampled from an RNG at ratio `p`.
pub struct SampledDropout<'a, R: ?Sized> {
    pub p: f64,
    pub rng: &'a mut R,
}

impl<T: Float, R: Rng + ?Sized> DropoutSource<T> for SampledDropout<'_, R> {
    fn mask(&mut self, rows: usize, cols: usize) -> Option<Array2<T>> {
        if self.p <= 0.0 {
            return None;
        }
        let keep = 1.0 - self.p;
        let scale = T::lit(1.0 / keep);
        let rng = &mut *self.rng;
        Some(Array2::from_shape_simple_fn((rows, cols), || {
            if rng.random::<f64>() < keep {
                scale
            } else {
                T::zero()
            }
        }))
    }
}

fn apply_mask<T: Float>(x: &Array2<T>, mask: &Option<Array2<T>>) -> Array2<T> {
    match mask {
        Some(m) => x * m,
        None => x.clone(),
    }
}

pub(crate) fn mask_grad<T: Float>(g: Array2<T>, mask: &Option<Array2<T>>) -> Array2<T> {
    match mask {
        Some(m) => g * m,
        None => g,
    }
}

pub(crate) fn dropout<T: Float>(x: &Array2<T>, src: &mut dyn DropoutSource<T>) -> (Array2<T>, Option<Array2<T>>) {
    let m = src.mask(x.nrows(), x.ncols());
    (apply_mask(x, &m), m)
}

/// Cached state of multi-head scaled dot-product attention.
#[derive(Clone, Debug)]
pub struct AttentionCache<T> {
    /// Row-stochastic weights per head, before dropout.
    pub probs: Vec<Array2<T>>,
    pub prob_masks: Vec<Option<Array2<T>>>,
}

/// Multi-head attention over pre-projected `q`, `k`, `v` (`N x d`). Key
/// columns flagged in `pad` get zero weight. Heads are contiguous column
/// blocks; outputs are concatenated.
pub fn attention<T: Float>(
    q: ArrayView2<T>,
    k: ArrayView2<T>,
    v: ArrayView2<T>,
    heads: usize,
    pad: Option<&[bool]>,
    drop: &mut dyn DropoutSource<T>,
) -> (Array2<T>, AttentionCache<T>) {
    let n = q.nrows();
    let d = q.ncols();
    let dh = d / heads;
    let scale = T::lit(1.0 / (dh as f64).sqrt());
    let mut out = Array2::zeros((n, d));
    let mut probs = Vec::with_capacity(heads);
    let mut prob_masks = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);
        let mut sc = qh.dot(&kh.t()) * scale;
        for mut row in sc.rows_mut() {
            if let Some(pad) = pad {
                for (x, &p) in row.iter_mut().zip(pad) {
                    if p {
                        *x = T::neg_infinity();
                    }
                }
            }
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for x in row.iter_mut() {
                *x = if x.is_finite() { (*x - mx).exp() } else { T::zero() };
                total += *x;
            }
            row.mapv_inplace(|x| x / total);
        }
        let (pd, m) = dropout(&sc, drop);
        out.slice_mut(cols).assign(&pd.dot(&vh));
        probs.push(sc);
        prob_masks.push(m);
    }
    (out, AttentionCache { probs, prob_masks })
}

/// Gradients of [`attention`] with respect to `q`, `k`, `v`.
pub fn attention_backward<T: Float>(
    dout: &Array2<T>,
    q: &Array2<T>,
    k: &Array2<T>,
    v: &Array2<T>,
    heads: usize,
    cache: &AttentionCache<T>,
) -> (Array2<T>, Array2<T>, Array2<T>) {
    let d = q.ncols();
    let dh = d / heads;
    let scale = T::lit(1.0 / (dh as f64).sqrt());
    let mut dq = Array2::zeros(q.raw_dim());
    let mut dk = Array2::zeros(k.raw_dim());
    let mut dv = Array2::zeros(v.raw_dim());
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let p = &cache.probs[h];
        let mask = &cache.prob_masks[h];
        let pd = apply_mask(p, mask);
        let douth = dout.slice(cols);
        dv.slice_mut(cols).assign(&pd.t().dot(&douth));
        let dpd = douth.dot(&v.slice(cols).t());
        let dp = mask_grad(dpd, mask);
        // softmax backward, row-wise
        let mut ds = &dp * p;
        for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
            let dot: T = row.sum();
            for (x, &pv) in row.iter_mut().zip(prow.iter()) {
                *x -= pv * dot;
            }
        }
        ds *= scale;
        dq.slice_mut(cols).assign(&ds.dot(&k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&q.slice(cols)));
    }
    (dq, dk, dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_token_hand_softmax() {
        // d_head = 1, Q = K = V = [[1], [0]].
        let x = array![[1.0f64], [0.0]];
        let (out, cache) = attention(x.view(), x.view(), x.view(), 1, None, &mut NoDropout);
        let e = std::f64::consts::E;
        let p = &cache.probs[0];
        assert!((p[[0, 0]] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[[0, 1]] - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert!((p[[0, 0]] - 0.7311).abs() < 1e-4 && (p[[0, 1]] - 0.2689).abs() < 1e-4);
        assert!((out[[0, 0]] - 0.7311).abs() < 1e-4);
        assert_eq!(p.row(1).to_vec(), vec![0.5, 0.5]);
        assert!((out[[1, 0]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_token_attends_to_itself() {
        let q = array![[0.3f64, -1.2]];
        let v = array![[2.0f64, 5.0]];
        let (out, cache) = attention(q.view(), q.view(), v.view(), 2, None, &mut NoDropout);
        assert_eq!(out, v);
        assert!(cache.probs.iter().all(|p| p[[0, 0]] == 1.0));
    }

    #[test]
    fn pad_columns_get_zero_weight() {
        let q = array![[0.1f64, 0.4], [0.3, -0.2], [1.0, 1.0]];
        let pad = [false, false, true];
        let (_, cache) = attention(q.view(), q.view(), q.view(), 1, Some(&pad), &mut NoDropout);
        for row in cache.probs[0].rows() {
            assert_eq!(row[2], 0.0);
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        for &x in &[-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-1000.0f64) >= 0.0 && sigmoid(1000.0f64) <= 1.0);
    }
}
