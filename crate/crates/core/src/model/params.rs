use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::float::Float;
use crate::seqgen::{AMOUNT_BINS, COUNT_BINS, PAD_ID, TIME_BINS};

/// Shape and feature switches of the encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    /// Inner width of the position-wise feed-forward block.
    pub ff_dim: usize,
    pub max_len: usize,
    /// Embed account type, direction, amount, count and recency.
    pub tranx_features: bool,
    /// Separate encoders for the full, incoming and outgoing views.
    pub in_out_separation: bool,
    /// Fuse ERC-20 recipient embeddings into contract addresses.
    pub erc20_gate: bool,
    pub init_std: f64,
    pub layer_norm_eps: f64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            hidden: 64,
            layers: 8,
            heads: 2,
            ff_dim: 64,
            max_len: crate::seqgen::MAX_SEQ_LEN,
            tranx_features: true,
            in_out_separation: false,
            erc20_gate: false,
            init_std: 0.02,
            layer_norm_eps: 1e-6,
        }
    }

    pub fn encoder_count(&self) -> usize {
        if self.in_out_separation {
            3
        } else {
            1
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// Width of an account representation.
    pub fn representation_dim(&self) -> usize {
        self.hidden * self.encoder_count()
    }

    /// Human-readable list of the components this configuration computes.
    pub fn describe(&self) -> Vec<String> {
        let mut parts = vec![
            format!(
                "embedding: address[{}x{}] + position[{}]",
                self.vocab_size, self.hidden, self.max_len
            ),
            format!(
                "encoder: {} x {} layers, {} heads, ff {}",
                self.encoder_count(),
                self.layers,
                self.heads,
                self.ff_dim
            ),
        ];
        if self.tranx_features {
            parts.push("features: account type, direction, amount, count, recency".into());
        }
        if self.in_out_separation {
            parts.push("views: full + in + out, concatenated".into());
        }
        if self.erc20_gate {
            parts.push("erc20 gate: sigmoid(W[a_c; a_u] + b)".into());
        }
        parts
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(crate::Error::invalid(format!(
                "hidden {} must be a positive multiple of heads {}",
                self.hidden, self.heads
            )));
        }
        if self.layers == 0 || self.ff_dim == 0 || self.max_len < 2 || self.vocab_size < 4 {
            return Err(crate::Error::invalid("degenerate model shape"));
        }
        Ok(())
    }
}

/// Feature embedding tables other than the address table.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTables<T> {
    pub account_type: Array2<T>,
    pub direction: Array2<T>,
    pub amount: Array2<T>,
    pub count: Array2<T>,
    pub time: Array2<T>,
    pub position: Array2<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateParams<T> {
    /// `d x 2d`, applied to `[a_c ; a_u]`.
    pub w: Array2<T>,
    pub b: Array1<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub wq: Array2<T>,
    pub wk: Array2<T>,
    pub wv: Array2<T>,
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
    pub ln1_gamma: Array1<T>,
    pub ln1_beta: Array1<T>,
    pub ln2_gamma: Array1<T>,
    pub ln2_beta: Array1<T>,
}

/// Everything except the address table. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T> {
    pub features: FeatureTables<T>,
    pub gate: Option<GateParams<T>>,
    /// One layer stack per view (full, in, out).
    pub encoders: Vec<Vec<LayerParams<T>>>,
}

/// All trainable parameters. Address row [`PAD_ID`] stays zero; row
/// `MASK_ID` is the mask embedding. The address table doubles as the
/// positive/negative output embedding of the prediction loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub address: Array2<T>,
    pub dense: DenseParams<T>,
}

fn truncated_normal<T: Float, R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<T> {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    Array2::from_shape_simple_fn((rows, cols), || loop {
        let z: f64 = n.sample(rng);
        if z.abs() <= 2.0 {
            return T::lit(z * std);
        }
    })
}

impl<T: Float> DenseParams<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.hidden;
        let z2 = |r, c| Array2::zeros((r, c));
        let z1 = |n| Array1::zeros(n);
        DenseParams {
            features: FeatureTables {
                account_type: z2(3, d),
                direction: z2(3, d),
                amount: z2(AMOUNT_BINS + 1, d),
                count: z2(COUNT_BINS + 1, d),
                time: z2(TIME_BINS + 1, d),
                position: z2(cfg.max_len, d),
            },
            gate: cfg.erc20_gate.then(|| GateParams {
                w: z2(d, 2 * d),
                b: z1(d),
            }),
            encoders: (0..cfg.encoder_count())
                .map(|_| {
                    (0..cfg.layers)
                        .map(|_| LayerParams {
                            wq: z2(d, d),
                            wk: z2(d, d),
                            wv: z2(d, d),
                            w1: z2(d, cfg.ff_dim),
                            b1: z1(cfg.ff_dim),
                            w2: z2(cfg.ff_dim, d),
                            b2: z1(d),
                            ln1_gamma: z1(d),
                            ln1_beta: z1(d),
                            ln2_gamma: z1(d),
                            ln2_beta: z1(d),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Named flat views in a fixed order.
    pub fn named(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        let f = &self.features;
        for (n, t) in [
            ("features.account_type", &f.account_type),
            ("features.direction", &f.direction),
            ("features.amount", &f.amount),
            ("features.count", &f.count),
            ("features.time", &f.time),
            ("features.position", &f.position),
        ] {
            out.push((n.into(), t.as_slice().expect("standard layout")));
        }
        if let Some(g) = &self.gate {
            out.push(("gate.w".into(), g.w.as_slice().expect("standard layout")));
            out.push(("gate.b".into(), g.b.as_slice().expect("standard layout")));
        }
        for (e, enc) in self.encoders.iter().enumerate() {
            for (l, p) in enc.iter().enumerate() {
                let pre = format!("encoder{e}.layer{l}");
                out.push((format!("{pre}.wq"), p.wq.as_slice().unwrap()));
                out.push((format!("{pre}.wk"), p.wk.as_slice().unwrap()));
                out.push((format!("{pre}.wv"), p.wv.as_slice().unwrap()));
                out.push((format!("{pre}.w1"), p.w1.as_slice().unwrap()));
                out.push((format!("{pre}.b1"), p.b1.as_slice().unwrap()));
                out.push((format!("{pre}.w2"), p.w2.as_slice().unwrap()));
                out.push((format!("{pre}.b2"), p.b2.as_slice().unwrap()));
                out.push((format!("{pre}.ln1_gamma"), p.ln1_gamma.as_slice().unwrap()));
                out.push((format!("{pre}.ln1_beta"), p.ln1_beta.as_slice().unwrap()));
                out.push((format!("{pre}.ln2_gamma"), p.ln2_gamma.as_slice().unwrap()));
                out.push((format!("{pre}.ln2_beta"), p.ln2_beta.as_slice().unwrap()));
            }
        }
        out
    }

    /// Mutable flat views, same order as [`named`](Self::named).
    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        let f = &mut self.features;
        for t in [
            &mut f.account_type,
            &mut f.direction,
            &mut f.amount,
            &mut f.count,
            &mut f.time,
            &mut f.position,
        ] {
            out.push(t.as_slice_mut().expect("standard layout"));
        }
        if let Some(g) = &mut self.gate {
            out.push(g.w.as_slice_mut().unwrap());
            out.push(g.b.as_slice_mut().unwrap());
        }
        for enc in &mut self.encoders {
            for p in enc {
                out.push(p.wq.as_slice_mut().unwrap());
                out.push(p.wk.as_slice_mut().unwrap());
                out.push(p.wv.as_slice_mut().unwrap());
                out.push(p.w1.as_slice_mut().unwrap());
                out.push(p.b1.as_slice_mut().unwrap());
                out.push(p.w2.as_slice_mut().unwrap());
                out.push(p.b2.as_slice_mut().unwrap());
                out.push(p.ln1_gamma.as_slice_mut().unwrap());
                out.push(p.ln1_beta.as_slice_mut().unwrap());
                out.push(p.ln2_gamma.as_slice_mut().unwrap());
                out.push(p.ln2_beta.as_slice_mut().unwrap());
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &DenseParams<T>) {
        let src: Vec<Vec<T>> = other.named().into_iter().map(|(_, s)| s.to_vec()).collect();
        for (dst, src) in self.slices_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn sum_squares(&self) -> f64 {
        self.named()
            .iter()
            .flat_map(|(_, s)| s.iter())
            .map(|x| x.as_f64() * x.as_f64())
            .sum()
    }

    pub fn cast<U: Float>(&self) -> DenseParams<U> {
        let mut out = DenseParams::<U>::zeros_like_shapes(self);
        for (dst, (_, src)) in out.slices_mut().into_iter().zip(self.named()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::lit(s.as_f64());
            }
        }
        out
    }

    fn zeros_like_shapes<U: Float>(other: &DenseParams<U>) -> Self {
        let f = &other.features;
        let z = |a: &Array2<U>| Array2::zeros(a.raw_dim());
        let z1 = |a: &Array1<U>| Array1::zeros(a.raw_dim());
        DenseParams {
            features: FeatureTables {
                account_type: z(&f.account_type),
                direction: z(&f.direction),
                amount: z(&f.amount),
                count: z(&f.count),
                time: z(&f.time),
                position: z(&f.position),
            },
            gate: other.gate.as_ref().map(|g| GateParams { w: z(&g.w), b: z1(&g.b) }),
            encoders: other
                .encoders
                .iter()
                .map(|e| {
                    e.iter()
                        .map(|p| LayerParams {
                            wq: z(&p.wq),
                            wk: z(&p.wk),
                            wv: z(&p.wv),
                            w1: z(&p.w1),
                            b1: z1(&p.b1),
                            w2: z(&p.w2),
                            b2: z1(&p.b2),
                            ln1_gamma: z1(&p.ln1_gamma),
                            ln1_beta: z1(&p.ln1_beta),
                            ln2_gamma: z1(&p.ln2_gamma),
                            ln2_beta: z1(&p.ln2_beta),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Tensor shapes in [`named`](Self::named) order.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let f = &self.features;
        for t in [&f.account_type, &f.direction, &f.amount, &f.count, &f.time, &f.position] {
            out.push(t.shape().to_vec());
        }
        if let Some(g) = &self.gate {
            out.push(g.w.shape().to_vec());
            out.push(g.b.shape().to_vec());
        }
        for enc in &self.encoders {
            for p in enc {
                for s in [p.wq.shape(), p.wk.shape(), p.wv.shape(), p.w1.shape()] {
                    out.push(s.to_vec());
                }
                out.push(p.b1.shape().to_vec());
                out.push(p.w2.shape().to_vec());
                for s in [
                    p.b2.shape(),
                    p.ln1_gamma.shape(),
                    p.ln1_beta.shape(),
                    p.ln2_gamma.shape(),
                    p.ln2_beta.shape(),
                ] {
                    out.push(s.to_vec());
                }
            }
        }
        out
    }
}

impl<T: Float> ModelParams<T> {
    /// Truncated-normal tables and projections, zero biases and shifts, unit
    /// normalization scales, zero `[PAD]` row.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let d = config.hidden;
        let s = config.init_std;
        let mut address = truncated_normal(config.vocab_size, d, s, rng);
        address.row_mut(PAD_ID as usize).fill(T::zero());
        let mut dense = DenseParams::zeros(config);
        {
            let f = &mut dense.features;
            for t in [
                &mut f.account_type,
                &mut f.direction,
                &mut f.amount,
                &mut f.count,
                &mut f.time,
                &mut f.position,
            ] {
                *t = truncated_normal(t.nrows(), t.ncols(), s, rng);
            }
        }
        if let Some(g) = &mut dense.gate {
            g.w = truncated_normal(d, 2 * d, s, rng);
        }
        for enc in &mut dense.encoders {
            for p in enc {
                p.wq = truncated_normal(d, d, s, rng);
                p.wk = truncated_normal(d, d, s, rng);
                p.wv = truncated_normal(d, d, s, rng);
                p.w1 = truncated_normal(d, config.ff_dim, s, rng);
                p.w2 = truncated_normal(config.ff_dim, d, s, rng);
                p.ln1_gamma.fill(T::one());
                p.ln2_gamma.fill(T::one());
            }
        }
        ModelParams {
            config: config.clone(),
            address,
            dense,
        }
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        ModelParams {
            config: config.clone(),
            address: Array2::zeros((config.vocab_size, config.hidden)),
            dense: DenseParams::zeros(config),
        }
    }

    /// Named flat views with the address table first.
    pub fn named(&self) -> Vec<(String, &[T])> {
        let mut out = vec![("address".to_string(), self.address.as_slice().expect("standard layout"))];
        out.extend(self.dense.named());
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.address.as_slice_mut().expect("standard layout")];
        out.extend(self.dense.slices_mut());
        out
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![self.address.shape().to_vec()];
        out.extend(self.dense.shapes());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, s)| s.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Float>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            address: self.address.mapv(|x| U::lit(x.as_f64())),
            dense: self.dense.cast(),
        }
    }
}

/// Sparse per-row gradient of the address table; rows appear in first-touch
/// order so merges are deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct RowGrads<T> {
    dim: usize,
    index: HashMap<u32, usize>,
    ids: Vec<u32>,
    data: Vec<T>,
}

impl<T: Float> RowGrads<T> {
    pub fn new(dim: usize) -> Self {
        RowGrads {
            dim,
            index: HashMap::new(),
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn row_mut(&mut self, id: u32) -> &mut [T] {
        let slot = match self.index.get(&id) {
            Some(&s) => s,
            None => {
                let s = self.ids.len();
                self.index.insert(id, s);
                self.ids.push(id);
                self.data.extend(std::iter::repeat_n(T::zero(), self.dim));
                s
            }
        };
        &mut self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn add_row(&mut self, id: u32, g: impl IntoIterator<Item = T>) {
        for (d, s) in self.row_mut(id).iter_mut().zip(g) {
            *d += s;
        }
    }

    pub fn row(&self, id: u32) -> Option<&[T]> {
        self.index
            .get(&id)
            .map(|&s| &self.data[s * self.dim..(s + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[T])> {
        self.ids
            .iter()
            .enumerate()
            .map(move |(s, &id)| (id, &self.data[s * self.dim..(s + 1) * self.dim]))
    }

    pub fn merge(&mut self, other: &RowGrads<T>) {
        for (id, g) in other.iter() {
            self.add_row(id, g.iter().copied());
        }
    }

    pub fn scale(&mut self, k: T) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x.as_f64() * x.as_f64()).sum()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Scatter into a dense `rows x dim` buffer.
    pub fn to_dense(&self, rows: usize) -> Array2<T> {
        let mut out = Array2::zeros((rows, self.dim));
        for (id, g) in self.iter() {
            for (d, s) in out.row_mut(id as usize).iter_mut().zip(g) {
                *d += *s;
            }
        }
        out
    }
}

/// Gradient of a scalar with respect to [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub address: RowGrads<T>,
    pub dense: DenseParams<T>,
}

impl<T: Float> Gradients<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Gradients {
            address: RowGrads::new(cfg.hidden),
            dense: DenseParams::zeros(cfg),
        }
    }

    pub fn merge(mut self, other: Gradients<T>) -> Self {
        self.address.merge(&other.address);
        self.dense.add_assign(&other.dense);
        self
    }

    pub fn scale(&mut self, k: T) {
        self.address.scale(k);
        self.dense.scale(k);
    }

    pub fn global_norm(&self) -> f64 {
        (self.address.sum_squares() + self.dense.sum_squares()).sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.address.data.iter().all(|x| x.is_finite())
            && self.dense.named().iter().all(|(_, s)| s.iter().all(|x| x.is_finite()))
    }
}
