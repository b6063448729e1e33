//! Two-layer classification head on account representations.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::model::{gelu, gelu_grad, sigmoid, DropoutSource, Float};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array1<T>,
    pub b2: Array1<T>,
}

pub struct HeadCache<T> {
    input: Array2<T>,
    pre: Array2<T>,
    hidden: Array2<T>,
    mask: Option<Array2<T>>,
}

impl<T: Float> ClassifierHead<T> {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let n1 = Normal::new(0.0, (2.0 / input as f64).sqrt()).expect("finite");
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("finite");
        ClassifierHead {
            w1: Array2::from_shape_simple_fn((input, hidden), || T::lit(n1.sample(rng))),
            b1: Array1::zeros(hidden),
            w2: Array1::from_shape_simple_fn(hidden, || T::lit(n2.sample(rng))),
            b2: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ClassifierHead {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array1::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn named(&self) -> Vec<(String, &[T])> {
        vec![
            ("head.w1".into(), self.w1.as_slice().unwrap()),
            ("head.b1".into(), self.b1.as_slice().unwrap()),
            ("head.w2".into(), self.w2.as_slice().unwrap()),
            ("head.b2".into(), self.b2.as_slice().unwrap()),
        ]
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        vec![
            self.w1.shape().to_vec(),
            self.b1.shape().to_vec(),
            self.w2.shape().to_vec(),
            self.b2.shape().to_vec(),
        ]
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
        ]
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.w1 += &o.w1;
        self.b1 += &o.b1;
        self.w2 += &o.w2;
        self.b2 += &o.b2;
    }

    pub fn sum_squares(&self) -> f64 {
        self.named().iter().flat_map(|(_, s)| s.iter()).map(|x| x.as_f64().powi(2)).sum()
    }

    pub fn scale(&mut self, k: T) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// Logits for a batch of representations (rows of `x`).
    pub fn forward(&self, x: &Array2<T>, drop: &mut dyn DropoutSource<T>) -> (Array1<T>, HeadCache<T>) {
        let pre = x.dot(&self.w1) + &self.b1;
        let act = pre.mapv(gelu);
        let mask = drop.mask(act.nrows(), act.ncols());
        let hidden = match &mask {
            Some(m) => &act * m,
            None => act,
        };
        let logits = hidden.dot(&self.w2) + self.b2[0];
        (
            logits,
            HeadCache {
                input: x.clone(),
                pre,
                hidden,
                mask,
            },
        )
    }

    /// Gradients given `d_logits`; returns the gradient with respect to the
    /// input representations.
    pub fn backward(&self, d_logits: &Array1<T>, cache: &HeadCache<T>, grads: &mut Self) -> Array2<T> {
        grads.w2 += &cache.hidden.t().dot(d_logits);
        grads.b2[0] += d_logits.sum();
        let mut dh = d_logits
            .view()
            .insert_axis(Axis(1))
            .dot(&self.w2.view().insert_axis(Axis(0)));
        if let Some(m) = &cache.mask {
            dh *= m;
        }
        let dpre = dh * cache.pre.mapv(gelu_grad);
        grads.w1 += &cache.input.t().dot(&dpre);
        grads.b1 += &dpre.sum_axis(Axis(0));
        dpre.dot(&self.w1.t())
    }

    pub fn predict(&self, x: &Array2<T>) -> Vec<f64> {
        let (z, _) = self.forward(x, &mut crate::model::NoDropout);
        z.iter().map(|&v| sigmoid(v.as_f64())).collect()
    }

    pub fn cast<U: Float>(&self) -> ClassifierHead<U> {
        let c1 = |a: &Array1<T>| a.mapv(|x| U::lit(x.as_f64()));
        ClassifierHead {
            w1: self.w1.mapv(|x| U::lit(x.as_f64())),
            b1: c1(&self.b1),
            w2: c1(&self.w2),
            b2: c1(&self.b2),
        }
    }
}

/// Mean binary cross-entropy of logits against 0/1 labels, and its
/// gradient with respect to the logits.
pub fn bce_with_logits<T: Float>(logits: &Array1<T>, labels: &[f64]) -> (f64, Array1<T>) {
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array1::zeros(logits.len());
    for ((g, &z), &y) in grad.iter_mut().zip(logits.iter()).zip(labels) {
        let z = z.as_f64();
        // log(1 + e^z) - y z, computed stably
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        *g = T::lit((sigmoid(z) - y) / n);
    }
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoDropout;
    use crate::rng;

    #[test]
    fn backward_matches_finite_differences() {
        let head = ClassifierHead::<f64>::init(3, 4, &mut rng::stream(5, &[]));
        let x = Array2::from_shape_fn((2, 3), |(i, j)| i as f64 * 0.4 - j as f64 * 0.3 + 0.1);
        let labels = [1.0, 0.0];
        let loss = |h: &ClassifierHead<f64>, x: &Array2<f64>| bce_with_logits(&h.forward(x, &mut NoDropout).0, &labels).0;
        let (z, cache) = head.forward(&x, &mut NoDropout);
        let (_, dz) = bce_with_logits(&z, &labels);
        let mut g = head.zeros_like();
        let dx = head.backward(&dz, &cache, &mut g);
        let eps = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[[i, j]] += eps;
                b[[i, j]] -= eps;
                let fd = (loss(&head, &a) - loss(&head, &b)) / (2.0 * eps);
                assert!((fd - dx[[i, j]]).abs() < 1e-8);
            }
        }
        for r in 0..3 {
            let mut a = head.clone();
            a.w1[[r, 1]] += eps;
            let mut b = head.clone();
            b.w1[[r, 1]] -= eps;
            let fd = (loss(&a, &x) - loss(&b, &x)) / (2.0 * eps);
            assert!((fd - g.w1[[r, 1]]).abs() < 1e-8);
        }
    }

    #[test]
    fn bce_is_stable() {
        let (l, _) = bce_with_logits(&ndarray::array![1000.0f64, -1000.0], &[1.0, 0.0]);
        assert!(l.abs() < 1e-12);
        let (l, _) = bce_with_logits(&ndarray::array![0.0f64], &[1.0]);
        assert!((l - 2f64.ln()).abs() < 1e-12);
    }
}
