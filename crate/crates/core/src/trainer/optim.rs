use crate::model::Float;

/// Adaptive moment estimation over a fixed list of flat tensors.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl Adam {
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update at learning rate `lr`.
    pub fn update<T: Float>(&mut self, params: Vec<&mut [T]>, grads: &[&[T]], lr: f64) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(params.len(), grads.len(), "parameter and gradient lists differ");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((x, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gi = gi.as_f64();
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let upd = lr * (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
                *x -= T::lit(upd);
            }
        }
    }
}

/// Linear warm-up over the first `warmup_steps`, constant after.
pub fn learning_rate(base: f64, step: u64, warmup_steps: u64) -> f64 {
    if warmup_steps == 0 || step >= warmup_steps {
        base
    } else {
        base * (step + 1) as f64 / warmup_steps as f64
    }
}

/// Factor that rescales a gradient of norm `norm` to at most `max_norm`.
pub fn clip_factor(norm: f64, max_norm: f64) -> f64 {
    if norm > max_norm {
        max_norm / norm
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        let mut x = vec![3.0f64, -2.0];
        let mut adam = Adam::default();
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            adam.update(vec![&mut x[..]], &[&g[..]], 0.05);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn zero_rate_leaves_parameters() {
        let mut x = vec![1.5f32];
        let mut adam = Adam::default();
        adam.update(vec![&mut x[..]], &[&[4.0f32][..]], 0.0);
        assert_eq!(x, vec![1.5]);
    }

    #[test]
    fn warmup_and_clipping() {
        assert_eq!(learning_rate(1.0, 0, 4), 0.25);
        assert_eq!(learning_rate(1.0, 3, 4), 1.0);
        assert_eq!(learning_rate(1.0, 9, 0), 1.0);
        assert_eq!(clip_factor(10.0, 5.0), 0.5);
        assert_eq!(clip_factor(1.0, 5.0), 1.0);
    }
}
