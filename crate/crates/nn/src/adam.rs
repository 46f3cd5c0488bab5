//! Adam with bias correction (Kingma & Ba defaults).

use crate::error::{shape_err, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers, one pair per parameter, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(store: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|p| vec![T::zero(); p.tensor.numel()])
                .collect()
        };
        Self {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Applies one update using the gradients currently held in `store`.
    /// Parameters without a gradient are treated as having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        if store.len() != self.m.len() {
            return shape_err(
                "adam",
                format!("{} params vs {} moment buffers", store.len(), self.m.len()),
            );
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        let step = T::from_f64(c.lr / bc1);
        let inv_bc2_sqrt = T::from_f64(1.0 / bc2.sqrt());
        let eps = T::from_f64(c.eps);
        for (i, p) in store.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            if m.len() != p.tensor.numel() {
                return shape_err(
                    "adam",
                    format!(
                        "param {} has {} values, state {}",
                        p.name,
                        p.tensor.numel(),
                        m.len()
                    ),
                );
            }
            let grad = p.tensor.grad.take();
            let values = p.tensor.data_mut();
            for j in 0..values.len() {
                let g = grad.as_ref().map_or(T::zero(), |g| g[j]);
                m[j] = b1 * m[j] + one_b1 * g;
                v[j] = b2 * v[j] + one_b2 * g * g;
                values[j] = values[j] - step * m[j] / (v[j].sqrt() * inv_bc2_sqrt + eps);
            }
            p.tensor.grad = grad;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store(x: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("x", Tensor::scalar(x));
        s
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store(0.5);
        let mut adam = AdamState::new(&s, AdamConfig::default());
        s.iter_mut().next().unwrap().tensor.grad = Some(vec![1.0]);
        adam.step(&mut s).unwrap();
        let x = s.iter().next().unwrap().tensor.item();
        // m̂ = 1, v̂ = 1 → Δ = lr / (1 + eps)
        assert!((0.5 - x - 1e-3).abs() < 1e-10, "moved {}", 0.5 - x);
    }

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut s = store(0.25);
        let mut adam = AdamState::new(&s, AdamConfig::default());
        for _ in 0..50 {
            s.iter_mut().next().unwrap().tensor.grad = Some(vec![0.0]);
            adam.step(&mut s).unwrap();
        }
        assert_eq!(s.iter().next().unwrap().tensor.item(), 0.25);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut s = store(3.0);
        let mut adam = AdamState::new(
            &s,
            AdamConfig {
                lr: 0.1,
                ..Default::default()
            },
        );
        for _ in 0..500 {
            let x = s.iter().next().unwrap().tensor.item();
            s.iter_mut().next().unwrap().tensor.grad = Some(vec![2.0 * (x - 1.0)]);
            adam.step(&mut s).unwrap();
        }
        assert!((s.iter().next().unwrap().tensor.item() - 1.0).abs() < 1e-2);
    }
}
