//! Adaptive-moment (Adam) optimizer.

use super::params::ParamStore;
use super::tensor::{Element, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Element> OptimizerState<T> {
    pub fn new(config: AdamConfig, params: &ParamStore<T>) -> Self {
        let zeros = |p: &ParamStore<T>| p.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        OptimizerState {
            config,
            step: 0,
            first: zeros(params),
            second: zeros(params),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, idx: usize) -> &Tensor<T> {
        &self.first[idx]
    }

    pub fn second_moment(&self, idx: usize) -> &Tensor<T> {
        &self.second[idx]
    }

    /// Applies one bias-corrected Adam update in place.
    ///
    /// Gradients are checked before anything is touched, so a divergence
    /// error leaves params and state unchanged.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[Tensor<T>]) -> Result<()> {
        if grads.len() != params.len() || self.first.len() != params.len() {
            return Err(Error::dim(
                "optimizer_step",
                format!(
                    "{} params, {} grads, {} moment slots",
                    params.len(),
                    grads.len(),
                    self.first.len()
                ),
            ));
        }
        for (idx, g) in grads.iter().enumerate() {
            if g.shape() != params.by_index(idx).shape() {
                return Err(Error::dim(
                    "optimizer_step",
                    format!(
                        "gradient {:?} for parameter `{}` of shape {:?}",
                        g.shape(),
                        params.name(idx),
                        params.by_index(idx).shape()
                    ),
                ));
            }
            if !g.all_finite() {
                return Err(Error::DivergentGradient {
                    param: params.name(idx).to_string(),
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);

        for (idx, g) in grads.iter().enumerate() {
            let p = params.by_index(idx).contiguous();
            let (m_old, v_old) = (self.first[idx].contiguous(), self.second[idx].contiguous());
            let g = g.contiguous();
            let n = p.numel();
            let (mut pn, mut mn, mut vn) = (
                Vec::with_capacity(n),
                Vec::with_capacity(n),
                Vec::with_capacity(n),
            );
            for i in 0..n {
                let gi = g.data()[i].as_f64();
                let m = b1 * m_old.data()[i].as_f64() + (1.0 - b1) * gi;
                let v = b2 * v_old.data()[i].as_f64() + (1.0 - b2) * gi * gi;
                let update = lr * (m / c1) / ((v / c2).sqrt() + eps);
                pn.push(T::from_f64(p.data()[i].as_f64() - update));
                mn.push(T::from_f64(m));
                vn.push(T::from_f64(v));
            }
            let shape = p.shape().to_vec();
            params.set(idx, Tensor::from_parts(shape.clone(), pn));
            self.first[idx] = Tensor::from_parts(shape.clone(), mn);
            self.second[idx] = Tensor::from_parts(shape, vn);
        }
        Ok(())
    }
}
