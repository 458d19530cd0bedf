//! AdamW, global-norm gradient clipping and the warmup/cosine schedule.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Moment estimates for every parameter tensor, in parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new<'a>(config: AdamWConfig, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let first: Vec<_> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamW {
            config,
            second: first.clone(),
            first,
            step: 0,
        }
    }

    /// One decoupled-weight-decay Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(Error::shape(
                "adamw_step",
                format!(
                    "{} params, {} grads, {} moments",
                    params.len(),
                    grads.len(),
                    self.first.len()
                ),
            ));
        }
        let next = self.step + 1;
        if grads.iter().any(|g| !g.all_finite()) {
            return Err(Error::NonFiniteGradient { step: next });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "adamw_step",
                    format!("param {:?} vs grad {:?}", p.shape(), g.shape()),
                ));
            }
        }
        self.step = next;

        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - c.beta1.powi(next as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(next as i32));
        let lr_t = T::of(lr);
        let decay = T::one() - T::of(lr * c.weight_decay);
        let eps = T::of(c.eps);

        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (k, (w, &gk)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[k] = b1 * m[k] + (T::one() - b1) * gk;
                v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                *w = *w * decay - lr_t * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn global_norm<T: Scalar>(grads: &[Tensor<T>]) -> T {
    grads.iter().map(Tensor::sum_sq).sum::<T>().sqrt()
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [Tensor<T>], max_norm: f64) -> T {
    debug_assert!(max_norm > 0.0);
    let norm = global_norm(grads);
    let cap = T::of(max_norm);
    if norm > cap {
        let s = cap / norm;
        for g in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
    norm
}

/// Linear warmup from zero over `warmup_frac·total` steps, then cosine
/// decay to zero at `total`.
pub fn lr_at_step(step: u64, total: u64, base_lr: f64, warmup_frac: f64) -> f64 {
    if total == 0 {
        return base_lr;
    }
    let step = step.min(total) as f64;
    let total = total as f64;
    let warmup = warmup_frac * total;
    if step < warmup {
        return base_lr * step / warmup;
    }
    let span = total - warmup;
    if span <= 0.0 {
        return base_lr;
    }
    let tau = (step - warmup) / span;
    (base_lr * 0.5 * (1.0 + (PI * tau).cos())).max(0.0)
}
