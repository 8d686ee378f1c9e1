//! Adam with bias correction over a flat parameter vector.

use crate::error::{Error, Result};
use crate::nn::tensor::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }
}

/// One Adam step over `params`. Increments `state.t`, applies bias-corrected
/// moment estimates. Errors on non-finite gradients; `ctx` names the
/// parameter block for that error.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    hyper: &AdamHyper,
    ctx: &str,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape("adam_step", "length mismatch"));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {ctx}")));
    }
    state.t += 1;
    let b1 = T::from_f64(hyper.beta1);
    let b2 = T::from_f64(hyper.beta2);
    let one = T::one();
    let corr1 = T::from_f64(1.0 - hyper.beta1.powi(state.t as i32));
    let corr2 = T::from_f64(1.0 - hyper.beta2.powi(state.t as i32));
    let lr = T::from_f64(hyper.lr);
    let eps = T::from_f64(hyper.eps);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (one - b1) * g;
        state.v[i] = b2 * state.v[i] + (one - b2) * g * g;
        let m_hat = state.m[i] / corr1;
        let v_hat = state.v[i] / corr2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
