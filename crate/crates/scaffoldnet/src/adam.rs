//! Adam optimizer with bias-corrected first and second moment estimates.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::Scalar;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-parameter moment accumulators plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<F = f32> {
    pub m: ModelParams<F>,
    pub v: ModelParams<F>,
    pub t: u64,
}

impl<F: Scalar> AdamState<F> {
    /// Zero moments, step counter 0.
    pub fn new() -> Self {
        AdamState {
            m: ModelParams::zeros(),
            v: ModelParams::zeros(),
            t: 0,
        }
    }
}

impl<F: Scalar> Default for AdamState<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// One update on a flat parameter slice:
///
/// ```text
/// m <- b1 m + (1 - b1) g        m_hat = m / (1 - b1^t)
/// v <- b2 v + (1 - b2) g^2      v_hat = v / (1 - b2^t)
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
///
/// `t` is the already-incremented step count (1 on the first call).
pub fn adam_update_slice<F: Scalar>(
    theta: &mut [F],
    grad: &[F],
    m: &mut [F],
    v: &mut [F],
    t: u64,
    cfg: &AdamConfig,
) {
    debug_assert!(t >= 1);
    debug_assert_eq!(theta.len(), grad.len());
    let b1 = F::from_f64(cfg.beta1);
    let b2 = F::from_f64(cfg.beta2);
    let one = F::one();
    let lr = F::from_f64(cfg.learning_rate);
    let eps = F::from_f64(cfg.epsilon);
    let corr1 = one - F::from_f64(cfg.beta1.powi(t as i32));
    let corr2 = one - F::from_f64(cfg.beta2.powi(t as i32));

    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Apply one Adam step to every model tensor. Increments the step counter
/// before use.
pub fn adam_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &ModelParams<F>,
    state: &mut AdamState<F>,
    cfg: &AdamConfig,
) -> Result<()> {
    state.t += 1;
    let t = state.t;
    let theta = params.tensors_mut();
    let g = grads.tensors();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((theta, g), m), v) in theta.into_iter().zip(g).zip(m).zip(v) {
        if theta.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "adam: parameter shape {:?} vs gradient shape {:?}",
                theta.shape(),
                g.shape()
            )));
        }
        adam_update_slice(
            theta.data_mut(),
            g.data(),
            m.data_mut(),
            v.data_mut(),
            t,
            cfg,
        );
    }
    Ok(())
}
