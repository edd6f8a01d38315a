use serde::{Deserialize, Serialize};

use super::AutodiffError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
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

/// First and second moment estimates for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` along `grad`.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grad: &[T],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<(), AutodiffError> {
    if params.len() != grad.len() || params.len() != state.m.len() {
        return Err(AutodiffError::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        let mut p = vec![1.0f64, -2.0, 0.5];
        let g = vec![3.0, -0.2, 1e-3];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        let expected = [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.3f64, 0.7];
        let mut st = AdamState::new(2);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0, 0.0], &mut st, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, vec![0.3, 0.7]);
    }

    #[test]
    fn minimizes_quadratic() {
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        let mut p = vec![3.0f64];
        let mut st = AdamState::new(1);
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0)];
            adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        }
        assert!((p[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut st = AdamState::<f64>::new(2);
        let err = adam_step(&mut [0.0; 2], &[0.0; 3], &mut st, &AdamConfig::default());
        assert!(matches!(err, Err(AutodiffError::ShapeMismatch(_))));
    }
}
