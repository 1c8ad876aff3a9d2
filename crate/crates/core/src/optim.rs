//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed moments for `len` parameters with the usual (0.9, 0.999, 1e-8).
    pub fn new(len: usize) -> Self {
        Self::with_betas(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        assert!((0.0..1.0).contains(&beta1) && beta2 > 0.0 && beta2 < 1.0);
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }
}

/// Applies one Adam update to `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != state.len() {
        return Err(Error::ShapeMismatch {
            expected: state.len(),
            actual: params.len(),
        });
    }
    if grads.len() != params.len() {
        return Err(Error::ShapeMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        let m = b1 * state.first_moment[i] + (1.0 - b1) * g;
        let v = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        params[i] -= lr * (m / c1) / ((v / c2).sqrt() + state.epsilon);
    }
    Ok(())
}
