use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Clears moments and the step counter, keeping the hyperparameters.
    pub fn zero(&mut self) {
        self.first_moment.fill(0.0);
        self.second_moment.fill(0.0);
        self.step_count = 0;
    }

    /// One descent step on `params`.
    ///
    /// A gradient that is exactly zero everywhere only decays the moments;
    /// the parameters are left untouched. Non-finite gradients are rejected
    /// before any state changes.
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::DimensionMismatch {
                what: "adam parameters",
                expected: self.first_moment.len(),
                got: if grads.len() != params.len() {
                    grads.len()
                } else {
                    params.len()
                },
            });
        }
        if !math::all_finite(grads) {
            return Err(Error::NonFinite("adam gradient".into()));
        }
        self.step_count += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let all_zero = grads.iter().all(|&g| g == 0.0);
        let t = self.step_count as i32;
        let c1 = 1.0 - math::powi(b1, t);
        let c2 = 1.0 - math::powi(b2, t);
        let step = self.learning_rate / c1;
        for i in 0..params.len() {
            let g = grads[i];
            let m = b1 * self.first_moment[i] + (1.0 - b1) * g;
            let v = b2 * self.second_moment[i] + (1.0 - b2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            if !all_zero {
                params[i] -= step * m / (math::sqrt(v / c2) + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 3e-4);
        let mut p = [1.0, -2.0, 0.5];
        s.apply(&mut p, &[0.3, 0.1, -0.2]).unwrap();
        let before = p;
        s.apply(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step_count, 2);
        assert!(s.first_moment[0] != 0.0);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::new(1, 3e-4);
        let mut p = [0.0];
        s.apply(&mut p, &[1.0]).unwrap();
        // m_hat = 1, v_hat = 1 -> lr * 1 / (1 + 1e-8)
        let expected = -3e-4 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-16);
        assert!((p[0] + 3e-4).abs() < 1e-11);
    }

    #[test]
    fn constant_positive_gradient_descends_monotonically() {
        let mut s = AdamState::new(1, 3e-4);
        let mut p = [1.0];
        s.apply(&mut p, &[2.0]).unwrap();
        let after_one = p[0];
        s.apply(&mut p, &[2.0]).unwrap();
        assert!(after_one < 1.0 && p[0] < after_one);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let mut s = AdamState::new(2, 1e-3);
        let mut p = [1.0, 1.0];
        let before = s.clone();
        assert!(matches!(
            s.apply(&mut p, &[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(s, before);
        assert_eq!(p, [1.0, 1.0]);
    }
}
