use alloc::vec::Vec;

use super::AlphaMode;
use crate::math;
use crate::nn::AdamState;
use crate::Result;

/// Entropy temperature `alpha = exp(log_alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTemperature {
    pub log_alpha: f64,
    pub target_entropy: f64,
    /// Present in auto mode only.
    pub optimizer: Option<AdamState>,
    fixed: Option<f64>,
}

impl EntropyTemperature {
    pub fn new(mode: AlphaMode, action_dim: usize, learning_rate: f64) -> Self {
        let target_entropy = -(action_dim as f64);
        match mode {
            AlphaMode::Auto { initial } => Self {
                log_alpha: math::ln(initial),
                target_entropy,
                optimizer: Some(AdamState::new(1, learning_rate)),
                fixed: None,
            },
            AlphaMode::Fixed(value) => Self {
                log_alpha: math::ln(value),
                target_entropy,
                optimizer: None,
                fixed: Some(value),
            },
        }
    }

    pub fn alpha(&self) -> f64 {
        match self.fixed {
            Some(v) => v,
            None => math::exp(self.log_alpha),
        }
    }

    pub fn is_auto(&self) -> bool {
        self.optimizer.is_some()
    }

    /// One Adam step on `-log_alpha * mean(log_pi + target_entropy)`.
    /// No-op in fixed mode. Returns the new alpha.
    pub fn update(&mut self, log_probs: &[f64]) -> Result<f64> {
        if let Some(opt) = self.optimizer.as_mut() {
            if !log_probs.is_empty() {
                let mean_gap = log_probs
                    .iter()
                    .map(|l| l + self.target_entropy)
                    .sum::<f64>()
                    / log_probs.len() as f64;
                let mut p = [self.log_alpha];
                opt.apply(&mut p, &[-mean_gap])?;
                self.log_alpha = p[0];
            }
        }
        Ok(self.alpha())
    }
}

/// Snapshot helper: `(log_alpha, target_entropy, fixed value or NaN)`.
pub(crate) fn temperature_fields(t: &EntropyTemperature) -> Vec<f64> {
    alloc::vec![t.log_alpha, t.target_entropy, t.fixed.unwrap_or(f64::NAN)]
}

pub(crate) fn temperature_from_fields(
    fields: [f64; 3],
    optimizer: Option<AdamState>,
) -> EntropyTemperature {
    EntropyTemperature {
        log_alpha: fields[0],
        target_entropy: fields[1],
        optimizer,
        fixed: if fields[2].is_nan() {
            None
        } else {
            Some(fields[2])
        },
    }
}
