use alloc::format;

use crate::{Error, Result};

/// How the bootstrapped value of the next state is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Minimum over the sampled subset minus the entropy term.
    CdqEntropy,
    /// Mean over the sampled subset, no entropy term.
    EnsembleMean,
}

impl TargetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMode::CdqEntropy => "cdq_entropy",
            TargetMode::EnsembleMean => "ensemble_mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cdq_entropy" => Some(TargetMode::CdqEntropy),
            "ensemble_mean" => Some(TargetMode::EnsembleMean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// Tuned toward a target entropy of `-action_dim`, starting from `initial`.
    Auto {
        initial: f64,
    },
    Fixed(f64),
}

/// Hyperparameters of the ensemble actor-critic.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub ensemble_size: usize,
    pub target_subset: usize,
    pub replay_ratio: usize,
    pub gamma: f64,
    pub tau: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub use_bq: bool,
    pub target_mode: TargetMode,
    pub use_layer_norm: bool,
    pub alpha_mode: AlphaMode,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_layers: usize,
    pub hidden_units: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        let gamma = 0.99;
        let (q_min, q_max) = sparse_reward_bounds(gamma);
        Self {
            ensemble_size: 5,
            target_subset: 2,
            replay_ratio: 20,
            gamma,
            tau: 0.005,
            q_min,
            q_max,
            use_bq: true,
            target_mode: TargetMode::CdqEntropy,
            use_layer_norm: true,
            alpha_mode: AlphaMode::Auto { initial: 1.0 },
            batch_size: 256,
            learning_rate: 3e-4,
            hidden_layers: 2,
            hidden_units: 256,
        }
    }
}

/// Value range for rewards in `{-1, 0}`: `(-1 / (1 - gamma), 0)`.
pub fn sparse_reward_bounds(gamma: f64) -> (f64, f64) {
    (-1.0 / (1.0 - gamma), 0.0)
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be at least 1".into());
        }
        if self.target_subset == 0 || self.target_subset > self.ensemble_size {
            return bad(format!(
                "target_subset must lie in 1..={} (got {})",
                self.ensemble_size, self.target_subset
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1) (got {})", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1] (got {})", self.tau));
        }
        if self.replay_ratio == 0 {
            return bad("replay_ratio must be at least 1".into());
        }
        if !(self.q_min <= self.q_max) {
            return bad(format!("q_min {} exceeds q_max {}", self.q_min, self.q_max));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive".into());
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be positive".into());
        }
        match self.alpha_mode {
            AlphaMode::Auto { initial } | AlphaMode::Fixed(initial)
                if !(initial >= 0.0) || !initial.is_finite() =>
            {
                bad(format!(
                    "alpha must be finite and non-negative (got {initial})"
                ))
            }
            AlphaMode::Auto { initial: 0.0 } => {
                bad("auto alpha needs a positive starting value".into())
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_hyperparameter_table() {
        let c = AgentConfig::default();
        assert_eq!(
            (c.ensemble_size, c.target_subset, c.replay_ratio),
            (5, 2, 20)
        );
        assert_eq!((c.gamma, c.tau, c.batch_size), (0.99, 0.005, 256));
        assert_eq!(c.learning_rate, 3e-4);
        assert!((c.q_min + 100.0).abs() < 1e-9);
        assert_eq!(c.q_max, 0.0);
        assert_eq!((c.hidden_layers, c.hidden_units), (2, 256));
        c.validate().unwrap();
    }

    #[test]
    fn bounds_follow_gamma() {
        let (lo, hi) = sparse_reward_bounds(0.9);
        assert!((lo + 10.0).abs() < 1e-12);
        assert_eq!(hi, 0.0);
    }

    #[test]
    fn invalid_subsets_are_rejected() {
        let c = AgentConfig {
            target_subset: 6,
            ..AgentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = AgentConfig {
            gamma: 1.0,
            ..AgentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
