//! Periodic-reset comparator: two critics, the policy updated inside the
//! replay-ratio loop, and every network reinitialized at evenly spaced
//! points of the planned run. The replay buffer and the entropy temperature
//! survive resets; Adam moments of the reinitialized networks are cleared.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{Agent, AgentConfig, Dims, StepMetrics, TargetMode, TrainRngs};
use crate::replay::HerBuffer;
use crate::{Error, Result};

/// Critic indices entering every target: both members.
pub const BOTH_CRITICS: [usize; 2] = [0, 1];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetSchedule {
    pub num_resets: usize,
    pub total_env_steps: u64,
    reset_points: Vec<u64>,
}

impl ResetSchedule {
    /// Reset points at `total * j / (num_resets + 1)` for `j = 1..=num_resets`.
    pub fn new(num_resets: usize, total_env_steps: u64) -> Result<Self> {
        let k = num_resets as u64;
        if num_resets > 0 && total_env_steps < k + 1 {
            return Err(Error::InvalidConfig(format!(
                "{num_resets} resets need at least {} environment steps",
                k + 1
            )));
        }
        let reset_points = (1..=k).map(|j| total_env_steps * j / (k + 1)).collect();
        Ok(Self {
            num_resets,
            total_env_steps,
            reset_points,
        })
    }

    pub fn reset_points(&self) -> &[u64] {
        &self.reset_points
    }

    pub fn is_reset_point(&self, env_step: u64) -> bool {
        self.reset_points.binary_search(&env_step).is_ok()
    }
}

/// The two-critic agent with its reset schedule and the log of fired resets.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetAgent {
    pub agent: Agent,
    pub schedule: ResetSchedule,
    pub fired: Vec<u64>,
}

impl ResetAgent {
    /// Forces two critics, both in every target, and the clipped double-Q
    /// target with entropy. Other settings (bounds, layer norm, replay ratio)
    /// come from `config`.
    pub fn new<R: Rng + ?Sized>(
        config: AgentConfig,
        dims: Dims,
        schedule: ResetSchedule,
        rng: &mut R,
    ) -> Result<Self> {
        let config = AgentConfig {
            ensemble_size: 2,
            target_subset: 2,
            target_mode: TargetMode::CdqEntropy,
            ..config
        };
        Ok(Self {
            agent: Agent::new(config, dims, rng)?,
            schedule,
            fired: Vec::new(),
        })
    }

    /// Call once per environment interaction with the number of interactions
    /// so far. Reinitializes the policy and both critics at reset points.
    pub fn maybe_reset<R: Rng + ?Sized>(&mut self, env_step_count: u64, rng: &mut R) -> bool {
        if !self.schedule.is_reset_point(env_step_count) {
            return false;
        }
        self.agent.policy.reinitialize(rng);
        self.agent.critic.reinitialize(rng);
        self.fired.push(env_step_count);
        true
    }

    /// `G` rounds of {batch, bounded CDQ target over both critics, critic
    /// updates, Polyak, policy and temperature update on the same batch}.
    pub fn reset_train_step(
        &mut self,
        buffer: &HerBuffer,
        rngs: &mut TrainRngs,
    ) -> Result<StepMetrics> {
        let agent = &mut self.agent;
        let g = agent.config.replay_ratio;
        let b = agent.config.batch_size;
        let mut m = StepMetrics::default();
        let (mut loss_sum, mut y_sum, mut pol_sum, mut ent_sum) = (0.0, 0.0, 0.0, 0.0);
        let mut clamped = 0usize;
        for _ in 0..g {
            let batch = buffer.sample(b, &mut rngs.buffer)?;
            let target = agent.compute_target(&batch, &BOTH_CRITICS, &mut rngs.policy)?;
            let losses = agent.update_critics(&batch, &target.y)?;
            agent.update_targets()?;
            let step = agent.update_policy(&batch, &mut rngs.policy)?;
            m.alpha = agent.update_alpha(&step.log_probs)?;
            loss_sum += losses.iter().sum::<f64>() / losses.len() as f64;
            y_sum += target.y.iter().sum::<f64>() / target.y.len() as f64;
            pol_sum += step.loss;
            ent_sum += step.entropy;
            clamped += target.clamped;
            m.critic_updates += 1;
            m.policy_updates += 1;
        }
        let gf = g as f64;
        m.critic_loss = loss_sum / gf;
        m.target_mean = y_sum / gf;
        m.policy_loss = pol_sum / gf;
        m.entropy = ent_sum / gf;
        m.clamped_fraction = clamped as f64 / (g * b) as f64;
        Ok(m)
    }
}
