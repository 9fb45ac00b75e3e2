use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{
    concat_columns, AgentConfig, EnsembleCritic, EntropyTemperature, SquashedGaussianPolicy,
    TargetMode,
};
use crate::env::GoalObservation;
use crate::nn::Matrix;
use crate::replay::{Batch, HerBuffer};
use crate::rng::{stream, Stream, StreamRng};
use crate::{Error, Result};

/// Observation and action sizes the networks are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub state: usize,
    pub action: usize,
    pub goal: usize,
}

impl Dims {
    pub fn critic_input(&self) -> usize {
        self.state + self.action + self.goal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// Random streams consumed by training updates.
#[derive(Debug, Clone)]
pub struct TrainRngs {
    pub buffer: StreamRng,
    pub subset: StreamRng,
    pub policy: StreamRng,
}

impl TrainRngs {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            buffer: stream(seed, Stream::Buffer),
            subset: stream(seed, Stream::Subset),
            policy: stream(seed, Stream::PolicySample),
        }
    }
}

/// `r + gamma * clamp(inner)`, with the clamp skipped when `bounds` is `None`.
#[inline]
pub fn bootstrap_target(reward: f64, inner: f64, gamma: f64, bounds: Option<(f64, f64)>) -> f64 {
    let v = match bounds {
        Some((lo, hi)) => inner.max(lo).min(hi),
        None => inner,
    };
    reward + gamma * v
}

/// Regression targets for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBatch {
    pub y: Vec<f64>,
    /// Next-state value before clamping and discounting.
    pub inner: Vec<f64>,
    /// Rows whose inner value fell outside `[q_min, q_max]`.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStep {
    pub loss: f64,
    /// `-mean(log_pi)` over the batch.
    pub entropy: f64,
    pub log_probs: Vec<f64>,
}

/// Per-environment-step training summary.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepMetrics {
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub entropy: f64,
    pub alpha: f64,
    pub target_mean: f64,
    pub clamped_fraction: f64,
    pub critic_updates: usize,
    pub policy_updates: usize,
}

/// Ensemble actor-critic shared by the REDQ and reset training loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub config: AgentConfig,
    pub dims: Dims,
    pub policy: SquashedGaussianPolicy,
    pub critic: EnsembleCritic,
    pub temperature: EntropyTemperature,
}

impl Agent {
    /// Builds the policy first, then the critics in order, all from `rng`.
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, dims: Dims, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let hidden = vec![config.hidden_units; config.hidden_layers];
        let policy = SquashedGaussianPolicy::new(
            dims.state,
            dims.goal,
            dims.action,
            &hidden,
            config.learning_rate,
            rng,
        )?;
        let critic = EnsembleCritic::new(
            config.ensemble_size,
            dims.critic_input(),
            &hidden,
            config.use_layer_norm,
            config.learning_rate,
            rng,
        )?;
        let temperature =
            EntropyTemperature::new(config.alpha_mode, dims.action, config.learning_rate);
        Ok(Self {
            config,
            dims,
            policy,
            critic,
            temperature,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.temperature.alpha()
    }

    pub fn critic_inputs(
        &self,
        states: &Matrix,
        actions: &Matrix,
        goals: &Matrix,
    ) -> Result<Matrix> {
        concat_columns(&[states, actions, goals])
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &GoalObservation,
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let s = Matrix::row_vector(&obs.state);
        let g = Matrix::row_vector(&obs.desired_goal);
        let a = match mode {
            ActionMode::Deterministic => self.policy.deterministic(&s, &g)?,
            ActionMode::Stochastic => self.policy.sample(&s, &g, rng)?.actions,
        };
        Ok(a.into_vec())
    }

    /// The squashed mean action, used for evaluation.
    pub fn act_deterministic(&self, obs: &GoalObservation) -> Result<Vec<f64>> {
        let s = Matrix::row_vector(&obs.state);
        let g = Matrix::row_vector(&obs.desired_goal);
        Ok(self.policy.deterministic(&s, &g)?.into_vec())
    }

    /// `M` distinct critic indices, uniformly drawn.
    pub fn sample_subset<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        rand::seq::index::sample(rng, self.config.ensemble_size, self.config.target_subset)
            .into_vec()
    }

    fn bounds(&self) -> Option<(f64, f64)> {
        self.config
            .use_bq
            .then_some((self.config.q_min, self.config.q_max))
    }

    /// Targets shared by every critic: one next action per row from the
    /// current policy, evaluated by the target networks in `subset`.
    pub fn compute_target<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        subset: &[usize],
        rng: &mut R,
    ) -> Result<TargetBatch> {
        if subset.is_empty() {
            return Err(Error::Empty("target subset"));
        }
        let next = self.policy.sample(&batch.next_states, &batch.goals, rng)?;
        let inputs = self.critic_inputs(&batch.next_states, &next.actions, &batch.goals)?;
        let mut values = Vec::with_capacity(subset.len());
        for &i in subset {
            let net = self.critic.targets.get(i).ok_or(Error::DimensionMismatch {
                what: "target subset index",
                expected: self.critic.len(),
                got: i,
            })?;
            values.push(net.predict(&inputs)?.into_vec());
        }
        let alpha = self.alpha();
        let inner: Vec<f64> = (0..batch.len())
            .map(|r| match self.config.target_mode {
                TargetMode::CdqEntropy => {
                    let min = values.iter().map(|v| v[r]).fold(f64::INFINITY, f64::min);
                    min - alpha * next.log_probs[r]
                }
                TargetMode::EnsembleMean => {
                    values.iter().map(|v| v[r]).sum::<f64>() / values.len() as f64
                }
            })
            .collect();
        self.targets_from_inner(&batch.rewards, inner)
    }

    /// Applies the optional clamp and discount to precomputed next-state
    /// values.
    pub fn targets_from_inner(&self, rewards: &[f64], inner: Vec<f64>) -> Result<TargetBatch> {
        let bounds = self.bounds();
        let gamma = self.config.gamma;
        let (lo, hi) = (self.config.q_min, self.config.q_max);
        let mut clamped = 0;
        let mut y = Vec::with_capacity(inner.len());
        for (r, &v) in rewards.iter().zip(&inner) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("target inner value {v}")));
            }
            if v < lo || v > hi {
                clamped += 1;
            }
            let t = bootstrap_target(*r, v, gamma, bounds);
            // with rewards in {-1, 0} the clamped target stays inside the bounds
            if bounds.is_some() && (*r == 0.0 || *r == -1.0) && (t < lo - 1e-9 || t > hi + 1e-9) {
                return Err(Error::Invariant(format!(
                    "bounded target {t} escaped [{lo}, {hi}]"
                )));
            }
            y.push(t);
        }
        Ok(TargetBatch { y, inner, clamped })
    }

    pub fn update_critics(&mut self, batch: &Batch, y: &[f64]) -> Result<Vec<f64>> {
        let inputs = self.critic_inputs(&batch.states, &batch.actions, &batch.goals)?;
        self.critic.update(&inputs, y)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        self.critic.soft_update(self.config.tau)
    }

    /// One ascent step on `mean(mean_i Q_i(s, a, g) - alpha * log_pi(a))` over
    /// the full ensemble, with `a` resampled by reparameterization.
    pub fn update_policy<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        rng: &mut R,
    ) -> Result<PolicyStep> {
        let noise = self.policy.draw_noise(batch.len(), rng);
        let obj = self.policy.objective(
            &self.critic.online,
            self.alpha(),
            &batch.states,
            &batch.goals,
            noise,
        )?;
        let policy = &mut self.policy;
        policy.net.adam_step(&obj.grads, &mut policy.optimizer)?;
        let entropy = -obj.log_probs.iter().sum::<f64>() / obj.log_probs.len() as f64;
        Ok(PolicyStep {
            loss: obj.loss,
            entropy,
            log_probs: obj.log_probs,
        })
    }

    pub fn update_alpha(&mut self, log_probs: &[f64]) -> Result<f64> {
        self.temperature.update(log_probs)
    }

    /// The REDQ update for one environment interaction: `G` critic rounds
    /// (fresh batch, fresh subset, shared target, all critics, Polyak), then
    /// one policy and temperature update on another fresh batch.
    pub fn train_step(&mut self, buffer: &HerBuffer, rngs: &mut TrainRngs) -> Result<StepMetrics> {
        let g = self.config.replay_ratio;
        let b = self.config.batch_size;
        let mut m = StepMetrics::default();
        let mut loss_sum = 0.0;
        let mut y_sum = 0.0;
        let mut clamped = 0usize;
        for _ in 0..g {
            let batch = buffer.sample(b, &mut rngs.buffer)?;
            let subset = self.sample_subset(&mut rngs.subset);
            let target = self.compute_target(&batch, &subset, &mut rngs.policy)?;
            let losses = self.update_critics(&batch, &target.y)?;
            self.update_targets()?;
            loss_sum += losses.iter().sum::<f64>() / losses.len() as f64;
            y_sum += target.y.iter().sum::<f64>() / target.y.len() as f64;
            clamped += target.clamped;
            m.critic_updates += 1;
        }
        let batch = buffer.sample(b, &mut rngs.buffer)?;
        let step = self.update_policy(&batch, &mut rngs.policy)?;
        m.alpha = self.update_alpha(&step.log_probs)?;
        m.policy_updates = 1;
        m.policy_loss = step.loss;
        m.entropy = step.entropy;
        m.critic_loss = loss_sum / g as f64;
        m.target_mean = y_sum / g as f64;
        m.clamped_fraction = clamped as f64 / (g * b) as f64;
        Ok(m)
    }
}
