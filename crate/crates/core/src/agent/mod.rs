//! The goal-conditioned ensemble actor-critic.
//!
//! [`Agent`] holds a squashed-Gaussian policy over `(state, goal)`, an
//! ensemble of Q-networks over `(state, action, goal)` with Polyak-averaged
//! targets, and the entropy temperature. [`Agent::train_step`] runs the REDQ
//! loop; [`ResetAgent::reset_train_step`] runs the two-critic reset loop.
//! Both share the target computation:
//!
//! ```text
//! y = r + gamma * clamp(inner, q_min, q_max)     (clamp only with use_bq)
//! inner = min_{i in M} Qbar_i(s', a', g) - alpha * log pi(a' | s', g)   (cdq_entropy)
//!       = mean_{i in M} Qbar_i(s', a', g)                              (ensemble_mean)
//! ```

mod checkpoint;
mod config;
mod critic;
mod gradcheck;
mod policy;
mod redq;
mod reset;
mod temperature;

pub use checkpoint::{decode_agent, encode_agent};
pub use config::{sparse_reward_bounds, AgentConfig, AlphaMode, TargetMode};
pub use critic::EnsembleCritic;
pub use gradcheck::policy_gradcheck;
pub use policy::{
    concat_columns, log_tanh_jacobian, squashed_log_prob, PolicyObjective, PolicySample,
    SquashedGaussianPolicy, LOG_STD_MAX, LOG_STD_MIN,
};
pub use redq::{
    bootstrap_target, ActionMode, Agent, Dims, PolicyStep, StepMetrics, TargetBatch, TrainRngs,
};
pub use reset::{ResetAgent, ResetSchedule, BOTH_CRITICS};
pub use temperature::EntropyTemperature;
