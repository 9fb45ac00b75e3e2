//! The training loop: episodes of interaction, hindsight storage at episode
//! end, per-step updates after the random warm-up, and periodic evaluation.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use hredq_core::agent::{
    ActionMode, Agent, Dims, ResetAgent, ResetSchedule, StepMetrics, TrainRngs,
};
use hredq_core::env::{AnyEnv, GoalEnv};
use hredq_core::metrics::{evaluate, q_divergence_probe, RunRecord};
use hredq_core::replay::{HerBuffer, Transition};
use hredq_core::rng::{stream, Stream};
use rand::Rng;
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::{expanded_map, ExperimentConfig, Family, RunPaths};
use crate::records::write_records;

enum Learner {
    Redq(Agent),
    Reset(ResetAgent),
}

impl Learner {
    fn agent(&self) -> &Agent {
        match self {
            Learner::Redq(a) => a,
            Learner::Reset(r) => &r.agent,
        }
    }

    fn train_step(
        &mut self,
        buffer: &HerBuffer,
        rngs: &mut TrainRngs,
    ) -> hredq_core::Result<StepMetrics> {
        match self {
            Learner::Redq(a) => a.train_step(buffer, rngs),
            Learner::Reset(r) => r.reset_train_step(buffer, rngs),
        }
    }

    fn fired(&self) -> &[u64] {
        match self {
            Learner::Redq(_) => &[],
            Learner::Reset(r) => &r.fired,
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub reset_points: Vec<u64>,
    pub fired_resets: Vec<u64>,
    pub agent: Agent,
}

/// Mean training losses since the last evaluation point.
#[derive(Default)]
struct Window {
    critic: f64,
    policy: f64,
    steps: usize,
}

impl Window {
    fn add(&mut self, m: &StepMetrics) {
        self.critic += m.critic_loss;
        self.policy += m.policy_loss;
        self.steps += 1;
    }

    fn take(&mut self) -> (f64, f64) {
        let out = if self.steps == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (
                self.critic / self.steps as f64,
                self.policy / self.steps as f64,
            )
        };
        *self = Window::default();
        out
    }
}

fn metadata(
    config: &ExperimentConfig,
    expansion: &[(&'static str, String)],
    reset_points: &[u64],
    fired: &[u64],
    status: &str,
) -> serde_json::Value {
    let expansion: serde_json::Map<String, serde_json::Value> = expansion
        .iter()
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    json!({
        "status": status,
        "seed": config.seed,
        "env": config.env,
        "family": config.family.as_str(),
        "preset": config.preset,
        "preset_expansion": expansion,
        "config": expanded_map(config),
        "reset_points": reset_points,
        "fired_resets": fired,
        "versions": {
            "hredq": env!("CARGO_PKG_VERSION"),
            "checkpoint": 1,
        },
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// Runs one experiment. With `paths`, the run directory receives
/// `config.txt` and `metadata.json` before any step, `metrics.csv` after
/// every evaluation, and `checkpoint.bin` at every evaluation point.
pub fn train(
    config: &ExperimentConfig,
    expansion: &[(&'static str, String)],
    paths: Option<&RunPaths>,
) -> Result<RunOutcome> {
    config.validate()?;
    let mut env =
        AnyEnv::from_id(&config.env).ok_or_else(|| anyhow!("unknown env {}", config.env))?;
    let mut eval_env = env.clone();
    let spec = env.spec().clone();
    let dims = Dims {
        state: spec.state_dim,
        action: spec.action_dim,
        goal: spec.goal_dim,
    };
    let seed = config.seed;
    let mut init_rng = stream(seed, Stream::Init);
    let mut env_rng = stream(seed, Stream::Env);
    let mut explore_rng = stream(seed, Stream::Explore);
    let mut eval_rng = stream(seed, Stream::Eval);
    let mut relabel_rng = stream(seed, Stream::Relabel);
    let mut probe_rng = stream(seed, Stream::Probe);
    let mut rngs = TrainRngs::from_seed(seed);

    let agent_config = config.agent_config()?;
    let (q_min, q_max) = (agent_config.q_min, agent_config.q_max);
    let mut learner = match config.family {
        Family::Redq => Learner::Redq(
            Agent::new(agent_config, dims, &mut init_rng).map_err(|e| anyhow!("{e}"))?,
        ),
        Family::Reset => {
            let schedule = ResetSchedule::new(config.num_resets, config.total_env_steps)
                .map_err(|e| anyhow!("{e}"))?;
            Learner::Reset(
                ResetAgent::new(agent_config, dims, schedule, &mut init_rng)
                    .map_err(|e| anyhow!("{e}"))?,
            )
        }
    };
    let reset_points = match &learner {
        Learner::Reset(r) => r.schedule.reset_points().to_vec(),
        Learner::Redq(_) => Vec::new(),
    };

    if let Some(p) = paths {
        fs::create_dir_all(&p.dir).with_context(|| format!("creating {}", p.dir.display()))?;
        fs::write(p.config(), config.to_text())?;
        write_json(
            &p.metadata(),
            &metadata(config, expansion, &reset_points, &[], "running"),
        )?;
        write_records(fs::File::create(p.metrics())?, &[])?;
    }

    let relabels = if config.use_her {
        config.her_relabel_count
    } else {
        0
    };
    let mut buffer =
        HerBuffer::new(config.buffer_capacity, relabels).map_err(|e| anyhow!("{e}"))?;
    let random_start = config.random_start();
    let total = config.total_env_steps;
    let mut records = Vec::new();
    let mut window = Window::default();
    let mut steps: u64 = 0;
    let mut episode_id: u64 = 0;
    let started = Instant::now();

    let checkpoint = |learner: &Learner, steps: u64| Checkpoint {
        env_step: steps,
        env: config.env.clone(),
        family: config.family,
        total_env_steps: total,
        num_resets: config.num_resets,
        fired_resets: learner.fired().to_vec(),
        agent: learner.agent().clone(),
    };

    // On failure the checkpoint from the last evaluation point stays on disk.
    let looped = (|| -> Result<()> {
        while steps < total {
            let mut obs = env.reset(&mut env_rng);
            let mut episode = Vec::with_capacity(spec.episode_length + 1);
            loop {
                let action: Vec<f64> = if steps < random_start {
                    (0..dims.action)
                        .map(|_| explore_rng.random_range(-1.0..=1.0))
                        .collect()
                } else {
                    learner
                        .agent()
                        .act(&obs, ActionMode::Stochastic, &mut explore_rng)
                        .map_err(|e| anyhow!("{e}"))?
                };
                let out = env.step(&action).map_err(|e| anyhow!("{e}"))?;
                episode.push(Transition {
                    state: obs.state,
                    action,
                    reward: out.reward,
                    next_state: out.observation.state.clone(),
                    desired_goal: obs.desired_goal,
                    achieved_goal_next: out.observation.achieved_goal.clone(),
                    t_index: episode.len(),
                    episode_id,
                    goal_source: None,
                });
                obs = out.observation;
                steps += 1;

                if let Learner::Reset(r) = &mut learner {
                    r.maybe_reset(steps, &mut init_rng);
                }
                if steps >= random_start && !buffer.is_empty() {
                    let m = learner
                        .train_step(&buffer, &mut rngs)
                        .map_err(|e| anyhow!("training step {steps}: {e}"))?;
                    window.add(&m);
                }
                if steps.is_multiple_of(config.eval_interval) || steps == total {
                    let agent = learner.agent();
                    let eval = evaluate(agent, &mut eval_env, config.eval_episodes, &mut eval_rng)
                        .map_err(|e| anyhow!("{e}"))?;
                    let q = if buffer.is_empty() {
                        None
                    } else {
                        Some(
                            q_divergence_probe(
                                agent,
                                &buffer,
                                config.probe_batch_size,
                                q_min,
                                q_max,
                                &mut probe_rng,
                            )
                            .map_err(|e| anyhow!("{e}"))?,
                        )
                    };
                    let (critic_loss, policy_loss) = window.take();
                    let nan = f64::NAN;
                    records.push(RunRecord {
                        env_step: steps,
                        mean_return: eval.mean_return,
                        success_rate: eval.success_rate,
                        q_mean: q.map_or(nan, |q| q.q_mean),
                        q_low: q.map_or(nan, |q| q.q_low),
                        q_high: q.map_or(nan, |q| q.q_high),
                        frac_below_qmin: q.map_or(nan, |q| q.frac_below_qmin),
                        frac_above_qmax: q.map_or(nan, |q| q.frac_above_qmax),
                        alpha: agent.alpha(),
                        critic_loss,
                        policy_loss,
                    });
                    log::info!(
                        "{} seed {} step {steps}/{total}: success {:.2} return {:.1} q [{:.2}, {:.2}] out-of-bounds {:.3} ({:.0}s)",
                        config.preset.as_deref().unwrap_or(config.family.as_str()),
                        seed,
                        eval.success_rate,
                        eval.mean_return,
                        q.map_or(nan, |q| q.q_low),
                        q.map_or(nan, |q| q.q_high),
                        q.map_or(nan, |q| q.frac_below_qmin + q.frac_above_qmax),
                        started.elapsed().as_secs_f64(),
                    );
                    if let Some(p) = paths {
                        write_records(fs::File::create(p.metrics())?, &records)?;
                        checkpoint(&learner, steps).save(&p.checkpoint())?;
                    }
                }
                if out.done || steps == total {
                    break;
                }
            }
            buffer
                .store_episode(&episode, &env, &mut relabel_rng)
                .map_err(|e| anyhow!("{e}"))?;
            episode_id += 1;
        }
        Ok(())
    })();
    if let Err(e) = looped {
        if let Some(p) = paths {
            let mut m = metadata(config, expansion, &reset_points, learner.fired(), "failed");
            m["error"] = json!(format!("{e:#}"));
            write_json(&p.metadata(), &m)?;
        }
        return Err(e);
    }

    if let Some(p) = paths {
        checkpoint(&learner, steps).save(&p.checkpoint())?;
        write_json(
            &p.metadata(),
            &metadata(
                config,
                expansion,
                &reset_points,
                learner.fired(),
                "finished",
            ),
        )?;
    }
    let fired_resets = learner.fired().to_vec();
    let agent = match learner {
        Learner::Redq(a) => a,
        Learner::Reset(r) => r.agent,
    };
    Ok(RunOutcome {
        records,
        reset_points,
        fired_resets,
        agent,
    })
}
