//! Evaluation episodes, Q-value diagnostics against the value bounds, and
//! the interquartile mean with a stratified bootstrap interval.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::agent::Agent;
use crate::env::{GoalEnv, GoalObservation};
use crate::replay::HerBuffer;
use crate::{Error, Result};

/// Tolerance on the bounds before an estimate counts as outside them.
pub const PROBE_EPSILON: f64 = 1e-6;

/// One evaluation point of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunRecord {
    pub env_step: u64,
    pub mean_return: f64,
    pub success_rate: f64,
    pub q_mean: f64,
    pub q_low: f64,
    pub q_high: f64,
    pub frac_below_qmin: f64,
    pub frac_above_qmax: f64,
    pub alpha: f64,
    pub critic_loss: f64,
    pub policy_loss: f64,
}

impl RunRecord {
    pub const COLUMNS: [&'static str; 11] = [
        "env_step",
        "mean_return",
        "success_rate",
        "q_mean",
        "q_low",
        "q_high",
        "frac_below_qmin",
        "frac_above_qmax",
        "alpha",
        "critic_loss",
        "policy_loss",
    ];

    /// Every column after `env_step`, in `COLUMNS` order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.mean_return,
            self.success_rate,
            self.q_mean,
            self.q_low,
            self.q_high,
            self.frac_below_qmin,
            self.frac_above_qmax,
            self.alpha,
            self.critic_loss,
            self.policy_loss,
        ]
    }

    pub fn from_values(env_step: u64, v: [f64; 10]) -> Self {
        Self {
            env_step,
            mean_return: v[0],
            success_rate: v[1],
            q_mean: v[2],
            q_low: v[3],
            q_high: v[4],
            frac_below_qmin: v[5],
            frac_above_qmax: v[6],
            alpha: v[7],
            critic_loss: v[8],
            policy_loss: v[9],
        }
    }

    /// Fraction of probe estimates outside the value bounds.
    pub fn out_of_bounds(&self) -> f64 {
        self.frac_below_qmin + self.frac_above_qmax
    }
}

/// Anything that picks actions for evaluation episodes.
pub trait Actor {
    fn act(&self, observation: &GoalObservation) -> Result<Vec<f64>>;
}

/// Agents act with the squashed mean during evaluation.
impl Actor for Agent {
    fn act(&self, observation: &GoalObservation) -> Result<Vec<f64>> {
        self.act_deterministic(observation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Undiscounted return per episode, averaged.
    pub mean_return: f64,
    /// Fraction of episodes whose final step was a success.
    pub success_rate: f64,
}

/// Runs `episodes` full episodes. `rng` only draws the episode starts.
pub fn evaluate<A, E, R>(actor: &A, env: &mut E, episodes: usize, rng: &mut R) -> Result<Evaluation>
where
    A: Actor + ?Sized,
    E: GoalEnv,
    R: Rng + ?Sized,
{
    if episodes == 0 {
        return Err(Error::InvalidConfig(
            "evaluation needs at least one episode".into(),
        ));
    }
    let mut total_return = 0.0;
    let mut successes = 0usize;
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        loop {
            let action = actor.act(&obs)?;
            let out = env.step(&action)?;
            total_return += out.reward;
            obs = out.observation;
            if out.done {
                successes += out.success as usize;
                break;
            }
        }
    }
    Ok(Evaluation {
        mean_return: total_return / episodes as f64,
        success_rate: successes as f64 / episodes as f64,
    })
}

/// Statistics of every online critic on one replay batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QStats {
    pub q_mean: f64,
    pub q_low: f64,
    pub q_high: f64,
    pub frac_below_qmin: f64,
    pub frac_above_qmax: f64,
}

/// Evaluates all online critics on `probe_batch_size` stored transitions
/// and reports the spread of the estimates and how many fall outside
/// `[q_min, q_max]` by more than [`PROBE_EPSILON`].
pub fn q_divergence_probe<R: Rng + ?Sized>(
    agent: &Agent,
    buffer: &HerBuffer,
    probe_batch_size: usize,
    q_min: f64,
    q_max: f64,
    rng: &mut R,
) -> Result<QStats> {
    let batch = buffer.sample(probe_batch_size, rng)?;
    let inputs = agent.critic_inputs(&batch.states, &batch.actions, &batch.goals)?;
    let estimates = agent.critic.predict_online(&inputs)?;
    Ok(q_stats(estimates.iter().flatten().copied(), q_min, q_max))
}

/// Summary of a set of estimates; see [`q_divergence_probe`].
pub fn q_stats(estimates: impl IntoIterator<Item = f64>, q_min: f64, q_max: f64) -> QStats {
    let (mut n, mut sum, mut below, mut above) = (0usize, 0.0, 0usize, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for q in estimates {
        n += 1;
        sum += q;
        lo = lo.min(q);
        hi = hi.max(q);
        below += (q < q_min - PROBE_EPSILON) as usize;
        above += (q > q_max + PROBE_EPSILON) as usize;
    }
    let nf = n.max(1) as f64;
    QStats {
        q_mean: sum / nf,
        q_low: lo,
        q_high: hi,
        frac_below_qmin: below as f64 / nf,
        frac_above_qmax: above as f64 / nf,
    }
}

/// Interquartile mean: sort, drop `floor(n / 4)` values from each end,
/// average the rest.
pub fn iqm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("iqm input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(trimmed_mean(&sorted))
}

fn trimmed_mean(sorted: &[f64]) -> f64 {
    let cut = sorted.len() / 4;
    let kept = &sorted[cut..sorted.len() - cut];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// IQM over all runs of all tasks with a percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub iqm: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub num_bootstrap: usize,
    /// Set when some task has fewer than two runs, so resampling cannot
    /// express any spread for it.
    pub degenerate: bool,
    /// The input scores, one list per task.
    pub scores_by_task: Vec<Vec<f64>>,
}

/// Stratified bootstrap of the pooled IQM.
///
/// `scores_by_task[t]` holds one score per run of task `t`. Each resample
/// draws, for every task independently, as many runs as it has with
/// replacement; the IQM of the pooled draw is one bootstrap statistic. The
/// interval is the pair of `(1 -/+ confidence) / 2` quantiles of those
/// statistics, linearly interpolated.
pub fn iqm_bootstrap_ci<R: Rng + ?Sized>(
    scores_by_task: &[Vec<f64>],
    num_bootstrap: usize,
    confidence: f64,
    rng: &mut R,
) -> Result<AggregateResult> {
    let statistics = bootstrap_statistics(scores_by_task, num_bootstrap, rng)?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence must lie in (0, 1) (got {confidence})"
        )));
    }
    let pooled: Vec<f64> = scores_by_task.iter().flatten().copied().collect();
    let (ci_low, ci_high) = percentile_interval(&statistics, confidence);
    Ok(AggregateResult {
        iqm: iqm(&pooled)?,
        ci_low,
        ci_high,
        confidence,
        num_bootstrap,
        degenerate: scores_by_task.iter().any(|t| t.len() < 2),
        scores_by_task: scores_by_task.to_vec(),
    })
}

/// Sorted bootstrap IQMs; see [`iqm_bootstrap_ci`].
pub fn bootstrap_statistics<R: Rng + ?Sized>(
    scores_by_task: &[Vec<f64>],
    num_bootstrap: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if num_bootstrap < 100 {
        return Err(Error::InvalidConfig(format!(
            "at least 100 bootstrap resamples are needed (got {num_bootstrap})"
        )));
    }
    if scores_by_task.is_empty() || scores_by_task.iter().any(|t| t.is_empty()) {
        return Err(Error::Empty("task scores"));
    }
    let total: usize = scores_by_task.iter().map(Vec::len).sum();
    let mut draw = Vec::with_capacity(total);
    let mut statistics = Vec::with_capacity(num_bootstrap);
    for _ in 0..num_bootstrap {
        draw.clear();
        for task in scores_by_task {
            for _ in 0..task.len() {
                draw.push(task[rng.random_range(0..task.len())]);
            }
        }
        draw.sort_by(f64::total_cmp);
        statistics.push(trimmed_mean(&draw));
    }
    statistics.sort_by(f64::total_cmp);
    Ok(statistics)
}

/// Quantile of sorted data with linear interpolation between order
/// statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn percentile_interval(sorted: &[f64], confidence: f64) -> (f64, f64) {
    let tail = (1.0 - confidence) / 2.0;
    (quantile(sorted, tail), quantile(sorted, 1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use alloc::vec;

    #[test]
    fn iqm_examples() {
        assert_eq!(iqm(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap(), 3.5);
        assert_eq!(iqm(&[2.5; 9]).unwrap(), 2.5);
        assert_eq!(iqm(&[1.0, 2.0, 9.0]).unwrap(), 4.0);
        assert!(iqm(&[]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 0.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.0);
        assert_eq!(quantile(&xs, 0.125), 0.5);
    }

    #[test]
    fn constant_scores_give_a_point_interval() {
        let scores = vec![vec![0.7; 5], vec![0.7; 3]];
        let r = iqm_bootstrap_ci(&scores, 500, 0.95, &mut stream(0, Stream::Bootstrap)).unwrap();
        assert_eq!((r.iqm, r.ci_low, r.ci_high), (0.7, 0.7, 0.7));
        assert!(!r.degenerate);
    }

    #[test]
    fn single_runs_are_flagged() {
        let r = iqm_bootstrap_ci(
            &[vec![0.3], vec![0.1, 0.2]],
            100,
            0.95,
            &mut stream(0, Stream::Bootstrap),
        )
        .unwrap();
        assert!(r.degenerate);
        assert!(
            iqm_bootstrap_ci(&[vec![0.3]], 99, 0.95, &mut stream(0, Stream::Bootstrap)).is_err()
        );
        assert!(
            iqm_bootstrap_ci(&[vec![0.3]], 100, 1.0, &mut stream(0, Stream::Bootstrap)).is_err()
        );
    }

    #[test]
    fn probe_flags_strictly_outside_values() {
        let s = q_stats([-200.0, -100.0, -100.0 - 2e-6, 0.0, 1e-7, 0.5], -100.0, 0.0);
        assert_eq!(s.frac_below_qmin, 2.0 / 6.0);
        assert_eq!(s.frac_above_qmax, 1.0 / 6.0);
        assert_eq!((s.q_low, s.q_high), (-200.0, 0.5));
        assert!(s.q_low <= s.q_mean && s.q_mean <= s.q_high);
    }
}
