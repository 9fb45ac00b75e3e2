//! Fixed-capacity transition store with hindsight relabeling at write time.
//!
//! `store_episode` writes the original transitions of a finished episode and
//! then, for every transition `t` and each of the `k` extra goals, a copy
//! whose desired goal is the goal achieved at a uniformly drawn later step
//! `u in {t+1, .., T}` (the final transition reuses its own achieved goal).
//! The copy's reward is recomputed through the environment's reward
//! function. Eviction is FIFO per transition.

use alloc::vec::Vec;

use rand::Rng;

use crate::env::GoalEnv;
use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub desired_goal: Vec<f64>,
    pub achieved_goal_next: Vec<f64>,
    pub t_index: usize,
    pub episode_id: u64,
    /// Step whose achieved goal replaced the desired goal, for relabeled
    /// copies.
    pub goal_source: Option<usize>,
}

/// A sampled mini-batch laid out for the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub goals: Matrix,
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items.first().ok_or(Error::Empty("batch"))?;
        let (sd, ad, gd) = (
            first.state.len(),
            first.action.len(),
            first.desired_goal.len(),
        );
        let mut states = Vec::with_capacity(items.len() * sd);
        let mut actions = Vec::with_capacity(items.len() * ad);
        let mut next_states = Vec::with_capacity(items.len() * sd);
        let mut goals = Vec::with_capacity(items.len() * gd);
        let mut rewards = Vec::with_capacity(items.len());
        for tr in items {
            states.extend_from_slice(&tr.state);
            actions.extend_from_slice(&tr.action);
            next_states.extend_from_slice(&tr.next_state);
            goals.extend_from_slice(&tr.desired_goal);
            rewards.push(tr.reward);
        }
        let n = items.len();
        Ok(Self {
            states: Matrix::from_vec(n, sd, states)?,
            actions: Matrix::from_vec(n, ad, actions)?,
            rewards,
            next_states: Matrix::from_vec(n, sd, next_states)?,
            goals: Matrix::from_vec(n, gd, goals)?,
            indices: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerBuffer {
    capacity: usize,
    relabel_count: usize,
    items: Vec<Transition>,
    cursor: usize,
    total_written: u64,
}

impl HerBuffer {
    pub fn new(capacity: usize, relabel_count: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig(
                "buffer capacity must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            relabel_count,
            items: Vec::new(),
            cursor: 0,
            total_written: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn relabel_count(&self) -> usize {
        self.relabel_count
    }

    pub fn total_written(&self) -> u64 {
        self.total_written
    }

    /// Transition at storage slot `i` (not age order).
    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    fn push(&mut self, tr: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(tr);
        } else {
            self.items[self.cursor] = tr;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.total_written += 1;
    }

    /// Stores a finished episode plus `relabel_count` hindsight copies of
    /// each transition. Returns the number of transitions written.
    pub fn store_episode<E, R>(
        &mut self,
        episode: &[Transition],
        env: &E,
        rng: &mut R,
    ) -> Result<usize>
    where
        E: GoalEnv + ?Sized,
        R: Rng + ?Sized,
    {
        if episode.is_empty() {
            return Err(Error::Empty("store_episode"));
        }
        for (t, tr) in episode.iter().enumerate() {
            if tr.t_index != t || tr.episode_id != episode[0].episode_id {
                return Err(Error::InvalidConfig(alloc::format!(
                    "episode transitions must be consecutive from t = 0 (slot {t} has t_index {})",
                    tr.t_index
                )));
            }
        }
        let last = episode.len() - 1;
        for tr in episode {
            self.push(tr.clone());
        }
        for (t, tr) in episode.iter().enumerate() {
            for _ in 0..self.relabel_count {
                let u = if t == last {
                    last
                } else {
                    rng.random_range(t + 1..=last)
                };
                let goal = episode[u].achieved_goal_next.clone();
                let reward = env.compute_reward(&tr.achieved_goal_next, &goal);
                self.push(Transition {
                    desired_goal: goal,
                    reward,
                    goal_source: Some(u),
                    ..tr.clone()
                });
            }
        }
        Ok((1 + self.relabel_count) * episode.len())
    }

    /// Uniform indices with replacement. Any non-empty buffer can serve any
    /// batch size; warm-up before the first update is the caller's policy.
    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::NotReady { have: 0, need: 1 });
        }
        let n = self.items.len();
        Ok((0..batch_size).map(|_| rng.random_range(0..n)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        let indices = self.sample_indices(batch_size, rng)?;
        let refs: Vec<&Transition> = indices.iter().map(|&i| &self.items[i]).collect();
        let mut batch = Batch::from_transitions(&refs)?;
        batch.indices = indices;
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GoalEnv, PointReach};
    use crate::rng::{stream, Stream};
    use alloc::vec;

    fn random_episode<R: Rng>(env: &mut PointReach, id: u64, rng: &mut R) -> Vec<Transition> {
        let mut obs = env.reset(rng);
        let mut out = Vec::new();
        for t in 0..=env.spec().episode_length {
            let action = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let step = env.step(&action).unwrap();
            out.push(Transition {
                state: obs.state.clone(),
                action,
                reward: step.reward,
                next_state: step.observation.state.clone(),
                desired_goal: obs.desired_goal.clone(),
                achieved_goal_next: step.observation.achieved_goal.clone(),
                t_index: t,
                episode_id: id,
                goal_source: None,
            });
            obs = step.observation;
        }
        out
    }

    #[test]
    fn growth_per_episode() {
        let mut env = PointReach::new();
        let mut rng = stream(1, Stream::Env);
        let ep = random_episode(&mut env, 0, &mut rng);
        let mut plain = HerBuffer::new(1000, 0).unwrap();
        assert_eq!(plain.len(), 0);
        assert_eq!(plain.store_episode(&ep, &env, &mut rng).unwrap(), 51);
        assert_eq!(plain.len(), 51);
        let mut her = HerBuffer::new(1000, 1).unwrap();
        assert_eq!(her.store_episode(&ep, &env, &mut rng).unwrap(), 102);
        assert_eq!(her.len(), 102);
        // T = 49 -> 100
        assert_eq!(
            HerBuffer::new(1000, 1)
                .unwrap()
                .store_episode(&ep[..50], &env, &mut rng)
                .unwrap(),
            100
        );
    }

    #[test]
    fn relabels_look_forward_and_recompute_rewards() {
        let mut env = PointReach::new();
        let mut rng = stream(2, Stream::Env);
        let mut buf = HerBuffer::new(100_000, 2).unwrap();
        for id in 0..20 {
            let ep = random_episode(&mut env, id, &mut rng);
            buf.store_episode(&ep, &env, &mut rng).unwrap();
        }
        let mut relabeled = 0;
        for tr in buf.iter_oldest_first() {
            assert_eq!(
                tr.reward,
                env.compute_reward(&tr.achieved_goal_next, &tr.desired_goal)
            );
            if let Some(u) = tr.goal_source {
                relabeled += 1;
                assert!(u > tr.t_index || (u == tr.t_index && u == 50));
            }
        }
        assert_eq!(relabeled, 20 * 51 * 2);
    }

    #[test]
    fn self_goal_relabel_rewards_zero() {
        let mut env = PointReach::new();
        let mut rng = stream(3, Stream::Env);
        let ep = random_episode(&mut env, 0, &mut rng);
        let mut buf = HerBuffer::new(1000, 1).unwrap();
        buf.store_episode(&ep, &env, &mut rng).unwrap();
        let terminal = buf
            .iter_oldest_first()
            .find(|t| t.goal_source == Some(50) && t.t_index == 50)
            .unwrap();
        assert_eq!(terminal.desired_goal, terminal.achieved_goal_next);
        assert_eq!(terminal.reward, 0.0);
    }

    #[test]
    fn capacity_evicts_oldest_first() {
        let mut env = PointReach::new();
        let mut rng = stream(4, Stream::Env);
        let mut buf = HerBuffer::new(120, 0).unwrap();
        let a = random_episode(&mut env, 0, &mut rng);
        let b = random_episode(&mut env, 1, &mut rng);
        let c = random_episode(&mut env, 2, &mut rng);
        buf.store_episode(&a, &env, &mut rng).unwrap();
        buf.store_episode(&b, &env, &mut rng).unwrap();
        buf.store_episode(&c, &env, &mut rng).unwrap();
        assert_eq!(buf.len(), 120);
        let order: Vec<(u64, usize)> = buf
            .iter_oldest_first()
            .map(|t| (t.episode_id, t.t_index))
            .collect();
        let mut expected: Vec<(u64, usize)> = Vec::new();
        for id in 0..3u64 {
            for t in 0..51 {
                expected.push((id, t));
            }
        }
        assert_eq!(order, expected[expected.len() - 120..].to_vec());
    }

    #[test]
    fn sampling_is_with_replacement_and_checks_size() {
        let mut env = PointReach::new();
        let mut rng = stream(5, Stream::Env);
        let ep = random_episode(&mut env, 0, &mut rng);
        let mut buf = HerBuffer::new(1000, 0).unwrap();
        assert!(matches!(
            buf.sample(4, &mut rng),
            Err(Error::NotReady { .. })
        ));
        buf.store_episode(&ep[..1], &env, &mut rng).unwrap();
        let batch = buf.sample(256, &mut rng).unwrap();
        assert_eq!(batch.len(), 256);
        assert!(batch.indices.iter().all(|&i| i == 0));
        assert!(batch.rewards.iter().all(|&r| r == ep[0].reward));

        buf.store_episode(&ep, &env, &mut rng).unwrap();
        assert_eq!(buf.sample(256, &mut rng).unwrap().len(), 256);
    }

    #[test]
    fn empty_episode_is_rejected() {
        let env = PointReach::new();
        let mut buf = HerBuffer::new(10, 1).unwrap();
        assert!(buf
            .store_episode(&[], &env, &mut stream(0, Stream::Env))
            .is_err());
    }

    #[test]
    fn store_is_reproducible() {
        let mut env = PointReach::new();
        let ep = random_episode(&mut env, 0, &mut stream(6, Stream::Env));
        let mut a = HerBuffer::new(1000, 1).unwrap();
        let mut b = HerBuffer::new(1000, 1).unwrap();
        a.store_episode(&ep, &env, &mut stream(7, Stream::Relabel))
            .unwrap();
        b.store_episode(&ep, &env, &mut stream(7, Stream::Relabel))
            .unwrap();
        assert_eq!(a, b);
    }
}
