use rand::Rng;

use super::{Clock, EnvSpec, GoalEnv, GoalObservation, PointMass, StepOutcome};
use crate::Result;

/// Half-width of the square the desired goal is drawn from.
pub const GOAL_BOX: f64 = 0.5;

/// Move a point mass to a target position.
///
/// State: position and velocity (velocity in units of the speed cap).
/// Goal: target position. The agent starts at rest at the origin; the goal
/// is uniform over `[-GOAL_BOX, GOAL_BOX]^2`.
#[derive(Debug, Clone)]
pub struct PointReach {
    spec: EnvSpec,
    agent: PointMass,
    goal: [f64; 2],
    clock: Clock,
}

impl Default for PointReach {
    fn default() -> Self {
        Self::new()
    }
}

impl PointReach {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                id: "point_reach",
                state_dim: 4,
                action_dim: 2,
                goal_dim: 2,
                episode_length: 50,
                success_threshold: 0.05,
            },
            agent: PointMass::at([0.0, 0.0]),
            goal: [0.0, 0.0],
            clock: Clock::new(),
        }
    }

    /// Starts an episode from an explicit configuration.
    pub fn start_at(&mut self, position: [f64; 2], goal: [f64; 2]) -> GoalObservation {
        self.agent = PointMass::at(position);
        self.goal = goal;
        self.clock.restart();
        self.observe()
    }

    fn observe(&self) -> GoalObservation {
        GoalObservation {
            state: self.agent.features().to_vec(),
            achieved_goal: self.agent.pos.to_vec(),
            desired_goal: self.goal.to_vec(),
        }
    }
}

impl GoalEnv for PointReach {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> GoalObservation {
        let goal = [
            rng.random_range(-GOAL_BOX..GOAL_BOX),
            rng.random_range(-GOAL_BOX..GOAL_BOX),
        ];
        self.start_at([0.0, 0.0], goal)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != self.spec.action_dim {
            return Err(crate::Error::DimensionMismatch {
                what: "action",
                expected: self.spec.action_dim,
                got: action.len(),
            });
        }
        let done = self.clock.tick(self.spec.episode_length)?;
        self.agent.advance(action);
        let observation = self.observe();
        let reward = self.compute_reward(&observation.achieved_goal, &observation.desired_goal);
        Ok(StepOutcome {
            success: reward == 0.0,
            observation,
            reward,
            done,
        })
    }
}
