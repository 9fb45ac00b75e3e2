use core::f64::consts::PI;

use rand::Rng;

use super::{Clock, EnvSpec, GoalEnv, GoalObservation, PointMass, StepOutcome, ARENA};
use crate::{math, Result};

pub const AGENT_RADIUS: f64 = 0.03;
pub const BLOCK_RADIUS: f64 = 0.04;
/// Half-width of the square the block starts in.
pub const BLOCK_BOX: f64 = 0.3;
/// Distance from the block to the agent's starting position.
pub const AGENT_OFFSET: f64 = 0.09;
/// The agent starts on the far side of the block from the goal, within this
/// angle of the straight line through both.
pub const APPROACH_SPREAD: f64 = PI / 3.0;
/// Range of block-to-goal distances at reset.
pub const GOAL_DISTANCE: (f64, f64) = (0.08, 0.15);

/// Push a passive disc onto a target position with a point-mass disc.
///
/// State: agent position, agent velocity (units of the speed cap), block
/// position, block position relative to the agent. Goal: target block position. The block only moves when the
/// agent overlaps it, and is then displaced along the contact normal by the
/// overlap depth.
#[derive(Debug, Clone)]
pub struct PointPush {
    spec: EnvSpec,
    agent: PointMass,
    block: [f64; 2],
    goal: [f64; 2],
    clock: Clock,
}

impl Default for PointPush {
    fn default() -> Self {
        Self::new()
    }
}

impl PointPush {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                id: "point_push",
                state_dim: 8,
                action_dim: 2,
                goal_dim: 2,
                episode_length: 50,
                success_threshold: 0.05,
            },
            agent: PointMass::at([0.0, 0.0]),
            block: [0.0, 0.0],
            goal: [0.0, 0.0],
            clock: Clock::new(),
        }
    }

    pub fn start_at(
        &mut self,
        agent: [f64; 2],
        block: [f64; 2],
        goal: [f64; 2],
    ) -> GoalObservation {
        self.agent = PointMass::at(agent);
        self.block = block;
        self.goal = goal;
        self.clock.restart();
        self.observe()
    }

    pub fn block(&self) -> [f64; 2] {
        self.block
    }

    fn resolve_contact(&mut self) {
        let d = [
            self.block[0] - self.agent.pos[0],
            self.block[1] - self.agent.pos[1],
        ];
        let dist = math::norm(&d);
        let reach = AGENT_RADIUS + BLOCK_RADIUS;
        if dist >= reach {
            return;
        }
        let normal = if dist > 0.0 {
            [d[0] / dist, d[1] / dist]
        } else {
            [1.0, 0.0]
        };
        let depth = reach - dist;
        for k in 0..2 {
            self.block[k] = (self.block[k] + normal[k] * depth).clamp(-ARENA, ARENA);
        }
    }

    fn observe(&self) -> GoalObservation {
        let f = self.agent.features();
        GoalObservation {
            state: [
                f[0],
                f[1],
                f[2],
                f[3],
                self.block[0],
                self.block[1],
                self.block[0] - f[0],
                self.block[1] - f[1],
            ]
            .to_vec(),
            achieved_goal: self.block.to_vec(),
            desired_goal: self.goal.to_vec(),
        }
    }
}

fn polar(center: [f64; 2], radius: f64, angle: f64) -> [f64; 2] {
    [
        center[0] + radius * libm::cos(angle),
        center[1] + radius * libm::sin(angle),
    ]
}

impl GoalEnv for PointPush {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> GoalObservation {
        let block = [
            rng.random_range(-BLOCK_BOX..BLOCK_BOX),
            rng.random_range(-BLOCK_BOX..BLOCK_BOX),
        ];
        let heading = rng.random_range(0.0..2.0 * PI);
        let goal = polar(
            block,
            rng.random_range(GOAL_DISTANCE.0..GOAL_DISTANCE.1),
            heading,
        );
        let behind = heading + PI + rng.random_range(-APPROACH_SPREAD..APPROACH_SPREAD);
        let agent = polar(block, AGENT_OFFSET, behind);
        self.start_at(agent, block, goal)
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
        self.resolve_contact();
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
