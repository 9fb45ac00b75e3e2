//! Goal-augmented environments with the sparse `{-1, 0}` reward.
//!
//! An episode runs steps `t = 0..=T`, i.e. `T + 1` transitions, and reports
//! `done` on the step with index `T`. All randomness is drawn in `reset`;
//! dynamics are deterministic given state and action.

mod point_push;
mod point_reach;

use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::Result;

pub use point_push::PointPush;
pub use point_reach::PointReach;

/// Environment observation split into state and goals.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalObservation {
    pub state: Vec<f64>,
    pub achieved_goal: Vec<f64>,
    pub desired_goal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub id: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub goal_dim: usize,
    /// Index of the last step; an episode has `episode_length + 1` steps.
    pub episode_length: usize,
    pub success_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: GoalObservation,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

/// Absolute slack on the success boundary. Positions built from sums of
/// `0.05` steps land a few ulps off the exact boundary.
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// Whether `achieved` lies within `threshold` of `desired` (inclusive).
pub fn within_threshold(achieved: &[f64], desired: &[f64], threshold: f64) -> bool {
    assert_eq!(achieved.len(), desired.len(), "goal dimensions differ");
    math::distance(achieved, desired) <= threshold + BOUNDARY_SLACK
}

/// Sparse reward shared by all environments: `0` within `threshold`
/// (inclusive), `-1` otherwise.
pub fn sparse_reward(achieved: &[f64], desired: &[f64], threshold: f64) -> f64 {
    if within_threshold(achieved, desired, threshold) {
        0.0
    } else {
        -1.0
    }
}

pub trait GoalEnv {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode, drawing the initial state and desired goal.
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> GoalObservation;

    /// Advances one step. Actions are clipped to `[-1, 1]` per dimension.
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    fn compute_reward(&self, achieved_goal: &[f64], desired_goal: &[f64]) -> f64 {
        sparse_reward(achieved_goal, desired_goal, self.spec().success_threshold)
    }

    fn is_success(&self, achieved_goal: &[f64], desired_goal: &[f64]) -> bool {
        within_threshold(achieved_goal, desired_goal, self.spec().success_threshold)
    }
}

/// Environment selected by id.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Reach(PointReach),
    Push(PointPush),
}

impl AnyEnv {
    pub const IDS: [&'static str; 2] = ["point_reach", "point_push"];

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "point_reach" => Some(AnyEnv::Reach(PointReach::new())),
            "point_push" => Some(AnyEnv::Push(PointPush::new())),
            _ => None,
        }
    }
}

impl GoalEnv for AnyEnv {
    fn spec(&self) -> &EnvSpec {
        match self {
            AnyEnv::Reach(e) => e.spec(),
            AnyEnv::Push(e) => e.spec(),
        }
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> GoalObservation {
        match self {
            AnyEnv::Reach(e) => e.reset(rng),
            AnyEnv::Push(e) => e.reset(rng),
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        match self {
            AnyEnv::Reach(e) => e.step(action),
            AnyEnv::Push(e) => e.step(action),
        }
    }
}

/// Point-mass kinematics shared by both tasks.
///
/// Position advances with the current velocity, then the velocity takes the
/// acceleration `ACCEL_SCALE * action` and is capped at `MAX_SPEED`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PointMass {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

pub(crate) const ACCEL_SCALE: f64 = 0.05;
pub(crate) const MAX_SPEED: f64 = 0.05;
pub(crate) const ARENA: f64 = 1.0;

impl PointMass {
    pub fn at(pos: [f64; 2]) -> Self {
        Self {
            pos,
            vel: [0.0, 0.0],
        }
    }

    pub fn advance(&mut self, action: &[f64]) {
        for k in 0..2 {
            self.pos[k] += self.vel[k];
            if self.pos[k].abs() > ARENA {
                self.pos[k] = self.pos[k].clamp(-ARENA, ARENA);
                self.vel[k] = 0.0;
            }
        }
        for k in 0..2 {
            self.vel[k] += ACCEL_SCALE * action[k].clamp(-1.0, 1.0);
        }
        let speed = math::norm(&self.vel);
        if speed > MAX_SPEED {
            let s = MAX_SPEED / speed;
            self.vel[0] *= s;
            self.vel[1] *= s;
        }
    }

    /// Position followed by velocity in units of `MAX_SPEED`.
    pub fn features(&self) -> [f64; 4] {
        [
            self.pos[0],
            self.pos[1],
            self.vel[0] / MAX_SPEED,
            self.vel[1] / MAX_SPEED,
        ]
    }
}

/// Step bookkeeping common to both tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Clock {
    pub t: usize,
    pub finished: bool,
}

impl Clock {
    pub fn new() -> Self {
        Self {
            t: 0,
            finished: true,
        }
    }

    pub fn restart(&mut self) {
        self.t = 0;
        self.finished = false;
    }

    /// Consumes one step index and reports whether it was the last.
    pub fn tick(&mut self, episode_length: usize) -> Result<bool> {
        if self.finished {
            return Err(crate::Error::StepAfterDone);
        }
        let done = self.t == episode_length;
        self.t += 1;
        self.finished = done;
        Ok(done)
    }
}
