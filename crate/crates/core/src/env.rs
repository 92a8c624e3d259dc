//! The episodic environment contract the learner drives.

use crate::episode::{StateVector, Termination};
use crate::error::Result;

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub reward: f64,
    pub done: bool,
}

/// An episode in progress. Constructing the value is the reset; `step` advances it
/// until `done`. Any simulator (including an external crop model bridge) can sit
/// behind this trait.
pub trait Environment {
    /// The state the next action will be chosen in.
    fn state(&self) -> StateVector;

    fn step(&mut self, action_index: usize) -> Result<Transition>;

    fn num_actions(&self) -> usize;

    fn is_done(&self) -> bool;

    /// Calendar day of the current state; 0 for environments without a calendar.
    fn day_of_year(&self) -> u32 {
        0
    }

    /// Terminal yield (kg/ha), available once done.
    fn final_yield(&self) -> Option<f64> {
        None
    }

    fn termination(&self) -> Option<Termination> {
        self.is_done().then_some(Termination::Environment)
    }

    fn episode_id(&self) -> i32 {
        0
    }
}
