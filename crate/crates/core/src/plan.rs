//! Timed cell plans: a finite prefix followed by a designated loop segment
//! that the robot keeps repeating until the next replan.

use crate::workspace::{Cell, Time};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PlanError {
    #[error("plan is empty")]
    Empty,
    #[error("plan steps at index {0} are not adjacent-or-equal")]
    NotAdjacent(usize),
    #[error("plan timestamps not contiguous at index {0}")]
    BadTimestamps(usize),
    #[error("loop_start {0} out of range")]
    BadLoopStart(usize),
    #[error("loop segment does not close on its start cell")]
    OpenLoop,
}

/// A timed cell path.  `steps[0]` is the robot's position at plan start; each
/// subsequent entry is one second later and either a 4-neighbor move or a wait.
/// `steps[loop_start..]` is the suffix cycle: its first and last cells agree,
/// and repeating it (re-timed) extends the plan indefinitely.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedPlan {
    pub steps: Vec<(Time, Cell)>,
    pub loop_start: usize,
}

impl TimedPlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.steps.is_empty() {
            return Err(PlanError::Empty);
        }
        for i in 1..self.steps.len() {
            let (t0, c0) = self.steps[i - 1];
            let (t1, c1) = self.steps[i];
            if t1 != t0 + 1 {
                return Err(PlanError::BadTimestamps(i));
            }
            if c0 != c1 && !c0.adjacent(c1) {
                return Err(PlanError::NotAdjacent(i));
            }
        }
        if self.loop_start >= self.steps.len() {
            return Err(PlanError::BadLoopStart(self.loop_start));
        }
        if self.steps[self.loop_start].1 != self.steps[self.steps.len() - 1].1 {
            return Err(PlanError::OpenLoop);
        }
        Ok(())
    }

    pub fn start_time(&self) -> Time {
        self.steps[0].0
    }

    pub fn end_time(&self) -> Time {
        self.steps[self.steps.len() - 1].0
    }
}
