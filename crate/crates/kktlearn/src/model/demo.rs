use serde::{Deserialize, Serialize};

use super::task::TaskSpec;
use super::trajectory::Trajectory;
use crate::error::Result;

/// A demonstration together with the task it solves. Demonstrations of one problem share
/// dynamics and known constraints but may have their own start and goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub task: TaskSpec,
    pub trajectory: Trajectory,
}

impl Demonstration {
    /// Pins the task endpoints to the trajectory's first and last states.
    pub fn from_template(template: &TaskSpec, trajectory: Trajectory) -> Result<Self> {
        let task = template.with_endpoints(
            trajectory.states.first().cloned().unwrap_or_default(),
            trajectory.states.last().cloned().unwrap_or_default(),
        );
        let d = Self { task, trajectory };
        d.task.validate()?;
        d.task.check_trajectory(&d.trajectory)?;
        Ok(d)
    }
}
