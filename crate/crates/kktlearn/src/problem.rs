//! The problem document: one JSON file holding the task, cost, parameterization and
//! demonstrations, plus optional ground truth and grid for scoring.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::GridSpec;
use crate::milp_ir::BigMConfig;
use crate::model::{ConstraintParameterization, CostModel, Demonstration, TaskSpec, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    #[serde(default)]
    pub name: String,
    /// Shared dynamics and known constraints. Each demonstration's start and goal are
    /// its own first and last states; `task.start`/`task.goal` are used for synthesis.
    pub task: TaskSpec,
    pub cost: CostModel,
    pub parameterization: ConstraintParameterization,
    #[serde(default)]
    pub demonstrations: Vec<Trajectory>,
    /// True theta, when known, for scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub big_m: BigMConfig,
}

impl Problem {
    /// Parses and validates; schema errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let p: Problem = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Spec(format!("at `{}`: {}", e.path(), e.inner())))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |what: String| move |e: Error| Error::Spec(format!("{what}: {e}"));
        self.task.validate().map_err(ctx("task".into()))?;
        self.cost
            .validate(self.task.n_x)
            .map_err(ctx("cost".into()))?;
        self.parameterization
            .validate(self.task.n_x)
            .map_err(ctx("parameterization".into()))?;
        self.big_m.validate().map_err(ctx("big_m".into()))?;
        for (j, d) in self.demonstrations.iter().enumerate() {
            Demonstration::from_template(&self.task, d.clone())
                .map_err(ctx(format!("demonstrations[{j}]")))?;
        }
        if let Some(t) = &self.truth {
            if t.len() != self.parameterization.dim_theta() {
                return Err(Error::Spec(format!(
                    "truth: expected {} entries",
                    self.parameterization.dim_theta()
                )));
            }
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(ctx("grid".into()))?;
            if g.region.len() != self.parameterization.dim_p() {
                return Err(Error::Spec(
                    "grid: dimension differs from the constraint space".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn demos(&self) -> Result<Vec<Demonstration>> {
        self.demonstrations
            .iter()
            .map(|d| Demonstration::from_template(&self.task, d.clone()))
            .collect()
    }
}
