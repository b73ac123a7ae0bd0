use super::encode::{
    encode_affine_relaxed, encode_union, suboptimal_objective, EncodingMode, KktBlock, ParamHandles,
};
use crate::error::Result;
use crate::milp_ir::{BigMConfig, LinExpr, MilpModel};
use crate::model::{ConstraintParameterization, CostModel, Family, TaskSpec, Trajectory};

/// A MILP over theta (and gamma when unknown) holding the KKT conditions of a set of
/// demonstrations. Any feasible point lies in the set of parameters consistent with all of them.
#[derive(Clone, Debug)]
pub struct KktProgram {
    pub model: MilpModel,
    pub handles: ParamHandles,
    pub blocks: Vec<KktBlock>,
    pub param: ConstraintParameterization,
    pub cost: CostModel,
    pub config: BigMConfig,
    pub mode: EncodingMode,
    /// Per-demonstration L1 penalty expressions (suboptimal mode, after [`KktProgram::finish`]).
    pub penalties: Vec<LinExpr>,
    finished: bool,
}

impl KktProgram {
    pub fn new(
        param: &ConstraintParameterization,
        cost: &CostModel,
        config: &BigMConfig,
        mode: EncodingMode,
    ) -> Result<Self> {
        config.validate()?;
        let mut model = MilpModel::new("kkt");
        let handles = ParamHandles::declare(&mut model, param, cost)?;
        Ok(Self {
            model,
            handles,
            blocks: Vec::new(),
            param: param.clone(),
            cost: cost.clone(),
            config: *config,
            mode,
            penalties: Vec::new(),
            finished: false,
        })
    }

    /// Encodes one demonstration under its own task (per-demo start and goal).
    pub fn add_demo(&mut self, demo: &Trajectory, task: &TaskSpec) -> Result<&KktBlock> {
        task.validate()?;
        self.param.validate(task.n_x)?;
        self.cost.validate(task.n_x)?;
        let j = self.blocks.len();
        let block = match self.param.family {
            Family::AffineInTheta { .. } => encode_affine_relaxed(
                &mut self.model,
                &self.handles,
                j,
                demo,
                task,
                &self.cost,
                &self.param,
                &self.config,
                self.mode,
            )?,
            _ => encode_union(
                &mut self.model,
                &self.handles,
                j,
                demo,
                task,
                &self.cost,
                &self.param,
                &self.config,
                self.mode,
            )?,
        };
        self.blocks.push(block);
        self.finished = false;
        Ok(self.blocks.last().expect("just pushed"))
    }

    /// Installs the suboptimality objective; a no-op in exact mode. Idempotent.
    pub fn finish(&mut self) -> Result<()> {
        if self.finished {
            return Ok(());
        }
        if self.mode == EncodingMode::Suboptimal {
            let start = self.penalties.len();
            let fresh = suboptimal_objective(&mut self.model, &self.blocks[start..])?;
            self.penalties.extend(fresh);
        }
        self.finished = true;
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| b.warnings.iter().cloned())
            .collect()
    }

    pub fn theta_values(&self, values: &[f64]) -> Vec<f64> {
        self.handles.theta.iter().map(|v| values[v.0]).collect()
    }

    pub fn gamma_values(&self, values: &[f64]) -> Option<Vec<f64>> {
        self.handles
            .gamma
            .as_ref()
            .map(|g| g.iter().map(|v| values[v.0]).collect())
    }
}
