use serde::{Deserialize, Serialize};

use super::exact::{exact_mbs_only, EnumLimits};
use crate::formulation::{eval_objective, Assignment};
use crate::refinement::{greedy_subcarriers, AssignmentMode};
use crate::scenario::{PowerBudget, RateTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MbsOnlyMode {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbsOnlyResult {
    pub assignment: Assignment,
    pub value: f64,
    pub mode: MbsOnlyMode,
}

/// Single-tier network: no RABS, every user on the MBS. Exact when
/// `(J + 1)^K` fits the enumeration budget, greedy otherwise.
pub fn mbs_only(rt: &RateTables, budgets: &PowerBudget, limits: &EnumLimits) -> MbsOnlyResult {
    if let Ok(r) = exact_mbs_only(rt, budgets, limits) {
        return MbsOnlyResult {
            assignment: r.assignment,
            value: r.value,
            mode: MbsOnlyMode::Exact,
        };
    }
    mbs_only_greedy(rt, budgets)
}

pub fn mbs_only_greedy(rt: &RateTables, budgets: &PowerBudget) -> MbsOnlyResult {
    let w = vec![false; rt.num_candidates()];
    let x = vec![false; rt.num_users()];
    let y = greedy_subcarriers(&w, &x, rt, budgets, AssignmentMode::SkipAndContinue);
    let assignment = Assignment { w, x, y };
    MbsOnlyResult {
        value: eval_objective(&assignment, rt).min,
        assignment,
        mode: MbsOnlyMode::Greedy,
    }
}
