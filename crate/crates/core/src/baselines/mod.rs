//! Comparison methods: the LP-relaxation heuristic, the single-tier MBS-only
//! network, and an exhaustive optimum for small instances.

mod exact;
mod lr;
mod mbs;

pub use exact::{exact_enumerate, exact_with_deployment, search_space, EnumLimits, ExactResult};
pub use lr::{build_lr, lr_heuristic, solve_lr, LinearizedProgram, LrHeuristic, LrRelaxation};
pub use mbs::{mbs_only, mbs_only_greedy, MbsOnlyMode, MbsOnlyResult};
