//! Reformulation chain from the binary max-min program to a homogeneous QCQP.
//!
//! The cubic terms `w_i x_j y_jk` are linearized through `s_jk = x_j y_jk`
//! (with the three McCormick-style rows), binarity becomes `v (v - 1) = 0`,
//! and [`homogenize`] folds every linear part into an extra coordinate `t`
//! with `t^2 = 1`. Rates enter the matrices in Mbit/s ([`RATE_SCALE`]).

mod assignment;
mod homogeneous;
mod index;
mod qcqp;
mod sparse;

pub use assignment::{
    check_feasible, eval_objective, Assignment, ConstraintCheck, FeasibilityFamily,
    FeasibilityReport, ObjectiveValue, FEASIBILITY_RTOL,
};
pub use homogeneous::{homogenize, HomConstraint, HomogeneousSdp};
pub use index::IndexMap;
pub use qcqp::{
    assemble_qcqp, Family, QcqpProblem, QuadConstraint, QuadObjective, Sense, RATE_SCALE,
};
pub use sparse::{SparseVec, SymBuilder, SymMatrix};

#[cfg(test)]
pub(crate) use assignment::toy_tables;
