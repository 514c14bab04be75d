//! Max-min rate deployment for a backhaul-limited robotic aerial small cell.
//!
//! Pipeline: [`scenario`] builds rate tables from geometry and the [`channel`]
//! models; [`formulation`] lifts the binary max-min program to a homogeneous
//! QCQP; [`conic`] solves its semidefinite relaxation; [`refinement`] turns the
//! relaxed matrix into a feasible plan. [`baselines`] holds the comparison
//! methods and [`harness`] the Monte-Carlo driver.

pub mod baselines;
pub mod channel;
pub mod conic;
pub mod error;
pub mod formulation;
pub mod harness;
pub mod refinement;
pub mod scalar;
pub mod scenario;

pub use scalar::Real;

/// Double-precision instantiations of the generic core.
pub type SdpProgram = conic::ConicProgram<f64>;
pub type SdpSolution = conic::ConicSolution<f64>;
pub type Qcqp = formulation::QcqpProblem<f64>;
pub type HomSdp = formulation::HomogeneousSdp<f64>;
