//! Conic programs over one symmetric PSD block plus a vector of scalars, and
//! a first-order splitting solver for them.
//!
//! A program maximizes a linear functional of `(Z, v)` subject to rows
//! `rhs - (<A, Z> + g^T v)` lying in the zero cone (equalities) or the
//! nonnegative cone (`<=` rows), with `Z` PSD. Linear programs are the special
//! case with an empty matrix block.

mod admm;
mod lp;
mod psd;
mod sdr;

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::formulation::{Family, SymMatrix};
use crate::scalar::Real;

pub use admm::solve;
pub use lp::{solve_lp, LinearProgram, LpRow, LpSense};
pub use psd::{min_eigenvalue, psd_project, sorted_eigenvalues};
pub use sdr::{build_sdr, sdr_row_count};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    /// `rhs - lhs = 0`
    Zero,
    /// `rhs - lhs >= 0`
    Nonneg,
}

/// Provenance of a row, used for audits and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum RowKind {
    Lifted(Family),
    /// `eta - Tr(Q_j Z) <= 0`
    Epigraph(usize),
    /// `-v_i <= 0`
    ScalarNonneg(usize),
    Linear(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicRow<T> {
    pub kind: RowKind,
    pub mat: SymMatrix<T>,
    pub scalars: Vec<(usize, T)>,
    pub rhs: T,
    pub cone: Cone,
}

/// Maximize `<C, Z> + c^T v` over PSD `Z` of order `order` and scalars `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram<T> {
    pub order: usize,
    pub num_scalars: usize,
    /// Scalars flagged here are restricted to `v_i >= 0` by the variable
    /// domain itself; the others are free.
    pub scalar_nonneg: Vec<bool>,
    pub objective_mat: SymMatrix<T>,
    pub objective_scalars: Vec<(usize, T)>,
    pub rows: Vec<ConicRow<T>>,
}

impl<T: Real> ConicProgram<T> {
    pub fn validate(&self) -> Result<(), crate::error::SolverError> {
        use crate::error::SolverError::Malformed;
        if self.order == 0 && self.num_scalars == 0 {
            return Err(Malformed("program has no variables".into()));
        }
        if self.scalar_nonneg.len() != self.num_scalars {
            return Err(Malformed("scalar_nonneg length differs from num_scalars".into()));
        }
        let mat_ok = |m: &SymMatrix<T>| m.entries().iter().all(|&(r, c, _)| r <= c && c < self.order);
        let scal_ok = |s: &[(usize, T)]| s.iter().all(|&(i, _)| i < self.num_scalars);
        if !mat_ok(&self.objective_mat) || !scal_ok(&self.objective_scalars) {
            return Err(Malformed("objective index out of range".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !mat_ok(&row.mat) || !scal_ok(&row.scalars) {
                return Err(Malformed(format!("row {r} index out of range")));
            }
        }
        Ok(())
    }

    /// Objective value at `(Z, v)`.
    pub fn objective_at(&self, z: &DMatrix<T>, v: &[T]) -> T {
        self.objective_mat.trace_with(|r, c| z[(r, c)])
            + self.objective_scalars.iter().fold(T::zero(), |a, &(i, g)| a + g * v[i])
    }

    /// `<A, Z> + g^T v` for one row.
    pub fn row_value(&self, row: &ConicRow<T>, z: &DMatrix<T>, v: &[T]) -> T {
        row.mat.trace_with(|r, c| z[(r, c)])
            + row.scalars.iter().fold(T::zero(), |a, &(i, g)| a + g * v[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Threshold on the normalized Farkas certificate.
    pub eps_infeasible: f64,
    pub max_iter: usize,
    /// Initial penalty `mu` of the augmented Lagrangian.
    pub mu: f64,
    pub adaptive_mu: bool,
    /// Relaxation factor of the primal update, in `(0, golden ratio)`.
    pub step: f64,
    pub scaling: bool,
    /// Residuals are evaluated every this many iterations.
    pub check_interval: usize,
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            eps_infeasible: 1e-7,
            max_iter: 50_000,
            mu: 1.0,
            adaptive_mu: true,
            step: 1.6,
            scaling: true,
            check_interval: 10,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(eps: f64) -> Self {
        Self {
            eps_abs: eps,
            eps_rel: eps,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    MaxIter,
    InfeasibleDetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub objective: f64,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution<T> {
    pub z: DMatrix<T>,
    pub scalars: Vec<T>,
    /// Primal objective (maximized).
    pub objective: T,
    /// Objective of the dual iterate; an upper bound once dual-feasible.
    pub dual_objective: T,
    /// `max_r |res_r| / max(1, |rhs_r|)` over constraint rows.
    pub primal_residual: T,
    /// `||c - A^T y - S||_inf / max(1, ||c||_inf)`.
    pub dual_residual: T,
    /// `|p - d| / max(1, |p|, |d|)`.
    pub gap: T,
    pub iterations: usize,
    pub status: SolveStatus,
    pub trace: Vec<TraceRow>,
}

impl<T: Real> ConicSolution<T> {
    /// Epigraph variable of a relaxation built by [`build_sdr`].
    pub fn eta(&self) -> T {
        self.scalars[0]
    }

    pub fn write_trace_csv(&self, out: impl Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.trace {
            w.serialize(row).map_err(io::Error::other)?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl<T: Real> From<&ConicSolution<T>> for SolveReport {
    fn from(s: &ConicSolution<T>) -> Self {
        Self {
            status: s.status,
            iterations: s.iterations,
            primal_residual: s.primal_residual.to_f64_lossy(),
            dual_residual: s.dual_residual.to_f64_lossy(),
            gap: s.gap.to_f64_lossy(),
        }
    }
}
