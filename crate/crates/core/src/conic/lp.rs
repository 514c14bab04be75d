//! Linear programs over nonnegative variables, solved by the conic engine with
//! an empty matrix block.

use serde::{Deserialize, Serialize};

use super::{solve, Cone, ConicProgram, ConicRow, ConicSolution, RowKind, SolverConfig};
use crate::error::SolverError;
use crate::formulation::SymBuilder;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow<T> {
    pub coeffs: Vec<(usize, T)>,
    pub sense: LpSense,
    pub rhs: T,
}

/// Maximize `objective^T v` subject to `rows`, `v >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub rows: Vec<LpRow<T>>,
}

impl<T: Real> LinearProgram<T> {
    pub fn to_conic(&self) -> ConicProgram<T> {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let flip = row.sense == LpSense::Ge;
                let sign = if flip { -T::one() } else { T::one() };
                ConicRow {
                    kind: RowKind::Linear(r),
                    mat: SymBuilder::default().build(),
                    scalars: row.coeffs.iter().map(|&(i, g)| (i, g * sign)).collect(),
                    rhs: row.rhs * sign,
                    cone: if row.sense == LpSense::Eq {
                        Cone::Zero
                    } else {
                        Cone::Nonneg
                    },
                }
            })
            .collect();
        ConicProgram {
            order: 0,
            num_scalars: self.num_vars,
            scalar_nonneg: vec![true; self.num_vars],
            objective_mat: SymBuilder::default().build(),
            objective_scalars: self
                .objective
                .iter()
                .enumerate()
                .filter(|(_, g)| **g != T::zero())
                .map(|(i, g)| (i, *g))
                .collect(),
            rows,
        }
    }
}

/// Solves the LP; the solution vector is `ConicSolution::scalars`.
pub fn solve_lp<T: Real>(
    lp: &LinearProgram<T>,
    cfg: &SolverConfig,
) -> Result<ConicSolution<T>, SolverError> {
    if lp.objective.len() != lp.num_vars {
        return Err(SolverError::Malformed("objective length differs from num_vars".into()));
    }
    solve(&lp.to_conic(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::SolveStatus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(coeffs: &[(usize, f64)], sense: LpSense, rhs: f64) -> LpRow<f64> {
        LpRow {
            coeffs: coeffs.to_vec(),
            sense,
            rhs,
        }
    }

    #[test]
    fn bounded_single_variable() {
        let lp = LinearProgram {
            num_vars: 1,
            objective: vec![1.0],
            rows: vec![row(&[(0, 1.0)], LpSense::Le, 1.0)],
        };
        let sol = solve_lp(&lp, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved);
        assert!((sol.scalars[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_single_variable() {
        let lp = LinearProgram {
            num_vars: 1,
            objective: vec![1.0],
            rows: vec![row(&[(0, 1.0)], LpSense::Le, -1.0)],
        };
        let sol = solve_lp(&lp, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::InfeasibleDetected);
    }

    #[test]
    fn ge_and_eq_rows() {
        // max -a - b  s.t. a + b >= 2, a - b = 1  ->  a = 1.5, b = 0.5
        let lp = LinearProgram {
            num_vars: 2,
            objective: vec![-1.0, -1.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], LpSense::Ge, 2.0),
                row(&[(0, 1.0), (1, -1.0)], LpSense::Eq, 1.0),
            ],
        };
        let sol = solve_lp(&lp, &SolverConfig::with_tolerance(1e-8)).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved);
        assert!((sol.scalars[0] - 1.5).abs() < 1e-6);
        assert!((sol.scalars[1] - 0.5).abs() < 1e-6);
        assert!((sol.objective + 2.0).abs() < 1e-6);
    }

    /// Best vertex of `{v >= 0, A v <= b}` in two dimensions by intersecting
    /// every pair of boundary lines.
    fn brute_force(a: &[[f64; 2]], b: &[f64], c: [f64; 2]) -> f64 {
        let mut lines: Vec<([f64; 2], f64)> = a.iter().copied().zip(b.iter().copied()).collect();
        lines.push(([-1.0, 0.0], 0.0));
        lines.push(([0.0, -1.0], 0.0));
        let mut best = f64::NEG_INFINITY;
        for p in 0..lines.len() {
            for q in (p + 1)..lines.len() {
                let ([a1, b1], r1) = lines[p];
                let ([a2, b2], r2) = lines[q];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (r1 * b2 - r2 * b1) / det;
                let y = (a1 * r2 - a2 * r1) / det;
                if lines.iter().all(|([u, v], r)| u * x + v * y <= r + 1e-9) {
                    best = best.max(c[0] * x + c[1] * y);
                }
            }
        }
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = rng.random_range(2..6);
            let a: Vec<[f64; 2]> = (0..m)
                .map(|_| [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)])
                .collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
            let c = [rng.random_range(-1.0..2.0), rng.random_range(0.1..2.0)];
            let lp = LinearProgram {
                num_vars: 2,
                objective: c.to_vec(),
                rows: a
                    .iter()
                    .zip(&b)
                    .map(|(r, &rhs)| row(&[(0, r[0]), (1, r[1])], LpSense::Le, rhs))
                    .collect(),
            };
            let sol = solve_lp(&lp, &SolverConfig::with_tolerance(1e-9)).unwrap();
            assert_eq!(sol.status, SolveStatus::Solved);
            let expect = brute_force(&a, &b, c);
            assert!((sol.objective - expect).abs() < 1e-6, "{} vs {expect}", sol.objective);
        }
    }

    #[test]
    fn single_precision_lp() {
        let lp = LinearProgram {
            num_vars: 2,
            objective: vec![1.0f32, 1.0],
            rows: vec![LpRow {
                coeffs: vec![(0, 1.0), (1, 2.0)],
                sense: LpSense::Le,
                rhs: 2.0,
            }],
        };
        let sol = solve_lp(&lp, &SolverConfig::with_tolerance(1e-4)).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved);
        assert!((sol.objective - 2.0).abs() < 1e-3);
    }
}
