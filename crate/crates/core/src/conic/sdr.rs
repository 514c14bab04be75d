//! Semidefinite relaxation of the homogeneous QCQP: `z~ z~^T` becomes a PSD
//! matrix `Z` and the max-min objective an epigraph scalar `eta`.

use super::{Cone, ConicProgram, ConicRow, RowKind};
use crate::formulation::{HomogeneousSdp, Sense, SymBuilder, SymMatrix};
use crate::scalar::Real;

/// Maximize `eta` s.t. `Tr(Q_j Z) >= eta` for every user, `eta >= 0`, the
/// lifted constraints, and `Z` PSD. Scalar 0 is `eta`.
pub fn build_sdr<T: Real>(h: &HomogeneousSdp<T>) -> ConicProgram<T> {
    let mut rows: Vec<ConicRow<T>> = h
        .constraints
        .iter()
        .map(|c| ConicRow {
            kind: RowKind::Lifted(c.family),
            mat: c.mat.clone(),
            scalars: vec![],
            rhs: c.rhs,
            cone: match c.sense {
                Sense::Le => Cone::Nonneg,
                Sense::Eq => Cone::Zero,
            },
        })
        .collect();
    for (j, q) in h.objectives.iter().enumerate() {
        rows.push(ConicRow {
            kind: RowKind::Epigraph(j),
            mat: negate(q),
            scalars: vec![(0, T::one())],
            rhs: T::zero(),
            cone: Cone::Nonneg,
        });
    }
    rows.push(ConicRow {
        kind: RowKind::ScalarNonneg(0),
        mat: SymBuilder::default().build(),
        scalars: vec![(0, -T::one())],
        rhs: T::zero(),
        cone: Cone::Nonneg,
    });
    ConicProgram {
        order: h.dim(),
        num_scalars: 1,
        scalar_nonneg: vec![false],
        objective_mat: SymBuilder::default().build(),
        objective_scalars: vec![(0, T::one())],
        rows,
    }
}

fn negate<T: Real>(q: &SymMatrix<T>) -> SymMatrix<T> {
    let mut b = SymBuilder::default();
    for &(r, c, v) in q.entries() {
        b.add_sym(r, c, -v);
    }
    b.build()
}

/// Rows emitted by [`build_sdr`] for `I` candidates, `J` users, `K` subcarriers.
pub fn sdr_row_count(num_candidates: usize, num_users: usize, num_subcarriers: usize) -> usize {
    let (i, j, k) = (num_candidates, num_users, num_subcarriers);
    let l = j * k;
    1 + k + 2 + i + 3 * l + (i + j + 2 * l) + 1 + j + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{min_eigenvalue, solve, SolveStatus, SolverConfig};
    use crate::formulation::{assemble_qcqp, eval_objective, homogenize, toy_tables, Assignment};
    use crate::scenario::PowerBudget;
    use nalgebra::DMatrix;

    fn toy_sdr() -> (ConicProgram<f64>, HomogeneousSdp<f64>) {
        let h = homogenize(&assemble_qcqp::<f64>(&toy_tables(), &PowerBudget::default()).unwrap());
        (build_sdr(&h), h)
    }

    #[test]
    fn row_count_formula() {
        let (p, h) = toy_sdr();
        assert_eq!(p.rows.len(), sdr_row_count(2, 2, 3));
        assert_eq!(p.order, h.dim());
        assert!(p.validate().is_ok());
    }

    #[test]
    fn lifted_assignment_is_feasible_with_its_value() {
        let (p, _) = toy_sdr();
        let rt = toy_tables();
        let mut a = Assignment::empty_for(&rt);
        a.w[0] = true;
        a.x[0] = true;
        a.y[0][0] = true;
        a.y[1][2] = true;
        let zt = DMatrix::from_column_slice(p.order, 1, &a.to_z_tilde());
        let z = &zt * zt.transpose();
        let eta = eval_objective(&a, &rt).min * 1e-6;
        for row in &p.rows {
            let lhs = p.row_value(row, &z, &[eta]);
            match row.cone {
                Cone::Zero => assert!((lhs - row.rhs).abs() < 1e-9, "{:?}", row.kind),
                Cone::Nonneg => assert!(lhs <= row.rhs + 1e-9, "{:?}", row.kind),
            }
        }
    }

    #[test]
    fn relaxation_bounds_a_feasible_plan() {
        let (p, _) = toy_sdr();
        let sol = solve(&p, &SolverConfig::with_tolerance(1e-7)).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved);
        // user 0 via site 0 on subcarrier 0 and user 1 via the MBS on 1: min 0.25 Mbps
        assert!(sol.eta() >= 0.25 - 1e-5);
        assert!(min_eigenvalue(&sol.z) > -1e-6);
        let t = p.order - 1;
        assert!((sol.z[(t, t)] - 1.0).abs() < 1e-5);
    }
}
