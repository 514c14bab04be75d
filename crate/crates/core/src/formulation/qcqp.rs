use serde::{Deserialize, Serialize};

use super::index::IndexMap;
use super::sparse::{SparseVec, SymBuilder, SymMatrix};
use crate::error::FormulationError;
use crate::scalar::Real;
use crate::scenario::{PowerBudget, RateTables};

/// Multiplier applied to every rate and capacity during assembly (bit/s to
/// Mbit/s). Powers stay in watts.
pub const RATE_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

/// Constraint families of the lifted program, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family", content = "index")]
pub enum Family {
    /// `sum_i w_i <= 1`
    Deployment,
    /// `sum_j y_jk <= 1`
    SubcarrierExclusive(usize),
    /// `sum p_k s_l <= P_rabs`
    RabsPower,
    /// `sum p_k (y_l - s_l) <= P_mbs - p_back`
    MbsPower,
    /// `sum R_ijk w_i s_l <= C_i`
    Backhaul(usize),
    /// `s_l <= x_j`
    LinkBelowX(usize),
    /// `s_l <= y_l`
    LinkBelowY(usize),
    /// `x_j + y_l - s_l <= 1`
    LinkAbove(usize),
    BinaryW(usize),
    BinaryX(usize),
    BinaryY(usize),
    BinaryS(usize),
    /// `t^2 = 1`, homogeneous form only.
    Anchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadConstraint<T> {
    pub family: Family,
    pub quad: Option<SymMatrix<T>>,
    pub lin: SparseVec<T>,
    pub rhs: T,
    pub sense: Sense,
}

impl<T: Real> QuadConstraint<T> {
    pub fn lhs(&self, z: &[T]) -> T {
        self.quad.as_ref().map_or(T::zero(), |q| q.quad_form(z)) + self.lin.dot(z)
    }
}

/// Per-user objective `z^T Q z + q^T z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadObjective<T> {
    pub quad: SymMatrix<T>,
    pub lin: SparseVec<T>,
}

impl<T: Real> QuadObjective<T> {
    pub fn value(&self, z: &[T]) -> T {
        self.quad.quad_form(z) + self.lin.dot(z)
    }
}

/// Lifted inhomogeneous QCQP over `z = [w; x; y; s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcqpProblem<T> {
    pub index: IndexMap,
    pub objectives: Vec<QuadObjective<T>>,
    pub constraints: Vec<QuadConstraint<T>>,
    /// Factor applied to rates; divide objective values by it to get bit/s.
    pub rate_scale: f64,
}

impl<T: Real> QcqpProblem<T> {
    pub fn objective_values(&self, z: &[T]) -> Vec<T> {
        self.objectives.iter().map(|o| o.value(z)).collect()
    }

    /// Whether `z` satisfies every constraint within `tol`, scaled by
    /// `max(1, |rhs|)`.
    pub fn is_satisfied(&self, z: &[T], tol: T) -> bool {
        self.constraints.iter().all(|c| {
            let lhs = c.lhs(z);
            let scale = c.rhs.abs().max(T::one());
            match c.sense {
                Sense::Le => lhs <= c.rhs + tol * scale,
                Sense::Eq => (lhs - c.rhs).abs() <= tol * scale,
            }
        })
    }
}

fn check_dims(rt: &RateTables) -> Result<IndexMap, FormulationError> {
    let (ni, nj, nk) = (rt.num_candidates(), rt.num_users(), rt.num_subcarriers());
    let expect = |what, expected: usize, found: usize| {
        if expected == found {
            Ok(())
        } else {
            Err(FormulationError::Dimension {
                what,
                expected,
                found,
            })
        }
    };
    expect("c_back", ni, rt.c_back.len())?;
    expect("bandwidth_hz", nk, rt.bandwidth_hz.len())?;
    for row in &rt.r_mbs {
        expect("r_mbs row", nk, row.len())?;
    }
    for plane in &rt.r_rabs {
        expect("r_rabs users", nj, plane.len())?;
        for row in plane {
            expect("r_rabs row", nk, row.len())?;
        }
    }
    Ok(IndexMap::new(ni, nj, nk))
}

/// Builds the lifted QCQP: objectives, power and exclusivity rows, the
/// bilinear backhaul rows, the three linearization rows per `(j, k)` and the
/// quadratic binarity equalities `v (v - 1) = 0`.
pub fn assemble_qcqp<T: Real>(
    rt: &RateTables,
    budgets: &PowerBudget,
) -> Result<QcqpProblem<T>, FormulationError> {
    let m = check_dims(rt)?;
    let (ni, nj, nk, nl) = (m.num_candidates, m.num_users, m.num_subcarriers, m.pairs());
    let rate = |r: f64| T::of(r * RATE_SCALE);
    let half = T::of(0.5);
    let one = T::one();

    let objectives = (0..nj)
        .map(|j| {
            let mut q = SymBuilder::default();
            let mut lin = Vec::with_capacity(2 * nk);
            for k in 0..nk {
                let l = m.l(j, k);
                for i in 0..ni {
                    q.add_sym(m.w(i), m.s(l), rate(rt.r_rabs[i][j][k]) * half);
                }
                lin.push((m.y(l), rate(rt.r_mbs[j][k])));
                lin.push((m.s(l), -rate(rt.r_mbs[j][k])));
            }
            QuadObjective {
                quad: q.build(),
                lin: SparseVec::from_pairs(lin),
            }
        })
        .collect();

    let mut constraints = Vec::with_capacity(3 + nk + 2 * ni + nj + 5 * nl);
    let linear = |family, lin: Vec<(usize, T)>, rhs: T| QuadConstraint {
        family,
        quad: None,
        lin: SparseVec::from_pairs(lin),
        rhs,
        sense: Sense::Le,
    };

    constraints.push(linear(
        Family::Deployment,
        (0..ni).map(|i| (m.w(i), one)).collect(),
        one,
    ));
    for k in 0..nk {
        constraints.push(linear(
            Family::SubcarrierExclusive(k),
            (0..nj).map(|j| (m.y(m.l(j, k)), one)).collect(),
            one,
        ));
    }
    constraints.push(linear(
        Family::RabsPower,
        (0..nl).map(|l| (m.s(l), T::of(rt.p_k[m.jk(l).1]))).collect(),
        T::of(budgets.p_rabs_max),
    ));
    constraints.push(linear(
        Family::MbsPower,
        (0..nl)
            .flat_map(|l| {
                let p = T::of(rt.p_k[m.jk(l).1]);
                [(m.y(l), p), (m.s(l), -p)]
            })
            .collect(),
        T::of(budgets.mbs_access_budget()),
    ));
    for i in 0..ni {
        let mut q = SymBuilder::default();
        for l in 0..nl {
            let (j, k) = m.jk(l);
            q.add_sym(m.w(i), m.s(l), rate(rt.r_rabs[i][j][k]) * half);
        }
        constraints.push(QuadConstraint {
            family: Family::Backhaul(i),
            quad: Some(q.build()),
            lin: SparseVec::default(),
            rhs: rate(rt.c_back[i]),
            sense: Sense::Le,
        });
    }
    for l in 0..nl {
        let (j, _) = m.jk(l);
        constraints.push(linear(
            Family::LinkBelowX(l),
            vec![(m.s(l), one), (m.x(j), -one)],
            T::zero(),
        ));
    }
    for l in 0..nl {
        constraints.push(linear(
            Family::LinkBelowY(l),
            vec![(m.s(l), one), (m.y(l), -one)],
            T::zero(),
        ));
    }
    for l in 0..nl {
        let (j, _) = m.jk(l);
        constraints.push(linear(
            Family::LinkAbove(l),
            vec![(m.x(j), one), (m.y(l), one), (m.s(l), -one)],
            one,
        ));
    }

    let binary = |family, v: usize| {
        let mut q = SymBuilder::default();
        q.add_sym(v, v, one);
        QuadConstraint {
            family,
            quad: Some(q.build()),
            lin: SparseVec::from_pairs([(v, -one)]),
            rhs: T::zero(),
            sense: Sense::Eq,
        }
    };
    constraints.extend((0..ni).map(|i| binary(Family::BinaryW(i), m.w(i))));
    constraints.extend((0..nj).map(|j| binary(Family::BinaryX(j), m.x(j))));
    constraints.extend((0..nl).map(|l| binary(Family::BinaryY(l), m.y(l))));
    constraints.extend((0..nl).map(|l| binary(Family::BinaryS(l), m.s(l))));

    Ok(QcqpProblem {
        index: m,
        objectives,
        constraints,
        rate_scale: RATE_SCALE,
    })
}
