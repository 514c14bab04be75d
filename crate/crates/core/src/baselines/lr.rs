//! Linear relaxation of the linearized integer program. The bilinear terms
//! `w_i s_jk` get their own variables `v_ijk` with McCormick envelopes.

use serde::{Deserialize, Serialize};

use crate::conic::{solve_lp, LinearProgram, LpRow, LpSense, SolveReport, SolveStatus, SolverConfig};
use crate::error::SolverError;
use crate::formulation::{Assignment, IndexMap, RATE_SCALE};
use crate::refinement::{refine_fractional, RefineConfig, RefineOutcome};
use crate::scalar::Real;
use crate::scenario::{PowerBudget, RateTables};

/// Variable layout `[w; x; y; s; v; eta]`, all nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedProgram<T> {
    pub index: IndexMap,
    pub lp: LinearProgram<T>,
}

impl<T: Real> LinearizedProgram<T> {
    /// Offset of `v_{i,l}`.
    pub fn v(&self, i: usize, l: usize) -> usize {
        self.index.decision_len() + i * self.index.pairs() + l
    }

    pub fn eta(&self) -> usize {
        self.index.decision_len() + self.index.num_candidates * self.index.pairs()
    }

    pub fn num_vars(&self) -> usize {
        self.lp.num_vars
    }

    /// Embeds a binary assignment with `v = w (x) s` and `eta` in Mbit/s.
    pub fn embed(&self, a: &Assignment, eta_bps: f64) -> Vec<T> {
        let m = &self.index;
        let mut out: Vec<T> = a.to_z().into_iter().map(T::of).collect();
        out.resize(self.num_vars(), T::zero());
        for i in 0..m.num_candidates {
            for l in 0..m.pairs() {
                let (j, k) = m.jk(l);
                if a.w[i] && a.s(j, k) {
                    out[self.v(i, l)] = T::one();
                }
            }
        }
        let e = self.eta();
        out[e] = T::of(eta_bps * RATE_SCALE);
        out
    }

    /// Largest violation over the rows at `v`.
    pub fn max_violation(&self, v: &[T]) -> T {
        self.lp.rows.iter().fold(T::zero(), |worst, row| {
            let lhs = row.coeffs.iter().fold(T::zero(), |a, &(i, g)| a + g * v[i]);
            let viol = match row.sense {
                LpSense::Le => lhs - row.rhs,
                LpSense::Ge => row.rhs - lhs,
                LpSense::Eq => (lhs - row.rhs).abs(),
            };
            worst.max(viol)
        })
    }
}

pub fn build_lr<T: Real>(rt: &RateTables, budgets: &PowerBudget) -> LinearizedProgram<T> {
    let (ni, nj, nk) = (rt.num_candidates(), rt.num_users(), rt.num_subcarriers());
    let m = IndexMap::new(ni, nj, nk);
    let nl = m.pairs();
    let v_at = |i: usize, l: usize| m.decision_len() + i * nl + l;
    let eta = m.decision_len() + ni * nl;
    let num_vars = eta + 1;
    let rate = |r: f64| T::of(r * RATE_SCALE);
    let one = T::one();
    let mut rows = Vec::new();
    let mut push = |coeffs: Vec<(usize, T)>, sense, rhs: f64| {
        rows.push(LpRow {
            coeffs,
            sense,
            rhs: T::of(rhs),
        })
    };

    push((0..ni).map(|i| (m.w(i), one)).collect(), LpSense::Le, 1.0);
    for k in 0..nk {
        push((0..nj).map(|j| (m.y(m.l(j, k)), one)).collect(), LpSense::Le, 1.0);
    }
    push(
        (0..nl).map(|l| (m.s(l), T::of(rt.p_k[m.jk(l).1]))).collect(),
        LpSense::Le,
        budgets.p_rabs_max,
    );
    push(
        (0..nl)
            .flat_map(|l| {
                let p = T::of(rt.p_k[m.jk(l).1]);
                [(m.y(l), p), (m.s(l), -p)]
            })
            .collect(),
        LpSense::Le,
        budgets.mbs_access_budget(),
    );
    for i in 0..ni {
        push(
            (0..nl)
                .map(|l| {
                    let (j, k) = m.jk(l);
                    (v_at(i, l), rate(rt.r_rabs[i][j][k]))
                })
                .collect(),
            LpSense::Le,
            rt.c_back[i] * RATE_SCALE,
        );
    }
    for l in 0..nl {
        let j = m.jk(l).0;
        push(vec![(m.s(l), one), (m.x(j), -one)], LpSense::Le, 0.0);
        push(vec![(m.s(l), one), (m.y(l), -one)], LpSense::Le, 0.0);
        push(vec![(m.s(l), one), (m.x(j), -one), (m.y(l), -one)], LpSense::Ge, -1.0);
    }
    for i in 0..ni {
        for l in 0..nl {
            push(vec![(v_at(i, l), one), (m.w(i), -one)], LpSense::Le, 0.0);
            push(vec![(v_at(i, l), one), (m.s(l), -one)], LpSense::Le, 0.0);
            push(vec![(v_at(i, l), one), (m.w(i), -one), (m.s(l), -one)], LpSense::Ge, -1.0);
        }
    }
    // Other upper bounds follow from the exclusivity rows and the envelopes.
    for j in 0..nj {
        push(vec![(m.x(j), one)], LpSense::Le, 1.0);
    }
    for j in 0..nj {
        let mut c = vec![(eta, one)];
        for k in 0..nk {
            let l = m.l(j, k);
            for i in 0..ni {
                c.push((v_at(i, l), -rate(rt.r_rabs[i][j][k])));
            }
            c.push((m.y(l), -rate(rt.r_mbs[j][k])));
            c.push((m.s(l), rate(rt.r_mbs[j][k])));
        }
        push(c, LpSense::Le, 0.0);
    }

    let mut objective = vec![T::zero(); num_vars];
    objective[eta] = one;
    LinearizedProgram {
        index: m,
        lp: LinearProgram {
            num_vars,
            objective,
            rows,
        },
    }
}

/// Fractional deployment and association from the relaxed LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrRelaxation {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    /// LP optimum in bit/s.
    pub bound: f64,
    pub report: SolveReport,
}

pub fn solve_lr(rt: &RateTables, budgets: &PowerBudget, cfg: &SolverConfig) -> Result<LrRelaxation, SolverError> {
    let lr = build_lr::<f64>(rt, budgets);
    let sol = solve_lp(&lr.lp, cfg)?;
    let m = &lr.index;
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    Ok(LrRelaxation {
        w: (0..m.num_candidates).map(|i| clamp(sol.scalars[m.w(i)])).collect(),
        x: (0..m.num_users).map(|j| clamp(sol.scalars[m.x(j)])).collect(),
        bound: sol.objective / RATE_SCALE,
        report: SolveReport::from(&sol),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrHeuristic {
    pub relaxation: LrRelaxation,
    pub refined: RefineOutcome,
}

impl LrHeuristic {
    pub fn converged(&self) -> bool {
        self.relaxation.report.status == SolveStatus::Solved
    }
}

/// LP relaxation followed by the same deployment and rounding loop as the
/// SDR heuristic.
pub fn lr_heuristic(
    rt: &RateTables,
    budgets: &PowerBudget,
    solver: &SolverConfig,
    refine: &RefineConfig,
) -> Result<LrHeuristic, SolverError> {
    let relaxation = solve_lr(rt, budgets, solver)?;
    let refined = refine_fractional(&relaxation.w, &relaxation.x, rt, budgets, refine);
    Ok(LrHeuristic { relaxation, refined })
}
