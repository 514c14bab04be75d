//! Turns a relaxed solution into a feasible binary plan: one RABS site by
//! greedy argmax, user association by randomized rounding, subcarriers by a
//! greedy max-min rule, repeated `t_max` times keeping the best.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{build_sdr, solve, sorted_eigenvalues, ConicSolution, SolveReport, SolverConfig};
use crate::error::PipelineError;
use crate::formulation::{
    assemble_qcqp, check_feasible, eval_objective, homogenize, Assignment, HomogeneousSdp, IndexMap,
    RATE_SCALE,
};
use crate::scalar::Real;
use crate::scenario::{PowerBudget, RateTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    /// Stop at the first subcarrier whose assignment breaks a power or
    /// backhaul budget.
    #[default]
    PaperFaithful,
    /// Offer a rejected subcarrier to the next users in rate order and only
    /// drop it when nobody can take it.
    SkipAndContinue,
}

impl AssignmentMode {
    pub fn name(self) -> &'static str {
        match self {
            AssignmentMode::PaperFaithful => "paper_faithful",
            AssignmentMode::SkipAndContinue => "skip_and_continue",
        }
    }
}

impl std::str::FromStr for AssignmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper_faithful" => Ok(AssignmentMode::PaperFaithful),
            "skip_and_continue" => Ok(AssignmentMode::SkipAndContinue),
            _ => Err(format!("unknown mode `{s}` (expected paper_faithful or skip_and_continue)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Rounding repetitions; 0 is treated as 1.
    pub t_max: usize,
    pub rng_seed: u64,
    pub rank_one_tol: f64,
    pub mode: AssignmentMode,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            t_max: 10,
            rng_seed: 0,
            rank_one_tol: 1e-6,
            mode: AssignmentMode::PaperFaithful,
        }
    }
}

/// Decision coordinates of `diag(Z)` clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedDiagonal {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
}

impl RelaxedDiagonal {
    /// Coordinates rounded at one half.
    pub fn round(&self, index: &IndexMap) -> Assignment {
        let bit = |v: f64| v >= 0.5;
        let mut a = Assignment::empty(index.num_candidates, index.num_users, index.num_subcarriers);
        a.w = self.w.iter().map(|v| bit(*v)).collect();
        a.x = self.x.iter().map(|v| bit(*v)).collect();
        for (l, v) in self.z[index.y(0)..index.s(0)].iter().enumerate() {
            let (j, k) = index.jk(l);
            a.y[j][k] = bit(*v);
        }
        a
    }
}

pub fn extract_diagonal<T: Real>(z: &DMatrix<T>, index: &IndexMap) -> RelaxedDiagonal {
    let n = index.decision_len();
    let d: Vec<f64> = (0..n)
        .map(|i| z[(i, i)].to_f64_lossy().clamp(0.0, 1.0))
        .collect();
    RelaxedDiagonal {
        w: d[..index.num_candidates].to_vec(),
        x: d[index.x(0)..index.x(0) + index.num_users].to_vec(),
        z: d,
    }
}

/// `lambda_2 / lambda_1 <= tol` with `lambda_1 > 0`.
pub fn rank_one_check<T: Real>(z: &DMatrix<T>, tol: f64) -> bool {
    let ev = sorted_eigenvalues(z);
    let Some(l1) = ev.first().map(|v| v.to_f64_lossy()) else {
        return false;
    };
    if l1 <= 0.0 {
        return false;
    }
    ev.get(1).map_or(0.0, |v| v.to_f64_lossy()) / l1 <= tol
}

/// One-hot at the argmax, ties to the lowest index.
pub fn greedy_deployment(w_sdr: &[f64]) -> Vec<bool> {
    let mut best = 0;
    for (i, v) in w_sdr.iter().enumerate() {
        if *v > w_sdr[best] {
            best = i;
        }
    }
    (0..w_sdr.len()).map(|i| i == best).collect()
}

pub fn randomized_association<R: Rng + ?Sized>(x_sdr: &[f64], rng: &mut R) -> Vec<bool> {
    x_sdr.iter().map(|p| rng.random::<f64>() < *p).collect()
}

/// Path loss from user `j` to the station that serves it under `(w, x)`.
fn serving_pathloss(rt: &RateTables, w: &[bool], x: &[bool], j: usize) -> f64 {
    match w.iter().position(|b| *b) {
        Some(i) if x[j] => rt.pl_rabs_db[i][j],
        _ => rt.pl_mbs_db[j],
    }
}

/// Greedy max-min subcarrier allocation for fixed `(w, x)`. The result always
/// passes [`check_feasible`] provided the empty allocation does.
pub fn greedy_subcarriers(
    w: &[bool],
    x: &[bool],
    rt: &RateTables,
    budgets: &PowerBudget,
    mode: AssignmentMode,
) -> Vec<Vec<bool>> {
    let (nj, nk) = (rt.num_users(), rt.num_subcarriers());
    let mut a = Assignment {
        w: w.to_vec(),
        x: x.to_vec(),
        y: vec![vec![false; nk]; nj],
    };
    if nj == 0 {
        return a.y;
    }
    let pathloss: Vec<f64> = (0..nj).map(|j| serving_pathloss(rt, w, x, j)).collect();

    let mut order: Vec<usize> = (0..nk).collect();
    order.sort_by(|p, q| rt.bandwidth_hz[*q].total_cmp(&rt.bandwidth_hz[*p]).then(p.cmp(q)));

    'subcarriers: for k in order {
        let rates = eval_objective(&a, rt).rates;
        let mut users: Vec<usize> = (0..nj).collect();
        users.sort_by(|p, q| {
            rates[*p]
                .total_cmp(&rates[*q])
                .then(pathloss[*q].total_cmp(&pathloss[*p]))
                .then(p.cmp(q))
        });
        for j in users {
            a.y[j][k] = true;
            if check_feasible(&a, rt, budgets).is_feasible() {
                continue 'subcarriers;
            }
            a.y[j][k] = false;
            if mode == AssignmentMode::PaperFaithful {
                break 'subcarriers;
            }
        }
    }
    a.y
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub assignment: Assignment,
    /// Minimum user rate in bit/s.
    pub value: f64,
    pub rank_one: bool,
    /// The rounded diagonal was returned directly.
    pub short_circuit: bool,
    /// Value reached by each rounding repetition, in order.
    pub iteration_values: Vec<f64>,
}

/// Full refinement of a relaxed matrix `Z`.
pub fn refine<T: Real>(
    z: &DMatrix<T>,
    index: &IndexMap,
    rt: &RateTables,
    budgets: &PowerBudget,
    cfg: &RefineConfig,
) -> RefineOutcome {
    let diag = extract_diagonal(z, index);
    let rank_one = rank_one_check(z, cfg.rank_one_tol);
    if rank_one {
        let a = diag.round(index);
        if check_feasible(&a, rt, budgets).is_feasible() {
            return RefineOutcome {
                value: eval_objective(&a, rt).min,
                assignment: a,
                rank_one,
                short_circuit: true,
                iteration_values: vec![],
            };
        }
    }
    let mut out = refine_fractional(&diag.w, &diag.x, rt, budgets, cfg);
    out.rank_one = rank_one;
    out
}

/// Deployment and rounding loop from fractional `(w, x)`; shared by the LR
/// baseline.
pub fn refine_fractional(
    w_frac: &[f64],
    x_frac: &[f64],
    rt: &RateTables,
    budgets: &PowerBudget,
    cfg: &RefineConfig,
) -> RefineOutcome {
    refine_with_deployment(&greedy_deployment(w_frac), x_frac, rt, budgets, cfg)
}

/// Rounding loop with the deployment fixed to `w`.
pub fn refine_with_deployment(
    w: &[bool],
    x_frac: &[f64],
    rt: &RateTables,
    budgets: &PowerBudget,
    cfg: &RefineConfig,
) -> RefineOutcome {
    let draws: Vec<(Assignment, f64)> = (0..cfg.t_max.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(t as u64);
            let x = randomized_association(x_frac, &mut rng);
            let y = greedy_subcarriers(w, &x, rt, budgets, cfg.mode);
            let a = Assignment { w: w.to_vec(), x, y };
            let v = eval_objective(&a, rt).min;
            (a, v)
        })
        .collect();

    let mut best = Assignment::empty_for(rt);
    let mut value = 0.0;
    for (a, v) in &draws {
        if *v > value {
            best = a.clone();
            value = *v;
        }
    }
    RefineOutcome {
        assignment: best,
        value,
        rank_one: false,
        short_circuit: false,
        iteration_values: draws.into_iter().map(|d| d.1).collect(),
    }
}

/// Solved relaxation of one instance.
#[derive(Debug, Clone)]
pub struct SdrRelaxation {
    pub sdp: HomogeneousSdp<f64>,
    pub solution: ConicSolution<f64>,
}

impl SdrRelaxation {
    /// Relaxation optimum in bit/s.
    pub fn bound(&self) -> f64 {
        self.solution.eta() / RATE_SCALE
    }

    pub fn refine(&self, rt: &RateTables, budgets: &PowerBudget, cfg: &RefineConfig) -> RefineOutcome {
        refine(&self.solution.z, &self.sdp.index, rt, budgets, cfg)
    }
}

pub fn solve_sdr(
    rt: &RateTables,
    budgets: &PowerBudget,
    solver: &SolverConfig,
) -> Result<SdrRelaxation, PipelineError> {
    let sdp = homogenize(&assemble_qcqp::<f64>(rt, budgets)?);
    let solution = solve(&build_sdr(&sdp), solver)?;
    Ok(SdrRelaxation { sdp, solution })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrHeuristic {
    /// Relaxation optimum in bit/s.
    pub bound: f64,
    pub report: SolveReport,
    pub refined: RefineOutcome,
}

/// Relax, solve, and refine.
pub fn sdr_heuristic(
    rt: &RateTables,
    budgets: &PowerBudget,
    solver: &SolverConfig,
    cfg: &RefineConfig,
) -> Result<SdrHeuristic, PipelineError> {
    let relaxation = solve_sdr(rt, budgets, solver)?;
    Ok(SdrHeuristic {
        bound: relaxation.bound(),
        report: SolveReport::from(&relaxation.solution),
        refined: relaxation.refine(rt, budgets, cfg),
    })
}
