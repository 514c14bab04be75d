//! Exhaustive search over deployment, association and subcarrier recipients
//! with power/backhaul feasibility pruning and a rate upper bound.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EnumerationError;
use crate::formulation::{eval_objective, Assignment, FEASIBILITY_RTOL};
use crate::scenario::{PowerBudget, RateTables};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnumLimits {
    /// Cap on `(I + 1) 2^J (J + 1)^K`.
    pub max_nodes: f64,
}

impl Default for EnumLimits {
    fn default() -> Self {
        Self { max_nodes: 1e8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub assignment: Assignment,
    /// Optimal minimum user rate in bit/s.
    pub value: f64,
    /// Leaf count of the unpruned search tree.
    pub search_space: f64,
}

impl ExactResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Search-space size `deployments * 2^J * (J + 1)^K`.
pub fn search_space(deployments: usize, assoc_patterns: usize, num_users: usize, num_subcarriers: usize) -> f64 {
    deployments as f64 * assoc_patterns as f64 * ((num_users + 1) as f64).powi(num_subcarriers as i32)
}

/// Global optimum over `w in {0} U {e_i}`, `x in {0,1}^J` and all subcarrier
/// recipients. Ties go to the first optimum in enumeration order.
pub fn exact_enumerate(
    rt: &RateTables,
    budgets: &PowerBudget,
    limits: &EnumLimits,
) -> Result<ExactResult, EnumerationError> {
    let deployments: Vec<Option<usize>> =
        std::iter::once(None).chain((0..rt.num_candidates()).map(Some)).collect();
    let assoc: Vec<u64> = (0..1u64 << rt.num_users()).collect();
    enumerate(rt, budgets, limits, &deployments, &assoc)
}

/// Optimum with the deployment fixed (`None` = no RABS).
pub fn exact_with_deployment(
    rt: &RateTables,
    budgets: &PowerBudget,
    limits: &EnumLimits,
    deployment: Option<usize>,
) -> Result<ExactResult, EnumerationError> {
    let assoc: Vec<u64> = match deployment {
        Some(_) => (0..1u64 << rt.num_users()).collect(),
        None => vec![0],
    };
    enumerate(rt, budgets, limits, &[deployment], &assoc)
}

/// Optimum with no RABS and every user on the MBS.
pub(crate) fn exact_mbs_only(
    rt: &RateTables,
    budgets: &PowerBudget,
    limits: &EnumLimits,
) -> Result<ExactResult, EnumerationError> {
    enumerate(rt, budgets, limits, &[None], &[0])
}

fn enumerate(
    rt: &RateTables,
    budgets: &PowerBudget,
    limits: &EnumLimits,
    deployments: &[Option<usize>],
    assoc: &[u64],
) -> Result<ExactResult, EnumerationError> {
    let nj = rt.num_users();
    let required = search_space(deployments.len(), assoc.len(), nj, rt.num_subcarriers());
    if nj >= 63 || required > limits.max_nodes {
        return Err(EnumerationError::BudgetExceeded {
            required,
            limit: limits.max_nodes,
        });
    }

    // Values are nonnegative, so their bit patterns order like the floats.
    let global = AtomicU64::new(0f64.to_bits());
    let outer: Vec<(Option<usize>, u64)> = deployments
        .iter()
        .flat_map(|d| assoc.iter().map(move |m| (*d, *m)))
        .collect();
    let found: Vec<Option<(f64, Vec<Option<usize>>)>> = outer
        .par_iter()
        .map(|&(dep, mask)| Branch::new(rt, budgets, dep, mask).search(&global))
        .collect();

    let mut best: Option<(usize, f64, Vec<Option<usize>>)> = None;
    for (idx, f) in found.into_iter().enumerate() {
        if let Some((v, rec)) = f {
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((idx, v, rec));
            }
        }
    }
    let (idx, _, recipients) = best.expect("the empty allocation is always feasible");
    let (dep, mask) = outer[idx];
    let mut a = Assignment::empty_for(rt);
    if let Some(i) = dep {
        a.w[i] = true;
    }
    for j in 0..nj {
        a.x[j] = mask >> j & 1 == 1;
    }
    for (k, r) in recipients.iter().enumerate() {
        if let Some(j) = r {
            a.y[*j][k] = true;
        }
    }
    let value = eval_objective(&a, rt).min;
    Ok(ExactResult {
        assignment: a,
        value,
        search_space: required,
    })
}

fn fits(lhs: f64, rhs: f64) -> bool {
    lhs - rhs <= FEASIBILITY_RTOL * rhs.abs().max(1.0)
}

/// Depth-first search over subcarrier recipients for one `(w, x)` pair.
struct Branch<'a> {
    rt: &'a RateTables,
    budgets: &'a PowerBudget,
    dep: Option<usize>,
    on_rabs: Vec<bool>,
    /// `gain[j][k]`: rate user `j` gets from subcarrier `k`.
    gain: Vec<Vec<f64>>,
    /// `tail[j][k]`: sum of `gain[j][k..]`.
    tail: Vec<Vec<f64>>,
    rates: Vec<f64>,
    rabs_power: f64,
    mbs_power: f64,
    load: f64,
    current: Vec<Option<usize>>,
    best_value: f64,
    best: Option<Vec<Option<usize>>>,
}

impl<'a> Branch<'a> {
    fn new(rt: &'a RateTables, budgets: &'a PowerBudget, dep: Option<usize>, mask: u64) -> Self {
        let (nj, nk) = (rt.num_users(), rt.num_subcarriers());
        let on_rabs: Vec<bool> = (0..nj).map(|j| mask >> j & 1 == 1).collect();
        let gain: Vec<Vec<f64>> = (0..nj)
            .map(|j| {
                (0..nk)
                    .map(|k| match (on_rabs[j], dep) {
                        (false, _) => rt.r_mbs[j][k],
                        (true, Some(i)) => rt.r_rabs[i][j][k],
                        (true, None) => 0.0,
                    })
                    .collect()
            })
            .collect();
        let tail = gain
            .iter()
            .map(|g| {
                let mut t = vec![0.0; nk + 1];
                for k in (0..nk).rev() {
                    t[k] = t[k + 1] + g[k];
                }
                t
            })
            .collect();
        Self {
            rt,
            budgets,
            dep,
            on_rabs,
            gain,
            tail,
            rates: vec![0.0; nj],
            rabs_power: 0.0,
            mbs_power: budgets.p_back,
            load: 0.0,
            current: vec![None; nk],
            best_value: f64::NEG_INFINITY,
            best: None,
        }
    }

    fn search(mut self, global: &AtomicU64) -> Option<(f64, Vec<Option<usize>>)> {
        if !fits(self.mbs_power, self.budgets.p_mbs_max) {
            return None;
        }
        self.descend(0, global);
        self.best.map(|b| (self.best_value, b))
    }

    fn descend(&mut self, k: usize, global: &AtomicU64) {
        let nj = self.rates.len();
        let bound = (0..nj)
            .map(|j| self.rates[j] + self.tail[j][k])
            .fold(f64::INFINITY, f64::min);
        let bound = if nj == 0 { 0.0 } else { bound };
        if bound < f64::from_bits(global.load(Ordering::Relaxed)) || bound <= self.best_value {
            return;
        }
        if k == self.current.len() {
            let value = if nj == 0 {
                0.0
            } else {
                self.rates.iter().copied().fold(f64::INFINITY, f64::min)
            };
            if value > self.best_value {
                self.best_value = value;
                self.best = Some(self.current.clone());
                global.fetch_max(value.to_bits(), Ordering::Relaxed);
            }
            return;
        }

        self.descend(k + 1, global);
        let p = self.rt.p_k[k];
        for j in 0..nj {
            let g = self.gain[j][k];
            if self.on_rabs[j] {
                let load_ok = match self.dep {
                    Some(i) => fits(self.load + g, self.rt.c_back[i]),
                    None => true,
                };
                if !fits(self.rabs_power + p, self.budgets.p_rabs_max) || !load_ok {
                    continue;
                }
                self.rabs_power += p;
                self.load += g;
            } else {
                if !fits(self.mbs_power + p, self.budgets.p_mbs_max) {
                    continue;
                }
                self.mbs_power += p;
            }
            self.rates[j] += g;
            self.current[k] = Some(j);

            self.descend(k + 1, global);

            self.current[k] = None;
            self.rates[j] -= g;
            if self.on_rabs[j] {
                self.rabs_power -= p;
                self.load -= g;
            } else {
                self.mbs_power -= p;
            }
        }
    }
}
