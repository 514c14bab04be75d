use serde::{Deserialize, Serialize};

use super::index::IndexMap;
use crate::scenario::{PowerBudget, RateTables};

/// Binary deployment (`w`), association (`x`) and subcarrier (`y`) decisions.
/// The linearization variable is derived as `s[j][k] = x[j] && y[j][k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub w: Vec<bool>,
    pub x: Vec<bool>,
    pub y: Vec<Vec<bool>>,
}

impl Assignment {
    pub fn empty(num_candidates: usize, num_users: usize, num_subcarriers: usize) -> Self {
        Self {
            w: vec![false; num_candidates],
            x: vec![false; num_users],
            y: vec![vec![false; num_subcarriers]; num_users],
        }
    }

    pub fn empty_for(rt: &RateTables) -> Self {
        Self::empty(rt.num_candidates(), rt.num_users(), rt.num_subcarriers())
    }

    pub fn index_map(&self) -> IndexMap {
        IndexMap::new(
            self.w.len(),
            self.x.len(),
            self.y.first().map_or(0, Vec::len),
        )
    }

    pub fn s(&self, j: usize, k: usize) -> bool {
        self.x[j] && self.y[j][k]
    }

    /// First deployed candidate, if any.
    pub fn deployed(&self) -> Option<usize> {
        self.w.iter().position(|&b| b)
    }

    /// Recipient of subcarrier `k`, the lowest user index when several hold it.
    pub fn holder(&self, k: usize) -> Option<usize> {
        self.y.iter().position(|row| row[k])
    }

    /// Stacked `z = [w; x; y; s]` as 0/1 reals.
    pub fn to_z(&self) -> Vec<f64> {
        let m = self.index_map();
        let mut z = vec![0.0; m.decision_len()];
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        for (i, &b) in self.w.iter().enumerate() {
            z[m.w(i)] = bit(b);
        }
        for (j, &b) in self.x.iter().enumerate() {
            z[m.x(j)] = bit(b);
        }
        for j in 0..m.num_users {
            for k in 0..m.num_subcarriers {
                let l = m.l(j, k);
                z[m.y(l)] = bit(self.y[j][k]);
                z[m.s(l)] = bit(self.s(j, k));
            }
        }
        z
    }

    /// Homogenized `[z; t]` with `t = 1`.
    pub fn to_z_tilde(&self) -> Vec<f64> {
        let mut z = self.to_z();
        z.push(1.0);
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// Per-user rate in bit/s.
    pub rates: Vec<f64>,
    pub min: f64,
}

/// Per-user rate `sum_i sum_k R_ijk w_i x_j y_jk + sum_k R_jk (1 - x_j) y_jk`
/// and its minimum.
pub fn eval_objective(a: &Assignment, rt: &RateTables) -> ObjectiveValue {
    let rates: Vec<f64> = (0..rt.num_users())
        .map(|j| {
            let mut rate = 0.0;
            for k in 0..rt.num_subcarriers() {
                if !a.y[j][k] {
                    continue;
                }
                if a.x[j] {
                    for (i, &wi) in a.w.iter().enumerate() {
                        if wi {
                            rate += rt.r_rabs[i][j][k];
                        }
                    }
                } else {
                    rate += rt.r_mbs[j][k];
                }
            }
            rate
        })
        .collect();
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    ObjectiveValue {
        min: if rates.is_empty() { 0.0 } else { min },
        rates,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityFamily {
    Deployment,
    SubcarrierExclusive,
    RabsPower,
    MbsPower,
    Backhaul,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub family: FeasibilityFamily,
    /// Worst-case `rhs - lhs` over the family's members.
    pub slack: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn get(&self, family: FeasibilityFamily) -> &ConstraintCheck {
        self.checks
            .iter()
            .find(|c| c.family == family)
            .expect("every family is reported")
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.satisfied)
    }
}

/// Relative slack tolerance for floating sums of powers and rates.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

fn check(family: FeasibilityFamily, lhs: f64, rhs: f64) -> ConstraintCheck {
    let slack = rhs - lhs;
    ConstraintCheck {
        family,
        slack,
        satisfied: slack >= -FEASIBILITY_RTOL * rhs.abs().max(1.0),
    }
}

/// Per-family status of a binary assignment under the original constraints.
pub fn check_feasible(a: &Assignment, rt: &RateTables, budgets: &PowerBudget) -> FeasibilityReport {
    let (ni, nj, nk) = (rt.num_candidates(), rt.num_users(), rt.num_subcarriers());

    let deployed = a.w.iter().filter(|&&b| b).count() as f64;

    let worst_share = (0..nk)
        .map(|k| (0..nj).filter(|&j| a.y[j][k]).count())
        .max()
        .unwrap_or(0) as f64;

    let mut rabs_power = 0.0;
    let mut mbs_power = 0.0;
    for j in 0..nj {
        for k in 0..nk {
            if a.y[j][k] {
                if a.x[j] {
                    rabs_power += rt.p_k[k];
                } else {
                    mbs_power += rt.p_k[k];
                }
            }
        }
    }

    let backhaul = (0..ni)
        .filter(|&i| a.w[i])
        .map(|i| {
            let load: f64 = (0..nj)
                .filter(|&j| a.x[j])
                .flat_map(|j| (0..nk).filter(move |&k| a.y[j][k]).map(move |k| (j, k)))
                .map(|(j, k)| rt.r_rabs[i][j][k])
                .sum();
            check(FeasibilityFamily::Backhaul, load, rt.c_back[i])
        })
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .unwrap_or(ConstraintCheck {
            family: FeasibilityFamily::Backhaul,
            slack: rt.c_back.iter().copied().fold(f64::INFINITY, f64::min),
            satisfied: true,
        });

    FeasibilityReport {
        checks: vec![
            check(FeasibilityFamily::Deployment, deployed, 1.0),
            check(FeasibilityFamily::SubcarrierExclusive, worst_share, 1.0),
            check(FeasibilityFamily::RabsPower, rabs_power, budgets.p_rabs_max),
            check(FeasibilityFamily::MbsPower, mbs_power + budgets.p_back, budgets.p_mbs_max),
            backhaul,
        ],
    }
}


#[cfg(test)]
pub(crate) use tests::toy_tables;
