//! Single-instance runs and Monte-Carlo experiments with CSV/JSON output.

mod experiment;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    exact_enumerate, exact_with_deployment, mbs_only, solve_lr, EnumLimits, LrRelaxation, MbsOnlyMode,
};
use crate::conic::{SolveReport, SolveStatus, SolverConfig};
use crate::error::{EnumerationError, ScenarioError};
use crate::formulation::{eval_objective, Assignment};
use crate::refinement::{
    refine_fractional, refine_with_deployment, solve_sdr, RefineConfig, RefineOutcome, SdrRelaxation,
};
use crate::scenario::{rate_tables, RateTables, Scenario};

pub use experiment::{
    run_experiment, AggregateRow, ExperimentConfig, ExperimentSummary, ReplicationRow, Sweep,
    LAYOUT_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SdrHeuristic,
    LrHeuristic,
    MbsOnly,
    Exact,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::SdrHeuristic,
        Method::LrHeuristic,
        Method::MbsOnly,
        Method::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SdrHeuristic => "sdr_heuristic",
            Method::LrHeuristic => "lr_heuristic",
            Method::MbsOnly => "mbs_only",
            Method::Exact => "exact",
        }
    }

    /// Stream tag for the method's random substream; never reuse a value.
    fn stream(self) -> u64 {
        match self {
            Method::SdrHeuristic => 1,
            Method::LrHeuristic => 2,
            Method::MbsOnly => 3,
            Method::Exact => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected sdr_heuristic, lr_heuristic, mbs_only or exact)"))
    }
}

/// Child seed for substream `stream` of `parent`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(parent);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Seed of `method`'s rounding draws for a scenario seeded with `scenario_seed`.
pub fn method_seed(scenario_seed: u64, method: Method) -> u64 {
    derive_seed(scenario_seed, method.stream())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub solver: SolverConfig,
    /// `rng_seed` is used as given; see [`method_seed`] for the experiment
    /// convention.
    pub refine: RefineConfig,
    pub limits: EnumLimits,
    /// Fix the RABS site instead of choosing it.
    pub deployment: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            refine: RefineConfig::default(),
            limits: EnumLimits::default(),
            deployment: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    /// The relaxation hit its iteration cap or flagged infeasibility; the
    /// assignment is still feasible.
    NotConverged,
    /// The exact search exceeded its node budget.
    Refused,
    Failed,
}

impl RecordStatus {
    pub fn code(self) -> u8 {
        match self {
            RecordStatus::Ok => 0,
            RecordStatus::NotConverged => 1,
            RecordStatus::Refused => 2,
            RecordStatus::Failed => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::NotConverged => "not_converged",
            RecordStatus::Refused => "refused",
            RecordStatus::Failed => "failed",
        }
    }

    /// The record carries a feasible assignment.
    pub fn has_value(self) -> bool {
        matches!(self, RecordStatus::Ok | RecordStatus::NotConverged)
    }
}

/// Outcome of one method on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub method: Method,
    pub status: RecordStatus,
    pub status_code: u8,
    pub message: Option<String>,
    pub scenario_seed: u64,
    pub rng_seed: u64,
    pub t_max: usize,
    pub deployment: Option<usize>,
    pub assignment: Option<Assignment>,
    pub rates_bps: Vec<f64>,
    pub min_rate_bps: f64,
    /// Relaxation optimum (SDR or LP) in bit/s.
    pub bound_bps: Option<f64>,
    pub solver: Option<SolveReport>,
    pub mbs_only_mode: Option<MbsOnlyMode>,
    pub rank_one: Option<bool>,
    pub short_circuit: Option<bool>,
    /// Wall-clock time; the only field that varies between identical runs.
    pub wall_ms: f64,
}

impl SolveRecord {
    fn new(method: Method, scenario_seed: u64, opts: &SolveOptions) -> Self {
        Self {
            method,
            status: RecordStatus::Ok,
            status_code: 0,
            message: None,
            scenario_seed,
            rng_seed: opts.refine.rng_seed,
            t_max: opts.refine.t_max,
            deployment: opts.deployment,
            assignment: None,
            rates_bps: vec![],
            min_rate_bps: 0.0,
            bound_bps: None,
            solver: None,
            mbs_only_mode: None,
            rank_one: None,
            short_circuit: None,
            wall_ms: 0.0,
        }
    }

    fn set_status(&mut self, status: RecordStatus, message: Option<String>) {
        self.status = status;
        self.status_code = status.code();
        self.message = message;
    }

    fn set_assignment(&mut self, a: Assignment, rt: &RateTables) {
        let v = eval_objective(&a, rt);
        self.rates_bps = v.rates;
        self.min_rate_bps = v.min;
        self.assignment = Some(a);
    }

    fn set_solver(&mut self, report: SolveReport) {
        match report.status {
            SolveStatus::Solved => {}
            SolveStatus::MaxIter => self.set_status(
                RecordStatus::NotConverged,
                Some(format!("relaxation stopped at the iteration cap ({})", report.iterations)),
            ),
            SolveStatus::InfeasibleDetected => self.set_status(
                RecordStatus::NotConverged,
                Some("relaxation reported infeasibility".into()),
            ),
        }
        self.solver = Some(report);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// JSON with the timing field removed, for reproducibility checks.
    pub fn to_json_without_timing(&self) -> String {
        let mut v = serde_json::to_value(self).expect("plain data serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_ms");
        }
        serde_json::to_string_pretty(&v).expect("plain data serializes")
    }
}

/// Rate tables plus lazily solved relaxations shared by every method run on
/// the same scenario.
pub(crate) struct Instance<'a> {
    pub scenario: &'a Scenario,
    pub rt: Result<RateTables, String>,
    sdr: OnceLock<Result<SdrRelaxation, String>>,
    lr: OnceLock<Result<LrRelaxation, String>>,
}

impl<'a> Instance<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self {
            scenario,
            rt: rate_tables(scenario).map_err(|e: ScenarioError| e.to_string()),
            sdr: OnceLock::new(),
            lr: OnceLock::new(),
        }
    }

    fn sdr(&self, rt: &RateTables, solver: &SolverConfig) -> &Result<SdrRelaxation, String> {
        self.sdr
            .get_or_init(|| solve_sdr(rt, &self.scenario.budgets, solver).map_err(|e| e.to_string()))
    }

    fn lr(&self, rt: &RateTables, solver: &SolverConfig) -> &Result<LrRelaxation, String> {
        self.lr
            .get_or_init(|| solve_lr(rt, &self.scenario.budgets, solver).map_err(|e| e.to_string()))
    }

    pub fn run(&self, method: Method, opts: &SolveOptions) -> SolveRecord {
        let start = Instant::now();
        let mut rec = SolveRecord::new(method, self.scenario.seed, opts);
        match &self.rt {
            Ok(rt) => self.fill(&mut rec, rt, method, opts),
            Err(e) => rec.set_status(RecordStatus::Failed, Some(e.clone())),
        }
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        rec
    }

    fn fill(&self, rec: &mut SolveRecord, rt: &RateTables, method: Method, opts: &SolveOptions) {
        let budgets = &self.scenario.budgets;
        if let Some(i) = opts.deployment {
            if i >= rt.num_candidates() {
                let msg = format!("deployment {i} out of range ({} candidates)", rt.num_candidates());
                return rec.set_status(RecordStatus::Failed, Some(msg));
            }
        }
        let fixed_w = |i: usize| (0..rt.num_candidates()).map(|c| c == i).collect::<Vec<_>>();
        let refined = |rec: &mut SolveRecord, out: RefineOutcome| {
            rec.rank_one = Some(out.rank_one);
            rec.short_circuit = Some(out.short_circuit);
            rec.set_assignment(out.assignment, rt);
        };

        match method {
            Method::SdrHeuristic => match self.sdr(rt, &opts.solver) {
                Ok(relax) => {
                    rec.bound_bps = Some(relax.bound());
                    rec.set_solver(SolveReport::from(&relax.solution));
                    let out = match opts.deployment {
                        None => relax.refine(rt, budgets, &opts.refine),
                        Some(i) => {
                            let diag = crate::refinement::extract_diagonal(&relax.solution.z, &relax.sdp.index);
                            refine_with_deployment(&fixed_w(i), &diag.x, rt, budgets, &opts.refine)
                        }
                    };
                    refined(rec, out);
                }
                Err(e) => rec.set_status(RecordStatus::Failed, Some(e.clone())),
            },
            Method::LrHeuristic => match self.lr(rt, &opts.solver) {
                Ok(relax) => {
                    rec.bound_bps = Some(relax.bound);
                    rec.set_solver(relax.report);
                    let out = match opts.deployment {
                        None => refine_fractional(&relax.w, &relax.x, rt, budgets, &opts.refine),
                        Some(i) => refine_with_deployment(&fixed_w(i), &relax.x, rt, budgets, &opts.refine),
                    };
                    refined(rec, out);
                }
                Err(e) => rec.set_status(RecordStatus::Failed, Some(e.clone())),
            },
            Method::MbsOnly => {
                if opts.deployment.is_some() {
                    return rec.set_status(
                        RecordStatus::Failed,
                        Some("mbs_only does not deploy a RABS".into()),
                    );
                }
                let r = mbs_only(rt, budgets, &opts.limits);
                rec.mbs_only_mode = Some(r.mode);
                rec.set_assignment(r.assignment, rt);
            }
            Method::Exact => {
                let r = match opts.deployment {
                    None => exact_enumerate(rt, budgets, &opts.limits),
                    Some(i) => exact_with_deployment(rt, budgets, &opts.limits, Some(i)),
                };
                match r {
                    Ok(r) => rec.set_assignment(r.assignment, rt),
                    Err(e @ EnumerationError::BudgetExceeded { .. }) => {
                        rec.set_status(RecordStatus::Refused, Some(e.to_string()))
                    }
                }
            }
        }
    }
}

/// Runs one method on one scenario.
pub fn run_solve(scenario: &Scenario, method: Method, opts: &SolveOptions) -> SolveRecord {
    Instance::new(scenario).run(method, opts)
}
