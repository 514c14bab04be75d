use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, method_seed, Instance, Method, SolveOptions, SolveRecord};
use crate::baselines::EnumLimits;
use crate::conic::SolverConfig;
use crate::error::HarnessError;
use crate::refinement::{AssignmentMode, RefineConfig};
use crate::scenario::{generate, GenConfig, Scenario};

/// Version of the output directory layout written to `manifest.json`.
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum Sweep {
    /// Number of users per scenario.
    Users { values: Vec<usize> },
    /// Candidate-grid size (perfect squares).
    Candidates { values: Vec<usize> },
    /// Rounding repetitions on a fixed scenario per replication.
    TMax { values: Vec<usize> },
    /// Every candidate site in turn, with the deployment fixed.
    Locations,
}

impl Sweep {
    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::Users { .. } => "users",
            Sweep::Candidates { .. } => "candidates",
            Sweep::TMax { .. } => "t_max",
            Sweep::Locations => "location",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub replications: usize,
    pub scenario: GenConfig,
    pub sweep: Sweep,
    pub methods: Vec<Method>,
    /// Rounding repetitions unless the sweep varies them.
    pub t_max: usize,
    pub mode: AssignmentMode,
    pub solver: SolverConfig,
    pub limits: EnumLimits,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            replications: 10,
            scenario: GenConfig::default(),
            sweep: Sweep::Users {
                values: vec![2, 4, 6, 8],
            },
            methods: vec![Method::SdrHeuristic, Method::MbsOnly],
            t_max: 10,
            mode: AssignmentMode::PaperFaithful,
            solver: SolverConfig::default(),
            limits: EnumLimits::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        match &self.sweep {
            Sweep::Users { values } | Sweep::Candidates { values } | Sweep::TMax { values }
                if values.is_empty() =>
            {
                return bad("sweep values must be nonempty");
            }
            Sweep::TMax { values } if values.contains(&0) => return bad("t_max values must be >= 1"),
            _ => {}
        }
        if self.t_max == 0 {
            return bad("t_max must be >= 1");
        }
        for cfg in self.point_configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Scenario configuration of each generated scenario family.
    fn point_configs(&self) -> Vec<GenConfig> {
        match &self.sweep {
            Sweep::Users { values } => values
                .iter()
                .map(|&j| GenConfig {
                    num_users: j,
                    ..self.scenario.clone()
                })
                .collect(),
            Sweep::Candidates { values } => values
                .iter()
                .map(|&i| GenConfig {
                    candidate_grid: i,
                    ..self.scenario.clone()
                })
                .collect(),
            Sweep::TMax { .. } | Sweep::Locations => vec![self.scenario.clone()],
        }
    }
}

/// One method run in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub axis: String,
    pub sweep_value: usize,
    pub replication: usize,
    pub method: Method,
    pub status: String,
    pub status_code: u8,
    pub message: Option<String>,
    pub min_rate_bps: Option<f64>,
    pub bound_bps: Option<f64>,
    /// `(value - mbs_only) / mbs_only` against the same replication.
    pub gain: Option<f64>,
    pub scenario_file: String,
    pub scenario_seed: u64,
    pub rng_seed: u64,
    pub t_max: usize,
    pub deployment: Option<usize>,
    pub iterations: Option<usize>,
    pub wall_ms: f64,
}

/// Per sweep point and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis: String,
    pub sweep_value: usize,
    pub method: Method,
    pub runs: usize,
    /// Runs that produced an assignment.
    pub valued: usize,
    pub mean_min_rate_bps: Option<f64>,
    pub mean_bound_bps: Option<f64>,
    /// `(mean - mean_mbs_only) / mean_mbs_only`.
    pub gain: Option<f64>,
    pub mean_gain: Option<f64>,
    pub max_gain: Option<f64>,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rows: Vec<ReplicationRow>,
    pub aggregate: Vec<AggregateRow>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    layout_version: u32,
    config: &'a ExperimentConfig,
    scenarios: Vec<String>,
    results: Vec<String>,
    replications_csv: &'static str,
    aggregate_csv: &'static str,
}

struct Job {
    point: usize,
    replication: usize,
    config: GenConfig,
}

struct JobOutput {
    name: String,
    scenario: Option<Scenario>,
    records: Vec<SolveRecord>,
    rows: Vec<ReplicationRow>,
}

fn sweep_points(cfg: &ExperimentConfig, job: &Job, num_candidates: usize) -> Vec<(usize, Option<usize>, usize)> {
    // (sweep value, fixed deployment, t_max)
    match &cfg.sweep {
        Sweep::Users { values } | Sweep::Candidates { values } => vec![(values[job.point], None, cfg.t_max)],
        Sweep::TMax { values } => values.iter().map(|&t| (t, None, t)).collect(),
        Sweep::Locations => (0..num_candidates).map(|i| (i, Some(i), cfg.t_max)).collect(),
    }
}

fn run_job(cfg: &ExperimentConfig, job: &Job) -> JobOutput {
    let name = match cfg.sweep {
        Sweep::Users { .. } | Sweep::Candidates { .. } => format!("p{:03}_r{:04}", job.point, job.replication),
        _ => format!("r{:04}", job.replication),
    };
    let scenario_file = format!("scenarios/{name}.json");
    let seed = derive_seed(cfg.master_seed, job.replication as u64);
    let scenario = match generate(&job.config, seed) {
        Ok(s) => s,
        Err(e) => {
            let rows = cfg
                .methods
                .iter()
                .map(|&m| failed_row(cfg, job, m, seed, &scenario_file, e.to_string()))
                .collect();
            return JobOutput {
                name,
                scenario: None,
                records: vec![],
                rows,
            };
        }
    };

    let inst = Instance::new(&scenario);
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (value, deployment, t_max) in sweep_points(cfg, job, scenario.num_candidates()) {
        let mut point_records = Vec::new();
        for &m in &cfg.methods {
            if deployment.is_some() && m == Method::MbsOnly {
                continue;
            }
            let opts = SolveOptions {
                solver: cfg.solver.clone(),
                refine: RefineConfig {
                    t_max,
                    rng_seed: method_seed(seed, m),
                    mode: cfg.mode,
                    ..RefineConfig::default()
                },
                limits: cfg.limits,
                deployment,
            };
            point_records.push(inst.run(m, &opts));
        }
        let reference = point_records
            .iter()
            .find(|r| r.method == Method::MbsOnly && r.status.has_value())
            .map(|r| r.min_rate_bps);
        for r in &point_records {
            let value_bps = r.status.has_value().then_some(r.min_rate_bps);
            rows.push(ReplicationRow {
                axis: cfg.sweep.axis().into(),
                sweep_value: value,
                replication: job.replication,
                method: r.method,
                status: r.status.name().into(),
                status_code: r.status_code,
                message: r.message.clone(),
                min_rate_bps: value_bps,
                bound_bps: r.bound_bps,
                gain: match (value_bps, reference) {
                    (Some(v), Some(base)) if base > 0.0 => Some((v - base) / base),
                    _ => None,
                },
                scenario_file: scenario_file.clone(),
                scenario_seed: seed,
                rng_seed: r.rng_seed,
                t_max,
                deployment,
                iterations: r.solver.map(|s| s.iterations),
                wall_ms: r.wall_ms,
            });
        }
        records.extend(point_records);
    }
    JobOutput {
        name,
        scenario: Some(scenario),
        records,
        rows,
    }
}

fn failed_row(cfg: &ExperimentConfig, job: &Job, m: Method, seed: u64, file: &str, msg: String) -> ReplicationRow {
    ReplicationRow {
        axis: cfg.sweep.axis().into(),
        sweep_value: match &cfg.sweep {
            Sweep::Users { values } | Sweep::Candidates { values } => values[job.point],
            _ => 0,
        },
        replication: job.replication,
        method: m,
        status: "failed".into(),
        status_code: 3,
        message: Some(msg),
        min_rate_bps: None,
        bound_bps: None,
        gain: None,
        scenario_file: file.into(),
        scenario_seed: seed,
        rng_seed: method_seed(seed, m),
        t_max: cfg.t_max,
        deployment: None,
        iterations: None,
        wall_ms: 0.0,
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(rows: &[ReplicationRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<&ReplicationRow>> = BTreeMap::new();
    let mut method_order: Vec<Method> = Vec::new();
    for r in rows {
        if !method_order.contains(&r.method) {
            method_order.push(r.method);
        }
        let mi = method_order.iter().position(|m| *m == r.method).unwrap();
        groups.entry((r.sweep_value, mi)).or_default().push(r);
    }
    let mbs_mean: BTreeMap<usize, f64> = groups
        .iter()
        .filter(|((_, mi), _)| method_order[*mi] == Method::MbsOnly)
        .filter_map(|((v, _), g)| {
            let vals: Vec<f64> = g.iter().filter_map(|r| r.min_rate_bps).collect();
            mean(&vals).map(|m| (*v, m))
        })
        .collect();

    groups
        .into_iter()
        .map(|((value, mi), g)| {
            let vals: Vec<f64> = g.iter().filter_map(|r| r.min_rate_bps).collect();
            let bounds: Vec<f64> = g.iter().filter_map(|r| r.bound_bps).collect();
            let gains: Vec<f64> = g.iter().filter_map(|r| r.gain).collect();
            let m = mean(&vals);
            AggregateRow {
                axis: g[0].axis.clone(),
                sweep_value: value,
                method: method_order[mi],
                runs: g.len(),
                valued: vals.len(),
                mean_min_rate_bps: m,
                mean_bound_bps: mean(&bounds),
                gain: match (m, mbs_mean.get(&value)) {
                    (Some(m), Some(&b)) if b > 0.0 => Some((m - b) / b),
                    _ => None,
                },
                mean_gain: mean(&gains),
                max_gain: gains.iter().copied().reduce(f64::max),
                mean_wall_ms: g.iter().map(|r| r.wall_ms).sum::<f64>() / g.len() as f64,
            }
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

/// Runs every replication (in parallel) and, if `out_dir` is given, writes
/// `manifest.json`, `replications.csv`, `aggregate.csv`, and one scenario and
/// one results file per replication.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    let jobs: Vec<Job> = cfg
        .point_configs()
        .into_iter()
        .enumerate()
        .flat_map(|(point, config)| {
            (0..cfg.replications).map(move |replication| Job {
                point,
                replication,
                config: config.clone(),
            })
        })
        .collect();
    let outputs: Vec<JobOutput> = jobs.par_iter().map(|j| run_job(cfg, j)).collect();

    let mut rows: Vec<ReplicationRow> = outputs.iter().flat_map(|o| o.rows.clone()).collect();
    rows.sort_by_key(|r| (r.sweep_value, r.replication));
    let agg = aggregate(&rows);

    if let Some(dir) = out_dir {
        for sub in ["scenarios", "results"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let mut scenarios = Vec::new();
        let mut results = Vec::new();
        for o in &outputs {
            if let Some(s) = &o.scenario {
                let rel = format!("scenarios/{}.json", o.name);
                s.save(dir.join(&rel))?;
                scenarios.push(rel);
            }
            let rel = format!("results/{}.json", o.name);
            let p = dir.join(&rel);
            let text = serde_json::to_string_pretty(&o.records).expect("plain data serializes");
            fs::write(&p, text).map_err(io_err(&p))?;
            results.push(rel);
        }
        write_csv(&dir.join("replications.csv"), &rows)?;
        write_csv(&dir.join("aggregate.csv"), &agg)?;
        let manifest = Manifest {
            layout_version: LAYOUT_VERSION,
            config: cfg,
            scenarios,
            results,
            replications_csv: "replications.csv",
            aggregate_csv: "aggregate.csv",
        };
        let p = dir.join("manifest.json");
        fs::write(&p, serde_json::to_string_pretty(&manifest).expect("plain data serializes"))
            .map_err(io_err(&p))?;
    }

    Ok(ExperimentSummary {
        rows,
        aggregate: agg,
        out_dir: out_dir.map(Path::to_path_buf),
    })
}
