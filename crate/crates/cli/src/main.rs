mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use rabs_core::baselines::{build_lr, exact_enumerate, exact_with_deployment};
use rabs_core::conic::solve_lp;
use rabs_core::error::EnumerationError;
use rabs_core::formulation::{assemble_qcqp, homogenize};
use rabs_core::harness::{
    method_seed, run_experiment, run_solve, AggregateRow, ExperimentConfig, Method, RecordStatus, SolveOptions,
    Sweep,
};
use rabs_core::refinement::{solve_sdr, RefineConfig};
use rabs_core::scenario::{generate, rate_tables, Scenario};

use config::{parse_method, FileConfig, RunArgs, ScenarioArgs};

/// Exit status of `oracle` when the search exceeds its node budget.
const EXIT_REFUSED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "rabs", version, about = "RABS placement and OFDMA resource allocation")]
struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one method on a stored scenario and print the record.
    Solve {
        /// Scenario JSON written by `generate`.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// sdr_heuristic, lr_heuristic, mbs_only or exact.
        #[arg(long)]
        method: Option<String>,
        /// Rounding seed; derived from the scenario seed when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Fix the RABS at this candidate index.
        #[arg(long)]
        site: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the homogenized matrices as triplets.
        #[arg(long)]
        dump_matrices: Option<PathBuf>,
        /// Write the solver's residual history as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Monte-Carlo sweep with CSV and JSON output.
    Experiment {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        /// users, candidates, t_max or locations.
        #[arg(long)]
        sweep: Option<String>,
        /// Sweep values, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
        /// Methods, comma separated.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive optimum of a stored scenario.
    Oracle {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        site: Option<usize>,
        #[arg(long)]
        max_nodes: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { scenario, seed, out } => {
            let cfg = scenario.resolve(&file)?;
            let s = generate(&cfg, seed.or(file.seed).unwrap_or(0))?;
            emit(&s.to_json(), out.or(file.out).as_deref())?;
        }
        Command::Solve {
            scenario,
            method,
            seed,
            site,
            run,
            out,
            dump_matrices,
            trace,
        } => {
            let s = load_scenario(scenario.or(file.scenario.clone()))?;
            let method = match method.or(file.method.clone()) {
                Some(m) => parse_method(&m)?,
                None => Method::SdrHeuristic,
            };
            let settings = run.resolve(&file)?;
            let opts = SolveOptions {
                solver: settings.solver,
                refine: RefineConfig {
                    t_max: settings.t_max,
                    rng_seed: seed.or(file.seed).unwrap_or_else(|| method_seed(s.seed, method)),
                    mode: settings.mode,
                    ..RefineConfig::default()
                },
                limits: settings.limits,
                deployment: site.or(file.site),
            };
            if let Some(path) = dump_matrices {
                dump(&s, &path)?;
            }
            if let Some(path) = trace {
                write_trace(&s, method, &opts, &path)?;
            }
            let rec = run_solve(&s, method, &opts);
            if !matches!(rec.status, RecordStatus::Ok) {
                if let Some(msg) = &rec.message {
                    eprintln!("{}: {msg}", rec.status.name());
                }
            }
            emit(&rec.to_json(), out.or(file.out.clone()).as_deref())?;
        }
        Command::Experiment {
            scenario,
            run,
            seed,
            replications,
            sweep,
            values,
            methods,
            out,
        } => {
            let settings = run.resolve(&file)?;
            let defaults = ExperimentConfig::default();
            let methods = match methods.or(file.methods.clone()) {
                Some(ms) => ms.iter().map(|m| parse_method(m.trim())).collect::<Result<Vec<_>>>()?,
                None => defaults.methods.clone(),
            };
            let cfg = ExperimentConfig {
                master_seed: seed.or(file.seed).unwrap_or(0),
                replications: replications.or(file.replications).unwrap_or(defaults.replications),
                scenario: scenario.resolve(&file)?,
                sweep: parse_sweep(sweep.or(file.sweep.clone()).as_deref(), values.or(file.values.clone()))?,
                methods,
                t_max: settings.t_max,
                mode: settings.mode,
                solver: settings.solver,
                limits: settings.limits,
            };
            cfg.validate()?;
            let out = out.or(file.out.clone());
            let summary = run_experiment(&cfg, out.as_deref())?;
            print_aggregate(&summary.aggregate);
            if let Some(dir) = out {
                eprintln!("wrote {}", dir.display());
            }
        }
        Command::Oracle {
            scenario,
            site,
            max_nodes,
            out,
        } => {
            let s = load_scenario(scenario.or(file.scenario.clone()))?;
            let rt = rate_tables(&s)?;
            let mut limits = rabs_core::baselines::EnumLimits::default();
            if let Some(n) = max_nodes.or(file.max_nodes) {
                limits.max_nodes = n;
            }
            let r = match site.or(file.site) {
                None => exact_enumerate(&rt, &s.budgets, &limits),
                Some(i) if i < rt.num_candidates() => exact_with_deployment(&rt, &s.budgets, &limits, Some(i)),
                Some(i) => bail!("site {i} out of range ({} candidates)", rt.num_candidates()),
            };
            match r {
                Ok(r) => emit(&r.to_json(), out.or(file.out.clone()).as_deref())?,
                Err(e @ EnumerationError::BudgetExceeded { .. }) => {
                    eprintln!("refused: {e}");
                    return Ok(ExitCode::from(EXIT_REFUSED));
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_scenario(path: Option<PathBuf>) -> Result<Scenario> {
    let Some(path) = path else {
        bail!("--scenario is required");
    };
    Scenario::load(&path).with_context(|| format!("loading {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => match writeln!(io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn parse_sweep(axis: Option<&str>, values: Option<Vec<usize>>) -> Result<Sweep> {
    let need = |v: Option<Vec<usize>>| v.context("--values is required for this sweep");
    Ok(match axis.unwrap_or("users") {
        "users" => Sweep::Users {
            values: values.unwrap_or_else(|| (1..=10).collect()),
        },
        "candidates" => Sweep::Candidates { values: need(values)? },
        "t_max" | "tmax" => Sweep::TMax {
            values: values.unwrap_or_else(|| (1..=10).collect()),
        },
        "locations" => {
            if values.is_some() {
                bail!("the locations sweep takes no values");
            }
            Sweep::Locations
        }
        other => bail!("unknown sweep `{other}` (expected users, candidates, t_max or locations)"),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn dump(s: &Scenario, path: &Path) -> Result<()> {
    let rt = rate_tables(s)?;
    let sdp = homogenize(&assemble_qcqp::<f64>(&rt, &s.budgets)?);
    let mut w = create(path)?;
    sdp.dump_triplets(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_trace(s: &Scenario, method: Method, opts: &SolveOptions, path: &Path) -> Result<()> {
    let rt = rate_tables(s)?;
    let solver = rabs_core::conic::SolverConfig {
        trace: true,
        ..opts.solver.clone()
    };
    let sol = match method {
        Method::SdrHeuristic => solve_sdr(&rt, &s.budgets, &solver)?.solution,
        Method::LrHeuristic => solve_lp(&build_lr::<f64>(&rt, &s.budgets).lp, &solver)?,
        _ => bail!("--trace needs a relaxation-based method (sdr_heuristic or lr_heuristic)"),
    };
    sol.write_trace_csv(create(path)?)?;
    Ok(())
}

fn opt(v: Option<f64>, scale: f64, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.prec$}", x * scale))
}

fn print_aggregate(rows: &[AggregateRow]) {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    let _ = writeln!(
        w,
        "{:<10} {:>6} {:<14} {:>5} {:>6} {:>12} {:>12} {:>8} {:>10}",
        "axis", "value", "method", "runs", "valued", "min_rate_mb", "bound_mb", "gain", "wall_ms"
    );
    for r in rows {
        let _ = writeln!(
            w,
            "{:<10} {:>6} {:<14} {:>5} {:>6} {:>12} {:>12} {:>8} {:>10.1}",
            r.axis,
            r.sweep_value,
            r.method.name(),
            r.runs,
            r.valued,
            opt(r.mean_min_rate_bps, 1e-6, 4),
            opt(r.mean_bound_bps, 1e-6, 4),
            opt(r.gain, 1.0, 4),
            r.mean_wall_ms
        );
    }
}
