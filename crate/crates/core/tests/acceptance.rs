//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing the test harness capture) before asserting.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rabs_core::baselines::{
    exact_enumerate, exact_with_deployment, lr_heuristic, mbs_only, EnumLimits, MbsOnlyMode,
};
use rabs_core::channel::{
    backhaul_los_pathloss_db, backhaul_nlos_pathloss_db, los_probability, pathloss_macro_db, pathloss_small_db,
    LinkGeometry,
};
use rabs_core::conic::{
    psd_project, solve, solve_lp, Cone, ConicProgram, ConicRow, LinearProgram, LpRow, LpSense, RowKind,
    SolveStatus, SolverConfig,
};
use rabs_core::formulation::{
    assemble_qcqp, check_feasible, eval_objective, homogenize, Assignment, SymBuilder, FEASIBILITY_RTOL,
    RATE_SCALE,
};
use rabs_core::harness::{derive_seed, run_experiment, ExperimentConfig, Method, Sweep};
use rabs_core::refinement::{rank_one_check, sdr_heuristic, solve_sdr, RefineConfig};
use rabs_core::scenario::{generate, rate_tables, GenConfig, PowerBudget, RateTables, UserLayout};

fn report(id: u32, pass: bool, summary: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} {verdict}: {summary}");
    assert!(pass, "criterion {id}: {summary}");
}

/// Default powers and backhaul bandwidth scaled by `K / 20`, floored so that
/// each tier can still power one subcarrier.
fn scaled_config(users: usize, subcarriers: usize) -> GenConfig {
    let base = GenConfig::default();
    let f = subcarriers as f64 / base.num_subcarriers as f64;
    let p_k = base.subcarrier_bw_hz * base.channel.psd_zeta;
    let floor = 1.05 * p_k;
    let backhaul_bw_hz = base.backhaul_bw_hz * f;
    let p_back = backhaul_bw_hz * base.channel.psd_zeta;
    GenConfig {
        candidate_grid: 9,
        num_users: users,
        num_subcarriers: subcarriers,
        backhaul_bw_hz,
        p_rabs_max_w: (base.p_rabs_max_w * f).max(floor),
        p_mbs_max_w: p_back + ((base.p_mbs_max_w - base.budgets().p_back) * f).max(floor),
        ..base
    }
}

/// Scenario on a 3x3 grid with `candidates` sites kept at random.
fn tiny(seed: u64, candidates: usize, users: usize, subcarriers: usize) -> (RateTables, PowerBudget) {
    let mut s = generate(&scaled_config(users, subcarriers), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = sample(&mut rng, 9, candidates).into_vec();
    keep.sort_unstable();
    s.candidate_positions = keep.iter().map(|&i| s.candidate_positions[i]).collect();
    (rate_tables(&s).unwrap(), s.budgets)
}

fn mbps(bps: f64) -> f64 {
    bps * RATE_SCALE
}

// ---------------------------------------------------------------------------

fn equivalent(a: &Assignment, rt: &RateTables, budgets: &PowerBudget) -> bool {
    let qcqp = assemble_qcqp::<f64>(rt, budgets).unwrap();
    let hom = homogenize(&qcqp);
    let direct = eval_objective(a, rt);
    let (z, zt) = (a.to_z(), a.to_z_tilde());
    let (lifted, homog) = (qcqp.objective_values(&z), hom.objective_values(&zt));
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
    let rates_ok = (0..rt.num_users()).all(|j| {
        let r = mbps(direct.rates[j]);
        close(r, lifted[j]) && close(r, homog[j])
    });
    let feasible = check_feasible(a, rt, budgets).is_feasible();
    rates_ok
        && feasible == qcqp.is_satisfied(&z, FEASIBILITY_RTOL)
        && feasible == hom.is_satisfied(&zt, FEASIBILITY_RTOL)
}

fn from_bits(rt: &RateTables, mut bits: u64) -> Assignment {
    let mut a = Assignment::empty_for(rt);
    let mut next = || {
        let b = bits & 1 == 1;
        bits >>= 1;
        b
    };
    a.w.iter_mut().for_each(|b| *b = next());
    a.x.iter_mut().for_each(|b| *b = next());
    a.y.iter_mut().flatten().for_each(|b| *b = next());
    a
}

#[test]
fn c01_reformulation_equivalence() {
    let start = Instant::now();
    let mut checked = 0;
    let mut bad = 0;
    for seed in 0..4 {
        let (rt, budgets) = tiny(derive_seed(1, seed), 2, 2, 2);
        for bits in 0..1u64 << 8 {
            checked += 1;
            bad += usize::from(!equivalent(&from_bits(&rt, bits), &rt, &budgets));
        }
    }
    let (rt, budgets) = tiny(derive_seed(1, 100), 5, 3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        checked += 1;
        let bits = rng.random::<u64>() & ((1 << (5 + 3 + 12)) - 1);
        bad += usize::from(!equivalent(&from_bits(&rt, bits), &rt, &budgets));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        bad == 0 && secs < 10.0,
        &format!("{checked} assignments, {bad} mismatches, {secs:.2} s"),
    );
}

// ---------------------------------------------------------------------------

struct TinyRun {
    shape: (usize, usize, usize),
    exact: f64,
    bound: f64,
    heuristic: f64,
    heuristic_feasible: bool,
    mbs_only: f64,
}

fn tiny_runs() -> &'static (Vec<TinyRun>, f64) {
    static RUNS: OnceLock<(Vec<TinyRun>, f64)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let runs = (0..100u64)
            .into_par_iter()
            .map(|n| {
                let seed = derive_seed(2, n);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let shape = (rng.random_range(1..=6), rng.random_range(1..=3), rng.random_range(1..=4));
                let (rt, budgets) = tiny(seed, shape.0, shape.1, shape.2);
                let limits = EnumLimits::default();
                let exact = exact_enumerate(&rt, &budgets, &limits).unwrap();
                let refine = RefineConfig {
                    t_max: 10,
                    rng_seed: seed,
                    ..RefineConfig::default()
                };
                let h = sdr_heuristic(&rt, &budgets, &SolverConfig::default(), &refine).unwrap();
                let m = mbs_only(&rt, &budgets, &limits);
                assert_eq!(m.mode, MbsOnlyMode::Exact);
                TinyRun {
                    shape,
                    exact: exact.value,
                    bound: h.bound,
                    heuristic: h.refined.value,
                    heuristic_feasible: check_feasible(&h.refined.assignment, &rt, &budgets).is_feasible(),
                    mbs_only: m.value,
                }
            })
            .collect();
        (runs, start.elapsed().as_secs_f64())
    })
}

#[test]
fn c02_relaxation_bounds_the_optimum() {
    let (runs, secs) = tiny_runs();
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for r in runs {
        let (bound, opt) = (mbps(r.bound), mbps(r.exact));
        let margin = bound - (opt - 1e-3 * (opt + 1.0));
        worst = worst.min(margin);
        bad += usize::from(margin < 0.0);
    }
    let max_order = runs.iter().map(|r| r.shape.0 + r.shape.1 + 2 * r.shape.1 * r.shape.2 + 1).max().unwrap();
    report(
        2,
        bad == 0 && *secs < 300.0,
        &format!(
            "{} instances, {bad} below the optimum, worst margin {worst:.3e} Mbps, max SDP order {max_order}, {secs:.1} s",
            runs.len()
        ),
    );
}

#[test]
fn c03_heuristic_is_sandwiched() {
    let (runs, _) = tiny_runs();
    let above = runs.iter().filter(|r| r.heuristic > r.exact * (1.0 + 1e-12)).count();
    let infeasible = runs.iter().filter(|r| !r.heuristic_feasible).count();
    let at_opt = runs.iter().filter(|r| r.heuristic >= r.exact * (1.0 - 1e-9)).count();
    report(
        3,
        above == 0 && infeasible == 0,
        &format!(
            "{} instances, {above} above the optimum, {infeasible} infeasible, {at_opt} reach the optimum",
            runs.len()
        ),
    );
}

// ---------------------------------------------------------------------------

struct MidRun {
    exact: f64,
    mbs_only: f64,
    sdr: [f64; 2],
    lr: [f64; 2],
}

fn mid_runs() -> &'static Vec<MidRun> {
    static RUNS: OnceLock<Vec<MidRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = GenConfig {
            candidate_grid: 9,
            num_users: 4,
            num_subcarriers: 6,
            ..GenConfig::default()
        };
        (0..50u64)
            .into_par_iter()
            .map(|n| {
                let seed = derive_seed(4, n);
                let s = generate(&cfg, seed).unwrap();
                let rt = rate_tables(&s).unwrap();
                let b = &s.budgets;
                let limits = EnumLimits::default();
                let solver = SolverConfig::default();
                let relax = solve_sdr(&rt, b, &solver).unwrap();
                let lr_seed = derive_seed(seed, 2);
                let refine = |t_max, rng_seed| RefineConfig {
                    t_max,
                    rng_seed,
                    ..RefineConfig::default()
                };
                let sdr = [1, 10].map(|t| relax.refine(&rt, b, &refine(t, derive_seed(seed, 1))).value);
                let lr = [1, 10].map(|t| lr_heuristic(&rt, b, &solver, &refine(t, lr_seed)).unwrap().refined.value);
                let m = mbs_only(&rt, b, &limits);
                assert_eq!(m.mode, MbsOnlyMode::Exact);
                MidRun {
                    exact: exact_enumerate(&rt, b, &limits).unwrap().value,
                    mbs_only: m.value,
                    sdr,
                    lr,
                }
            })
            .collect()
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

#[test]
fn c04_sdr_heuristic_against_lr_and_exact() {
    let runs = mid_runs();
    let sdr = [0, 1].map(|t| mean(runs.iter().map(|r| mbps(r.sdr[t]))));
    let lr = [0, 1].map(|t| mean(runs.iter().map(|r| mbps(r.lr[t]))));
    let gap = mean(runs.iter().map(|r| if r.exact > 0.0 { (r.exact - r.sdr[1]) / r.exact } else { 0.0 }));
    let exact = mean(runs.iter().map(|r| mbps(r.exact)));
    let pass = sdr[0] >= lr[0] && sdr[1] >= lr[1] && gap <= 0.15;
    report(
        4,
        pass,
        &format!(
            "{} instances; mean Mbps t=1 sdr {:.4} lr {:.4}; t=10 sdr {:.4} lr {:.4}; exact {exact:.4}; mean gap {:.2}%",
            runs.len(),
            sdr[0],
            lr[0],
            sdr[1],
            lr[1],
            gap * 100.0
        ),
    );
}

#[test]
fn c05_hetnet_beats_mbs_only() {
    let tiny = &tiny_runs().0;
    let mid = mid_runs();
    let pairs: Vec<(usize, f64, f64)> = tiny
        .iter()
        .map(|r| (r.shape.1, r.exact, r.mbs_only))
        .chain(mid.iter().map(|r| (4, r.exact, r.mbs_only)))
        .collect();
    let worse = pairs.iter().filter(|p| p.1 < p.2 * (1.0 - 1e-12)).count();
    let big: Vec<_> = pairs.iter().filter(|p| p.0 >= 3).collect();
    let strict = big.iter().filter(|p| p.1 > p.2 * (1.0 + 1e-9)).count();
    let gains: Vec<f64> = pairs.iter().filter(|p| p.2 > 0.0).map(|p| (p.1 - p.2) / p.2).collect();
    let max_gain = gains.iter().copied().fold(0.0, f64::max);
    let frac = strict as f64 / big.len() as f64;
    report(
        5,
        worse == 0 && frac >= 0.3,
        &format!(
            "{} instances, {worse} worse than MBS-only; strict on {strict}/{} with J>=3; gain max {:.1}% mean {:.1}%",
            pairs.len(),
            big.len(),
            max_gain * 100.0,
            mean(gains.iter().copied()) * 100.0
        ),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn c06_best_site_lies_towards_the_cluster() {
    let cfg = GenConfig {
        candidate_grid: 9,
        num_users: 4,
        num_subcarriers: 6,
        users: UserLayout::Box {
            min_m: [500.0, 500.0],
            max_m: [1000.0, 1000.0],
        },
        ..GenConfig::default()
    };
    let centre = [750.0, 750.0];
    let limits = EnumLimits::default();
    let best: Vec<[f64; 2]> = (0..50u64)
        .into_par_iter()
        .map(|n| {
            let s = generate(&cfg, derive_seed(6, n)).unwrap();
            let rt = rate_tables(&s).unwrap();
            let vals: Vec<f64> = (0..s.num_candidates())
                .map(|i| exact_with_deployment(&rt, &s.budgets, &limits, Some(i)).unwrap().value)
                .collect();
            let i = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
            s.candidate_positions[i]
        })
        .collect();
    // Sites closer to the cluster centre than to the MBS corner.
    let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
    let near = best.iter().filter(|p| dist(**p, centre) < dist(**p, [0.0, 0.0])).count();
    let quadrant = best.iter().filter(|p| p[0] >= 500.0 && p[1] >= 500.0).count();
    let frac = near as f64 / best.len() as f64;
    report(
        6,
        frac >= 0.8,
        &format!(
            "{near}/{} best sites in the cluster half ({quadrant} inside the cluster quadrant)",
            best.len()
        ),
    );
}

// ---------------------------------------------------------------------------

/// One user, candidate 0 far better than the rest, ample backhaul there.
fn dominant_instance(seed: u64) -> RateTables {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ni = 1 + (seed as usize % 3);
    let nk = 1 + (seed as usize % 4);
    RateTables {
        r_mbs: vec![(0..nk).map(|_| rng.random_range(0.2e6..0.8e6)).collect()],
        r_rabs: (0..ni)
            .map(|i| {
                let range = if i == 0 { 4e6..6e6 } else { 0.1e6..0.5e6 };
                vec![(0..nk).map(|_| rng.random_range(range.clone())).collect()]
            })
            .collect(),
        c_back: (0..ni).map(|i| if i == 0 { 100e6 } else { 1e6 }).collect(),
        p_k: vec![0.18; nk],
        bandwidth_hz: vec![180e3; nk],
        pl_mbs_db: vec![120.0],
        pl_rabs_db: vec![vec![100.0]; ni],
    }
}

#[test]
fn c07_rank_one_relaxation_is_exact() {
    let budgets = PowerBudget::default();
    let solver = SolverConfig::with_tolerance(1e-9);
    let cfg = RefineConfig::default();
    let (mut rank_one, mut matched) = (0, 0);
    let total = 12;
    for seed in 0..total {
        let rt = dominant_instance(seed);
        let relax = solve_sdr(&rt, &budgets, &solver).unwrap();
        if !rank_one_check(&relax.solution.z, cfg.rank_one_tol) {
            continue;
        }
        rank_one += 1;
        let out = relax.refine(&rt, &budgets, &cfg);
        let opt = exact_enumerate(&rt, &budgets, &EnumLimits::default()).unwrap().value;
        if out.short_circuit && (out.value - opt).abs() <= 1e-6 * opt {
            matched += 1;
        }
    }
    report(
        7,
        rank_one > 0 && matched == rank_one,
        &format!("{rank_one}/{total} relaxations rank one, {matched} refined to the optimum"),
    );
}

// ---------------------------------------------------------------------------

fn eigenvalue_sdp() -> (bool, f64) {
    let mut c = SymBuilder::<f64>::default();
    c.add_sym(0, 0, 1.0).add_sym(1, 1, -1.0);
    let mut tr = SymBuilder::default();
    tr.add_sym(0, 0, 1.0).add_sym(1, 1, 1.0);
    let p = ConicProgram {
        order: 2,
        num_scalars: 0,
        scalar_nonneg: vec![],
        objective_mat: c.build(),
        objective_scalars: vec![],
        rows: vec![ConicRow {
            kind: RowKind::Linear(0),
            mat: tr.build(),
            scalars: vec![],
            rhs: 1.0,
            cone: Cone::Zero,
        }],
    };
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    let err = (sol.objective - 1.0).abs().max((sol.z[(0, 0)] - 1.0).abs()).max(sol.z[(1, 1)].abs());
    (sol.status == SolveStatus::Solved && err <= 1e-5, err)
}

fn projection_is_nearest(rng: &mut ChaCha8Rng) -> bool {
    let n = 6;
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = (&a + a.transpose()) * 0.5;
    let best = (psd_project(&m) - &m).norm();
    (0..100).all(|_| {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let p = &b * b.transpose() * rng.random_range(0.0..1.0);
        best <= (&p - &m).norm() + 1e-12
    })
}

/// Best vertex of `{x >= 0, A x <= b}` by solving every `n`-subset of
/// constraints as equalities.
fn vertex_optimum(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        rows.push((e, 0.0));
    }
    let feasible = |x: &DVector<f64>| rows.iter().all(|(r, rhs)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9);
    let mut best = f64::NEG_INFINITY;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let m = DMatrix::from_fn(n, n, |r, col| rows[pick[r]].0[col]);
        let rhs = DVector::from_fn(n, |r, _| rows[pick[r]].1);
        if let Some(x) = m.lu().solve(&rhs) {
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                best = best.max(c.iter().zip(x.iter()).map(|(p, q)| p * q).sum());
            }
        }
        // Next combination in lexicographic order.
        let mut i = n;
        while i > 0 && pick[i - 1] == rows.len() - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        pick[i - 1] += 1;
        for j in i..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

fn lp_matches_vertices(rng: &mut ChaCha8Rng) -> (bool, f64) {
    let n = rng.random_range(2..=6);
    let m = rng.random_range(n..=n + 3);
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
    let mut a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-0.5..2.0)).collect()).collect();
    let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
    // Keep the region bounded.
    a.push(vec![1.0; n]);
    b.push(5.0);
    let lp = LinearProgram {
        num_vars: n,
        objective: c.clone(),
        rows: a
            .iter()
            .zip(&b)
            .map(|(row, &rhs)| LpRow {
                coeffs: row.iter().copied().enumerate().collect(),
                sense: LpSense::Le,
                rhs,
            })
            .collect(),
    };
    let sol = solve_lp(&lp, &SolverConfig::with_tolerance(1e-9)).unwrap();
    let oracle = vertex_optimum(&c, &a, &b);
    let err = (sol.objective - oracle).abs();
    (sol.status == SolveStatus::Solved && err <= 1e-6, err)
}

#[test]
fn c08_conic_solver_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (sdp_ok, sdp_err) = eigenvalue_sdp();
    let proj_ok = (0..10).filter(|_| projection_is_nearest(&mut rng)).count();
    let lps: Vec<(bool, f64)> = (0..30).map(|_| lp_matches_vertices(&mut rng)).collect();
    let lp_ok = lps.iter().filter(|l| l.0).count();
    let lp_err = lps.iter().map(|l| l.1).fold(0.0, f64::max);
    report(
        8,
        sdp_ok && proj_ok == 10 && lp_ok == lps.len(),
        &format!(
            "eigenvalue SDP error {sdp_err:.1e}; projection nearest on {proj_ok}/10; LPs {lp_ok}/{} within 1e-6 (max error {lp_err:.1e})",
            lps.len()
        ),
    );
}

// ---------------------------------------------------------------------------

fn csv_without_timing(path: &std::path::Path) -> String {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !headers[i].contains("wall_ms")).collect();
    let mut out = String::new();
    for rec in std::iter::once(Ok(headers.clone())).chain(r.records()) {
        let rec = rec.unwrap();
        out.push_str(&keep.iter().map(|&i| &rec[i]).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[test]
fn c09_experiments_are_deterministic() {
    let cfg = ExperimentConfig {
        master_seed: 9,
        replications: 3,
        scenario: GenConfig {
            candidate_grid: 4,
            num_users: 2,
            num_subcarriers: 3,
            ..GenConfig::default()
        },
        sweep: Sweep::Users { values: vec![1, 2] },
        methods: Method::ALL.to_vec(),
        t_max: 3,
        ..ExperimentConfig::default()
    };
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg, Some(dir.path()))).unwrap();
        [
            csv_without_timing(&dir.path().join("replications.csv")),
            csv_without_timing(&dir.path().join("aggregate.csv")),
        ]
    };
    let outputs = [run(1), run(4), run(4)];
    let same = outputs.iter().all(|o| o == &outputs[0]);
    let rows = outputs[0][0].lines().count() - 1;
    report(9, same, &format!("3 runs (1, 4, 4 threads), {rows} rows each, identical: {same}"));
}

// ---------------------------------------------------------------------------

#[test]
fn c10_channel_spot_values() {
    let km = |d: f64| LinkGeometry::new(d).unwrap();
    let checks = [
        ("macro 1 km", pathloss_macro_db(km(1.0)), 128.1, 1e-12),
        ("small 1 km", pathloss_small_db(km(1.0)), 140.7, 1e-12),
        ("backhaul LoS 1 km", backhaul_los_pathloss_db(km(1.0)), 100.7, 1e-12),
        ("backhaul NLoS 1 km", backhaul_nlos_pathloss_db(km(1.0)), 125.2, 1e-12),
        ("LoS probability 72 m", los_probability(km(0.072)), 0.5259, 1e-4),
    ];
    let failed: Vec<_> = checks.iter().filter(|c| (c.1 - c.2).abs() > c.3).map(|c| c.0).collect();
    report(
        10,
        failed.is_empty(),
        &format!("{} spot values checked, failed: {failed:?}", checks.len()),
    );
}
