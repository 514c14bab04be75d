//! Dual alternating-direction solver for `min <c, x>` s.t. `A x = b`,
//! `x in K`, where `K` is one PSD block (packed with [`svec`]) times a
//! nonnegative orthant.
//!
//! Each iteration solves the normal equations for the dual multipliers
//! (affine step), projects `c - A^T y - mu X` onto `K` (cone step) and reads
//! the new primal iterate off the Moreau decomposition of the same point.
//! `A A^T` is factored once; the only per-iteration dense work is one
//! symmetric eigendecomposition of the PSD block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::psd::{smat, svec_index, svec_len};
use super::{Cone, ConicProgram, ConicSolution, SolveStatus, SolverConfig, TraceRow};
use crate::error::SolverError;
use crate::scalar::Real;

const RUIZ_PASSES: usize = 15;
/// Golden ratio; the primal step must stay below it.
const MAX_STEP: f64 = 1.618_033_988_749_895;
const MU_MIN: f64 = 1e-6;
const MU_MAX: f64 = 1e6;
/// Residual imbalance that triggers a penalty update.
const MU_BALANCE: f64 = 10.0;
/// Iterations before the first penalty update. Each update doubles the wait
/// so the penalty settles; frequent flips make the iterates cycle.
const MU_INTERVAL: usize = 100;

/// Program compiled to equality form with all variables in `K`.
struct StandardForm<T> {
    order: usize,
    psd_len: usize,
    num_cols: usize,
    /// Scaled sparse rows, entries sorted by column.
    rows: Vec<Vec<(usize, T)>>,
    b: Vec<T>,
    c: Vec<T>,
    /// Column(s) carrying each original scalar: `(positive, negative part)`.
    scalar_cols: Vec<(usize, Option<usize>)>,
    row_scale: Vec<T>,
    col_scale: Vec<T>,
    b_scale: T,
    c_scale: T,
}

fn coalesce<T: Real>(mut entries: Vec<(usize, T)>) -> Vec<(usize, T)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, T)> = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|e| e.1 != T::zero());
    out
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn two_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m + *x * *x).sqrt()
}

impl<T: Real> StandardForm<T> {
    fn compile(p: &ConicProgram<T>, scale: bool) -> Self {
        let s2 = T::of(std::f64::consts::SQRT_2);
        let psd_len = svec_len(p.order);
        let mut next = psd_len;
        let scalar_cols: Vec<(usize, Option<usize>)> = p
            .scalar_nonneg
            .iter()
            .map(|&nonneg| {
                let pos = next;
                next += 1;
                let neg = (!nonneg).then(|| {
                    next += 1;
                    next - 1
                });
                (pos, neg)
            })
            .collect();

        let mat_entries = |m: &crate::formulation::SymMatrix<T>| {
            m.entries()
                .iter()
                .map(|&(r, c, v)| (svec_index(r, c), if r == c { v } else { v * s2 }))
                .collect::<Vec<_>>()
        };
        let scalar_entries = |s: &[(usize, T)]| {
            s.iter()
                .flat_map(|&(i, g)| {
                    let (pos, neg) = scalar_cols[i];
                    std::iter::once((pos, g)).chain(neg.map(|n| (n, -g)))
                })
                .collect::<Vec<_>>()
        };

        let mut rows = Vec::with_capacity(p.rows.len());
        let mut b = Vec::with_capacity(p.rows.len());
        for row in &p.rows {
            let mut e = mat_entries(&row.mat);
            e.extend(scalar_entries(&row.scalars));
            if row.cone == Cone::Nonneg {
                e.push((next, T::one()));
                next += 1;
            }
            rows.push(coalesce(e));
            b.push(row.rhs);
        }
        let num_cols = next;

        let mut c = vec![T::zero(); num_cols];
        for (j, v) in mat_entries(&p.objective_mat) {
            c[j] -= v;
        }
        for (j, v) in scalar_entries(&p.objective_scalars) {
            c[j] -= v;
        }

        let mut sf = Self {
            order: p.order,
            psd_len,
            num_cols,
            rows,
            b,
            c,
            scalar_cols,
            row_scale: vec![T::one(); p.rows.len()],
            col_scale: vec![T::one(); num_cols],
            b_scale: T::one(),
            c_scale: T::one(),
        };
        if scale {
            sf.equilibrate();
        }
        sf
    }

    /// Ruiz equilibration. The PSD block shares one column factor so the
    /// cone is preserved.
    fn equilibrate(&mut self) {
        let m = self.rows.len();
        for _ in 0..RUIZ_PASSES {
            let mut col_norm = vec![T::zero(); self.num_cols];
            let mut row_fac = vec![T::one(); m];
            for (i, row) in self.rows.iter().enumerate() {
                let mut rn = T::zero();
                for &(j, v) in row {
                    let a = v.abs();
                    rn = rn.max(a);
                    col_norm[j] = col_norm[j].max(a);
                }
                if rn > T::zero() {
                    row_fac[i] = T::one() / rn.sqrt();
                }
            }
            let psd_norm = col_norm[..self.psd_len]
                .iter()
                .fold(T::zero(), |a, b| a.max(*b));
            let mut col_fac: Vec<T> = col_norm
                .iter()
                .map(|n| if *n > T::zero() { T::one() / n.sqrt() } else { T::one() })
                .collect();
            if psd_norm > T::zero() {
                let f = T::one() / psd_norm.sqrt();
                col_fac[..self.psd_len].iter_mut().for_each(|x| *x = f);
            }
            for (i, row) in self.rows.iter_mut().enumerate() {
                for (j, v) in row.iter_mut() {
                    *v *= row_fac[i] * col_fac[*j];
                }
            }
            for i in 0..m {
                self.row_scale[i] *= row_fac[i];
                self.b[i] *= row_fac[i];
            }
            for j in 0..self.num_cols {
                self.col_scale[j] *= col_fac[j];
                self.c[j] *= col_fac[j];
            }
        }
        let bn = inf_norm(&self.b);
        if bn > T::zero() {
            self.b_scale = bn;
            self.b.iter_mut().for_each(|x| *x /= bn);
        }
        let cn = inf_norm(&self.c);
        if cn > T::zero() {
            self.c_scale = cn;
            self.c.iter_mut().for_each(|x| *x /= cn);
        }
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().fold(T::zero(), |a, &(j, v)| a + v * x[j]);
        }
    }

    fn apply_t(&self, y: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (row, &yi) in self.rows.iter().zip(y) {
            for &(j, v) in row {
                out[j] += v * yi;
            }
        }
    }

    fn normal_matrix(&self) -> DMatrix<T> {
        let m = self.rows.len();
        let mut by_col: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.num_cols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                by_col[j].push((i, v));
            }
        }
        let mut mm = DMatrix::zeros(m, m);
        for col in &by_col {
            for &(a, va) in col {
                for &(b, vb) in col {
                    mm[(a, b)] += va * vb;
                }
            }
        }
        mm
    }

    /// Splits `v` into `S = Pi_K(v)` and `X = Pi_K(-v) / mu`.
    fn project(&self, v: &[T], mu: T, x: &mut [T], s: &mut [T]) {
        let n = self.order;
        if n > 0 {
            let eig = SymmetricEigen::new(smat(&v[..self.psd_len], n));
            let q = &eig.eigenvectors;
            let s2 = T::of(std::f64::consts::SQRT_2);
            let inv_mu = T::one() / mu;
            let mut pos = q.clone();
            let mut neg = q.clone();
            for (c, &l) in eig.eigenvalues.iter().enumerate() {
                pos.column_mut(c).scale_mut(l.max(T::zero()));
                neg.column_mut(c).scale_mut((-l).max(T::zero()) * inv_mu);
            }
            let sp = &pos * q.transpose();
            let xp = &neg * q.transpose();
            for cc in 0..n {
                for r in 0..=cc {
                    let k = svec_index(r, cc);
                    let (sv, xv) = if r == cc {
                        (sp[(r, r)], xp[(r, r)])
                    } else {
                        (
                            (sp[(r, cc)] + sp[(cc, r)]) * T::of(0.5) * s2,
                            (xp[(r, cc)] + xp[(cc, r)]) * T::of(0.5) * s2,
                        )
                    };
                    s[k] = sv;
                    x[k] = xv;
                }
            }
        }
        let inv_mu = T::one() / mu;
        for j in self.psd_len..self.num_cols {
            s[j] = v[j].max(T::zero());
            x[j] = (-v[j]).max(T::zero()) * inv_mu;
        }
    }

    /// Largest violation of `-w in K`, i.e. `||Pi_K(w)||_inf`.
    fn cone_excess(&self, w: &[T]) -> T {
        let mut worst = T::zero();
        if self.order > 0 {
            let eig = SymmetricEigen::new(smat(&w[..self.psd_len], self.order));
            worst = eig.eigenvalues.iter().fold(worst, |m, l| m.max(*l));
        }
        w[self.psd_len..].iter().fold(worst, |m, v| m.max(*v))
    }
}

struct Checked<T> {
    primal: T,
    dual: T,
    gap: T,
    objective: T,
    dual_objective: T,
    /// Max of residual / threshold over the three tests; `<= 1` means converged.
    merit: T,
}

fn check<T: Real>(
    sf: &StandardForm<T>,
    cfg: &SolverConfig,
    x: &[T],
    y: &[T],
    s: &[T],
    ax: &mut [T],
    aty: &mut [T],
) -> Checked<T> {
    let eps_abs = T::of(cfg.eps_abs);
    let eps_rel = T::of(cfg.eps_rel);
    sf.apply(x, ax);
    sf.apply_t(y, aty);

    let mut primal = T::zero();
    let mut primal_merit = T::zero();
    for i in 0..sf.rows.len() {
        let back = sf.b_scale / sf.row_scale[i];
        let res = ((ax[i] - sf.b[i]) * back).abs();
        let rhs = (sf.b[i] * back).abs();
        primal = primal.max(res / rhs.max(T::one()));
        primal_merit = primal_merit.max(res / eps_abs.max(eps_rel * rhs));
    }

    let mut dres = T::zero();
    let mut cnorm = T::zero();
    for j in 0..sf.num_cols {
        let back = sf.c_scale / sf.col_scale[j];
        dres = dres.max(((sf.c[j] - aty[j] - s[j]) * back).abs());
        cnorm = cnorm.max((sf.c[j] * back).abs());
    }
    let dual = dres / cnorm.max(T::one());
    let dual_merit = dres / eps_abs.max(eps_rel * cnorm);

    let unit = sf.b_scale * sf.c_scale;
    let p = sf.c.iter().zip(x).fold(T::zero(), |a, (c, x)| a + *c * *x) * unit;
    let d = sf.b.iter().zip(y).fold(T::zero(), |a, (b, y)| a + *b * *y) * unit;
    let gap_abs = (p - d).abs();
    let big = p.abs().max(d.abs());
    let gap = gap_abs / big.max(T::one());
    let gap_merit = gap_abs / eps_abs.max(eps_rel * big);

    Checked {
        primal,
        dual,
        gap,
        objective: -p,
        dual_objective: -d,
        merit: primal_merit.max(dual_merit).max(gap_merit),
    }
}

/// Solves a conic program with the dual splitting method.
pub fn solve<T: Real>(
    p: &ConicProgram<T>,
    cfg: &SolverConfig,
) -> Result<ConicSolution<T>, SolverError> {
    p.validate()?;
    if !(cfg.eps_abs > 0.0 && cfg.eps_rel > 0.0) {
        return Err(SolverError::Malformed("tolerances must be positive".into()));
    }
    if !(cfg.step > 0.0 && cfg.step < MAX_STEP) {
        return Err(SolverError::Malformed(format!("step must lie in (0, {MAX_STEP:.4})")));
    }
    let sf = StandardForm::compile(p, cfg.scaling);
    let (m, nc) = (sf.rows.len(), sf.num_cols);

    let chol = factor(sf.normal_matrix())?;

    let mut x = vec![T::zero(); nc];
    let mut s = vec![T::zero(); nc];
    let mut y = vec![T::zero(); m];
    let mut y_prev = vec![T::zero(); m];
    let mut v = vec![T::zero(); nc];
    let mut ax = vec![T::zero(); m];
    let mut aty = vec![T::zero(); nc];
    let mut rhs = DVector::zeros(m);
    let mut tmp = vec![T::zero(); m];
    let mut c_minus_s = vec![T::zero(); nc];
    let mut mu = T::of(cfg.mu);
    let relax = T::of(cfg.step);
    let mut adapt_wait = MU_INTERVAL;
    let mut next_adapt = MU_INTERVAL;
    let mut x_prev = vec![T::zero(); nc];
    let check_every = cfg.check_interval.max(1);

    let mut trace = Vec::new();
    let mut best: Option<(T, Vec<T>, Vec<T>, Vec<T>)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        // y = (A A^T)^{-1} (mu (b - A x) + A (c - s))
        sf.apply(&x, &mut ax);
        for j in 0..nc {
            c_minus_s[j] = sf.c[j] - s[j];
        }
        sf.apply(&c_minus_s, &mut tmp);
        for i in 0..m {
            rhs[i] = mu * (sf.b[i] - ax[i]) + tmp[i];
        }
        let sol = chol.solve(&rhs);
        y.copy_from_slice(sol.as_slice());

        sf.apply_t(&y, &mut aty);
        for j in 0..nc {
            v[j] = sf.c[j] - aty[j] - mu * x[j];
        }
        if relax != T::one() {
            x_prev.copy_from_slice(&x);
        }
        sf.project(&v, mu, &mut x, &mut s);
        if relax != T::one() {
            for j in 0..nc {
                x[j] = x_prev[j] + relax * (x[j] - x_prev[j]);
            }
        }

        if it % check_every != 0 {
            continue;
        }
        let chk = check(&sf, cfg, &x, &y, &s, &mut ax, &mut aty);
        if cfg.trace {
            trace.push(TraceRow {
                iteration: it,
                primal_residual: chk.primal.to_f64_lossy(),
                dual_residual: chk.dual.to_f64_lossy(),
                gap: chk.gap.to_f64_lossy(),
                objective: chk.objective.to_f64_lossy(),
                mu: mu.to_f64_lossy(),
            });
        }
        if best.as_ref().is_none_or(|b| chk.merit < b.0) {
            best = Some((chk.merit, x.clone(), y.clone(), s.clone()));
        }
        if chk.merit <= T::one() {
            status = SolveStatus::Solved;
            best = Some((chk.merit, x.clone(), y.clone(), s.clone()));
            break;
        }
        if it >= 2 * check_every && infeasible(&sf, cfg, &y, &y_prev, &mut aty) {
            status = SolveStatus::InfeasibleDetected;
            best = Some((chk.merit, x.clone(), y.clone(), s.clone()));
            break;
        }
        y_prev.copy_from_slice(&y);

        if cfg.adaptive_mu && it >= next_adapt {
            // Residuals of the scaled problem steer the penalty.
            sf.apply(&x, &mut ax);
            let rp: Vec<T> = ax.iter().zip(&sf.b).map(|(a, b)| *a - *b).collect();
            sf.apply_t(&y, &mut aty);
            let rd: Vec<T> = (0..nc).map(|j| sf.c[j] - aty[j] - s[j]).collect();
            let pr = two_norm(&rp) / (T::one() + two_norm(&sf.b));
            let dr = two_norm(&rd) / (T::one() + two_norm(&sf.c));
            let balance = T::of(MU_BALANCE);
            let before = mu;
            if pr > balance * dr {
                mu = (mu * T::of(2.0)).min(T::of(MU_MAX));
            } else if dr > balance * pr {
                mu = (mu * T::of(0.5)).max(T::of(MU_MIN));
            }
            if mu != before {
                adapt_wait *= 2;
            }
            next_adapt = it + adapt_wait;
        }
    }

    let (_, bx, by, bs) = best.unwrap_or((T::one(), x, y, s));
    let chk = check(&sf, cfg, &bx, &by, &bs, &mut ax, &mut aty);
    Ok(recover(&sf, p, &bx, chk, iterations, status, trace))
}

fn factor<T: Real>(mut mm: DMatrix<T>) -> Result<Cholesky<T, Dyn>, SolverError> {
    let m = mm.nrows();
    if m == 0 {
        return Err(SolverError::Malformed("program has no constraint rows".into()));
    }
    if let Some(ch) = Cholesky::new(mm.clone()) {
        return Ok(ch);
    }
    let shift = mm.trace() / T::of(m as f64) * T::of(1e-10).max(T::machine_epsilon());
    for i in 0..m {
        mm[(i, i)] += shift;
    }
    Cholesky::new(mm).ok_or(SolverError::Factorization)
}

/// Farkas test on the latest dual step: `b^T dy > 0` with `A^T dy` in `-K`.
fn infeasible<T: Real>(
    sf: &StandardForm<T>,
    cfg: &SolverConfig,
    y: &[T],
    y_prev: &[T],
    aty: &mut [T],
) -> bool {
    let dy: Vec<T> = y.iter().zip(y_prev).map(|(a, b)| *a - *b).collect();
    let norm = inf_norm(&dy);
    if norm <= T::of(cfg.eps_abs) {
        return false;
    }
    let bd = sf.b.iter().zip(&dy).fold(T::zero(), |a, (b, d)| a + *b * *d);
    if bd <= T::zero() || bd < T::of(1e-3) * norm {
        return false;
    }
    sf.apply_t(&dy, aty);
    let scaled: Vec<T> = aty.iter().map(|v| *v / bd).collect();
    sf.cone_excess(&scaled) <= T::of(cfg.eps_infeasible)
}

fn recover<T: Real>(
    sf: &StandardForm<T>,
    p: &ConicProgram<T>,
    x: &[T],
    chk: Checked<T>,
    iterations: usize,
    status: SolveStatus,
    trace: Vec<TraceRow>,
) -> ConicSolution<T> {
    let unscaled: Vec<T> = x
        .iter()
        .zip(&sf.col_scale)
        .map(|(v, e)| *v * *e * sf.b_scale)
        .collect();
    let z = if sf.order > 0 {
        smat(&unscaled[..sf.psd_len], sf.order)
    } else {
        DMatrix::zeros(0, 0)
    };
    let scalars = sf
        .scalar_cols
        .iter()
        .map(|&(pos, neg)| unscaled[pos] - neg.map_or(T::zero(), |n| unscaled[n]))
        .collect::<Vec<_>>();
    let objective = p.objective_at(&z, &scalars);
    ConicSolution {
        z,
        scalars,
        objective,
        dual_objective: chk.dual_objective,
        primal_residual: chk.primal,
        dual_residual: chk.dual,
        gap: chk.gap,
        iterations,
        status,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{min_eigenvalue, ConicRow, RowKind};
    use crate::formulation::SymBuilder;

    fn diag_program(c: &[f64]) -> ConicProgram<f64> {
        let n = c.len();
        let mut obj = SymBuilder::default();
        let mut tr = SymBuilder::default();
        for (i, &ci) in c.iter().enumerate() {
            obj.add_sym(i, i, ci);
            tr.add_sym(i, i, 1.0);
        }
        ConicProgram {
            order: n,
            num_scalars: 0,
            scalar_nonneg: vec![],
            objective_mat: obj.build(),
            objective_scalars: vec![],
            rows: vec![ConicRow {
                kind: RowKind::Linear(0),
                mat: tr.build(),
                scalars: vec![],
                rhs: 1.0,
                cone: Cone::Zero,
            }],
        }
    }

    #[test]
    fn eigenvalue_sdp() {
        let sol = solve(&diag_program(&[1.0, -1.0]), &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved);
        assert!((sol.objective - 1.0).abs() < 1e-5);
        assert!((sol.z[(0, 0)] - 1.0).abs() < 1e-4);
        assert!(sol.z[(1, 1)].abs() < 1e-4);
        assert!(min_eigenvalue(&sol.z) > -1e-9);
    }

    #[test]
    fn eigenvalue_sdp_in_f32() {
        let p = diag_program(&[1.0, -1.0]);
        let p32 = ConicProgram::<f32> {
            order: p.order,
            num_scalars: 0,
            scalar_nonneg: vec![],
            objective_mat: {
                let mut b = SymBuilder::default();
                b.add_sym(0, 0, 1.0f32).add_sym(1, 1, -1.0);
                b.build()
            },
            objective_scalars: vec![],
            rows: vec![ConicRow {
                kind: RowKind::Linear(0),
                mat: {
                    let mut b = SymBuilder::default();
                    b.add_sym(0, 0, 1.0f32).add_sym(1, 1, 1.0);
                    b.build()
                },
                scalars: vec![],
                rhs: 1.0,
                cone: Cone::Zero,
            }],
        };
        let sol = solve(&p32, &SolverConfig::with_tolerance(1e-4)).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved);
        assert!((sol.objective - 1.0).abs() < 1e-3);
    }

    #[test]
    fn anchor_only_program() {
        let mut anchor = SymBuilder::default();
        anchor.add_sym(2, 2, 1.0f64);
        let p = ConicProgram {
            order: 3,
            num_scalars: 0,
            scalar_nonneg: vec![],
            objective_mat: SymBuilder::default().build(),
            objective_scalars: vec![],
            rows: vec![ConicRow {
                kind: RowKind::Linear(0),
                mat: anchor.build(),
                scalars: vec![],
                rhs: 1.0,
                cone: Cone::Zero,
            }],
        };
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Solved);
        assert!(sol.objective.abs() < 1e-5);
        assert!((sol.z[(2, 2)] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn deterministic_iterates() {
        let p = diag_program(&[0.3, -2.0, 1.7]);
        let cfg = SolverConfig {
            trace: true,
            ..SolverConfig::default()
        };
        let a = solve(&p, &cfg).unwrap();
        let b = solve(&p, &cfg).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.z, b.z);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn max_iter_reports_status() {
        let cfg = SolverConfig {
            max_iter: 3,
            check_interval: 1,
            ..SolverConfig::with_tolerance(1e-12)
        };
        let sol = solve(&diag_program(&[0.3, -2.0, 1.7]), &cfg).unwrap();
        assert_eq!(sol.status, SolveStatus::MaxIter);
        assert_eq!(sol.iterations, 3);
    }

    #[test]
    fn rejects_malformed_programs() {
        let mut p = diag_program(&[1.0]);
        p.rows[0].scalars.push((4, 1.0));
        assert!(matches!(
            solve(&p, &SolverConfig::default()),
            Err(SolverError::Malformed(_))
        ));
    }
}
