use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::index::IndexMap;
use super::qcqp::{Family, QcqpProblem, QuadConstraint, Sense};
use super::sparse::{SymBuilder, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomConstraint<T> {
    pub family: Family,
    pub mat: SymMatrix<T>,
    pub rhs: T,
    pub sense: Sense,
}

/// Homogeneous QCQP over `z~ = [z; t]`: every form is `z~^T Q~ z~`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSdp<T> {
    pub index: IndexMap,
    pub objectives: Vec<SymMatrix<T>>,
    pub constraints: Vec<HomConstraint<T>>,
    pub rate_scale: f64,
}

impl<T: Real> HomogeneousSdp<T> {
    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn objective_values(&self, zt: &[T]) -> Vec<T> {
        self.objectives.iter().map(|q| q.quad_form(zt)).collect()
    }

    pub fn is_satisfied(&self, zt: &[T], tol: T) -> bool {
        self.constraints.iter().all(|c| {
            let lhs = c.mat.quad_form(zt);
            let scale = c.rhs.abs().max(T::one());
            match c.sense {
                Sense::Le => lhs <= c.rhs + tol * scale,
                Sense::Eq => (lhs - c.rhs).abs() <= tol * scale,
            }
        })
    }

    /// Writes every matrix as `row col value` triplets (upper triangle),
    /// each block preceded by a `#` header naming it.
    pub fn dump_triplets(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# dim {}", self.dim())?;
        for (j, q) in self.objectives.iter().enumerate() {
            writeln!(out, "# objective {j}")?;
            write_entries(out, q)?;
        }
        for c in &self.constraints {
            let sense = match c.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            writeln!(out, "# constraint {:?} {sense} {}", c.family, c.rhs)?;
            write_entries(out, &c.mat)?;
        }
        Ok(())
    }
}

fn write_entries<T: Real>(out: &mut impl Write, q: &SymMatrix<T>) -> io::Result<()> {
    for (r, c, v) in q.entries() {
        writeln!(out, "{r} {c} {:e}", v.to_f64_lossy())?;
    }
    Ok(())
}

/// `[[Q, q/2], [q^T/2, 0]]` with `t` in the last coordinate.
fn lift<T: Real>(
    t: usize,
    quad: Option<&SymMatrix<T>>,
    lin: &super::sparse::SparseVec<T>,
) -> SymMatrix<T> {
    let mut b = SymBuilder::default();
    if let Some(q) = quad {
        for &(r, c, v) in q.entries() {
            b.add_sym(r, c, v);
        }
    }
    let half = T::of(0.5);
    for &(r, v) in lin.entries() {
        b.add_sym(r, t, v * half);
    }
    b.build()
}

/// Homogenizes the lifted QCQP and appends the `t^2 = 1` anchor.
pub fn homogenize<T: Real>(q: &QcqpProblem<T>) -> HomogeneousSdp<T> {
    let t = q.index.t();
    let objectives = q
        .objectives
        .iter()
        .map(|o| lift(t, Some(&o.quad), &o.lin))
        .collect();
    let mut constraints: Vec<HomConstraint<T>> = q
        .constraints
        .iter()
        .map(|c: &QuadConstraint<T>| HomConstraint {
            family: c.family,
            mat: lift(t, c.quad.as_ref(), &c.lin),
            rhs: c.rhs,
            sense: c.sense,
        })
        .collect();
    let mut anchor = SymBuilder::default();
    anchor.add_sym(t, t, T::one());
    constraints.push(HomConstraint {
        family: Family::Anchor,
        mat: anchor.build(),
        rhs: T::one(),
        sense: Sense::Eq,
    });
    HomogeneousSdp {
        index: q.index,
        objectives,
        constraints,
        rate_scale: q.rate_scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::assignment::toy_tables;
    use crate::formulation::qcqp::assemble_qcqp;
    use crate::scenario::PowerBudget;

    fn problem() -> (QcqpProblem<f64>, HomogeneousSdp<f64>) {
        let q = assemble_qcqp(&toy_tables(), &PowerBudget::default()).unwrap();
        let h = homogenize(&q);
        (q, h)
    }

    #[test]
    fn zero_vector_only_anchor_is_nonzero() {
        let (_, h) = problem();
        let mut zt = vec![0.0; h.dim()];
        zt[h.index.t()] = 1.0;
        for c in &h.constraints {
            let v = c.mat.quad_form(&zt);
            if c.family == Family::Anchor {
                assert_eq!(v, 1.0);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn every_matrix_is_symmetric() {
        let (_, h) = problem();
        let n = h.dim();
        for m in h.objectives.iter().chain(h.constraints.iter().map(|c| &c.mat)) {
            let d = m.to_dense(n);
            assert_eq!(d, d.transpose());
        }
    }

    #[test]
    fn negative_t_flips_linear_part() {
        let (q, h) = problem();
        let z: Vec<f64> = (0..q.index.decision_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut zt = z.clone();
        zt.push(-1.0);
        for (o, m) in q.objectives.iter().zip(&h.objectives) {
            let expect = o.quad.quad_form(&z) - o.lin.dot(&z);
            assert!((m.quad_form(&zt) - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn dump_lists_every_block() {
        let (_, h) = problem();
        let mut buf = Vec::new();
        h.dump_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let headers = text.lines().filter(|l| l.starts_with("# objective") || l.starts_with("# constraint")).count();
        assert_eq!(headers, h.objectives.len() + h.constraints.len());
        assert!(text.contains("# constraint Anchor = 1"));
    }
}
