use nalgebra::{DMatrix, SymmetricEigen};

use crate::scalar::Real;

/// Frobenius-nearest PSD matrix: eigenvalues below zero are clipped.
/// Non-symmetric input is replaced by `(M + M^T) / 2` first.
pub fn psd_project<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let sym = (m + m.transpose()) * T::of(0.5);
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|l| l.max(T::zero()));
    reassemble(&eig.eigenvectors, &clipped)
}

/// `Q diag(d) Q^T`, symmetrized against rounding.
pub(crate) fn reassemble<T: Real>(q: &DMatrix<T>, d: &nalgebra::DVector<T>) -> DMatrix<T> {
    let n = q.nrows();
    let mut scaled = q.clone();
    for (c, &dc) in d.iter().enumerate() {
        scaled.column_mut(c).scale_mut(dc);
    }
    let mut out = &scaled * q.transpose();
    for r in 0..n {
        for c in (r + 1)..n {
            let avg = (out[(r, c)] + out[(c, r)]) * T::of(0.5);
            out[(r, c)] = avg;
            out[(c, r)] = avg;
        }
    }
    out
}

/// Eigenvalues sorted in descending order.
pub fn sorted_eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let sym = (m + m.transpose()) * T::of(0.5);
    let mut ev: Vec<T> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

pub fn min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    sorted_eigenvalues(m).last().copied().unwrap_or_else(T::zero)
}

/// Position of `(r, c)`, `r <= c`, in the packed upper triangle.
#[inline]
pub(crate) fn svec_index(r: usize, c: usize) -> usize {
    debug_assert!(r <= c);
    c * (c + 1) / 2 + r
}

pub(crate) fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packs a symmetric matrix with `sqrt(2)` on off-diagonals so that
/// `svec(A) . svec(B) = <A, B>`.
#[cfg(test)]
pub(crate) fn svec<T: Real>(m: &DMatrix<T>, out: &mut [T]) {
    let n = m.nrows();
    let s2 = T::of(std::f64::consts::SQRT_2);
    for c in 0..n {
        for r in 0..=c {
            out[svec_index(r, c)] = if r == c { m[(r, c)] } else { m[(r, c)] * s2 };
        }
    }
}

pub(crate) fn smat<T: Real>(v: &[T], n: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(n, n);
    let inv = T::of(std::f64::consts::FRAC_1_SQRT_2);
    for c in 0..n {
        for r in 0..=c {
            let x = v[svec_index(r, c)];
            if r == c {
                m[(r, r)] = x;
            } else {
                m[(r, c)] = x * inv;
                m[(c, r)] = x * inv;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn clips_negative_eigenvalues() {
        let m = DMatrix::from_diagonal(&nalgebra::dvector![1.0, -2.0]);
        let p = psd_project(&m);
        assert!((p - DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn idempotent_on_psd_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let psd = &a * a.transpose();
        assert!((psd_project(&psd) - &psd).norm() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let m = nalgebra::dmatrix![2.0, 1.0; -1.0, 2.0];
        assert!((psd_project(&m) - DMatrix::from_diagonal(&nalgebra::dvector![2.0, 2.0])).norm() < 1e-14);
    }

    #[test]
    fn nearest_point_against_sampled_psd_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let m = random_sym(&mut rng, 6);
            let p = psd_project(&m);
            let best = (&p - &m).norm();
            assert!(min_eigenvalue(&p) > -1e-12);
            for _ in 0..100 {
                let a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
                let cand = &a * a.transpose() * rng.random_range(0.0..1.0);
                assert!(best <= (&cand - &m).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn svec_preserves_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random_sym(&mut rng, 4), random_sym(&mut rng, 4));
        let (mut va, mut vb) = (vec![0.0; svec_len(4)], vec![0.0; svec_len(4)]);
        svec(&a, &mut va);
        svec(&b, &mut vb);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - a.component_mul(&b).sum()).abs() < 1e-12);
        assert!((smat(&va, 4) - a).norm() < 1e-14);
    }

    #[test]
    fn single_precision_projection() {
        let m = DMatrix::from_diagonal(&nalgebra::dvector![3.0f32, -1.0, 0.5]);
        let p = psd_project(&m);
        assert!((p[(1, 1)]).abs() < 1e-6 && (p[(0, 0)] - 3.0).abs() < 1e-6);
    }
}
