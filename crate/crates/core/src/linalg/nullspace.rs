//! Rank-revealing elimination with complete pivoting.

use num_complex::Complex;
use num_traits::{One, Zero};

use super::matrix::{dot, norm2, CVector, Matrix};
use crate::scalar::Real;

/// Numerical kernel of a matrix together with the pivot data that decided its
/// dimension.
#[derive(Debug, Clone)]
pub struct Kernel<T> {
    /// Orthonormal basis of the numerical kernel.
    pub basis: Vec<CVector<T>>,
    pub rank: usize,
    /// Absolute rank threshold `tol * max|A|`.
    pub threshold: T,
    /// Smallest pivot that was kept (infinity when the rank is zero).
    pub min_kept: T,
    /// Largest remaining entry once elimination stopped (zero at full rank).
    pub max_dropped: T,
}

impl<T: Real> Kernel<T> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// True when the kept and dropped pivots are not separated by at least a
    /// factor of ten on either side of the threshold.
    pub fn is_ambiguous(&self) -> bool {
        let ten = T::lit(10.0);
        (self.rank > 0 && self.min_kept < ten * self.threshold)
            || (self.max_dropped > self.threshold / ten)
    }

    /// Smallest ratio between the kept pivots and the threshold, or between
    /// the threshold and the dropped entries. Larger is more decisive.
    pub fn gap(&self) -> T {
        let kept = if self.rank > 0 {
            self.min_kept / self.threshold
        } else {
            T::infinity()
        };
        let dropped = if self.max_dropped > T::zero() {
            self.threshold / self.max_dropped
        } else {
            T::infinity()
        };
        kept.min(dropped)
    }
}

/// Orthonormal basis of the numerical kernel of `a` with rank threshold
/// `tol * max|A|`.
pub fn nullspace<T: Real>(a: &Matrix<T>, tol: T) -> Vec<CVector<T>> {
    kernel(a, tol).basis
}

pub fn kernel<T: Real>(a: &Matrix<T>, tol: T) -> Kernel<T> {
    let (m, n) = (a.rows(), a.cols());
    let scale = a.max_abs();
    let threshold = tol * scale;
    let mut w = a.clone();
    let mut colp: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    let mut min_kept = T::infinity();
    let mut max_dropped = T::zero();

    if scale > T::zero() {
        for k in 0..m.min(n) {
            let mut best = (k, k, -T::one());
            for i in k..m {
                for j in k..n {
                    let v = w[(i, j)].norm();
                    if v > best.2 {
                        best = (i, j, v);
                    }
                }
            }
            let (pi, pj, pv) = best;
            if pv <= threshold {
                max_dropped = pv;
                break;
            }
            w.swap_rows(k, pi);
            if pj != k {
                for i in 0..m {
                    let t = w[(i, k)];
                    w[(i, k)] = w[(i, pj)];
                    w[(i, pj)] = t;
                }
                colp.swap(k, pj);
            }
            let pivot = w[(k, k)];
            for i in k + 1..m {
                let l = w[(i, k)] / pivot;
                w[(i, k)] = Complex::zero();
                if l.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = w[(k, j)];
                    w[(i, j)] -= l * u;
                }
            }
            rank += 1;
            min_kept = pv;
        }
    }

    // Back-substitute each free column through the upper-triangular block.
    let mut raw = Vec::with_capacity(n - rank);
    for free in rank..n {
        let mut y: CVector<T> = vec![Complex::zero(); n];
        y[free] = Complex::one();
        for i in (0..rank).rev() {
            let mut s = -w[(i, free)];
            for j in i + 1..rank {
                s -= w[(i, j)] * y[j];
            }
            y[i] = s / w[(i, i)];
        }
        let mut x = vec![Complex::zero(); n];
        for (pos, &col) in colp.iter().enumerate() {
            x[col] = y[pos];
        }
        raw.push(x);
    }

    Kernel {
        basis: orthonormalize(&raw),
        rank,
        threshold,
        min_kept,
        max_dropped,
    }
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass. Input vectors are
/// assumed linearly independent.
pub fn orthonormalize<T: Real>(vs: &[CVector<T>]) -> Vec<CVector<T>> {
    let mut out: Vec<CVector<T>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut u = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &u);
                for (ui, qi) in u.iter_mut().zip(q) {
                    *ui -= c * qi;
                }
            }
        }
        let nrm = norm2(&u);
        if nrm > T::zero() {
            for ui in u.iter_mut() {
                *ui = *ui / nrm;
            }
            out.push(u);
        }
    }
    out
}

/// Numerical rank of a set of vectors (as matrix columns).
pub fn rank_of<T: Real>(vs: &[CVector<T>], tol: T) -> usize {
    if vs.is_empty() {
        return 0;
    }
    let m = Matrix::from_columns(vs[0].len(), vs);
    kernel(&m, tol).rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::vec_max_abs;

    fn real(n: usize, d: &[f64]) -> Matrix<f64> {
        Matrix::from_real(n, n, d).unwrap()
    }

    #[test]
    fn full_rank_has_empty_kernel() {
        assert!(nullspace(&real(2, &[1.0, -0.5, -0.5, 1.0]), 1e-12).is_empty());
    }

    #[test]
    fn half_minus_four_path_interior() {
        let k = nullspace(&real(2, &[0.5, -0.5, -0.5, 0.5]), 1e-12);
        assert_eq!(k.len(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = &k[0];
        // Compare up to a unimodular phase.
        let phase = v[0] / v[0].norm();
        assert!((v[0] / phase - s).norm() < 1e-14);
        assert!((v[1] / phase - s).norm() < 1e-14);
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let k = kernel(&Matrix::<f64>::zeros(2, 2), 1e-12);
        assert_eq!(k.dim(), 2);
        assert_eq!(k.rank, 0);
    }

    #[test]
    fn kernel_vectors_annihilated_and_orthonormal() {
        let a = Matrix::<f64>::from_real(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]).unwrap();
        let k = kernel(&a, 1e-12);
        assert_eq!(k.rank, 1);
        assert_eq!(k.dim(), 3);
        for (i, u) in k.basis.iter().enumerate() {
            assert!(vec_max_abs(&a.matvec(u)) < 1e-12);
            for (j, v) in k.basis.iter().enumerate() {
                let d = dot(u, v).norm();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ambiguity_reported_for_near_threshold_pivot() {
        let a = real(2, &[1.0, 0.0, 0.0, 3e-12]);
        let k = kernel(&a, 1e-12);
        assert_eq!(k.rank, 2);
        assert!(k.is_ambiguous());
        let clear = kernel(&real(2, &[1.0, 0.0, 0.0, 0.0]), 1e-12);
        assert!(!clear.is_ambiguous());
    }
}
