//! LU factorization with partial pivoting.
//!
//! The singularity threshold is relative to the largest entry of the input:
//! a pivot below `pivot_tol * max|A|` aborts with [`Error::Singular`]. Callers
//! in the solver layers translate that into "lambda is in the spectrum".

use num_complex::Complex;
use num_traits::{One, Zero};

use super::matrix::{CVector, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default relative pivot threshold.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    swaps: usize,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        Self::factor_with(a, T::tol(PIVOT_TOL))
    }

    pub fn factor_with(a: &Matrix<T>, pivot_tol: T) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let threshold = pivot_tol * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;

        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmag <= threshold || pmag == T::zero() {
                return Err(Error::Singular {
                    pivot: pmag.as_f64(),
                    threshold: threshold.as_f64(),
                });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve_vec(&self, b: &[Complex<T>]) -> CVector<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length");
        let mut x: CVector<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(b.rows(), self.dim(), "rhs rows");
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_column(j, &self.solve_vec(&b.column(j)));
        }
        out
    }

    pub fn determinant(&self) -> Complex<T> {
        let d = (0..self.dim()).fold(Complex::one(), |acc, i| acc * self.lu[(i, i)]);
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }
}

/// Solution of `A X = B` together with its residual `||A X - B||_inf`.
#[derive(Debug, Clone)]
pub struct LuSolution<T> {
    pub x: Matrix<T>,
    pub residual: T,
}

pub fn lu_solve<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<LuSolution<T>> {
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, matrix has {}",
            b.rows(),
            a.rows()
        )));
    }
    let x = Lu::factor(a)?.solve(b);
    let residual = (&a.matmul(&x) - b).norm_inf();
    Ok(LuSolution { x, residual })
}
