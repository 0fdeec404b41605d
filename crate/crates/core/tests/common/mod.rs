#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use polyharmonic::scalar::cplx;
use polyharmonic::{Chain, Complex64};
use rand::Rng;

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("finite")
}

pub fn c(x: f64) -> Complex64 {
    cplx(x, 0.0)
}

/// Exact solution of `A X = B` by Gauss-Jordan elimination.
pub fn solve_exact(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Vec<Vec<BigRational>> = (0..n)
        .map(|i| a[i].iter().chain(b[i].iter()).cloned().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !aug[r][col].is_zero()).expect("nonsingular");
        aug.swap(col, piv);
        let inv = BigRational::one() / aug[col][col].clone();
        for v in aug[col].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for k in 0..n + m {
                    let t = aug[col][k].clone() * f.clone();
                    aug[r][k] = aug[r][k].clone() - t;
                }
            }
        }
    }
    aug.into_iter().map(|row| row[n..].to_vec()).collect()
}

pub fn matmul_exact(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).fold(BigRational::zero(), |s, l| s + a[i][l].clone() * b[l][j].clone()))
                .collect()
        })
        .collect()
}

/// A chain with rational transition probabilities, known exactly.
pub struct RationalChain {
    pub chain: Chain<f64>,
    /// Exact `P_X°` and `Q` in the chain's interior/boundary order.
    pub p_int: Vec<Vec<BigRational>>,
    pub q: Vec<Vec<BigRational>>,
}

impl RationalChain {
    /// `λI - P_X°` for rational `λ`.
    pub fn shifted(&self, lambda: &BigRational) -> Vec<Vec<BigRational>> {
        let m = self.p_int.len();
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let d = if i == j { lambda.clone() } else { BigRational::zero() };
                        d - self.p_int[i][j].clone()
                    })
                    .collect()
            })
            .collect()
    }

    /// Exact hitting matrix `(λI - P_X°)⁻¹ Q`.
    pub fn hitting(&self, lambda: &BigRational) -> Vec<Vec<BigRational>> {
        solve_exact(&self.shifted(lambda), &self.q)
    }
}

/// Random chain with small integer weights; interior `x0..`, boundary `w0..`.
pub fn rational_chain<R: Rng>(rng: &mut R, m: usize, b: usize) -> RationalChain {
    let n = m + b;
    let mut w = vec![vec![0i64; n]; n];
    for k in 0..m {
        let target = if k == 0 || rng.random_bool(0.4) {
            m + rng.random_range(0..b)
        } else {
            rng.random_range(0..k)
        };
        w[k][target] += rng.random_range(1..=4);
        for j in 0..n {
            if rng.random_bool(0.3) {
                w[k][j] += rng.random_range(1..=4);
            }
        }
    }
    for j in 0..b {
        if (0..m).all(|k| w[k][m + j] == 0) {
            let k = rng.random_range(0..m);
            w[k][m + j] += rng.random_range(1..=4);
        }
    }
    let exact: Vec<Vec<BigRational>> = (0..m)
        .map(|i| {
            let s: i64 = w[i].iter().sum();
            (0..n).map(|j| q(w[i][j], s)).collect()
        })
        .collect();
    let mut trans = vec![0.0; n * n];
    for i in 0..m {
        for j in 0..n {
            trans[i * n + j] = to_f64(&exact[i][j]);
        }
    }
    for j in m..n {
        trans[j * n + j] = 1.0;
    }
    let mut ids: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
    ids.extend((0..b).map(|j| format!("w{j}")));
    let interior: Vec<usize> = (0..m).collect();
    let boundary: Vec<usize> = (m..n).collect();
    let chain = Chain::new(ids, &interior, &boundary, trans).expect("valid rational chain");
    RationalChain {
        chain,
        p_int: exact.iter().map(|r| r[..m].to_vec()).collect(),
        q: exact.iter().map(|r| r[m..].to_vec()).collect(),
    }
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn rational_abs(r: &BigRational) -> BigRational {
    r.abs()
}
