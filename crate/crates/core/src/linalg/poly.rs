//! Characteristic polynomials and simultaneous polynomial root iteration.
//!
//! Polynomials are stored as ascending coefficient vectors `c[0] + c[1] z + ...`.

use num_complex::Complex;
use num_traits::{One, Zero};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Characteristic polynomial `det(z I - A)` by the Faddeev-LeVerrier recursion.
/// The result is monic of degree `n`.
pub fn char_poly<T: Real>(a: &Matrix<T>) -> Vec<Complex<T>> {
    assert!(a.is_square(), "characteristic polynomial of a non-square matrix");
    let n = a.rows();
    let mut c = vec![Complex::zero(); n + 1];
    c[n] = Complex::<T>::one();
    // a_m holds A * M_k; M_1 = I so the first product is A itself.
    let mut a_m = a.clone();
    for k in 1..=n {
        c[n - k] = -a_m.trace() / T::count(k);
        if k < n {
            let mut m_next = a_m;
            for i in 0..n {
                m_next[(i, i)] += c[n - k];
            }
            a_m = a.matmul(&m_next);
        }
    }
    c
}

/// `(p(z), p'(z), sum |c_i| |z|^i)` by Horner's scheme.
pub fn eval_with_bound<T: Real>(c: &[Complex<T>], z: Complex<T>) -> (Complex<T>, Complex<T>, T) {
    let mut p = Complex::zero();
    let mut dp = Complex::zero();
    let mut bound = T::zero();
    let az = z.norm();
    for &ci in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ci;
        bound = bound * az + ci.norm();
    }
    (p, dp, bound)
}

pub fn eval<T: Real>(c: &[Complex<T>], z: Complex<T>) -> Complex<T> {
    eval_with_bound(c, z).0
}

/// Coefficients of `t -> p(center + t)`.
pub fn taylor_shift<T: Real>(c: &[Complex<T>], center: Complex<T>) -> Vec<Complex<T>> {
    let mut b = c.to_vec();
    let n = b.len();
    for k in 0..n {
        for j in (k..n - 1).rev() {
            let hi = b[j + 1];
            b[j] += center * hi;
        }
    }
    b
}

/// Outcome of the root iteration.
#[derive(Debug, Clone)]
pub struct RootSet<T> {
    pub roots: Vec<Complex<T>>,
    pub iterations: usize,
}

/// All roots of a polynomial by Aberth-Ehrlich iteration followed by one
/// guarded Newton step per root. Exact zero trailing coefficients are split
/// off as roots at the origin.
pub fn aberth_roots<T: Real>(coeffs: &[Complex<T>], max_iter: usize) -> Result<RootSet<T>> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1].is_zero() {
        hi -= 1;
    }
    if hi == 0 {
        return Err(Error::InvalidInput("zero polynomial".into()));
    }
    let mut lo = 0;
    while coeffs[lo].is_zero() {
        lo += 1;
    }
    let mut roots = vec![Complex::zero(); lo];
    let c = &coeffs[lo..hi];
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(RootSet { roots, iterations: 0 });
    }
    if deg == 1 {
        roots.push(-c[0] / c[1]);
        return Ok(RootSet { roots, iterations: 0 });
    }

    let lead = c[deg];
    let monic: Vec<Complex<T>> = c.iter().map(|&x| x / lead).collect();
    let noise = T::lit(4.0) * T::count(deg) * T::epsilon();

    // Initial guesses on a circle around the centroid, radius from the
    // Fujiwara-type bound max |c_i|^(1/(n-i)).
    let centroid = -monic[deg - 1] / T::count(deg);
    let shifted = taylor_shift(&monic, centroid);
    let radius = (0..deg)
        .map(|i| shifted[i].norm().powf(T::one() / T::count(deg - i)))
        .fold(T::zero(), T::max)
        .max(T::lit(1e-3));
    let tau = T::TAU();
    let mut z: Vec<Complex<T>> = (0..deg)
        .map(|k| {
            let th = tau * T::count(k) / T::count(deg) + T::lit(0.4);
            centroid + Complex::from_polar(radius, th)
        })
        .collect();
    let mut done = vec![false; deg];
    let mut iterations = 0;

    while done.iter().any(|d| !d) {
        if iterations >= max_iter {
            return Err(Error::NoConvergence { iterations });
        }
        iterations += 1;
        for k in 0..deg {
            if done[k] {
                continue;
            }
            let (p, dp, bound) = eval_with_bound(&monic, z[k]);
            if p.norm() <= noise * bound {
                done[k] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex<T> = (0..deg)
                .filter(|&j| j != k)
                .map(|j| Complex::<T>::one() / (z[k] - z[j]))
                .sum();
            let corr: Complex<T> = ratio / (Complex::<T>::one() - ratio * repulsion);
            if !corr.re.is_finite() || !corr.im.is_finite() {
                // Stationary point of p; nudge off it.
                z[k] += Complex::new(radius * T::lit(1e-3), radius * T::lit(1e-3));
                continue;
            }
            z[k] -= corr;
            if corr.norm() <= T::lit(2.0) * T::epsilon() * z[k].norm().max(T::epsilon()) {
                done[k] = true;
            }
        }
    }

    for zk in z.iter_mut() {
        let (p, dp, _) = eval_with_bound(&monic, *zk);
        if dp.is_zero() {
            continue;
        }
        let cand = *zk - p / dp;
        if eval(&monic, cand).norm() < p.norm() {
            *zk = cand;
        }
    }
    roots.extend(z);
    Ok(RootSet { roots, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn c(re: f64) -> Complex<f64> {
        cplx(re, 0.0)
    }

    #[test]
    fn char_poly_of_four_path_interior() {
        let a = Matrix::<f64>::from_real(2, 2, &[0.0, 0.5, 0.5, 0.0]).unwrap();
        let p = char_poly(&a);
        assert_eq!(p, vec![c(-0.25), c(0.0), c(1.0)]);
    }

    #[test]
    fn char_poly_of_nilpotent_is_monomial() {
        let a = Matrix::<f64>::from_real(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(char_poly(&a), vec![c(0.0), c(0.0), c(0.0), c(1.0)]);
    }

    #[test]
    fn roots_of_cubic() {
        // (z-1)(z-2)(z+3) = z^3 - 7z + 6
        let p = vec![c(6.0), c(-7.0), c(0.0), c(1.0)];
        let mut r = aberth_roots(&p, 500).unwrap().roots;
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - c(want)).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn complex_roots() {
        // z^2 + 1
        let p = vec![c(1.0), c(0.0), c(1.0)];
        let r = aberth_roots(&p, 500).unwrap().roots;
        for z in r {
            assert!((z.norm() - 1.0).abs() < 1e-12 && z.re.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_roots_split_exactly() {
        let p = vec![c(0.0), c(0.0), c(-1.0), c(1.0)];
        let r = aberth_roots(&p, 500).unwrap().roots;
        assert_eq!(r.iter().filter(|z| z.is_zero()).count(), 2);
        assert!(r.iter().any(|z| (z - c(1.0)).norm() < 1e-14));
    }

    #[test]
    fn taylor_shift_recenters() {
        // p(z) = z^2, p(1 + t) = 1 + 2t + t^2
        let p = vec![c(0.0), c(0.0), c(1.0)];
        assert_eq!(taylor_shift(&p, c(1.0)), vec![c(1.0), c(2.0), c(1.0)]);
    }
}
