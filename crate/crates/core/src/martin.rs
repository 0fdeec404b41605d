//! λ-Martin kernels `K(x,w|λ) = F(x,w|λ) / F(o,w|λ)`, the higher kernels
//! `K_r = 𝔾(λ)^{r-1} K`, and the resolvent-derivative identity
//! `𝔾(λ)^r = (-1)^{r-1} / (r-1)! · 𝔾^{(r-1)}(λ)`.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::bvp::{green, residual_bound, solve_riquier, GreenMatrix, RiquierProblem, Solution, TOWER_TOL};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::linalg::{vec_max_abs, CVector, Matrix};
use crate::scalar::{re, Real};

/// `λ` belongs to res* at origin `o` when `|F(o,w|λ)|` exceeds this fraction
/// of `max_v |F(o,v|λ)|` for every boundary vertex `w`.
pub const RES_STAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MartinKernel<T> {
    /// Vertex index of the origin.
    pub origin: usize,
    pub lambda: Complex<T>,
    /// `|X| × |∂X|`, rows in chain vertex order, columns in boundary order.
    pub k: Matrix<T>,
    /// `F(o,w|λ)` per boundary vertex.
    pub f_origin: CVector<T>,
    /// `higher[r-1] = K_r`, same shape as `k`; rows on `∂X` vanish for `r >= 2`.
    pub higher: Vec<Matrix<T>>,
    green: GreenMatrix<T>,
}

impl<T: Real> MartinKernel<T> {
    pub fn green(&self) -> &GreenMatrix<T> {
        &self.green
    }

    pub fn order(&self) -> usize {
        self.higher.len()
    }

    /// `ν(w) = g(w) F(o,w|λ)`.
    pub fn distribution(&self, g: &[Complex<T>]) -> CVector<T> {
        g.iter().zip(&self.f_origin).map(|(a, b)| a * b).collect()
    }

    /// `Σ_w K_r(·,w|λ) ν(w)` over all vertices.
    pub fn integrate(&self, r: usize, nu: &[Complex<T>]) -> CVector<T> {
        self.higher[r - 1].matvec(nu)
    }

    /// Largest deviation of `(λI - P_X°)^{r-1} K_r` from `K` on the interior,
    /// relative to `max |K|`.
    pub fn higher_kernel_defect(&self, chain: &Chain<T>) -> T {
        let int = chain.interior();
        let cols: Vec<usize> = (0..self.k.cols()).collect();
        let base = self.k.select(int, &cols);
        let shifted = self.green.view().shifted(self.lambda);
        let scale = base.max_abs().max(T::one());
        self.higher
            .iter()
            .enumerate()
            .map(|(r, kr)| {
                let applied = shifted.pow(r).matmul(&kr.select(int, &cols));
                applied.max_abs_diff(&base) / scale
            })
            .fold(T::zero(), T::max)
    }
}

/// Martin kernel with origin `origin` (an interior vertex) and higher kernels
/// `K_1, ..., K_n`.
pub fn martin_kernel<T: Real>(chain: &Chain<T>, lambda: Complex<T>, origin: usize, n: usize) -> Result<MartinKernel<T>> {
    if origin >= chain.len() || chain.is_boundary(origin) {
        return Err(Error::InvalidInput(format!("origin {origin} is not an interior vertex")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("kernel order must be at least 1".into()));
    }
    let gm = green(chain, lambda)?;
    let nb = chain.boundary().len();
    let o = chain.slot(origin);
    let f_origin: CVector<T> = gm.f.row(o).to_vec();
    let fmax = vec_max_abs(&f_origin);
    for (j, f) in f_origin.iter().enumerate() {
        if !(f.norm() > T::lit(RES_STAR_TOL) * fmax) {
            return Err(Error::NotInResStar {
                vertex: chain.id(chain.boundary()[j]).to_string(),
                magnitude: f.norm().as_f64(),
            });
        }
    }

    let mut k = Matrix::zeros(chain.len(), nb);
    for (s, &x) in chain.interior().iter().enumerate() {
        for j in 0..nb {
            k[(x, j)] = gm.f[(s, j)] / f_origin[j];
        }
    }
    for (j, &w) in chain.boundary().iter().enumerate() {
        k[(w, j)] = Complex::<T>::one() / f_origin[j];
    }
    // Division can leave K(o,w) a rounding error away from one.
    for j in 0..nb {
        k[(origin, j)] = Complex::one();
    }

    let mut higher = vec![k.clone()];
    for _ in 1..n {
        let prev = higher.last().expect("non-empty");
        let mut next = Matrix::zeros(chain.len(), nb);
        for j in 0..nb {
            let col: CVector<T> = chain.interior().iter().map(|&x| prev[(x, j)]).collect();
            let out = gm.apply(&col);
            for (s, &x) in chain.interior().iter().enumerate() {
                next[(x, j)] = out[s];
            }
        }
        higher.push(next);
    }

    Ok(MartinKernel {
        origin,
        lambda,
        k,
        f_origin,
        higher,
        green: gm,
    })
}

/// Riquier solution in kernel form together with its deviation from the
/// direct solver.
#[derive(Debug, Clone)]
pub struct KernelRiquier<T> {
    pub solution: Solution<T>,
    /// `ν_r(w) = g_r(w) F(o,w|λ)`.
    pub distributions: Vec<CVector<T>>,
    pub deviation: T,
    pub tol: T,
}

impl<T: Real> KernelRiquier<T> {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tol && self.solution.passed()
    }
}

/// `f = Σ_r Σ_w K_r(·,w|λ) ν_r(w)`; every stage of the tower is built the same
/// way, `f_r = Σ_{s>=r} K_{s-r+1} ν_s`, and checked against its defining
/// equation and against [`solve_riquier`].
pub fn riquier_via_kernels<T: Real>(
    chain: &Chain<T>,
    lambda: Complex<T>,
    origin: usize,
    boundary_functions: &[CVector<T>],
) -> Result<KernelRiquier<T>> {
    let n = boundary_functions.len();
    let problem = RiquierProblem::new(lambda, boundary_functions.to_vec());
    let reference = solve_riquier(&problem, chain)?;
    let mk = martin_kernel(chain, lambda, origin, n)?;
    let distributions: Vec<CVector<T>> = boundary_functions.iter().map(|g| mk.distribution(g)).collect();

    let mut tower: Vec<CVector<T>> = Vec::with_capacity(n);
    for r in 0..n {
        let mut f = vec![Complex::zero(); chain.len()];
        for s in r..n {
            let part = mk.integrate(s - r + 1, &distributions[s]);
            for (a, b) in f.iter_mut().zip(part) {
                *a += b;
            }
        }
        // Boundary values come from K_1 only and equal g_r.
        tower.push(f);
    }

    let view = mk.green.view();
    let zeros = vec![T::zero(); chain.boundary().len()];
    let mut residuals = vec![T::zero(); chain.len()];
    let mut fnorm = T::zero();
    for r in 0..n {
        let (fi, _) = chain.split(&tower[r]);
        let pf = view.p_interior.matvec(&fi);
        let qg = view.q.matvec(&boundary_functions[r]);
        let next = if r + 1 < n { Some(chain.split(&tower[r + 1]).0) } else { None };
        let res: Vec<T> = (0..fi.len())
            .map(|i| {
                let mut v = lambda * fi[i] - pf[i] - qg[i];
                if let Some(nx) = &next {
                    v -= nx[i];
                }
                v.norm()
            })
            .collect();
        for (acc, v) in residuals.iter_mut().zip(chain.join(&res, &zeros)) {
            *acc = acc.max(v);
        }
        fnorm = fnorm.max(vec_max_abs(&tower[r]));
    }
    let values = tower[0].clone();
    let deviation = values
        .iter()
        .zip(&reference.values)
        .fold(T::zero(), |m, (a, b)| m.max((a - b).norm()));
    let scale = vec_max_abs(&values).max(vec_max_abs(&reference.values)).max(T::one());
    let max_residual = residuals.iter().copied().fold(T::zero(), T::max);
    let solution = Solution {
        lambda,
        values,
        tower: Some(tower),
        residuals,
        max_residual,
        residual_tol: residual_bound(lambda, fnorm),
        nth_interior: reference.nth_interior,
    };
    Ok(KernelRiquier {
        solution,
        distributions,
        deviation,
        tol: T::tol(TOWER_TOL) * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `Im G(λ + ih) / h`, for real λ and first derivatives.
    ComplexStep,
    /// `Σ_j (-1)^j C(m,j) G(λ + (m/2 - j) h) / h^m`.
    Central,
}

#[derive(Debug, Clone)]
pub struct DerivativeCheck<T> {
    pub lambda: Complex<T>,
    pub r: usize,
    pub h: T,
    pub stencil: Stencil,
    /// `𝔾(λ)^r`.
    pub analytic: Matrix<T>,
    /// `(-1)^{r-1} / (r-1)! · 𝔾^{(r-1)}(λ)` by finite differences.
    pub numeric: Matrix<T>,
    pub deviation: T,
    /// Ten times the predicted truncation plus rounding error.
    pub expected: T,
}

impl<T: Real> DerivativeCheck<T> {
    pub fn passed(&self) -> bool {
        self.deviation <= self.expected
    }
}

pub fn default_step<T: Real>(lambda: Complex<T>) -> T {
    T::lit(1e-4) * (T::one() + lambda.norm())
}

fn binomial_f<T: Real>(m: usize, j: usize) -> T {
    (0..j).fold(T::one(), |acc, i| acc * T::count(m - i) / T::count(i + 1))
}

fn factorial<T: Real>(m: usize) -> T {
    (1..=m).fold(T::one(), |acc, i| acc * T::count(i))
}

/// Finite-difference check of the resolvent-derivative identity for `r >= 2`.
pub fn derivative_identity_check<T: Real>(
    chain: &Chain<T>,
    lambda: Complex<T>,
    r: usize,
    h: Option<T>,
) -> Result<DerivativeCheck<T>> {
    if r < 2 {
        return Err(Error::InvalidInput("derivative check needs r >= 2".into()));
    }
    let h = h.unwrap_or_else(|| default_step(lambda));
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let m = r - 1;
    let base = green(chain, lambda)?;
    let dim = base.g.rows();
    let analytic = base.g.pow(r);

    let real_lambda = lambda.im == T::zero();
    let (stencil, derivative) = if real_lambda && m == 1 {
        let shifted = green(chain, lambda + Complex::new(T::zero(), h))?;
        let d = Matrix::from_fn(dim, dim, |i, j| re(shifted.g[(i, j)].im / h));
        (Stencil::ComplexStep, d)
    } else {
        let mut acc = Matrix::zeros(dim, dim);
        for j in 0..=m {
            let offset = (T::count(m) / T::lit(2.0) - T::count(j)) * h;
            let node = if offset == T::zero() { base.clone() } else { green(chain, lambda + re(offset))? };
            let mut w = binomial_f::<T>(m, j);
            if j % 2 == 1 {
                w = -w;
            }
            acc = &acc + &node.g.scale(re(w));
        }
        (Stencil::Central, acc.scale(re(T::one() / h.powi(m as i32))))
    };
    let mut factor = T::one() / factorial::<T>(m);
    if m % 2 == 1 {
        factor = -factor;
    }
    let numeric = derivative.scale(re(factor));
    let deviation = numeric.max_abs_diff(&analytic);

    // The (m+2)-th derivative of 𝔾 is (-1)^{m+2} (m+2)! 𝔾^{m+3}.
    let g_far = base.g.pow(m + 3).max_abs();
    let eps = T::epsilon();
    let expected = match stencil {
        Stencil::ComplexStep => h * h * g_far + eps * base.g.max_abs(),
        Stencil::Central => {
            let trunc = h * h * T::count(m) / T::lit(24.0) * T::count((m + 1) * (m + 2)) * g_far;
            let round = eps * base.g.max_abs() * T::lit(2f64.powi(m as i32)) / (h.powi(m as i32) * factorial::<T>(m));
            trunc + round
        }
    } * T::lit(10.0)
        + T::min_positive_value();

    Ok(DerivativeCheck {
        lambda,
        r,
        h,
        stencil,
        analytic,
        numeric,
        deviation,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::solve_dirichlet;
    use crate::samples::four_path;
    use crate::scalar::cplx;

    fn c(x: f64) -> Complex<f64> {
        cplx(x, 0.0)
    }

    #[test]
    fn four_path_kernel_at_one() {
        let p4 = four_path::<f64>();
        let a = p4.index_of("a").unwrap();
        let b = p4.index_of("b").unwrap();
        let mk = martin_kernel(&p4, c(1.0), a, 1).unwrap();
        let close = |z: Complex<f64>, v: f64| (z - c(v)).norm() < 1e-12;
        assert!(close(mk.k[(a, 0)], 1.0));
        assert!(close(mk.k[(a, 1)], 1.0));
        assert!(close(mk.k[(b, 0)], 0.5));
        assert!(close(mk.k[(b, 1)], 2.0));
    }

    #[test]
    fn origin_outside_res_star() {
        let p4 = four_path::<f64>();
        let a = p4.index_of("a").unwrap();
        match martin_kernel(&p4, c(0.0), a, 1).unwrap_err() {
            Error::NotInResStar { vertex, .. } => assert_eq!(vertex, "w1"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn boundary_origin_rejected() {
        let p4 = four_path::<f64>();
        assert!(matches!(martin_kernel(&p4, c(1.0), 0, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn kernel_column_solves_dirichlet() {
        let p4 = four_path::<f64>();
        let a = p4.index_of("a").unwrap();
        let mk = martin_kernel(&p4, c(1.0), a, 1).unwrap();
        for j in 0..2 {
            let mut g = vec![c(0.0); 2];
            g[j] = c(1.0) / mk.f_origin[j];
            let sol = solve_dirichlet(&p4, c(1.0), &g).unwrap();
            assert!(sol.values.iter().zip(mk.k.column(j)).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }

    #[test]
    fn riquier_in_kernel_form() {
        let p4 = four_path::<f64>();
        let a = p4.index_of("a").unwrap();
        let gs = vec![vec![c(0.0), c(0.0)], vec![c(1.0), c(0.0)]];
        let kr = riquier_via_kernels(&p4, c(1.0), a, &gs).unwrap();
        assert!(kr.passed(), "{kr:?}");
        let want = [0.0, 10.0 / 9.0, 8.0 / 9.0, 0.0];
        for (z, w) in kr.solution.values.iter().zip(want) {
            assert!((z - c(w)).norm() < 1e-12);
        }
        let mk = martin_kernel(&p4, c(1.0), a, 3).unwrap();
        assert!(mk.higher_kernel_defect(&p4) < 1e-12);
        for &w in p4.boundary() {
            assert_eq!(mk.higher[1].row(w), &[c(0.0), c(0.0)]);
        }
    }

    #[test]
    fn derivative_identity_on_four_path() {
        let p4 = four_path::<f64>();
        let d2 = derivative_identity_check(&p4, c(2.0), 2, Some(1e-4)).unwrap();
        assert_eq!(d2.stencil, Stencil::ComplexStep);
        assert!(d2.deviation <= 1e-6 && d2.passed(), "{}", d2.deviation);
        assert!((d2.analytic[(0, 0)] - c(68.0 / 225.0)).norm() < 1e-14);
        let d3 = derivative_identity_check(&p4, c(2.0), 3, Some(1e-3)).unwrap();
        assert_eq!(d3.stencil, Stencil::Central);
        assert!(d3.deviation <= 1e-4 && d3.passed(), "{}", d3.deviation);
        let dz = derivative_identity_check(&p4, cplx(1.5, 0.7), 2, None).unwrap();
        assert_eq!(dz.stencil, Stencil::Central);
        assert!(dz.passed(), "{} vs {}", dz.deviation, dz.expected);
    }

    #[test]
    fn derivative_check_hits_spectrum() {
        let p4 = four_path::<f64>();
        let err = derivative_identity_check(&p4, c(0.5), 2, None).unwrap_err();
        assert!(matches!(err, Error::LambdaInSpectrum { .. }));
        assert!(matches!(
            derivative_identity_check(&p4, c(2.0), 1, None),
            Err(Error::InvalidInput(_))
        ));
    }
}
