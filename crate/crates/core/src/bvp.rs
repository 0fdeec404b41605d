//! Green and hitting matrices, the λ-Dirichlet problem and the Riquier tower.
//!
//! All residual checks use the scale-invariant bound
//! `RESIDUAL_TOL * (1 + |λ|) * ||f||_inf`.

use num_complex::Complex;
use num_traits::Zero;

use crate::chain::{Chain, SubChainView};
use crate::error::{Error, Result};
use crate::linalg::{kernel, vec_max_abs, CVector, Lu, Matrix};
use crate::scalar::{re, Real};

pub const RESIDUAL_TOL: f64 = 1e-9;
/// Allowed disagreement between the closed-form and recursive towers.
pub const TOWER_TOL: f64 = 1e-8;
/// Relative rank threshold used for kernels of `Δ_λⁿ`.
pub const KERNEL_TOL: f64 = 1e-9;

/// Residual bound for a function of sup-norm `fnorm` at spectral parameter `lambda`.
pub fn residual_bound<T: Real>(lambda: Complex<T>, fnorm: T) -> T {
    T::tol(RESIDUAL_TOL) * (T::one() + lambda.norm()) * fnorm.max(T::min_positive_value())
}

pub(crate) fn in_spectrum<T: Real>(lambda: Complex<T>) -> Error {
    Error::LambdaInSpectrum {
        re: lambda.re.as_f64(),
        im: lambda.im.as_f64(),
    }
}

/// `𝔾(λ) = (λI - P_X°)⁻¹` and `𝔽(λ) = 𝔾(λ) Q`, with the factorization kept
/// for further solves.
#[derive(Debug, Clone)]
pub struct GreenMatrix<T> {
    pub lambda: Complex<T>,
    /// Interior × interior.
    pub g: Matrix<T>,
    /// Interior × boundary.
    pub f: Matrix<T>,
    view: SubChainView<T>,
    lu: Lu<T>,
}

impl<T: Real> GreenMatrix<T> {
    pub fn view(&self) -> &SubChainView<T> {
        &self.view
    }

    /// `𝔾(λ) v` by one pair of triangular solves.
    pub fn apply(&self, v: &[Complex<T>]) -> CVector<T> {
        self.lu.solve_vec(v)
    }

    /// `𝔾(λ)^r v` by `r` successive solves with the same factorization.
    pub fn apply_power(&self, v: &[Complex<T>], r: usize) -> CVector<T> {
        let mut out = v.to_vec();
        for _ in 0..r {
            out = self.lu.solve_vec(&out);
        }
        out
    }

    /// `Q g` for a boundary function `g`.
    pub fn couple(&self, g: &[Complex<T>]) -> CVector<T> {
        self.view.q.matvec(g)
    }

    /// `(λI - P_X°) u`.
    pub fn shifted_apply(&self, u: &[Complex<T>]) -> CVector<T> {
        let pu = self.view.p_interior.matvec(u);
        u.iter().zip(pu).map(|(&a, b)| self.lambda * a - b).collect()
    }

    /// Largest deviation of `(λI - P_X°) 𝔾(λ)` from the identity.
    pub fn inverse_defect(&self) -> T {
        let prod = self.view.shifted(self.lambda).matmul(&self.g);
        prod.max_abs_diff(&Matrix::identity(prod.rows()))
    }

    /// Largest deviation of the hitting-matrix row sums from one.
    pub fn row_sum_defect(&self) -> T {
        (0..self.f.rows())
            .map(|i| (self.f.row(i).iter().copied().sum::<Complex<T>>() - re(T::one())).norm())
            .fold(T::zero(), T::max)
    }
}

/// Green matrix at `lambda`; fails with [`Error::LambdaInSpectrum`] when
/// `λI - P_X°` is numerically singular.
pub fn green<T: Real>(chain: &Chain<T>, lambda: Complex<T>) -> Result<GreenMatrix<T>> {
    let view = chain.sub_chain();
    let lu = match Lu::factor(&view.shifted(lambda)) {
        Ok(lu) => lu,
        Err(Error::Singular { .. }) => return Err(in_spectrum(lambda)),
        Err(e) => return Err(e),
    };
    let g = lu.solve(&Matrix::identity(view.p_interior.rows()));
    let f = lu.solve(&view.q);
    Ok(GreenMatrix {
        lambda,
        g,
        f,
        view,
        lu,
    })
}

/// Order-`n` Riquier data: boundary functions `g_1, ..., g_n`, each indexed by
/// the chain's boundary order.
#[derive(Debug, Clone, PartialEq)]
pub struct RiquierProblem<T> {
    pub lambda: Complex<T>,
    pub boundary_functions: Vec<CVector<T>>,
}

impl<T: Real> RiquierProblem<T> {
    pub fn new(lambda: Complex<T>, boundary_functions: Vec<CVector<T>>) -> Self {
        Self {
            lambda,
            boundary_functions,
        }
    }

    pub fn order(&self) -> usize {
        self.boundary_functions.len()
    }
}

/// Solution of a Dirichlet or Riquier problem over all vertices.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub lambda: Complex<T>,
    /// `f = f_1` in chain vertex order.
    pub values: CVector<T>,
    /// `tower[r-1] = f_r` for Riquier problems.
    pub tower: Option<Vec<CVector<T>>>,
    /// Per-vertex residual of the defining equations (zero on the boundary).
    pub residuals: Vec<T>,
    pub max_residual: T,
    pub residual_tol: T,
    /// Vertices where `Δ_λⁿ f = 0` is expected to hold.
    pub nth_interior: Vec<usize>,
}

impl<T: Real> Solution<T> {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.residual_tol
    }
}

fn check_boundary_len<T>(chain: &Chain<T>, g: &[Complex<T>], what: &str) -> Result<()>
where
    T: Real,
{
    if g.len() != chain.boundary().len() {
        return Err(Error::DimensionMismatch(format!(
            "{what} has {} values, boundary has {} vertices",
            g.len(),
            chain.boundary().len()
        )));
    }
    Ok(())
}

/// Interior residual `(λI - P_X°) u - Q g - rhs` evaluated by direct products.
fn stage_residual<T: Real>(
    view: &SubChainView<T>,
    lambda: Complex<T>,
    u: &[Complex<T>],
    g: &[Complex<T>],
    rhs: Option<&[Complex<T>]>,
) -> Vec<T> {
    let pu = view.p_interior.matvec(u);
    let qg = view.q.matvec(g);
    (0..u.len())
        .map(|i| {
            let mut r = lambda * u[i] - pu[i] - qg[i];
            if let Some(rhs) = rhs {
                r -= rhs[i];
            }
            r.norm()
        })
        .collect()
}

/// Unique λ-harmonic extension of the boundary function `g`.
pub fn solve_dirichlet<T: Real>(
    chain: &Chain<T>,
    lambda: Complex<T>,
    g: &[Complex<T>],
) -> Result<Solution<T>> {
    check_boundary_len(chain, g, "boundary function")?;
    let gm = green(chain, lambda)?;
    Ok(dirichlet_with(chain, &gm, g))
}

pub(crate) fn dirichlet_with<T: Real>(chain: &Chain<T>, gm: &GreenMatrix<T>, g: &[Complex<T>]) -> Solution<T> {
    let h = gm.apply(&gm.couple(g));
    let res_int = stage_residual(&gm.view, gm.lambda, &h, g, None);
    let values = chain.join(&h, g);
    let residuals = chain.join(&res_int, &vec![T::zero(); g.len()]);
    let max_residual = residuals.iter().copied().fold(T::zero(), T::max);
    Solution {
        lambda: gm.lambda,
        residual_tol: residual_bound(gm.lambda, vec_max_abs(&values)),
        values,
        tower: None,
        residuals,
        max_residual,
        nth_interior: chain.interior().to_vec(),
    }
}

/// Solution of the order-`n` Riquier tower. The closed form
/// `f° = Σ_r 𝔾(λ)^r Q g_r` is cross-checked against the recursive tower
/// `(λI - P_X°) f_r° - Q g_r = f_{r+1}°`.
pub fn solve_riquier<T: Real>(problem: &RiquierProblem<T>, chain: &Chain<T>) -> Result<Solution<T>> {
    let n = problem.order();
    if n == 0 {
        return Err(Error::InvalidInput("Riquier problem needs at least one boundary function".into()));
    }
    for g in &problem.boundary_functions {
        check_boundary_len(chain, g, "boundary function")?;
    }
    let gm = green(chain, problem.lambda)?;
    let lambda = problem.lambda;
    let m = chain.interior().len();

    let mut closed: CVector<T> = vec![Complex::zero(); m];
    for (r, g) in problem.boundary_functions.iter().enumerate() {
        let term = gm.apply_power(&gm.couple(g), r + 1);
        for (c, t) in closed.iter_mut().zip(term) {
            *c += t;
        }
    }

    // Recursive tower, top stage first.
    let mut tower_int: Vec<CVector<T>> = vec![Vec::new(); n];
    let mut stage_res: Vec<Vec<T>> = vec![Vec::new(); n];
    for r in (0..n).rev() {
        let g = &problem.boundary_functions[r];
        let mut rhs = gm.couple(g);
        if r + 1 < n {
            for (a, b) in rhs.iter_mut().zip(&tower_int[r + 1]) {
                *a += b;
            }
        }
        let f = gm.apply(&rhs);
        stage_res[r] = stage_residual(
            &gm.view,
            lambda,
            &f,
            g,
            if r + 1 < n { Some(tower_int[r + 1].as_slice()) } else { None },
        );
        tower_int[r] = f;
    }

    let scale = vec_max_abs(&closed)
        .max(vec_max_abs(&tower_int[0]))
        .max(T::one());
    let deviation = closed
        .iter()
        .zip(&tower_int[0])
        .fold(T::zero(), |m, (a, b)| m.max((a - b).norm()));
    if deviation > T::tol(TOWER_TOL) * scale {
        return Err(Error::TowerMismatch {
            deviation: deviation.as_f64(),
        });
    }

    let tower: Vec<CVector<T>> = tower_int
        .iter()
        .zip(&problem.boundary_functions)
        .map(|(f, g)| chain.join(f, g))
        .collect();
    let values = chain.join(&closed, &problem.boundary_functions[0]);
    let zeros = vec![T::zero(); chain.boundary().len()];
    let mut residuals = vec![T::zero(); chain.len()];
    let mut fnorm = T::zero();
    for (r, res) in stage_res.iter().enumerate() {
        for (acc, v) in residuals.iter_mut().zip(chain.join(res, &zeros)) {
            *acc = acc.max(v);
        }
        fnorm = fnorm.max(vec_max_abs(&tower[r]));
    }
    let max_residual = residuals.iter().copied().fold(T::zero(), T::max);
    Ok(Solution {
        lambda,
        values,
        tower: Some(tower),
        residual_tol: residual_bound(lambda, fnorm),
        residuals,
        max_residual,
        nth_interior: chain.nth_interior(n)?,
    })
}

/// The block Laplacian `Δ_λ` over all vertices: interior rows `λδ - p`,
/// boundary rows zero.
pub fn laplacian<T: Real>(chain: &Chain<T>, lambda: Complex<T>) -> Matrix<T> {
    let n = chain.len();
    Matrix::from_fn(n, n, |i, j| {
        if chain.is_boundary(i) {
            Complex::zero()
        } else {
            let d = if i == j { lambda } else { Complex::zero() };
            d - re(chain.p(i, j))
        }
    })
}

/// `|(Δ_λⁿ f)(x)|` for every vertex, with the verdict restricted to the
/// `n`-th interior.
#[derive(Debug, Clone)]
pub struct PolyharmonicResidual<T> {
    pub order: usize,
    pub residuals: Vec<T>,
    pub nth_interior: Vec<usize>,
    /// Largest residual on the `n`-th interior (zero if it is empty).
    pub max_on_interior: T,
    pub tol: T,
}

impl<T: Real> PolyharmonicResidual<T> {
    pub fn passed(&self) -> bool {
        self.max_on_interior <= self.tol
    }
}

/// Evaluate `Δ_λⁿ f` through its block form: on the interior
/// `(λI - P_X°)^{n-1} ((λI - P_X°) f° - Q f^∂)`, zero on the boundary.
pub fn polyharmonic_residual<T: Real>(
    chain: &Chain<T>,
    lambda: Complex<T>,
    f: &[Complex<T>],
    n: usize,
) -> Result<PolyharmonicResidual<T>> {
    if f.len() != chain.len() {
        return Err(Error::DimensionMismatch(format!(
            "function has {} values, chain has {} vertices",
            f.len(),
            chain.len()
        )));
    }
    let nth_interior = chain.nth_interior(n)?;
    let view = chain.sub_chain();
    let (fi, fb) = chain.split(f);
    let qf = view.q.matvec(&fb);
    let pf = view.p_interior.matvec(&fi);
    let mut u: CVector<T> = (0..fi.len()).map(|i| lambda * fi[i] - pf[i] - qf[i]).collect();
    for _ in 1..n {
        let pu = view.p_interior.matvec(&u);
        u = u.iter().zip(pu).map(|(&a, b)| lambda * a - b).collect();
    }
    let zeros = vec![T::zero(); fb.len()];
    let residuals = chain.join(&u.iter().map(|z| z.norm()).collect::<Vec<_>>(), &zeros);
    let max_on_interior = nth_interior
        .iter()
        .map(|&i| residuals[i])
        .fold(T::zero(), T::max);
    Ok(PolyharmonicResidual {
        order: n,
        residuals,
        nth_interior,
        max_on_interior,
        tol: residual_bound(lambda, vec_max_abs(f)),
    })
}

/// The space `{f : Δ_λⁿ f = 0 on all of X}` together with the rank check that
/// its dimension is `|∂X|`.
#[derive(Debug, Clone)]
pub struct FreeSpace<T> {
    /// Harmonic extensions of `δ_w`, one per boundary vertex, over all vertices.
    pub basis: Vec<CVector<T>>,
    /// Numerical kernel dimension of the full `Δ_λⁿ`.
    pub kernel_dim: usize,
    pub expected_dim: usize,
    /// Largest `|Δ_λⁿ b|` over basis vectors `b`.
    pub max_defect: T,
    pub tol: T,
}

impl<T: Real> FreeSpace<T> {
    pub fn passed(&self) -> bool {
        self.kernel_dim == self.expected_dim && self.max_defect <= self.tol
    }
}

pub fn free_polyharmonic_space<T: Real>(chain: &Chain<T>, lambda: Complex<T>, n: usize) -> Result<FreeSpace<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("order n must be at least 1".into()));
    }
    let gm = green(chain, lambda)?;
    let nb = chain.boundary().len();
    let basis: Vec<CVector<T>> = (0..nb)
        .map(|k| {
            let mut delta = vec![Complex::zero(); nb];
            delta[k] = re(T::one());
            chain.join(&gm.f.column(k), &delta)
        })
        .collect();
    let op = laplacian(chain, lambda).pow(n);
    let kern = kernel(&op, T::tol(KERNEL_TOL));
    let max_defect = basis
        .iter()
        .map(|b| vec_max_abs(&op.matvec(b)) / vec_max_abs(b).max(T::min_positive_value()))
        .fold(T::zero(), T::max);
    Ok(FreeSpace {
        basis,
        kernel_dim: kern.dim(),
        expected_dim: nb,
        max_defect,
        tol: T::tol(RESIDUAL_TOL) * (T::one() + lambda.norm()).powi(n as i32),
    })
}
