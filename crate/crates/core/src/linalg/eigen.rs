//! Eigenvalues of small dense matrices with algebraic multiplicities.
//!
//! Roots of the characteristic polynomial are grouped in two passes. First,
//! single-linkage clustering at `cluster_tol` (relative to `max(1, |z|)`).
//! Second, neighbouring groups are coalesced when their combined spread is no
//! larger than the perturbation a multiple root of that order suffers from
//! coefficient noise, since an `m`-fold root is only resolved to about the
//! `m`-th root of the noise level.

use num_complex::Complex;
use num_traits::Zero;

use super::matrix::Matrix;
use super::nullspace::kernel;
use super::poly::{aberth_roots, char_poly, eval_with_bound, taylor_shift};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CLUSTER_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 500;
/// Root residual tolerance, relative to `max(1, ||A||)^n`.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-6;
/// Dimension above which the characteristic-polynomial route is flagged.
pub const ILL_CONDITIONED_DIM: usize = 50;
/// Relative rank threshold for detecting an exactly singular matrix.
pub const ZERO_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct EigenConfig {
    pub cluster_tol: f64,
    pub max_iter: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            cluster_tol: CLUSTER_TOL,
            max_iter: MAX_ITER,
        }
    }
}

/// Distinct eigenvalues with algebraic multiplicities.
#[derive(Debug, Clone)]
pub struct Spectrum<T> {
    pub eigenvalues: Vec<Complex<T>>,
    pub alg_mult: Vec<usize>,
    pub cluster_tol: T,
    /// `|det(lambda I - A)| / max(1, ||A||)^n` at each reported eigenvalue.
    pub residuals: Vec<T>,
    /// Set for dimensions where the characteristic polynomial is unreliable.
    pub ill_conditioned: bool,
    pub iterations: usize,
}

impl<T: Real> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.alg_mult.iter().sum()
    }

    pub fn spectral_radius(&self) -> T {
        self.eigenvalues.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Index of the eigenvalue nearest to `lambda` and its distance.
    pub fn nearest(&self, lambda: Complex<T>) -> Option<(usize, T)> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (z - lambda).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    }

    /// Membership test `|lambda - eigenvalue| <= cluster_tol * max(1, |lambda|)`.
    pub fn find(&self, lambda: Complex<T>) -> Option<usize> {
        let tol = self.cluster_tol * T::one().max(lambda.norm());
        self.nearest(lambda).filter(|&(_, d)| d <= tol).map(|(i, _)| i)
    }

    /// Sum of eigenvalues weighted by multiplicity (equals the trace).
    pub fn weighted_sum(&self) -> Complex<T> {
        self.eigenvalues
            .iter()
            .zip(&self.alg_mult)
            .map(|(z, &m)| z * T::count(m))
            .sum()
    }

    /// Product of eigenvalues with multiplicity (equals the determinant).
    pub fn weighted_product(&self) -> Complex<T> {
        self.eigenvalues
            .iter()
            .zip(&self.alg_mult)
            .fold(Complex::new(T::one(), T::zero()), |acc, (z, &m)| acc * z.powu(m as u32))
    }
}

pub fn eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Spectrum<T>> {
    eigenvalues_with(a, &EigenConfig::default())
}

pub fn eigenvalues_with<T: Real>(a: &Matrix<T>, cfg: &EigenConfig) -> Result<Spectrum<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let cluster_tol = T::tol(cfg.cluster_tol);
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            alg_mult: vec![],
            cluster_tol,
            residuals: vec![],
            ill_conditioned: false,
            iterations: 0,
        });
    }
    let mut poly = char_poly(a);
    clear_zero_roots(a, &mut poly);
    let found = aberth_roots(&poly, cfg.max_iter)?;
    let groups = cluster_roots(&poly, &found.roots, cluster_tol);

    let scale = T::one().max(a.norm_inf()).powi(n as i32);
    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut alg_mult = Vec::with_capacity(groups.len());
    let mut residuals = Vec::with_capacity(groups.len());
    for (center, m) in groups {
        let (p, _, _) = eval_with_bound(&poly, center);
        let res = p.norm() / scale;
        if !(res <= T::tol(ROOT_RESIDUAL_TOL)) {
            return Err(Error::NoConvergence {
                iterations: found.iterations,
            });
        }
        eigenvalues.push(center);
        alg_mult.push(m);
        residuals.push(res);
    }
    Ok(Spectrum {
        eigenvalues,
        alg_mult,
        cluster_tol,
        residuals,
        ill_conditioned: n >= ILL_CONDITIONED_DIM,
        iterations: found.iterations,
    })
}

/// Algebraic multiplicity of the eigenvalue 0 as `n - rank(A^k)` once the
/// ranks of successive powers stabilize; 0 if any rank decision is unclear.
fn zero_multiplicity<T: Real>(a: &Matrix<T>) -> usize {
    let n = a.rows();
    let mut power = a.clone();
    let mut rank = n;
    for _ in 0..n {
        let kern = kernel(&power, T::tol(ZERO_RANK_TOL));
        if kern.is_ambiguous() {
            return 0;
        }
        if kern.rank == rank {
            break;
        }
        rank = kern.rank;
        if rank == 0 {
            break;
        }
        power = power.matmul(a);
    }
    n - rank
}

/// Rounding leaves tiny nonzero low-order coefficients where a singular
/// matrix has exact zeros, which spreads the zero eigenvalue into a ring of
/// spurious roots. Reset them when a rank test confirms the multiplicity.
fn clear_zero_roots<T: Real>(a: &Matrix<T>, poly: &mut [Complex<T>]) {
    let z = zero_multiplicity(a);
    if z == 0 {
        return;
    }
    let scale = poly.iter().fold(T::zero(), |m, c| m.max(c.norm()));
    let negligible = T::epsilon().sqrt() * scale;
    if poly[..z].iter().all(|c| c.norm() <= negligible) {
        for c in &mut poly[..z] {
            *c = Complex::zero();
        }
    }
}

struct Group<T> {
    members: Vec<Complex<T>>,
}

impl<T: Real> Group<T> {
    fn center(&self) -> Complex<T> {
        let s: Complex<T> = self.members.iter().sum();
        s / T::count(self.members.len())
    }

    fn spread(&self, c: Complex<T>) -> T {
        self.members.iter().fold(T::zero(), |m, z| m.max((z - c).norm()))
    }
}

fn cluster_roots<T: Real>(
    poly: &[Complex<T>],
    roots: &[Complex<T>],
    cluster_tol: T,
) -> Vec<(Complex<T>, usize)> {
    let n = roots.len();
    // Single linkage at cluster_tol via union-find.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let tol = cluster_tol * T::one().max(roots[i].norm().max(roots[j].norm()));
            if (roots[i] - roots[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: Vec<Group<T>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Group { members: vec![] });
        }
        groups[slot[r]].members.push(roots[i]);
    }

    // Coalesce groups whose union is consistent with a single multiple root.
    let deg = poly.len().saturating_sub(1);
    let coeff_noise = T::lit(1e3) * T::count(deg.max(1)) * T::epsilon();
    loop {
        let mut merged = false;
        'outer: for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let ci = groups[i].center();
                let cj = groups[j].center();
                if (ci - cj).norm() > T::lit(1e-2) * T::one().max(ci.norm()) {
                    continue;
                }
                let union = Group {
                    members: groups[i]
                        .members
                        .iter()
                        .chain(&groups[j].members)
                        .copied()
                        .collect(),
                };
                let c = union.center();
                let m = union.members.len();
                let shifted = taylor_shift(poly, c);
                let (_, _, bound) = eval_with_bound(poly, c);
                let lead = shifted[m].norm();
                if lead.is_zero() {
                    continue;
                }
                let noise_radius = (coeff_noise * bound / lead).powf(T::one() / T::count(m));
                if union.spread(c) <= T::lit(4.0) * noise_radius {
                    groups[i] = union;
                    groups.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut out: Vec<(Complex<T>, usize)> = groups
        .iter()
        .map(|g| {
            let m = g.members.len();
            let c = if g.members.iter().all(|z| z.is_zero()) {
                // Exact zero roots stay exactly zero.
                Complex::zero()
            } else if m > 1 {
                refine_multiple(poly, g.center(), m, g.spread(g.center()))
            } else {
                g.center()
            };
            (c, m)
        })
        .collect();
    out.sort_by(|a, b| {
        b.0.norm()
            .partial_cmp(&a.0.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.0.re.partial_cmp(&a.0.re).unwrap_or(std::cmp::Ordering::Equal))
            .then(b.0.im.partial_cmp(&a.0.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    out
}

/// Newton iteration on the `(m-1)`-th derivative, which has a simple root at
/// an `m`-fold root of `poly`. The result must stay within the cluster.
fn refine_multiple<T: Real>(poly: &[Complex<T>], center: Complex<T>, m: usize, spread: T) -> Complex<T> {
    let mut d = poly.to_vec();
    for _ in 1..m {
        d = d
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * T::count(i))
            .collect();
    }
    let mut z = center;
    for _ in 0..20 {
        let (q, dq, _) = eval_with_bound(&d, z);
        if dq.is_zero() {
            break;
        }
        let step = q / dq;
        z -= step;
        if step.norm() <= T::epsilon() * T::one().max(z.norm()) {
            break;
        }
    }
    let limit = T::lit(10.0) * spread.max(T::epsilon());
    if z.re.is_finite() && z.im.is_finite() && (z - center).norm() <= limit {
        z
    } else {
        center
    }
}
