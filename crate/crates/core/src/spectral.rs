//! Spectrum of `P_X°` and global λ-polyharmonic functions for λ in it.
//!
//! For an eigenvalue λ of `P_X°`, the functions `f` with `(λI - P)ⁿ f = 0` on
//! all of `X` are spanned by the first `min(n, κ_j)` vectors of each Jordan
//! chain of `P_X°` at λ, extended by zero to the boundary.

use num_complex::Complex;
use num_traits::Zero;

use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, kernel, norm2, orthonormalize, dot, vec_max_abs, CVector, Kernel, Matrix, Spectrum};
use crate::scalar::{re, Real};

/// Margin by which the interior spectral radius must stay below one.
pub const RHO_MARGIN: f64 = 1e-10;
/// Default relative rank threshold for Jordan-chain kernels.
pub const JORDAN_TOL: f64 = 1e-8;
/// Allowed defect of chain relations and global polyharmonicity.
pub const CHAIN_TOL: f64 = 1e-8;

fn lambda_pair<T: Real>(z: Complex<T>) -> (f64, f64) {
    (z.re.as_f64(), z.im.as_f64())
}

/// Eigenvalues of `P_X°` and its spectral radius.
#[derive(Debug, Clone)]
pub struct InteriorSpectrum<T> {
    pub spectrum: Spectrum<T>,
    pub rho: T,
}

/// Spectrum of the interior matrix. A radius not below `1 - RHO_MARGIN` is
/// reported as [`Error::SpectralRadius`].
pub fn interior_spectrum<T: Real>(chain: &Chain<T>) -> Result<InteriorSpectrum<T>> {
    let spectrum = eigenvalues(&chain.sub_chain().p_interior)?;
    let rho = spectrum.spectral_radius();
    if !(rho < T::one() - T::tol(RHO_MARGIN)) {
        return Err(Error::SpectralRadius { rho: rho.as_f64() });
    }
    Ok(InteriorSpectrum { spectrum, rho })
}

/// Algebraic and geometric multiplicity of the eigenvalue 1 of the full
/// transition matrix; both equal `|∂X|` for a valid chain.
pub fn unit_eigenvalue_multiplicity<T: Real>(chain: &Chain<T>) -> Result<(usize, usize)> {
    let p = chain.transition_matrix();
    let spec = eigenvalues(&p)?;
    let one = re(T::one());
    let alg = spec.find(one).map(|i| spec.alg_mult[i]).unwrap_or(0);
    let shifted = &Matrix::identity(p.rows()) - &p;
    let geo = kernel(&shifted, T::tol(JORDAN_TOL)).dim();
    Ok((alg, geo))
}

/// Jordan chains of `P_X°` at an eigenvalue λ.
#[derive(Debug, Clone)]
pub struct JordanBasis<T> {
    pub lambda: Complex<T>,
    /// Geometric multiplicity μ (number of chains).
    pub geo_mult: usize,
    /// Algebraic multiplicity κ.
    pub alg_mult: usize,
    /// `chain_lengths[j] = κ_j`, non-increasing.
    pub chain_lengths: Vec<usize>,
    /// `chains[j][k-1] = f_j^(k)` over all vertices, zero on the boundary.
    pub chains: Vec<Vec<CVector<T>>>,
    /// Smallest pivot separation ratio among the rank decisions.
    pub rank_gap: T,
    /// `max_j |(λI - P_X°) f_j^(1)| / |f_j^(1)|`.
    pub eigen_defect: T,
}

impl<T: Real> JordanBasis<T> {
    /// All vectors `f_j^(k)` with `k <= min(n, κ_j)`.
    pub fn truncated(&self, n: usize) -> Vec<CVector<T>> {
        self.chains
            .iter()
            .flat_map(|c| c.iter().take(n).cloned())
            .collect()
    }
}

fn ambiguous<T: Real>(k: usize, kern: &Kernel<T>) -> Error {
    Error::IllConditioned(format!(
        "kernel of power {k}: rank {} with threshold {:e}, smallest kept pivot {:e}, largest dropped {:e}",
        kern.rank,
        kern.threshold.as_f64(),
        kern.min_kept.as_f64(),
        kern.max_dropped.as_f64()
    ))
}

/// Jordan chains at `lambda` via nested kernels `N_k = ker (λI - P_X°)^k`.
/// Chain tops of length `k` are taken from `N_k` after removing `N_{k-1}` and
/// the images of longer chains; lower members follow by applying `λI - P_X°`.
pub fn jordan_basis<T: Real>(chain: &Chain<T>, lambda: Complex<T>, tol: T) -> Result<JordanBasis<T>> {
    let p = chain.sub_chain().p_interior;
    let m = p.rows();
    let spectrum = eigenvalues(&p)?;
    let (re_l, im_l) = lambda_pair(lambda);
    let idx = match spectrum.find(lambda) {
        Some(i) => i,
        None => {
            let distance = spectrum.nearest(lambda).map(|(_, d)| d.as_f64()).unwrap_or(f64::INFINITY);
            return Err(Error::NotAnEigenvalue {
                re: re_l,
                im: im_l,
                distance,
            });
        }
    };
    let kappa = spectrum.alg_mult[idx];
    let b = &Matrix::scalar(m, lambda) - &p;

    // Nested kernels until the dimension reaches κ.
    let mut kernels: Vec<Kernel<T>> = Vec::new();
    let mut power = Matrix::identity(m);
    let mut rank_gap = T::infinity();
    loop {
        power = power.matmul(&b);
        let k = kernels.len() + 1;
        let kern = kernel(&power, tol);
        if kern.is_ambiguous() {
            return Err(ambiguous(k, &kern));
        }
        rank_gap = rank_gap.min(kern.gap());
        let dim = kern.dim();
        let prev = kernels.last().map(|k| k.dim()).unwrap_or(0);
        kernels.push(kern);
        if dim >= kappa || dim == prev || k >= m {
            if dim != kappa {
                return Err(Error::IllConditioned(format!(
                    "generalized eigenspace has dimension {dim}, algebraic multiplicity is {kappa}"
                )));
            }
            break;
        }
    }
    let levels = kernels.len();
    let dims: Vec<usize> = std::iter::once(0).chain(kernels.iter().map(|k| k.dim())).collect();
    // at_least[k] = number of chains of length >= k.
    let at_least = |k: usize| if k > levels { 0 } else { dims[k] - dims[k - 1] };

    // chains_int[j] holds interior vectors from the top down.
    let mut chains_int: Vec<Vec<CVector<T>>> = Vec::new();
    for level in (1..=levels).rev() {
        let wanted = at_least(level) - at_least(level + 1);
        // Vectors that must be avoided: N_{level-1} and existing level members.
        let mut span: Vec<CVector<T>> = if level >= 2 {
            kernels[level - 2].basis.clone()
        } else {
            Vec::new()
        };
        for c in &chains_int {
            let top_level = c.len();
            // Member at this level sits (top_level - level) steps below the top.
            span.push(c[top_level - level].clone());
        }
        let mut span = orthonormalize(&span);
        let mut candidates = kernels[level - 1].basis.clone();
        for _ in 0..wanted {
            let best = candidates
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut r = v.clone();
                    for q in &span {
                        let c = dot(q, &r);
                        for (ri, qi) in r.iter_mut().zip(q) {
                            *ri -= c * qi;
                        }
                    }
                    (i, norm2(&r), r)
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            let Some((i, nrm, r)) = best else {
                return Err(Error::IllConditioned(format!("no chain top available at level {level}")));
            };
            if nrm < T::lit(1e-6) {
                return Err(Error::IllConditioned(format!(
                    "chain top at level {level} is nearly dependent (residual {:e})",
                    nrm.as_f64()
                )));
            }
            candidates.swap_remove(i);
            let top: CVector<T> = r.iter().map(|z| z / nrm).collect();
            span.push(top.clone());
            span = orthonormalize(&span);
            let mut members = vec![top];
            for _ in 1..level {
                let next = b.matvec(members.last().expect("non-empty"));
                members.push(next);
            }
            chains_int.push(members);
        }
    }

    // Reorder each chain bottom-up: chains[j][k-1] = f_j^(k).
    let zeros = vec![Complex::zero(); chain.boundary().len()];
    let mut chains: Vec<Vec<CVector<T>>> = chains_int
        .into_iter()
        .map(|mut c| {
            c.reverse();
            c.iter().map(|v| chain.join(v, &zeros)).collect()
        })
        .collect();
    chains.sort_by(|a, b| b.len().cmp(&a.len()));
    let chain_lengths: Vec<usize> = chains.iter().map(|c| c.len()).collect();

    let eigen_defect = chains
        .iter()
        .map(|c| {
            let (fi, _) = chain.split(&c[0]);
            vec_max_abs(&b.matvec(&fi)) / vec_max_abs(&fi).max(T::min_positive_value())
        })
        .fold(T::zero(), T::max);
    if eigen_defect > T::tol(CHAIN_TOL) * (T::one() + lambda.norm()) {
        return Err(Error::IllConditioned(format!(
            "eigenvector defect {:e}",
            eigen_defect.as_f64()
        )));
    }

    Ok(JordanBasis {
        lambda,
        geo_mult: chains.len(),
        alg_mult: kappa,
        chain_lengths,
        chains,
        rank_gap,
        eigen_defect,
    })
}

/// Basis of `{f : (λI - P)ⁿ f = 0 on X}` for λ in the interior spectrum.
#[derive(Debug, Clone)]
pub struct GlobalBasis<T> {
    pub jordan: JordanBasis<T>,
    pub order: usize,
    pub vectors: Vec<CVector<T>>,
    /// `max |(λI - P)ⁿ f| / |f|` over the returned vectors.
    pub max_defect: T,
    pub tol: T,
}

impl<T: Real> GlobalBasis<T> {
    pub fn passed(&self) -> bool {
        self.max_defect <= self.tol
    }
}

pub fn global_polyharmonic_basis<T: Real>(chain: &Chain<T>, lambda: Complex<T>, n: usize) -> Result<GlobalBasis<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("order n must be at least 1".into()));
    }
    let jordan = jordan_basis(chain, lambda, T::tol(JORDAN_TOL))?;
    let vectors = jordan.truncated(n);
    let p = chain.transition_matrix();
    let op = (&Matrix::scalar(p.rows(), lambda) - &p).pow(n);
    let max_defect = vectors
        .iter()
        .map(|f| vec_max_abs(&op.matvec(f)) / vec_max_abs(f).max(T::min_positive_value()))
        .fold(T::zero(), T::max);
    Ok(GlobalBasis {
        jordan,
        order: n,
        vectors,
        max_defect,
        tol: T::tol(CHAIN_TOL),
    })
}

/// Checks for a chain built from a network: `M P_X° M⁻¹` with
/// `M = diag(√m(x))` is symmetric, the spectrum is real, and geometric and
/// algebraic multiplicities agree.
#[derive(Debug, Clone)]
pub struct NetworkSpectrumReport<T> {
    pub spectrum: Spectrum<T>,
    pub symmetry_defect: T,
    pub max_imag: T,
    /// `(algebraic, geometric)` per eigenvalue.
    pub multiplicities: Vec<(usize, usize)>,
}

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const IMAG_TOL: f64 = 1e-8;

pub fn network_spectrum_check<T: Real>(chain: &Chain<T>) -> Result<NetworkSpectrumReport<T>> {
    let mass = chain.conductance().ok_or(Error::NotANetwork)?;
    let p = chain.sub_chain().p_interior;
    let root: Vec<T> = chain.interior().iter().map(|&x| mass[x].sqrt()).collect();
    let m = p.rows();
    let sym = Matrix::from_fn(m, m, |i, j| p[(i, j)] * root[i] / root[j]);
    let symmetry_defect = sym.max_abs_diff(&sym.transpose());
    let spectrum = eigenvalues(&p)?;
    let max_imag = spectrum.eigenvalues.iter().fold(T::zero(), |a, z| a.max(z.im.abs()));
    let multiplicities: Vec<(usize, usize)> = spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.alg_mult)
        .map(|(&z, &alg)| {
            let geo = kernel(&(&Matrix::scalar(m, z) - &p), T::tol(JORDAN_TOL)).dim();
            (alg, geo)
        })
        .collect();

    let scale = T::one().max(sym.max_abs());
    if symmetry_defect > T::tol(SYMMETRY_TOL) * scale {
        return Err(Error::ReportedViolation(format!(
            "symmetrized matrix deviates from symmetry by {:e}",
            symmetry_defect.as_f64()
        )));
    }
    if max_imag > T::tol(IMAG_TOL) {
        return Err(Error::ReportedViolation(format!(
            "eigenvalue with imaginary part {:e}",
            max_imag.as_f64()
        )));
    }
    if let Some((i, (a, g))) = multiplicities.iter().enumerate().find(|(_, (a, g))| a != g) {
        return Err(Error::ReportedViolation(format!(
            "eigenvalue {} has algebraic multiplicity {a} but geometric {g}",
            spectrum.eigenvalues[i]
        )));
    }
    Ok(NetworkSpectrumReport {
        spectrum,
        symmetry_defect,
        max_imag,
        multiplicities,
    })
}

/// Orthogonal projector onto the span of the given vectors.
pub fn span_projector<T: Real>(vs: &[CVector<T>]) -> Matrix<T> {
    let q = orthonormalize(vs);
    let n = vs.first().map(|v| v.len()).unwrap_or(0);
    Matrix::from_fn(n, n, |i, j| q.iter().map(|v| v[i] * v[j].conj()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Network;
    use crate::samples::{forward_path, four_path};
    use crate::scalar::cplx;

    fn c(x: f64) -> Complex<f64> {
        cplx(x, 0.0)
    }

    fn unit(n: usize, i: usize) -> CVector<f64> {
        let mut v = vec![c(0.0); n];
        v[i] = c(1.0);
        v
    }

    #[test]
    fn spectrum_of_four_path() {
        let s = interior_spectrum(&four_path::<f64>()).unwrap();
        assert!((s.rho - 0.5).abs() < 1e-14);
        assert_eq!(s.spectrum.alg_mult, vec![1, 1]);
    }

    #[test]
    fn spectrum_of_forward_path() {
        let s = interior_spectrum(&forward_path::<f64>()).unwrap();
        assert_eq!(s.rho, 0.0);
        assert_eq!(s.spectrum.alg_mult, vec![2]);
    }

    #[test]
    fn forward_path_jordan_chain() {
        let fp = forward_path::<f64>();
        let jb = jordan_basis(&fp, c(0.0), JORDAN_TOL).unwrap();
        assert_eq!((jb.geo_mult, jb.alg_mult), (1, 2));
        assert_eq!(jb.chain_lengths, vec![2]);
        let o = fp.index_of("o").unwrap();
        let a = fp.index_of("a").unwrap();
        let want = span_projector(&[unit(3, o), unit(3, a)]);
        assert!(span_projector(&jb.chains[0]).max_abs_diff(&want) < 1e-12);
        // Bottom of the chain is an eigenvector supported on o.
        let bottom = span_projector(&jb.chains[0][..1]);
        assert!(bottom.max_abs_diff(&span_projector(&[unit(3, o)])) < 1e-12);
    }

    #[test]
    fn four_path_eigenvector() {
        let p4 = four_path::<f64>();
        let jb = jordan_basis(&p4, c(0.5), JORDAN_TOL).unwrap();
        assert_eq!((jb.geo_mult, jb.alg_mult), (1, 1));
        let mut want = vec![c(0.0); 4];
        want[p4.index_of("a").unwrap()] = c(1.0);
        want[p4.index_of("b").unwrap()] = c(1.0);
        assert!(span_projector(&jb.chains[0]).max_abs_diff(&span_projector(&[want])) < 1e-12);
    }

    #[test]
    fn not_an_eigenvalue() {
        let err = jordan_basis(&four_path::<f64>(), c(0.3), JORDAN_TOL).unwrap_err();
        assert!(matches!(err, Error::NotAnEigenvalue { .. }));
    }

    #[test]
    fn global_basis_truncation() {
        let fp = forward_path::<f64>();
        assert_eq!(global_polyharmonic_basis(&fp, c(0.0), 1).unwrap().vectors.len(), 1);
        let g2 = global_polyharmonic_basis(&fp, c(0.0), 2).unwrap();
        assert_eq!(g2.vectors.len(), 2);
        assert!(g2.passed());
        let p4 = four_path::<f64>();
        let g = global_polyharmonic_basis(&p4, c(0.5), 5).unwrap();
        assert_eq!(g.vectors.len(), 1);
        assert!(g.passed());
        for v in &g.vectors {
            for &w in p4.boundary() {
                assert_eq!(v[w], c(0.0));
            }
        }
    }

    #[test]
    fn unit_eigenvalue_of_full_matrix() {
        assert_eq!(unit_eigenvalue_multiplicity(&four_path::<f64>()).unwrap(), (2, 2));
    }

    #[test]
    fn network_check_on_unit_path() {
        let net = Network::new(
            vec![
                ("w1".into(), "a".into(), 1.0),
                ("a".into(), "b".into(), 1.0),
                ("b".into(), "w2".into(), 1.0),
            ],
            vec!["w1".into(), "w2".into()],
        );
        let chain: Chain<f64> = Chain::from_network(&net).unwrap();
        let r = network_spectrum_check(&chain).unwrap();
        assert!(r.multiplicities.iter().all(|(a, g)| a == g));
        assert!(r.max_imag < 1e-12);
    }

    #[test]
    fn network_check_refuses_plain_chain() {
        assert_eq!(
            network_spectrum_check(&four_path::<f64>()).unwrap_err(),
            Error::NotANetwork
        );
    }
}
