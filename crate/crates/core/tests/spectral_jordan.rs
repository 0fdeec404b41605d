mod common;

use common::c;
use polyharmonic::linalg::{vec_max_abs, Matrix};
use polyharmonic::samples::{random_chain, random_network, RandomChainSpec};
use polyharmonic::spectral::{
    global_polyharmonic_basis, interior_spectrum, jordan_basis, network_spectrum_check, span_projector, JORDAN_TOL,
};
use polyharmonic::{Chain64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Deterministic forward walk `x0 -> x1 -> ... -> x{k-1} -> w`.
fn forward_walk(k: usize) -> Chain64 {
    let n = k + 1;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        p[i * n + (i + 1).min(k)] = 1.0;
    }
    let mut v = ids("x", k);
    v.push("w".into());
    Chain::new(v, &(0..k).collect::<Vec<_>>(), &[k], p).unwrap()
}

use polyharmonic::Chain;

/// Two disjoint copies of a chain sharing nothing: every eigenvalue doubles
/// with two independent chains.
fn doubled(chain: &Chain64) -> Chain64 {
    let n = chain.len();
    let nn = 2 * n;
    let mut p = vec![0.0; nn * nn];
    for copy in 0..2 {
        for i in 0..n {
            for j in 0..n {
                p[(copy * n + i) * nn + copy * n + j] = chain.p(i, j);
            }
        }
    }
    let mut v: Vec<String> = chain.vertices().iter().map(|s| format!("{s}_a")).collect();
    v.extend(chain.vertices().iter().map(|s| format!("{s}_b")));
    let int: Vec<usize> = chain.interior().iter().flat_map(|&i| [i, i + n]).collect();
    let bnd: Vec<usize> = chain.boundary().iter().flat_map(|&i| [i, i + n]).collect();
    Chain::new(v, &int, &bnd, p).unwrap()
}

#[test]
fn nilpotent_walks_have_one_long_chain() {
    for k in 1..=6 {
        let ch = forward_walk(k);
        let jb = jordan_basis(&ch, c(0.0), JORDAN_TOL).unwrap();
        assert_eq!(jb.chain_lengths, vec![k]);
        let shifted = ch.sub_chain().shifted(c(0.0));
        let chain = &jb.chains[0];
        for kk in 1..k {
            let (hi, _) = ch.split(&chain[kk]);
            let (lo, _) = ch.split(&chain[kk - 1]);
            let img = shifted.matvec(&hi);
            assert!(common::max_abs_diff(&img, &lo) < 1e-12);
        }
        for n in 1..=k + 1 {
            let g = global_polyharmonic_basis(&ch, c(0.0), n).unwrap();
            assert_eq!(g.vectors.len(), n.min(k));
            assert!(g.passed());
        }
    }
}

#[test]
fn doubled_chains_have_geometric_multiplicity_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let m = rng.random_range(1..=4);
        let base: Chain64 = random_chain(&mut rng, RandomChainSpec::new(m, 2));
        let ch = doubled(&base);
        let spec = interior_spectrum(&ch).unwrap().spectrum;
        for (z, &alg) in spec.eigenvalues.iter().zip(&spec.alg_mult) {
            let jb = jordan_basis(&ch, *z, JORDAN_TOL).unwrap();
            assert_eq!(jb.chain_lengths.iter().sum::<usize>(), alg);
            assert_eq!(jb.geo_mult % 2, 0);
        }
    }
    let ch = doubled(&forward_walk(3));
    let jb = jordan_basis(&ch, c(0.0), JORDAN_TOL).unwrap();
    assert_eq!(jb.chain_lengths, vec![3, 3]);
}

#[test]
fn global_basis_is_polyharmonic_on_random_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..30 {
        let m = rng.random_range(1..=6);
        let ch: Chain64 = random_chain(&mut rng, RandomChainSpec::new(m, 2));
        let spec = interior_spectrum(&ch).unwrap().spectrum;
        let p = ch.transition_matrix();
        for z in &spec.eigenvalues {
            let g = global_polyharmonic_basis(&ch, *z, 2).unwrap();
            assert!(g.passed(), "defect {}", g.max_defect);
            let op = (&Matrix::scalar(p.rows(), *z) - &p).pow(2);
            for v in &g.vectors {
                assert!(vec_max_abs(&op.matvec(v)) <= 1e-8 * vec_max_abs(v));
            }
        }
    }
}

#[test]
fn span_projector_is_basis_independent() {
    let ch = forward_walk(2);
    let jb = jordan_basis(&ch, c(0.0), JORDAN_TOL).unwrap();
    let mut scaled = jb.chains[0].clone();
    for v in scaled.iter_mut() {
        for z in v.iter_mut() {
            *z *= c(-3.0);
        }
    }
    assert!(span_projector(&scaled).max_abs_diff(&span_projector(&jb.chains[0])) < 1e-12);
}

#[test]
fn networks_have_real_semisimple_spectra() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..30 {
        let n = rng.random_range(3..=10);
        let b = rng.random_range(1..n);
        let net = random_network::<f64, _>(&mut rng, n, b, 0.3);
        let ch = Chain::from_network(&net).unwrap();
        let rep = network_spectrum_check(&ch).unwrap();
        assert!(rep.symmetry_defect <= 1e-12);
        assert!(rep.max_imag <= 1e-8);
    }
}

#[test]
fn non_eigenvalue_is_rejected() {
    let ch = forward_walk(2);
    match jordan_basis(&ch, c(0.25), JORDAN_TOL) {
        Err(Error::NotAnEigenvalue { distance, .. }) => assert!((distance - 0.25).abs() < 1e-12),
        other => panic!("unexpected {other:?}"),
    }
}
