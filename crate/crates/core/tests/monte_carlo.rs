use polyharmonic::mc::{compare_to_analytic, default_max_steps, simulate_hitting, SimConfig};
use polyharmonic::samples::{four_path, random_chain, RandomChainSpec};
use polyharmonic::spectral::interior_spectrum;
use polyharmonic::Chain64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn censoring_is_rare_with_default_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut chains: Vec<Chain64> = vec![four_path()];
    for _ in 0..10 {
        let m = rng.random_range(1..=10);
        chains.push(random_chain(&mut rng, RandomChainSpec::new(m, 2)));
    }
    for (k, ch) in chains.iter().enumerate() {
        let rho = interior_spectrum(ch).unwrap().rho;
        let cfg = SimConfig::new(ch.interior()[0], 20_000, k as u64, default_max_steps(rho));
        let est = simulate_hitting(ch, &cfg).unwrap();
        assert!(!est.censoring_flagged(), "censored {}", est.censored_fraction());
        assert_eq!(est.counts.iter().sum::<u64>() + est.censored, est.trials);
        let rep = compare_to_analytic(&est, ch, None).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}

#[test]
fn heavy_censoring_is_flagged() {
    let p4 = four_path::<f64>();
    let est = simulate_hitting(&p4, &SimConfig::new(1, 10_000, 1, 1)).unwrap();
    // From a, one step reaches w1 with probability 1/2; the rest is censored.
    assert!(est.censoring_flagged());
    assert_eq!(est.counts[1], 0);
    assert_eq!(est.counts[0] + est.censored, 10_000);
}

#[test]
fn seeds_change_results_and_reruns_do_not() {
    let p4 = four_path::<f64>();
    let a = SimConfig::new(1, 5_000, 1, 1000);
    let b = SimConfig::new(1, 5_000, 2, 1000);
    let ea = simulate_hitting(&p4, &a).unwrap();
    assert_eq!(ea, simulate_hitting(&p4, &a).unwrap());
    assert_ne!(ea, simulate_hitting(&p4, &b).unwrap());
    // A prefix of trials is a prefix of the same streams.
    let small = simulate_hitting(&p4, &SimConfig::new(1, 1, 1, 1000)).unwrap();
    let t = small.first_visit.iter().position(|h| h.iter().sum::<u64>() == 1).unwrap();
    assert!(ea.counts[t] >= 1);
}
