//! Monte Carlo estimates of hitting distributions and first-visit times, for
//! cross-checking the analytic solvers.
//!
//! Trial `i` draws from the ChaCha8 stream `i` of the generator seeded by
//! `seed`, so results do not depend on how trials are scheduled.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvp::green;
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{re, Real};

/// Censored fraction above which an estimate is flagged.
pub const CENSOR_FLAG: f64 = 1e-3;
/// Fewer trials than this make a comparison underpowered.
pub const MIN_TRIALS: u64 = 100;
pub const Z_LIMIT: f64 = 5.0;
pub const SERIES_SIGMAS: f64 = 3.0;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub max_steps: usize,
    /// Start vertex index; must be interior.
    pub start: usize,
    /// Record the position after this many steps.
    pub occupancy_step: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(start: usize, trials: u64, seed: u64, max_steps: usize) -> Self {
        Self {
            trials,
            seed,
            max_steps,
            start,
            occupancy_step: None,
            workers: None,
        }
    }
}

/// `max_steps = ceil(100 / (1 - ρ))`.
pub fn default_max_steps(rho: f64) -> usize {
    (100.0 / (1.0 - rho).max(1e-6)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub step: usize,
    /// Trajectories at each vertex after `step` steps.
    pub counts: Vec<u64>,
    /// Trajectories censored before `step`.
    pub unknown: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub start: usize,
    pub trials: u64,
    pub seed: u64,
    pub max_steps: usize,
    /// Absorptions per boundary vertex, in boundary order.
    pub counts: Vec<u64>,
    pub censored: u64,
    /// `first_visit[j][t]`: absorptions at boundary vertex `j` at time `t`.
    pub first_visit: Vec<Vec<u64>>,
    pub occupancy: Option<Occupancy>,
}

impl HittingEstimate {
    pub fn frequency(&self, j: usize) -> f64 {
        self.counts[j] as f64 / self.trials as f64
    }

    pub fn standard_error(&self, j: usize) -> f64 {
        let p = self.frequency(j);
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Empirical `f^(t)(x, w_j)`.
    pub fn first_visit_mass(&self, j: usize, t: usize) -> f64 {
        self.first_visit[j].get(t).copied().unwrap_or(0) as f64 / self.trials as f64
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.trials as f64
    }

    pub fn censoring_flagged(&self) -> bool {
        self.censored_fraction() > CENSOR_FLAG
    }

    fn empty(cfg: &SimConfig, nb: usize, n: usize) -> Self {
        Self {
            start: cfg.start,
            trials: 0,
            seed: cfg.seed,
            max_steps: cfg.max_steps,
            counts: vec![0; nb],
            censored: 0,
            first_visit: vec![Vec::new(); nb],
            occupancy: cfg.occupancy_step.map(|step| Occupancy {
                step,
                counts: vec![0; n],
                unknown: 0,
            }),
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.censored += other.censored;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.first_visit.iter_mut().zip(&other.first_visit) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        if let (Some(a), Some(b)) = (self.occupancy.as_mut(), other.occupancy.as_ref()) {
            a.unknown += b.unknown;
            for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                *x += y;
            }
        }
        self
    }
}

/// Cumulative transition rows for sampling by binary search.
struct Sampler {
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
    absorbing: Vec<bool>,
}

impl Sampler {
    fn new<T: Real>(chain: &Chain<T>) -> Self {
        let n = chain.len();
        let mut targets = vec![Vec::new(); n];
        let mut cumulative = vec![Vec::new(); n];
        for x in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                let p = chain.p(x, y).as_f64();
                if p > 0.0 {
                    acc += p;
                    targets[x].push(y);
                    cumulative[x].push(acc);
                }
            }
        }
        let absorbing = (0..n).map(|x| chain.is_boundary(x)).collect();
        Self {
            targets,
            cumulative,
            absorbing,
        }
    }

    fn step(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let cum = &self.cumulative[x];
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.targets[x][k]
    }
}

fn run_chunk<T: Real>(chain: &Chain<T>, cfg: &SimConfig, sampler: &Sampler, base: &ChaCha8Rng, lo: u64, hi: u64) -> HittingEstimate {
    let mut est = HittingEstimate::empty(cfg, chain.boundary().len(), chain.len());
    for trial in lo..hi {
        let mut rng = base.clone();
        rng.set_stream(trial);
        est.trials += 1;
        let mut x = cfg.start;
        let mut absorbed_at = None;
        if cfg.occupancy_step == Some(0) {
            if let Some(o) = est.occupancy.as_mut() {
                o.counts[x] += 1;
            }
        }
        for t in 1..=cfg.max_steps {
            x = sampler.step(x, &mut rng);
            if sampler.absorbing[x] {
                absorbed_at = Some(t);
                break;
            }
            if cfg.occupancy_step == Some(t) {
                if let Some(o) = est.occupancy.as_mut() {
                    o.counts[x] += 1;
                }
            }
        }
        match absorbed_at {
            Some(t) => {
                let j = chain.slot(x);
                est.counts[j] += 1;
                let hist = &mut est.first_visit[j];
                if hist.len() <= t {
                    hist.resize(t + 1, 0);
                }
                hist[t] += 1;
                if let (Some(o), Some(step)) = (est.occupancy.as_mut(), cfg.occupancy_step) {
                    if step >= t {
                        o.counts[x] += 1;
                    }
                }
            }
            None => {
                est.censored += 1;
                if let (Some(o), Some(step)) = (est.occupancy.as_mut(), cfg.occupancy_step) {
                    if step > cfg.max_steps {
                        o.unknown += 1;
                    }
                }
            }
        }
    }
    est
}

/// Simulate `config.trials` trajectories from `config.start` until
/// absorption or `config.max_steps` steps.
pub fn simulate_hitting<T: Real>(chain: &Chain<T>, config: &SimConfig) -> Result<HittingEstimate> {
    if config.trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if config.max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    if config.start >= chain.len() || chain.is_boundary(config.start) {
        return Err(Error::InvalidInput(format!("start {} is not an interior vertex", config.start)));
    }
    let sampler = Sampler::new(chain);
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let chunks = config.trials.div_ceil(CHUNK);
    let run = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(config.trials);
                run_chunk(chain, config, &sampler, &base, lo, hi)
            })
            .reduce(
                || HittingEstimate::empty(config, chain.boundary().len(), chain.len()),
                HittingEstimate::merge,
            )
    };
    let est = match config.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(est)
}

/// Series check `Σ_t f̂^(t)(x,w) λ^{-t}` against `F(x,w|λ)` for one boundary vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheck {
    pub vertex: String,
    pub estimate: f64,
    pub analytic: f64,
    pub sigma: f64,
    /// `|λ^{-N} (P_X°^N 𝔽(λ))(x,w)|`, the exact tail beyond `N = max_steps`.
    pub truncation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingComparison {
    pub vertex: String,
    pub frequency: f64,
    pub analytic: f64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub hitting: Vec<HittingComparison>,
    pub max_abs_z: f64,
    pub z_limit: f64,
    pub series_lambda: Option<f64>,
    pub series: Vec<SeriesCheck>,
    pub series_sigmas: f64,
    pub censored_fraction: f64,
    pub censoring_flagged: bool,
    pub underpowered: bool,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        !self.underpowered && self.max_abs_z <= self.z_limit && self.series.iter().all(|s| s.passed)
    }
}

/// z-scores of the empirical hitting distribution against `F(x,·|1)`, plus an
/// optional series check at a real `λ > ρ(P_X°)`.
pub fn compare_to_analytic<T: Real>(
    estimate: &HittingEstimate,
    chain: &Chain<T>,
    series_lambda: Option<f64>,
) -> Result<ComparisonReport> {
    let x = chain.slot(estimate.start);
    let one = green(chain, re(T::one()))?;
    let trials = estimate.trials as f64;
    let mut hitting = Vec::new();
    for (j, &w) in chain.boundary().iter().enumerate() {
        let analytic = one.f[(x, j)].re.as_f64();
        let p = estimate.frequency(j);
        let mut se = estimate.standard_error(j);
        if se == 0.0 {
            se = (analytic * (1.0 - analytic) / trials).max(0.0).sqrt();
        }
        let z = if se > 0.0 {
            (p - analytic) / se
        } else if (p - analytic).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        hitting.push(HittingComparison {
            vertex: chain.id(w).to_string(),
            frequency: p,
            analytic,
            standard_error: se,
            z,
        });
    }
    let max_abs_z = hitting.iter().fold(0.0f64, |m, h| m.max(h.z.abs()));

    let mut series = Vec::new();
    if let Some(lambda) = series_lambda {
        let lam = re(T::lit(lambda));
        let gm = green(chain, lam)?;
        let n = estimate.max_steps;
        let tail = chain.sub_chain().p_interior.pow(n).matmul(&gm.f);
        let scale: Complex<T> = re(T::lit(lambda.powi(-(n as i32))));
        let tail: Matrix<T> = tail.scale(scale);
        for (j, &w) in chain.boundary().iter().enumerate() {
            let (mut s1, mut s2) = (0.0, 0.0);
            for (t, &c) in estimate.first_visit[j].iter().enumerate().skip(1) {
                let y = lambda.powi(-(t as i32));
                let m = c as f64 / trials;
                s1 += m * y;
                s2 += m * y * y;
            }
            let sigma = ((s2 - s1 * s1).max(0.0) / trials).sqrt();
            let analytic = gm.f[(x, j)].re.as_f64();
            let truncation = tail[(x, j)].norm().as_f64();
            let passed = (s1 - analytic).abs() <= SERIES_SIGMAS * sigma + truncation + 1e-12;
            series.push(SeriesCheck {
                vertex: chain.id(w).to_string(),
                estimate: s1,
                analytic,
                sigma,
                truncation,
                passed,
            });
        }
    }

    Ok(ComparisonReport {
        hitting,
        max_abs_z,
        z_limit: Z_LIMIT,
        series_lambda,
        series,
        series_sigmas: SERIES_SIGMAS,
        censored_fraction: estimate.censored_fraction(),
        censoring_flagged: estimate.censoring_flagged(),
        underpowered: estimate.trials < MIN_TRIALS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::four_path;

    fn cfg(trials: u64, seed: u64) -> SimConfig {
        SimConfig::new(1, trials, seed, 10_000)
    }

    #[test]
    fn counts_add_up() {
        let p4 = four_path::<f64>();
        let est = simulate_hitting(&p4, &cfg(20_000, 3)).unwrap();
        assert_eq!(est.counts.iter().sum::<u64>() + est.censored, est.trials);
        let hist: u64 = est.first_visit.iter().flatten().sum();
        assert_eq!(hist + est.censored, est.trials);
        // From a, w1 can only be reached at odd times.
        for (t, &c) in est.first_visit[0].iter().enumerate() {
            if t % 2 == 0 {
                assert_eq!(c, 0);
            }
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let p4 = four_path::<f64>();
        let mut a = cfg(30_000, 11);
        a.workers = Some(1);
        let mut b = a.clone();
        b.workers = Some(4);
        assert_eq!(simulate_hitting(&p4, &a).unwrap(), simulate_hitting(&p4, &b).unwrap());
        let one = simulate_hitting(&p4, &cfg(1, 5)).unwrap();
        assert_eq!(one, simulate_hitting(&p4, &cfg(1, 5)).unwrap());
        assert_eq!(one.counts.iter().sum::<u64>(), 1);
    }

    #[test]
    fn comparison_on_four_path() {
        let p4 = four_path::<f64>();
        let est = simulate_hitting(&p4, &cfg(200_000, 7)).unwrap();
        assert!((est.first_visit_mass(0, 1) - 0.5).abs() < 5.0 * (0.25f64 / 200_000.0).sqrt());
        let rep = compare_to_analytic(&est, &p4, Some(2.0)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.series[0].analytic - 4.0 / 15.0).abs() < 1e-12);
        assert!(!rep.censoring_flagged);
    }

    #[test]
    fn occupancy_sample() {
        let p4 = four_path::<f64>();
        let mut c = cfg(50_000, 2);
        c.occupancy_step = Some(2);
        let est = simulate_hitting(&p4, &c).unwrap();
        let occ = est.occupancy.unwrap();
        // p^(2)(a,·) = (1/2, 1/4, 0, 1/4) over (w1, a, b, w2).
        let f = |i: usize| occ.counts[i] as f64 / 50_000.0;
        assert!((f(0) - 0.5).abs() < 0.01);
        assert!((f(1) - 0.25).abs() < 0.01);
        assert_eq!(occ.counts[2], 0);
        assert!((f(3) - 0.25).abs() < 0.01);
    }

    #[test]
    fn underpowered_and_bad_config() {
        let p4 = four_path::<f64>();
        let est = simulate_hitting(&p4, &cfg(50, 1)).unwrap();
        let rep = compare_to_analytic(&est, &p4, None).unwrap();
        assert!(rep.underpowered && !rep.passed());
        assert!(simulate_hitting(&p4, &cfg(0, 1)).is_err());
        assert!(simulate_hitting(&p4, &SimConfig::new(0, 10, 1, 10)).is_err());
    }
}
