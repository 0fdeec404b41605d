//! Small reference chains and random generators used by tests, benchmarks and
//! the command-line tool.

use rand::seq::SliceRandom;
use rand::Rng;

use std::collections::{BTreeMap, HashMap};

use crate::chain::{Chain, Network};
use crate::scalar::Real;
use crate::tree::{ForwardTree, TreeWeights};

fn names(ids: &[&str]) -> Vec<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

fn lit<T: Real>(p: &[f64]) -> Vec<T> {
    p.iter().map(|&x| T::lit(x)).collect()
}

/// Simple random walk on the path `w1 - a - b - w2` with absorbing ends.
pub fn four_path<T: Real>() -> Chain<T> {
    #[rustfmt::skip]
    let p = [
        1.0, 0.0, 0.0, 0.0,
        0.5, 0.0, 0.5, 0.0,
        0.0, 0.5, 0.0, 0.5,
        0.0, 0.0, 0.0, 1.0,
    ];
    Chain::new(names(&["w1", "a", "b", "w2"]), &[1, 2], &[0, 3], lit(&p)).expect("valid chain")
}

/// Simple random walk on `w1 - a - b - c - w2`.
pub fn five_path<T: Real>() -> Chain<T> {
    #[rustfmt::skip]
    let p = [
        1.0, 0.0, 0.0, 0.0, 0.0,
        0.5, 0.0, 0.5, 0.0, 0.0,
        0.0, 0.5, 0.0, 0.5, 0.0,
        0.0, 0.0, 0.5, 0.0, 0.5,
        0.0, 0.0, 0.0, 0.0, 1.0,
    ];
    Chain::new(names(&["w1", "a", "b", "c", "w2"]), &[1, 2, 3], &[0, 4], lit(&p))
        .expect("valid chain")
}

/// Deterministic forward walk `o -> a -> w`.
pub fn forward_path<T: Real>() -> Chain<T> {
    #[rustfmt::skip]
    let p = [
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
        0.0, 0.0, 1.0,
    ];
    Chain::new(names(&["o", "a", "w"]), &[0, 1], &[2], lit(&p)).expect("valid chain")
}

/// Shape of a random chain.
#[derive(Debug, Clone, Copy)]
pub struct RandomChainSpec {
    pub interior: usize,
    pub boundary: usize,
    /// Probability of each extra (non-spanning) edge.
    pub density: f64,
    /// When set, weights are small integers so that all transition
    /// probabilities are rationals with small denominators.
    pub rational: bool,
}

impl RandomChainSpec {
    pub fn new(interior: usize, boundary: usize) -> Self {
        Self {
            interior,
            boundary,
            density: 0.3,
            rational: false,
        }
    }
}

/// Random valid chain. Interior vertices are `x0, x1, ...`, boundary vertices
/// `w0, w1, ...`. Reachability is guaranteed by a spanning structure: each
/// interior vertex links to an earlier interior vertex or to the boundary, and
/// each boundary vertex is entered from some interior vertex.
pub fn random_chain<T: Real, R: Rng + ?Sized>(rng: &mut R, spec: RandomChainSpec) -> Chain<T> {
    let m = spec.interior.max(1);
    let b = spec.boundary.max(1);
    let n = m + b;
    let mut weight = vec![0.0f64; n * n];
    let draw = |rng: &mut R| -> f64 {
        if spec.rational {
            rng.random_range(1..=4) as f64
        } else {
            rng.random_range(0.1..1.0)
        }
    };
    for k in 0..m {
        let target = if k == 0 || rng.random_bool(0.3) {
            m + rng.random_range(0..b)
        } else {
            rng.random_range(0..k)
        };
        weight[k * n + target] += draw(rng);
        for j in 0..n {
            if rng.random_bool(spec.density) {
                weight[k * n + j] += draw(rng);
            }
        }
    }
    for w in 0..b {
        let x = rng.random_range(0..m);
        if weight[x * n + m + w] == 0.0 {
            weight[x * n + m + w] += draw(rng);
        }
    }
    let mut p = vec![T::zero(); n * n];
    for i in 0..m {
        let s: f64 = weight[i * n..(i + 1) * n].iter().sum();
        for j in 0..n {
            p[i * n + j] = T::lit(weight[i * n + j] / s);
        }
    }
    for w in m..n {
        p[w * n + w] = T::one();
    }
    let mut ids: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
    ids.extend((0..b).map(|i| format!("w{i}")));
    let interior: Vec<usize> = (0..m).collect();
    let boundary: Vec<usize> = (m..n).collect();
    Chain::new(ids, &interior, &boundary, p).expect("generator builds valid chains")
}

/// Random connected network on `vertices` vertices with `boundary` of them
/// (chosen at random) on the boundary.
pub fn random_network<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    vertices: usize,
    boundary: usize,
    density: f64,
) -> Network<T> {
    let n = vertices.max(2);
    let b = boundary.clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let name = |i: usize| format!("v{i}");
    let mut edges = Vec::new();
    // Random spanning tree keeps the graph connected.
    for k in 1..n {
        let u = order[k];
        let v = order[rng.random_range(0..k)];
        edges.push((name(u), name(v), T::lit(rng.random_range(0.1..2.0))));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(density) {
                edges.push((name(u), name(v), T::lit(rng.random_range(0.1..2.0))));
            }
        }
    }
    // Every boundary vertex needs an interior neighbour.
    for k in 0..b {
        let w = order[k];
        let u = order[rng.random_range(b..n)];
        edges.push((name(w), name(u), T::lit(rng.random_range(0.1..2.0))));
    }
    let boundary = order[..b].iter().map(|&i| name(i)).collect();
    Network::new(edges, boundary)
}

fn tree_from_probs<T: Real>(children: BTreeMap<String, Vec<String>>, probs: HashMap<String, T>, depth: usize) -> ForwardTree<T> {
    ForwardTree::build(&children, &TreeWeights::ForwardP(probs), Some(depth)).expect("generator builds valid trees")
}

/// Complete `branching`-ary tree of the given depth with uniform forward
/// probabilities. The root is `o`; children append `.k` to the parent id.
pub fn uniform_tree<T: Real>(branching: usize, depth: usize) -> ForwardTree<T> {
    let b = branching.max(1);
    let mut children = BTreeMap::new();
    let mut probs = HashMap::new();
    let mut level = vec!["o".to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for x in &level {
            let kids: Vec<String> = (0..b).map(|k| format!("{x}.{k}")).collect();
            for k in &kids {
                probs.insert(k.clone(), T::one() / T::count(b));
            }
            next.extend(kids.iter().cloned());
            children.insert(x.clone(), kids);
        }
        level = next;
    }
    tree_from_probs(children, probs, depth)
}

/// Random tree of the given depth; every vertex above it has between one and
/// `max_branching` children, with random positive forward probabilities.
pub fn random_tree<T: Real, R: Rng + ?Sized>(rng: &mut R, depth: usize, max_branching: usize) -> ForwardTree<T> {
    let mut children = BTreeMap::new();
    let mut probs = HashMap::new();
    let mut level = vec!["o".to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for x in &level {
            let b = rng.random_range(1..=max_branching.max(1));
            let kids: Vec<String> = (0..b).map(|k| format!("{x}.{k}")).collect();
            let w: Vec<f64> = (0..b).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            for (k, wk) in kids.iter().zip(&w) {
                probs.insert(k.clone(), T::lit(wk / total));
            }
            next.extend(kids.iter().cloned());
            children.insert(x.clone(), kids);
        }
        level = next;
    }
    tree_from_probs(children, probs, depth)
}
