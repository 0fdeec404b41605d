//! Forward-only Markov chains on rooted trees, stored to a finite depth.
//!
//! Transition probabilities are `p(x,y) = Prob(∂_y T) / Prob(∂_x T)` for the
//! children `y` of `x`, where `Prob(∂_x T)` is the mass of the boundary arc
//! below `x`. Green functions and Martin kernels have closed forms in terms of
//! depths and arc masses.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use num_complex::Complex;
use num_traits::Zero;

use crate::binomial::{binomial, identity_check, IdentityReport};
use crate::bvp::{solve_riquier, RiquierProblem};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::scalar::{powi, re, Real};

/// Tolerance for additivity of arc masses and distributions.
pub const ADDITIVITY_TOL: f64 = 1e-12;
pub const KERNEL_TOL: f64 = 1e-10;

/// How the tree's transition structure is specified.
#[derive(Debug, Clone)]
pub enum TreeWeights<T> {
    /// `Prob(∂_x T)` per vertex.
    Measure(HashMap<String, T>),
    /// `p(x⁻, x)` keyed by the child `x`.
    ForwardP(HashMap<String, T>),
}

#[derive(Debug, Clone)]
pub struct ForwardTree<T> {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    measure: Vec<T>,
    max_depth: usize,
}

fn root_of(children: &BTreeMap<String, Vec<String>>) -> Result<String> {
    let kids: HashSet<&String> = children.values().flatten().collect();
    let roots: Vec<&String> = children.keys().filter(|k| !kids.contains(k)).collect();
    match roots.as_slice() {
        [r] => Ok((*r).clone()),
        [] => Err(Error::InvalidInput("tree has no root".into())),
        _ => Err(Error::InvalidInput(format!("tree has {} roots", roots.len()))),
    }
}

impl<T: Real> ForwardTree<T> {
    /// Build from a children map. Vertices are numbered breadth first in the
    /// order the children lists give. `depth`, when present, must equal the
    /// depth of every leaf.
    pub fn build(
        children: &BTreeMap<String, Vec<String>>,
        weights: &TreeWeights<T>,
        depth: Option<usize>,
    ) -> Result<Self> {
        let root = root_of(children)?;
        let mut ids = vec![root.clone()];
        let mut index = HashMap::from([(root, 0usize)]);
        let mut parent = vec![None];
        let mut kids: Vec<Vec<usize>> = vec![Vec::new()];
        let mut depths = vec![0usize];
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            let Some(list) = children.get(&ids[x]) else { continue };
            for c in list {
                if index.contains_key(c) {
                    return Err(Error::InvalidInput(format!("vertex {c} reached twice")));
                }
                let y = ids.len();
                index.insert(c.clone(), y);
                ids.push(c.clone());
                parent.push(Some(x));
                kids.push(Vec::new());
                depths.push(depths[x] + 1);
                kids[x].push(y);
                queue.push_back(y);
            }
        }
        for k in children.keys() {
            if !index.contains_key(k) {
                return Err(Error::InvalidInput(format!("vertex {k} is not reachable from the root")));
            }
        }
        let max_depth = depths.iter().copied().max().unwrap_or(0);
        if max_depth == 0 {
            return Err(Error::InvalidInput("tree must have depth at least 1".into()));
        }
        if let Some(d) = depth {
            if d != max_depth {
                return Err(Error::InvalidInput(format!("declared depth {d}, stored depth {max_depth}")));
            }
        }
        for (x, k) in kids.iter().enumerate() {
            if k.is_empty() && depths[x] < max_depth {
                return Err(Error::InvalidInput(format!(
                    "leaf {} at depth {} above truncation depth {max_depth}",
                    ids[x], depths[x]
                )));
            }
        }

        let n = ids.len();
        let tol = T::tol(ADDITIVITY_TOL);
        let measure = match weights {
            TreeWeights::Measure(m) => {
                let mut out = vec![T::zero(); n];
                for (x, id) in ids.iter().enumerate() {
                    let v = *m
                        .get(id)
                        .ok_or_else(|| Error::InvalidInput(format!("no measure for vertex {id}")))?;
                    if !(v > T::zero()) || !v.is_finite() {
                        return Err(Error::NonPositiveMass { vertex: id.clone() });
                    }
                    out[x] = v;
                }
                if (out[0] - T::one()).abs() > tol {
                    return Err(Error::AdditivityViolation {
                        vertex: ids[0].clone(),
                        deviation: (out[0] - T::one()).abs().as_f64(),
                    });
                }
                for x in 0..n {
                    if kids[x].is_empty() {
                        continue;
                    }
                    let s: T = kids[x].iter().map(|&y| out[y]).sum();
                    if (s - out[x]).abs() > tol {
                        return Err(Error::AdditivityViolation {
                            vertex: ids[x].clone(),
                            deviation: (s - out[x]).abs().as_f64(),
                        });
                    }
                }
                out
            }
            TreeWeights::ForwardP(p) => {
                let mut out = vec![T::one(); n];
                for x in 0..n {
                    if kids[x].is_empty() {
                        continue;
                    }
                    let mut s = T::zero();
                    for &y in &kids[x] {
                        let v = *p.get(&ids[y]).ok_or_else(|| {
                            Error::InvalidInput(format!("no forward probability for vertex {}", ids[y]))
                        })?;
                        if !(v > T::zero()) || !v.is_finite() {
                            return Err(Error::NonPositiveMass { vertex: ids[y].clone() });
                        }
                        s += v;
                        // Breadth-first order: the parent's mass is already final.
                        out[y] = out[x] * v;
                    }
                    if (s - T::one()).abs() > tol {
                        return Err(Error::AdditivityViolation {
                            vertex: ids[x].clone(),
                            deviation: (s - T::one()).abs().as_f64(),
                        });
                    }
                }
                out
            }
        };

        Ok(ForwardTree {
            ids,
            index,
            parent,
            children: kids,
            depth: depths,
            measure,
            max_depth,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn id(&self, x: usize) -> &str {
        &self.ids[x]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn parent(&self, x: usize) -> Option<usize> {
        self.parent[x]
    }

    pub fn children(&self, x: usize) -> &[usize] {
        &self.children[x]
    }

    /// `|x|`.
    pub fn depth(&self, x: usize) -> usize {
        self.depth[x]
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// `Prob(∂_x T)`.
    pub fn measure(&self, x: usize) -> T {
        self.measure[x]
    }

    /// `p(x, y)`; zero unless `y` is a child of `x`.
    pub fn forward_p(&self, x: usize, y: usize) -> T {
        if self.parent[y] == Some(x) {
            self.measure[y] / self.measure[x]
        } else {
            T::zero()
        }
    }

    /// Whether `x` lies on the geodesic `π(o, y)` (ancestor or equal).
    pub fn on_path(&self, x: usize, y: usize) -> bool {
        if self.depth[x] > self.depth[y] {
            return false;
        }
        let mut v = y;
        while self.depth[v] > self.depth[x] {
            v = self.parent[v].expect("non-root has parent");
        }
        v == x
    }

    pub fn at_depth(&self, d: usize) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.depth[x] == d).collect()
    }

    /// Forward probabilities keyed by child id.
    pub fn forward_probabilities(&self) -> BTreeMap<String, T> {
        (1..self.len())
            .map(|y| (self.ids[y].clone(), self.forward_p(self.parent[y].expect("child"), y)))
            .collect()
    }

    pub fn children_map(&self) -> BTreeMap<String, Vec<String>> {
        (0..self.len())
            .filter(|&x| !self.children[x].is_empty())
            .map(|x| (self.ids[x].clone(), self.children[x].iter().map(|&y| self.ids[y].clone()).collect()))
            .collect()
    }
}

/// Values `ν(∂_x T)` of a complex set function on arcs, one per stored vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDistribution<T> {
    values: Vec<Complex<T>>,
}

impl<T: Real> BoundaryDistribution<T> {
    pub fn new<F: Real>(tree: &ForwardTree<F>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != tree.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} distribution values for {} vertices",
                values.len(),
                tree.len()
            )));
        }
        for x in 0..tree.len() {
            let kids = tree.children(x);
            if kids.is_empty() {
                continue;
            }
            let s: Complex<T> = kids.iter().map(|&y| values[y]).sum();
            let dev = (s - values[x]).norm();
            if dev > T::tol(ADDITIVITY_TOL) * T::one().max(values[x].norm()) {
                return Err(Error::AdditivityViolation {
                    vertex: tree.id(x).to_string(),
                    deviation: dev.as_f64(),
                });
            }
        }
        Ok(Self { values })
    }

    /// Extend values on the deepest level upward by summation.
    pub fn from_leaves<F: Real>(tree: &ForwardTree<F>, leaves: &HashMap<usize, Complex<T>>) -> Result<Self> {
        let mut values = vec![Complex::zero(); tree.len()];
        for x in tree.at_depth(tree.max_depth()) {
            values[x] = *leaves
                .get(&x)
                .ok_or_else(|| Error::InvalidInput(format!("no value for leaf {}", tree.id(x))))?;
        }
        for x in (0..tree.len()).rev() {
            if let Some(p) = tree.parent(x) {
                let v = values[x];
                values[p] += v;
            }
        }
        Ok(Self { values })
    }

    /// The arc measure itself.
    pub fn from_measure(tree: &ForwardTree<T>) -> Self {
        Self {
            values: (0..tree.len()).map(|x| re(tree.measure(x))).collect(),
        }
    }

    pub fn zero<F: Real>(tree: &ForwardTree<F>) -> Self {
        Self {
            values: vec![Complex::zero(); tree.len()],
        }
    }

    pub fn at(&self, x: usize) -> Complex<T> {
        self.values[x]
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }
}

/// A set of vertices meeting every root-to-depth-`D` path exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    members: Vec<usize>,
    is_member: Vec<bool>,
}

impl Section {
    pub fn new<T: Real>(tree: &ForwardTree<T>, members: &[usize]) -> Result<Self> {
        let mut is_member = vec![false; tree.len()];
        for &s in members {
            if s >= tree.len() {
                return Err(Error::NotASection(format!("vertex index {s} out of range")));
            }
            if s == tree.root() {
                return Err(Error::NotASection("section contains the root".into()));
            }
            if is_member[s] {
                return Err(Error::NotASection(format!("vertex {} listed twice", tree.id(s))));
            }
            is_member[s] = true;
        }
        for leaf in tree.at_depth(tree.max_depth()) {
            let mut hits = Vec::new();
            let mut v = Some(leaf);
            while let Some(x) = v {
                if is_member[x] {
                    hits.push(x);
                }
                v = tree.parent(x);
            }
            match hits.len() {
                1 => {}
                0 => {
                    return Err(Error::NotASection(format!(
                        "path to {} misses the section",
                        tree.id(leaf)
                    )))
                }
                _ => {
                    return Err(Error::NotASection(format!(
                        "{} and {} lie on one path",
                        tree.id(hits[1]),
                        tree.id(hits[0])
                    )))
                }
            }
        }
        let mut members = members.to_vec();
        members.sort_unstable();
        Ok(Self { members, is_member })
    }

    pub fn from_ids<T: Real>(tree: &ForwardTree<T>, ids: &[String]) -> Result<Self> {
        let idx: Vec<usize> = ids
            .iter()
            .map(|id| {
                tree.index_of(id)
                    .ok_or_else(|| Error::NotASection(format!("unknown vertex {id}")))
            })
            .collect::<Result<_>>()?;
        Self::new(tree, &idx)
    }

    /// All vertices at depth `d`.
    pub fn at_depth<T: Real>(tree: &ForwardTree<T>, d: usize) -> Result<Self> {
        Self::new(tree, &tree.at_depth(d))
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, x: usize) -> bool {
        self.is_member[x]
    }

    /// Vertices strictly before the section on their paths.
    pub fn interior<T: Real>(&self, tree: &ForwardTree<T>) -> Vec<usize> {
        (0..tree.len()).filter(|&x| self.members.iter().any(|&s| s != x && tree.on_path(x, s))).collect()
    }
}

/// The finite chain on the section's interior and the section, in tree
/// vertex order, with the section absorbing.
pub fn restrict_to_section<T: Real>(tree: &ForwardTree<T>, section: &Section) -> Result<Chain<T>> {
    let interior = section.interior(tree);
    let mut keep: Vec<usize> = interior.iter().chain(section.members()).copied().collect();
    keep.sort_unstable();
    let pos: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let n = keep.len();
    let mut trans = vec![T::zero(); n * n];
    for (i, &x) in keep.iter().enumerate() {
        if section.contains(x) {
            trans[i * n + i] = T::one();
        } else {
            for &y in tree.children(x) {
                trans[i * n + pos[&y]] = tree.forward_p(x, y);
            }
        }
    }
    let vertices = keep.iter().map(|&x| tree.id(x).to_string()).collect();
    let int_idx: Vec<usize> = interior.iter().map(|x| pos[x]).collect();
    let bnd_idx: Vec<usize> = section.members().iter().map(|x| pos[x]).collect();
    Chain::new(vertices, &int_idx, &bnd_idx, trans)
}

fn nonzero<T: Real>(lambda: Complex<T>) -> Result<()> {
    if lambda.is_zero() {
        Err(Error::ZeroLambda)
    } else {
        Ok(())
    }
}

fn binom_real<T: Real>(a: i64, k: usize) -> T {
    T::from_i128(binomial::<i128>(a, k)).expect("representable")
}

fn interior_vertex<T: Real>(tree: &ForwardTree<T>, section: &Section, x: usize) -> Result<()> {
    let ok = x < tree.len() && !section.contains(x) && section.members().iter().any(|&s| tree.on_path(x, s));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("vertex {x} is not interior to the section")))
    }
}

/// `G(x,y|λ) = λ^{-d(x,y)-1} Prob(∂_y T) / Prob(∂_x T)` when `x ∈ π(o,y)`, else 0.
pub fn tree_green<T: Real>(
    tree: &ForwardTree<T>,
    section: &Section,
    lambda: Complex<T>,
    x: usize,
    y: usize,
) -> Result<Complex<T>> {
    nonzero(lambda)?;
    interior_vertex(tree, section, x)?;
    interior_vertex(tree, section, y)?;
    if !tree.on_path(x, y) {
        return Ok(Complex::zero());
    }
    let d = (tree.depth(y) - tree.depth(x)) as i64;
    Ok(powi(lambda, -d - 1) * (tree.measure(y) / tree.measure(x)))
}

/// `K_r(x,w|λ) = λ^{|x|-r+1} C(d(x,w)+r-2, r-1) / Prob(∂_x T)` when `x ∈ π(o,w)`, else 0.
pub fn tree_kernel_kr<T: Real>(
    tree: &ForwardTree<T>,
    section: &Section,
    lambda: Complex<T>,
    r: usize,
    x: usize,
    w: usize,
) -> Result<Complex<T>> {
    nonzero(lambda)?;
    if r == 0 {
        return Err(Error::InvalidInput("kernel order must be at least 1".into()));
    }
    if w >= tree.len() || !section.contains(w) {
        return Err(Error::InvalidInput(format!("vertex {w} is not in the section")));
    }
    if x >= tree.len() {
        return Err(Error::InvalidInput(format!("vertex index {x} out of range")));
    }
    if !tree.on_path(x, w) {
        return Ok(Complex::zero());
    }
    let d = (tree.depth(w) - tree.depth(x)) as i64;
    let e = tree.depth(x) as i64 - r as i64 + 1;
    Ok(powi(lambda, e) * (binom_real::<T>(d + r as i64 - 2, r - 1) / tree.measure(x)))
}

/// `K_r^T(x,ξ|λ) = (-1)^{r-1} λ^{|x|-r+1} C(|x|, r-1) / Prob(∂_x T)` for `ξ`
/// in the arc below `arc_vertex`, when `x ∈ π(o,ξ)`. The value must be
/// constant on the arc, so `x` may not lie strictly below `arc_vertex`.
pub fn infinite_kernel_ktr<T: Real>(
    tree: &ForwardTree<T>,
    lambda: Complex<T>,
    r: usize,
    x: usize,
    arc_vertex: usize,
) -> Result<Complex<T>> {
    nonzero(lambda)?;
    if r == 0 {
        return Err(Error::InvalidInput("kernel order must be at least 1".into()));
    }
    if x >= tree.len() || arc_vertex >= tree.len() {
        return Err(Error::InvalidInput("vertex index out of range".into()));
    }
    if x != arc_vertex && tree.on_path(arc_vertex, x) {
        return Err(Error::InvalidInput(format!(
            "kernel at {} is not constant on the arc below {}",
            tree.id(x),
            tree.id(arc_vertex)
        )));
    }
    if !tree.on_path(x, arc_vertex) {
        return Ok(Complex::zero());
    }
    let k = tree.depth(x) as i64;
    let mut v = powi(lambda, k - r as i64 + 1) * (binom_real::<T>(k, r - 1) / tree.measure(x));
    if r % 2 == 0 {
        v = -v;
    }
    Ok(v)
}

/// Largest relative defect of `(λI - P_T) K_r^T = K_{r-1}^T` (with `K_0 = 0`)
/// over every vertex above the truncation depth, every deepest arc and
/// `1 <= r <= r_max`.
pub fn ktr_recursion_defect<T: Real>(tree: &ForwardTree<T>, lambda: Complex<T>, r_max: usize) -> Result<T> {
    nonzero(lambda)?;
    let mut worst = T::zero();
    for xi in tree.at_depth(tree.max_depth()) {
        for r in 1..=r_max {
            for x in (0..tree.len()).filter(|&x| tree.depth(x) < tree.max_depth()) {
                let k = |v: usize, r: usize| -> Result<Complex<T>> {
                    if r == 0 {
                        Ok(Complex::zero())
                    } else {
                        infinite_kernel_ktr(tree, lambda, r, v, xi)
                    }
                };
                let mut lhs = lambda * k(x, r)?;
                for &y in tree.children(x) {
                    lhs -= k(y, r)? * tree.forward_p(x, y);
                }
                let rhs = k(x, r - 1)?;
                let scale = T::one().max(rhs.norm()).max((lambda * k(x, r)?).norm());
                worst = worst.max((lhs - rhs).norm() / scale);
            }
        }
    }
    Ok(worst)
}

/// `f(x) = Σ_r (-1)^{r-1} λ^{|x|-r+1} C(|x|, r-1) ν_r(∂_x T) / Prob(∂_x T)`.
pub fn eval_polyharmonic<T: Real>(
    tree: &ForwardTree<T>,
    lambda: Complex<T>,
    distributions: &[BoundaryDistribution<T>],
    x: usize,
) -> Result<Complex<T>> {
    nonzero(lambda)?;
    if x >= tree.len() {
        return Err(Error::InvalidInput(format!("vertex index {x} out of range")));
    }
    let k = tree.depth(x) as i64;
    let mut f = Complex::zero();
    for (i, nu) in distributions.iter().enumerate() {
        let r = i + 1;
        let mut term = powi(lambda, k - r as i64 + 1) * (binom_real::<T>(k, r - 1) / tree.measure(x)) * nu.at(x);
        if r % 2 == 0 {
            term = -term;
        }
        f += term;
    }
    Ok(f)
}

/// Evaluate at every vertex and return the largest relative value of
/// `(λI - P_T)ⁿ f` over vertices where it is determined by stored values
/// (depth at most `D - n`).
pub fn polyharmonic_defect<T: Real>(
    tree: &ForwardTree<T>,
    lambda: Complex<T>,
    distributions: &[BoundaryDistribution<T>],
) -> Result<T> {
    let mut f: Vec<Complex<T>> = (0..tree.len())
        .map(|x| eval_polyharmonic(tree, lambda, distributions, x))
        .collect::<Result<_>>()?;
    let scale = f.iter().fold(T::one(), |m, z| m.max(z.norm()));
    let n = distributions.len();
    if n > tree.max_depth() {
        return Err(Error::InvalidInput("order exceeds stored depth".into()));
    }
    for _ in 0..n {
        let next: Vec<Complex<T>> = (0..tree.len())
            .map(|x| {
                let mut v = lambda * f[x];
                for &y in tree.children(x) {
                    v -= f[y] * tree.forward_p(x, y);
                }
                v
            })
            .collect();
        f = next;
    }
    Ok((0..tree.len())
        .filter(|&x| tree.depth(x) + n <= tree.max_depth())
        .fold(T::zero(), |m, x| m.max(f[x].norm() / scale)))
}

#[derive(Debug, Clone)]
pub struct ConsistencyReport<T> {
    pub lambda: Complex<T>,
    pub order: usize,
    pub arc_vertex: usize,
    /// Vertices of `π(o,w)`, root first.
    pub path: Vec<usize>,
    pub lhs: Vec<Complex<T>>,
    /// Kernel-form right-hand side from the closed-form `K_r^(X)`.
    pub rhs: Vec<Complex<T>>,
    pub max_deviation: T,
    /// Deviation of the general Riquier solver on the restricted chain.
    pub solver_deviation: T,
    pub tol: T,
    pub identity: IdentityReport,
}

impl<T: Real> ConsistencyReport<T> {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tol && self.solver_deviation <= self.tol && self.identity.passed()
    }
}

/// Compare `K_n^T(x,ξ|λ)` for `ξ` below the section vertex `w` with the
/// solution of the order-`n` Riquier problem on the restricted chain whose
/// boundary data are `g_r = K^T_{n+1-r}(w,ξ|λ) δ_w`, in kernel form with
/// `ν_r(v) = λ^{-|v|} g_r(v) Prob(∂_v T)` and through the general solver.
pub fn kernel_consistency_check<T: Real>(
    tree: &ForwardTree<T>,
    section: &Section,
    lambda: Complex<T>,
    n: usize,
    w: usize,
) -> Result<ConsistencyReport<T>> {
    nonzero(lambda)?;
    if n == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    if w >= tree.len() || !section.contains(w) {
        return Err(Error::InvalidInput(format!("vertex {w} is not in the section")));
    }
    let mut path = vec![w];
    while let Some(p) = tree.parent(*path.last().expect("non-empty")) {
        path.push(p);
    }
    path.reverse();

    let g: Vec<Complex<T>> = (1..=n)
        .map(|r| infinite_kernel_ktr(tree, lambda, n + 1 - r, w, w))
        .collect::<Result<_>>()?;
    let nu: Vec<Complex<T>> = g
        .iter()
        .map(|&gr| powi(lambda, -(tree.depth(w) as i64)) * gr * tree.measure(w))
        .collect();

    let mut lhs = Vec::with_capacity(path.len());
    let mut rhs = Vec::with_capacity(path.len());
    for &x in &path {
        lhs.push(infinite_kernel_ktr(tree, lambda, n, x, w)?);
        let mut s = Complex::zero();
        for r in 1..=n {
            s += tree_kernel_kr(tree, section, lambda, r, x, w)? * nu[r - 1];
        }
        rhs.push(s);
    }
    let scale = lhs.iter().fold(T::one(), |m, z| m.max(z.norm()));
    let max_deviation = lhs.iter().zip(&rhs).fold(T::zero(), |m, (a, b)| m.max((a - b).norm())) / scale;

    let chain = restrict_to_section(tree, section)?;
    let slot_w = section.members().iter().position(|&s| s == w).expect("member");
    let boundary_functions: Vec<Vec<Complex<T>>> = g
        .iter()
        .map(|&gr| {
            let mut v = vec![Complex::zero(); section.members().len()];
            v[slot_w] = gr;
            v
        })
        .collect();
    let sol = solve_riquier(&RiquierProblem::new(lambda, boundary_functions), &chain)?;
    let mut solver_deviation = T::zero();
    for (&x, l) in path.iter().zip(&lhs) {
        let cx = chain.index_of(tree.id(x)).expect("restricted vertex");
        solver_deviation = solver_deviation.max((sol.values[cx] - l).norm() / scale);
    }

    Ok(ConsistencyReport {
        lambda,
        order: n,
        arc_vertex: w,
        path,
        lhs,
        rhs,
        max_deviation,
        solver_deviation,
        tol: T::tol(KERNEL_TOL),
        identity: identity_check(20, 8),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::green;
    use crate::martin::martin_kernel;
    use crate::samples::uniform_tree;
    use crate::scalar::cplx;

    fn c(x: f64) -> Complex<f64> {
        cplx(x, 0.0)
    }

    fn near(a: Complex<f64>, b: f64) -> bool {
        (a - c(b)).norm() < 1e-12
    }

    #[test]
    fn uniform_binary_probabilities() {
        let t = uniform_tree::<f64>(2, 3);
        for y in 1..t.len() {
            assert_eq!(t.forward_p(t.parent(y).unwrap(), y), 0.5);
            assert_eq!(t.measure(y), 0.5f64.powi(t.depth(y) as i32));
        }
    }

    fn two_children(m: &[(&str, f64)]) -> Result<ForwardTree<f64>> {
        let children = BTreeMap::from([("o".to_string(), vec!["a".to_string(), "b".to_string()])]);
        let measure = m.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        ForwardTree::build(&children, &TreeWeights::Measure(measure), None)
    }

    #[test]
    fn measure_and_forward_p() {
        let t = two_children(&[("o", 1.0), ("a", 0.3), ("b", 0.7)]).unwrap();
        assert!((t.forward_p(0, 1) - 0.3).abs() < 1e-15);
        assert!((t.forward_p(0, 2) - 0.7).abs() < 1e-15);
        let err = two_children(&[("o", 1.0), ("a", 0.3), ("b", 0.6)]).unwrap_err();
        assert!(matches!(err, Error::AdditivityViolation { .. }));
        let err = two_children(&[("o", 1.0), ("a", 1.2), ("b", -0.2)]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveMass { .. }));
    }

    #[test]
    fn forward_p_round_trip() {
        let t = uniform_tree::<f64>(3, 2);
        let back = ForwardTree::build(
            &t.children_map(),
            &TreeWeights::ForwardP(t.forward_probabilities().into_iter().collect()),
            Some(2),
        )
        .unwrap();
        for x in 0..t.len() {
            assert!((back.measure(x) - t.measure(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn sections() {
        let t = uniform_tree::<f64>(2, 3);
        let s2 = Section::at_depth(&t, 2).unwrap();
        let chain = restrict_to_section(&t, &s2).unwrap();
        assert_eq!(chain.interior().len(), 3);
        assert_eq!(chain.boundary().len(), 4);
        let s1 = Section::at_depth(&t, 1).unwrap();
        assert_eq!(restrict_to_section(&t, &s1).unwrap().interior().len(), 1);
        let a = t.children(0)[0];
        let aa = t.children(a)[0];
        let bad = Section::new(&t, &[a, aa, t.children(0)[1]]);
        assert!(matches!(bad, Err(Error::NotASection(_))));
        assert!(matches!(Section::new(&t, &[0]), Err(Error::NotASection(_))));
        // Mixed depths are fine.
        let mixed = [vec![a], t.children(t.children(0)[1]).to_vec()].concat();
        let s = Section::new(&t, &mixed).unwrap();
        let ch = restrict_to_section(&t, &s).unwrap();
        assert_eq!(ch.boundary().len(), 3);
        let p = ch.sub_chain().p_interior;
        assert_eq!(p.pow(3).max_abs(), 0.0);
    }

    #[test]
    fn green_closed_form() {
        let t = uniform_tree::<f64>(2, 2);
        let s = Section::at_depth(&t, 2).unwrap();
        let u1 = t.children(0)[0];
        let u2 = t.children(0)[1];
        assert!(near(tree_green(&t, &s, c(1.0), 0, u1).unwrap(), 0.5));
        assert!(near(tree_green(&t, &s, c(1.0), u1, u2).unwrap(), 0.0));
        assert!(near(tree_green(&t, &s, c(2.0), u1, u1).unwrap(), 0.5));
        assert_eq!(tree_green(&t, &s, c(0.0), 0, 0).unwrap_err(), Error::ZeroLambda);

        let chain = restrict_to_section(&t, &s).unwrap();
        let lambda = cplx(0.7, -0.4);
        let gm = green(&chain, lambda).unwrap();
        for (i, &x) in chain.interior().iter().enumerate() {
            for (j, &y) in chain.interior().iter().enumerate() {
                let tx = t.index_of(chain.id(x)).unwrap();
                let ty = t.index_of(chain.id(y)).unwrap();
                let z = tree_green(&t, &s, lambda, tx, ty).unwrap();
                assert!((z - gm.g[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_closed_form() {
        let t = uniform_tree::<f64>(2, 2);
        let s = Section::at_depth(&t, 2).unwrap();
        let leaf = s.members()[0];
        assert!(near(tree_kernel_kr(&t, &s, c(1.0), 2, 0, leaf).unwrap(), 2.0));
        let u1 = t.children(0)[0];
        assert!(near(tree_kernel_kr(&t, &s, c(3.0), 1, u1, leaf).unwrap(), 6.0));
        let off = s.members()[3];
        assert!(near(tree_kernel_kr(&t, &s, c(1.0), 2, u1, off).unwrap(), 0.0));

        let chain = restrict_to_section(&t, &s).unwrap();
        let lambda = cplx(-1.3, 0.6);
        let o = chain.index_of("o").unwrap();
        let mk = martin_kernel(&chain, lambda, o, 4).unwrap();
        for r in 1..=4 {
            for (j, &w) in chain.boundary().iter().enumerate() {
                for x in 0..chain.len() {
                    let tx = t.index_of(chain.id(x)).unwrap();
                    let tw = t.index_of(chain.id(w)).unwrap();
                    let z = tree_kernel_kr(&t, &s, lambda, r, tx, tw).unwrap();
                    assert!((z - mk.higher[r - 1][(x, j)]).norm() < 1e-10, "r={r}");
                }
            }
        }
    }

    #[test]
    fn infinite_kernel_values() {
        let t = uniform_tree::<f64>(2, 3);
        let leaf = t.at_depth(3)[0];
        let x2 = t.parent(leaf).unwrap();
        assert!(near(infinite_kernel_ktr(&t, c(1.0), 3, 0, leaf).unwrap(), 0.0));
        assert!(near(infinite_kernel_ktr(&t, c(1.0), 2, x2, leaf).unwrap(), -8.0));
        assert!(near(infinite_kernel_ktr(&t, c(2.0), 1, x2, leaf).unwrap(), 16.0));
        assert!(infinite_kernel_ktr(&t, c(1.0), 1, leaf, x2).is_err());
        assert!(ktr_recursion_defect(&t, cplx(0.8, 0.3), 5).unwrap() < 1e-10);
    }

    #[test]
    fn polyharmonic_evaluation() {
        let t = uniform_tree::<f64>(2, 3);
        let prob = BoundaryDistribution::from_measure(&t);
        let zero = BoundaryDistribution::zero(&t);
        for x in 0..t.len() {
            assert!(near(eval_polyharmonic(&t, c(1.0), &[prob.clone()], x).unwrap(), 1.0));
            let z = eval_polyharmonic(&t, c(1.5), &[prob.clone()], x).unwrap();
            assert!(near(z, 1.5f64.powi(t.depth(x) as i32)));
            let f2 = eval_polyharmonic(&t, c(1.0), &[zero.clone(), prob.clone()], x).unwrap();
            assert!(near(f2, -(t.depth(x) as f64)));
        }
        assert!(polyharmonic_defect(&t, cplx(0.9, 0.2), &[prob.clone(), prob]).unwrap() < 1e-12);
    }

    #[test]
    fn distribution_additivity() {
        let t = uniform_tree::<f64>(2, 1);
        let ok = BoundaryDistribution::new(&t, vec![c(1.0), c(0.25), c(0.75)]);
        assert!(ok.is_ok());
        let bad = BoundaryDistribution::<f64>::new(&t, vec![c(1.0), c(0.25), c(0.5)]);
        assert!(matches!(bad, Err(Error::AdditivityViolation { .. })));
    }

    #[test]
    fn consistency_on_binary_tree() {
        let t = uniform_tree::<f64>(2, 2);
        let s = Section::at_depth(&t, 2).unwrap();
        for n in 1..=4 {
            for &w in s.members() {
                let rep = kernel_consistency_check(&t, &s, c(1.0), n, w).unwrap();
                assert!(rep.passed(), "n={n}: {} {}", rep.max_deviation, rep.solver_deviation);
            }
        }
        let rep = kernel_consistency_check(&t, &s, cplx(0.4, 1.1), 3, s.members()[2]).unwrap();
        assert!(rep.passed());
    }
}
