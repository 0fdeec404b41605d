//! Finite absorbing Markov chains with an interior/boundary partition.

use std::collections::{HashMap, VecDeque};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Row sums must equal one within this absolute tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Entries below this magnitude are treated as exact zeros.
pub const CLIP_TOL: f64 = 1e-15;

/// A validated chain: every boundary vertex is absorbing, the boundary is
/// reachable from every interior vertex, and every boundary vertex is reachable
/// from the interior.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T> {
    vertices: Vec<String>,
    index: HashMap<String, usize>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// Position of each vertex inside `interior` or `boundary`.
    slot: Vec<usize>,
    is_boundary: Vec<bool>,
    trans: Vec<T>,
    /// Total conductance `m(x)` when the chain came from a network.
    conductance: Option<Vec<T>>,
}

impl<T: Real> Chain<T> {
    /// Validate and build a chain from dense data. `interior` and `boundary`
    /// are index sets into `vertices`; `trans` is the row-major transition
    /// matrix over all vertices.
    pub fn new(
        vertices: Vec<String>,
        interior: &[usize],
        boundary: &[usize],
        mut trans: Vec<T>,
    ) -> Result<Self> {
        let n = vertices.len();
        if trans.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} transition entries for {n} vertices",
                trans.len()
            )));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vertex id {v}")));
            }
        }
        if interior.is_empty() {
            return Err(Error::EmptyPart { part: "interior" });
        }
        if boundary.is_empty() {
            return Err(Error::EmptyPart { part: "boundary" });
        }
        let mut seen = vec![0u8; n];
        let mut slot = vec![0; n];
        let mut is_boundary = vec![false; n];
        for (k, &i) in interior.iter().enumerate() {
            if i >= n {
                return Err(Error::InvalidInput(format!("interior index {i} out of range")));
            }
            seen[i] += 1;
            slot[i] = k;
        }
        for (k, &w) in boundary.iter().enumerate() {
            if w >= n {
                return Err(Error::InvalidInput(format!("boundary index {w} out of range")));
            }
            seen[w] += 1;
            slot[w] = k;
            is_boundary[w] = true;
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(Error::InvalidInput(format!(
                "vertex {} must be in exactly one of interior and boundary",
                vertices[i]
            )));
        }

        let clip = T::lit(CLIP_TOL);
        for i in 0..n {
            let mut sum = T::zero();
            for j in 0..n {
                let e = &mut trans[i * n + j];
                if !e.is_finite() || *e < -clip {
                    return Err(Error::BadEntry {
                        row: vertices[i].clone(),
                        col: vertices[j].clone(),
                    });
                }
                if e.abs() < clip {
                    *e = T::zero();
                }
                sum += *e;
            }
            if (sum - T::one()).abs() > T::tol(ROW_SUM_TOL) {
                return Err(Error::NotStochastic {
                    row: vertices[i].clone(),
                    sum: sum.as_f64(),
                });
            }
        }
        for &w in boundary {
            let row = &mut trans[w * n..(w + 1) * n];
            let ok = row
                .iter()
                .enumerate()
                .all(|(j, &e)| if j == w { (e - T::one()).abs() <= T::tol(ROW_SUM_TOL) } else { e == T::zero() });
            if !ok {
                return Err(Error::NotAbsorbing {
                    vertex: vertices[w].clone(),
                });
            }
            row[w] = T::one();
        }

        let chain = Self {
            vertices,
            index,
            interior: interior.to_vec(),
            boundary: boundary.to_vec(),
            slot,
            is_boundary,
            trans,
            conductance: None,
        };
        chain.check_reachability()?;
        Ok(chain)
    }

    fn check_reachability(&self) -> Result<()> {
        let n = self.len();
        // (i): every interior vertex reaches the boundary. Reverse BFS from the boundary.
        let reach = self.backward_distances(usize::MAX);
        if let Some(&x) = self.interior.iter().find(|&&x| reach[x].is_none()) {
            return Err(Error::DeadInterior {
                vertex: self.vertices[x].clone(),
            });
        }
        // (iii): every boundary vertex is reachable from the interior.
        let mut hit = vec![false; n];
        let mut queue: VecDeque<usize> = self.interior.iter().copied().collect();
        for &x in &self.interior {
            hit[x] = true;
        }
        while let Some(u) = queue.pop_front() {
            if self.is_boundary[u] {
                continue;
            }
            for v in 0..n {
                if !hit[v] && self.p(u, v) > T::zero() {
                    hit[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if let Some(&w) = self.boundary.iter().find(|&&w| !hit[w]) {
            return Err(Error::InactiveBoundary {
                vertex: self.vertices[w].clone(),
            });
        }
        Ok(())
    }

    /// Steps needed to reach the boundary from each vertex, explored up to
    /// `max_depth` steps (boundary vertices are at distance 0).
    fn backward_distances(&self, max_depth: usize) -> Vec<Option<usize>> {
        let n = self.len();
        let mut dist = vec![None; n];
        let mut queue = VecDeque::new();
        for &w in &self.boundary {
            dist[w] = Some(0);
            queue.push_back(w);
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0);
            if d >= max_depth {
                continue;
            }
            for u in 0..n {
                if dist[u].is_none() && self.p(u, v) > T::zero() {
                    dist[u] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Chain of the random walk on a network: `p(x,y) = a(x,y) / m(x)` for
    /// interior `x`, absorbing boundary rows.
    pub fn from_network(net: &Network<T>) -> Result<Self> {
        let mut vertices: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut id = |name: &str, vertices: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                vertices.push(name.to_string());
                vertices.len() - 1
            })
        };
        let mut links = Vec::with_capacity(net.edges.len());
        for e in &net.edges {
            if !(e.conductance > T::zero()) || !e.conductance.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "conductance of edge {}-{} must be positive",
                    e.u, e.v
                )));
            }
            let u = id(&e.u, &mut vertices);
            let v = id(&e.v, &mut vertices);
            links.push((u, v, e.conductance));
        }
        for b in &net.boundary {
            if !vertices.contains(b) {
                return Err(Error::InvalidInput(format!("boundary vertex {b} has no edges")));
            }
        }
        let n = vertices.len();
        let mut a = vec![T::zero(); n * n];
        for &(u, v, c) in &links {
            a[u * n + v] += c;
            if u != v {
                a[v * n + u] += c;
            }
        }
        // Connectivity of the undirected graph.
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        if n > 0 {
            seen[0] = true;
        }
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && a[u * n + v] > T::zero() {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Disconnected);
        }

        let mut is_b = vec![false; n];
        for b in &net.boundary {
            is_b[vertices.iter().position(|v| v == b).unwrap_or(0)] = true;
        }
        let boundary: Vec<usize> = (0..n).filter(|&i| is_b[i]).collect();
        let interior: Vec<usize> = (0..n).filter(|&i| !is_b[i]).collect();
        let mass: Vec<T> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().copied().sum()).collect();
        let mut trans = vec![T::zero(); n * n];
        for i in 0..n {
            if is_b[i] {
                trans[i * n + i] = T::one();
                continue;
            }
            if mass[i] <= T::zero() {
                return Err(Error::ZeroDegree {
                    vertex: vertices[i].clone(),
                });
            }
            for j in 0..n {
                trans[i * n + j] = a[i * n + j] / mass[i];
            }
        }
        let mut chain = Self::new(vertices, &interior, &boundary, trans)?;
        chain.conductance = Some(mass);
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn id(&self, i: usize) -> &str {
        &self.vertices[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    /// Position of vertex `i` within the interior or boundary list.
    pub fn slot(&self, i: usize) -> usize {
        self.slot[i]
    }

    #[inline]
    pub fn p(&self, i: usize, j: usize) -> T {
        self.trans[i * self.len() + j]
    }

    pub fn transitions(&self) -> &[T] {
        &self.trans
    }

    /// The full transition matrix `P` over all vertices.
    pub fn transition_matrix(&self) -> Matrix<T> {
        let n = self.len();
        Matrix::from_fn(n, n, |i, j| Complex::new(self.p(i, j), T::zero()))
    }

    /// Total conductances `m(x)` if the chain was built from a network.
    pub fn conductance(&self) -> Option<&[T]> {
        self.conductance.as_deref()
    }

    /// `∂ⁿX`: vertices from which the boundary can be reached in at most
    /// `n - 1` steps, in vertex order.
    pub fn nth_boundary(&self, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Err(Error::InvalidInput("boundary order n must be at least 1".into()));
        }
        let dist = self.backward_distances(n - 1);
        Ok((0..self.len()).filter(|&i| dist[i].is_some()).collect())
    }

    /// Complement of [`Chain::nth_boundary`].
    pub fn nth_interior(&self, n: usize) -> Result<Vec<usize>> {
        let bd = self.nth_boundary(n)?;
        let mut mark = vec![false; self.len()];
        for i in bd {
            mark[i] = true;
        }
        Ok((0..self.len()).filter(|&i| !mark[i]).collect())
    }

    /// Restrictions `P_X°` and `Q` of the transition matrix.
    pub fn sub_chain(&self) -> SubChainView<T> {
        let full = self.transition_matrix();
        SubChainView {
            p_interior: full.select(&self.interior, &self.interior),
            q: full.select(&self.interior, &self.boundary),
        }
    }

    /// Same chain in another precision.
    pub fn cast<S: Real>(&self) -> Chain<S> {
        Chain {
            vertices: self.vertices.clone(),
            index: self.index.clone(),
            interior: self.interior.clone(),
            boundary: self.boundary.clone(),
            slot: self.slot.clone(),
            is_boundary: self.is_boundary.clone(),
            trans: self.trans.iter().map(|x| S::lit(x.as_f64())).collect(),
            conductance: self
                .conductance
                .as_ref()
                .map(|m| m.iter().map(|x| S::lit(x.as_f64())).collect()),
        }
    }

    /// Split a vector over all vertices into its interior and boundary parts.
    pub fn split<V: Copy>(&self, f: &[V]) -> (Vec<V>, Vec<V>) {
        (
            self.interior.iter().map(|&i| f[i]).collect(),
            self.boundary.iter().map(|&i| f[i]).collect(),
        )
    }

    /// Reassemble a vector over all vertices from interior and boundary parts.
    pub fn join<V: Copy + Default>(&self, interior: &[V], boundary: &[V]) -> Vec<V> {
        let mut out = vec![V::default(); self.len()];
        for (k, &i) in self.interior.iter().enumerate() {
            out[i] = interior[k];
        }
        for (k, &w) in self.boundary.iter().enumerate() {
            out[w] = boundary[k];
        }
        out
    }
}

/// `P_X°` (interior to interior) and `Q` (interior to boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct SubChainView<T> {
    pub p_interior: Matrix<T>,
    pub q: Matrix<T>,
}

impl<T: Real> SubChainView<T> {
    /// `λ·I - P_X°`.
    pub fn shifted(&self, lambda: Complex<T>) -> Matrix<T> {
        &Matrix::scalar(self.p_interior.rows(), lambda) - &self.p_interior
    }
}

/// An undirected edge with conductance `a(u,v) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEdge<T> {
    pub u: String,
    pub v: String,
    pub conductance: T,
}

/// Finite resistive network with a designated boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub edges: Vec<NetworkEdge<T>>,
    pub boundary: Vec<String>,
}

impl<T: Real> Network<T> {
    pub fn new(edges: Vec<(String, String, T)>, boundary: Vec<String>) -> Self {
        Self {
            edges: edges
                .into_iter()
                .map(|(u, v, conductance)| NetworkEdge { u, v, conductance })
                .collect(),
            boundary,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{five_path, forward_path, four_path};

    fn ids(c: &Chain<f64>, set: &[usize]) -> Vec<String> {
        set.iter().map(|&i| c.id(i).to_string()).collect()
    }

    #[test]
    fn four_path_is_valid() {
        let c = four_path::<f64>();
        assert_eq!(c.interior().len(), 2);
        assert_eq!(c.boundary().len(), 2);
        assert_eq!(c.p(c.index_of("a").unwrap(), c.index_of("w1").unwrap()), 0.5);
    }

    #[test]
    fn row_sum_violation() {
        let v: Vec<String> = ["w1", "a", "b", "w2"].iter().map(|s| s.to_string()).collect();
        #[rustfmt::skip]
        let p = vec![
            1.0, 0.0, 0.0, 0.0,
            0.4, 0.0, 0.5, 0.0,
            0.0, 0.5, 0.0, 0.5,
            0.0, 0.0, 0.0, 1.0,
        ];
        let err = Chain::new(v, &[1, 2], &[0, 3], p).unwrap_err();
        assert!(matches!(err, Error::NotStochastic { ref row, .. } if row == "a"), "{err:?}");
    }

    #[test]
    fn self_loop_interior_is_dead() {
        let v: Vec<String> = ["w", "a", "x"].iter().map(|s| s.to_string()).collect();
        #[rustfmt::skip]
        let p = vec![
            1.0, 0.0, 0.0,
            0.5, 0.5, 0.0,
            0.0, 0.0, 1.0,
        ];
        let err = Chain::new(v, &[1, 2], &[0], p).unwrap_err();
        assert_eq!(err, Error::DeadInterior { vertex: "x".into() });
    }

    #[test]
    fn unreachable_boundary_is_inactive() {
        let v: Vec<String> = ["w", "a", "z"].iter().map(|s| s.to_string()).collect();
        #[rustfmt::skip]
        let p = vec![
            1.0, 0.0, 0.0,
            1.0, 0.0, 0.0,
            0.0, 0.0, 1.0,
        ];
        let err = Chain::new(v, &[1], &[0, 2], p).unwrap_err();
        assert_eq!(err, Error::InactiveBoundary { vertex: "z".into() });
    }

    #[test]
    fn boundary_must_absorb() {
        let v: Vec<String> = ["w", "a"].iter().map(|s| s.to_string()).collect();
        let p = vec![0.5, 0.5, 1.0, 0.0];
        let err = Chain::new(v, &[1], &[0], p).unwrap_err();
        assert_eq!(err, Error::NotAbsorbing { vertex: "w".into() });
    }

    #[test]
    fn empty_parts() {
        let v: Vec<String> = vec!["w".into()];
        assert_eq!(
            Chain::new(v, &[], &[0], vec![1.0]).unwrap_err(),
            Error::EmptyPart { part: "interior" }
        );
    }

    #[test]
    fn network_of_unit_path_is_four_path() {
        let net = Network::new(
            vec![
                ("w1".into(), "a".into(), 1.0),
                ("a".into(), "b".into(), 1.0),
                ("b".into(), "w2".into(), 1.0),
            ],
            vec!["w1".into(), "w2".into()],
        );
        let c = Chain::from_network(&net).unwrap();
        let p4 = four_path::<f64>();
        for x in p4.vertices() {
            for y in p4.vertices() {
                let (i, j) = (c.index_of(x).unwrap(), c.index_of(y).unwrap());
                let (k, l) = (p4.index_of(x).unwrap(), p4.index_of(y).unwrap());
                assert_eq!(c.p(i, j), p4.p(k, l), "{x}->{y}");
            }
        }
    }

    #[test]
    fn weighted_triangle() {
        let net = Network::new(
            vec![
                ("x".into(), "y".into(), 2.0),
                ("x".into(), "w".into(), 1.0),
                ("y".into(), "w".into(), 1.0),
            ],
            vec!["w".into()],
        );
        let c: Chain<f64> = Chain::from_network(&net).unwrap();
        let i = |s: &str| c.index_of(s).unwrap();
        assert!((c.p(i("x"), i("y")) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.p(i("x"), i("w")) - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.p(i("y"), i("x")) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.p(i("y"), i("w")) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.conductance().unwrap()[i("x")], 3.0);
    }

    #[test]
    fn disconnected_network_rejected() {
        let net = Network::new(
            vec![("a".into(), "w".into(), 1.0), ("b".into(), "v".into(), 1.0)],
            vec!["w".into(), "v".into()],
        );
        assert_eq!(Chain::from_network(&net).unwrap_err(), Error::Disconnected);
    }

    #[test]
    fn nth_boundaries() {
        let p4 = four_path::<f64>();
        assert_eq!(ids(&p4, &p4.nth_boundary(1).unwrap()), ["w1", "w2"]);
        assert_eq!(p4.nth_boundary(2).unwrap().len(), 4);
        assert!(p4.nth_interior(2).unwrap().is_empty());

        let p5 = five_path::<f64>();
        assert_eq!(ids(&p5, &p5.nth_boundary(2).unwrap()), ["w1", "a", "c", "w2"]);
        assert_eq!(ids(&p5, &p5.nth_interior(2).unwrap()), ["b"]);
        assert!(p5.nth_boundary(0).is_err());
    }

    #[test]
    fn sub_chain_blocks() {
        let v = four_path::<f64>().sub_chain();
        assert_eq!(v.p_interior, Matrix::from_real(2, 2, &[0.0, 0.5, 0.5, 0.0]).unwrap());
        assert_eq!(v.q, Matrix::from_real(2, 2, &[0.5, 0.0, 0.0, 0.5]).unwrap());

        let f = forward_path::<f64>().sub_chain();
        assert_eq!(f.p_interior, Matrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap());
        assert_eq!(f.q, Matrix::from_real(2, 1, &[0.0, 1.0]).unwrap());

        let v: Vec<String> = vec!["x".into(), "w".into()];
        let single = Chain::new(v, &[0], &[1], vec![0.0, 1.0, 0.0, 1.0]).unwrap().sub_chain();
        assert_eq!(single.p_interior, Matrix::from_real(1, 1, &[0.0]).unwrap());
        assert_eq!(single.q, Matrix::from_real(1, 1, &[1.0]).unwrap());
    }

    #[test]
    fn clipping_removes_noise() {
        let v: Vec<String> = vec!["x".into(), "w".into()];
        let c = Chain::new(v, &[0], &[1], vec![1e-16, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(c.p(0, 0), 0.0);
    }
}
