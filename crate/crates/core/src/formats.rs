//! JSON wire formats for chains, networks, trees and vertex functions.
//!
//! Complex numbers are written as `[re, im]`; a bare number is accepted on
//! input as a real value. Vertex functions are `{id: value}` maps.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, Network};
use crate::error::{Error, Result};
use crate::scalar::{cplx, Real};
use crate::tree::{ForwardTree, Section, TreeWeights};

fn parse<'a, D: Deserialize<'a>>(text: &'a str, what: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed {what}: {e}")))
}

fn render<S: Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub p: f64,
}

/// `{"vertices": [...], "boundary": [...], "edges": [{"from", "to", "p"}]}`.
/// Rows of boundary vertices may be omitted and are then absorbing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub vertices: Vec<String>,
    pub boundary: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

impl ChainFile {
    pub fn from_json(text: &str) -> Result<Self> {
        parse(text, "chain file")
    }

    pub fn to_json(&self) -> String {
        render(self)
    }

    pub fn to_chain<T: Real>(&self) -> Result<Chain<T>> {
        let n = self.vertices.len();
        let index: HashMap<&str, usize> = self.vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("unknown vertex {id}")))
        };
        let boundary: Vec<usize> = self.boundary.iter().map(|b| lookup(b)).collect::<Result<_>>()?;
        let mut is_boundary = vec![false; n];
        for &b in &boundary {
            is_boundary[b] = true;
        }
        let interior: Vec<usize> = (0..n).filter(|&i| !is_boundary[i]).collect();
        let mut trans = vec![T::zero(); n * n];
        let mut seen = vec![false; n * n];
        let mut has_row = vec![false; n];
        for e in &self.edges {
            let (i, j) = (lookup(&e.from)?, lookup(&e.to)?);
            if seen[i * n + j] {
                return Err(Error::InvalidInput(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
            seen[i * n + j] = true;
            has_row[i] = true;
            trans[i * n + j] = T::from_f64(e.p).ok_or_else(|| Error::BadEntry { row: e.from.clone(), col: e.to.clone() })?;
        }
        for &b in &boundary {
            if !has_row[b] {
                trans[b * n + b] = T::one();
            }
        }
        Chain::new(self.vertices.clone(), &interior, &boundary, trans)
    }

    pub fn from_chain<T: Real>(chain: &Chain<T>) -> Self {
        let mut edges = Vec::new();
        for &x in chain.interior() {
            for y in 0..chain.len() {
                let p = chain.p(x, y);
                if p != T::zero() {
                    edges.push(EdgeRecord {
                        from: chain.id(x).to_string(),
                        to: chain.id(y).to_string(),
                        p: p.as_f64(),
                    });
                }
            }
        }
        Self {
            vertices: chain.vertices().to_vec(),
            boundary: chain.boundary().iter().map(|&w| chain.id(w).to_string()).collect(),
            edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductanceRecord {
    pub u: String,
    pub v: String,
    pub a: f64,
}

/// `{"boundary": [...], "edges": [{"u", "v", "a"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub boundary: Vec<String>,
    pub edges: Vec<ConductanceRecord>,
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self> {
        parse(text, "network file")
    }

    pub fn to_json(&self) -> String {
        render(self)
    }

    pub fn to_network<T: Real>(&self) -> Network<T> {
        Network::new(
            self.edges
                .iter()
                .map(|e| (e.u.clone(), e.v.clone(), T::lit(e.a)))
                .collect(),
            self.boundary.clone(),
        )
    }

    pub fn to_chain<T: Real>(&self) -> Result<Chain<T>> {
        Chain::from_network(&self.to_network())
    }
}

/// `{"children": {id: [ids]}, "measure" | "forward_p": {id: x}, "section": [ids], "depth": D}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub children: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_p: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

fn lift<T: Real>(m: &BTreeMap<String, f64>) -> HashMap<String, T> {
    m.iter().map(|(k, &v)| (k.clone(), T::lit(v))).collect()
}

impl TreeFile {
    pub fn from_json(text: &str) -> Result<Self> {
        parse(text, "tree file")
    }

    pub fn to_json(&self) -> String {
        render(self)
    }

    pub fn to_tree<T: Real>(&self) -> Result<ForwardTree<T>> {
        let weights = match (&self.measure, &self.forward_p) {
            (Some(m), None) => TreeWeights::Measure(lift(m)),
            (None, Some(p)) => TreeWeights::ForwardP(lift(p)),
            _ => {
                return Err(Error::InvalidInput(
                    "tree file needs exactly one of \"measure\" and \"forward_p\"".into(),
                ))
            }
        };
        ForwardTree::build(&self.children, &weights, self.depth)
    }

    /// The listed section, or all vertices at the deepest level.
    pub fn section<T: Real>(&self, tree: &ForwardTree<T>) -> Result<Section> {
        match &self.section {
            Some(ids) => Section::from_ids(tree, ids),
            None => Section::at_depth(tree, tree.max_depth()),
        }
    }

    pub fn from_tree<T: Real>(tree: &ForwardTree<T>, section: Option<&Section>) -> Self {
        Self {
            children: tree.children_map(),
            measure: Some(
                (0..tree.len())
                    .map(|x| (tree.id(x).to_string(), tree.measure(x).as_f64()))
                    .collect(),
            ),
            forward_p: None,
            section: section.map(|s| s.members().iter().map(|&x| tree.id(x).to_string()).collect()),
            depth: Some(tree.max_depth()),
        }
    }
}

/// A complex value on the wire: `x` or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireComplex {
    Real(f64),
    Pair([f64; 2]),
}

impl WireComplex {
    pub fn value<T: Real>(self) -> Complex<T> {
        match self {
            WireComplex::Real(x) => cplx(x, 0.0),
            WireComplex::Pair([a, b]) => cplx(a, b),
        }
    }

    pub fn from_complex<T: Real>(z: Complex<T>) -> Self {
        WireComplex::Pair([z.re.as_f64(), z.im.as_f64()])
    }
}

pub type VertexMap = BTreeMap<String, WireComplex>;

pub fn parse_vertex_map(text: &str) -> Result<VertexMap> {
    parse(text, "vertex function")
}

/// Values of `map` on the given vertices, in order. Every vertex must be
/// present and no other ids may appear.
pub fn vector_on<T: Real>(chain: &Chain<T>, vertices: &[usize], map: &VertexMap) -> Result<Vec<Complex<T>>> {
    for id in map.keys() {
        match chain.index_of(id) {
            Some(i) if vertices.contains(&i) => {}
            Some(_) => return Err(Error::InvalidInput(format!("vertex {id} is outside the expected set"))),
            None => return Err(Error::InvalidInput(format!("unknown vertex {id}"))),
        }
    }
    vertices
        .iter()
        .map(|&v| {
            map.get(chain.id(v))
                .map(|z| z.value())
                .ok_or_else(|| Error::InvalidInput(format!("no value for vertex {}", chain.id(v))))
        })
        .collect()
}

/// Boundary function in the chain's boundary order.
pub fn boundary_function<T: Real>(chain: &Chain<T>, map: &VertexMap) -> Result<Vec<Complex<T>>> {
    vector_on(chain, chain.boundary(), map)
}

/// A function over all vertices as an `{id: [re, im]}` map.
pub fn vertex_map<T: Real>(chain: &Chain<T>, values: &[Complex<T>]) -> VertexMap {
    values
        .iter()
        .enumerate()
        .map(|(i, &z)| (chain.id(i).to_string(), WireComplex::from_complex(z)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{four_path, uniform_tree};

    #[test]
    fn chain_round_trip() {
        let p4 = four_path::<f64>();
        let file = ChainFile::from_chain(&p4);
        let back: Chain<f64> = ChainFile::from_json(&file.to_json()).unwrap().to_chain().unwrap();
        assert_eq!(back.transitions(), p4.transitions());
        assert_eq!(back.boundary(), p4.boundary());
    }

    #[test]
    fn random_chains_round_trip_bit_for_bit() {
        use crate::samples::{random_chain, RandomChainSpec};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let ch = random_chain::<f64, _>(&mut rng, RandomChainSpec::new(6, 3));
            let text = ChainFile::from_chain(&ch).to_json();
            let back: Chain<f64> = ChainFile::from_json(&text).unwrap().to_chain().unwrap();
            assert_eq!(back.transitions(), ch.transitions());
        }
    }

    #[test]
    fn chain_errors() {
        let text = r#"{"vertices":["w1","a","w2"],"boundary":["w1","w2"],
            "edges":[{"from":"a","to":"w1","p":0.5},{"from":"a","to":"w2","p":0.4}]}"#;
        let err = ChainFile::from_json(text).unwrap().to_chain::<f64>().unwrap_err();
        assert!(matches!(err, Error::NotStochastic { ref row, .. } if row == "a"));
        assert!(matches!(ChainFile::from_json("{\"vertices\":"), Err(Error::InvalidInput(_))));
        let text = r#"{"vertices":["w1","a"],"boundary":["w1"],"edges":[{"from":"a","to":"zz","p":1}]}"#;
        assert!(ChainFile::from_json(text).unwrap().to_chain::<f64>().is_err());
    }

    #[test]
    fn network_triangle() {
        let text = r#"{"boundary":["w"],"edges":[{"u":"x","v":"y","a":2},{"u":"x","v":"w","a":1},{"u":"y","v":"w","a":1}]}"#;
        let chain: Chain<f64> = NetworkFile::from_json(text).unwrap().to_chain().unwrap();
        let x = chain.index_of("x").unwrap();
        let y = chain.index_of("y").unwrap();
        assert!((chain.p(x, y) - 2.0 / 3.0).abs() < 1e-15);
        assert!(chain.conductance().is_some());
    }

    #[test]
    fn tree_round_trip() {
        let t = uniform_tree::<f64>(2, 2);
        let s = Section::at_depth(&t, 2).unwrap();
        let file = TreeFile::from_tree(&t, Some(&s));
        let parsed = TreeFile::from_json(&file.to_json()).unwrap();
        let back: ForwardTree<f64> = parsed.to_tree().unwrap();
        assert_eq!(parsed.section(&back).unwrap(), s);
        assert_eq!(back.len(), t.len());
        let both = TreeFile {
            forward_p: Some(BTreeMap::new()),
            ..file
        };
        assert!(both.to_tree::<f64>().is_err());
    }

    #[test]
    fn vertex_maps() {
        let p4 = four_path::<f64>();
        let map = parse_vertex_map(r#"{"w1": 1, "w2": [0.5, -1]}"#).unwrap();
        let g = boundary_function(&p4, &map).unwrap();
        assert_eq!(g, vec![cplx(1.0, 0.0), cplx(0.5, -1.0)]);
        let extra = parse_vertex_map(r#"{"w1": 1, "w2": 0, "a": 3}"#).unwrap();
        assert!(boundary_function(&p4, &extra).is_err());
        let missing = parse_vertex_map(r#"{"w1": 1}"#).unwrap();
        assert!(boundary_function(&p4, &missing).is_err());
    }
}
