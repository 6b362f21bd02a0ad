//! Hypergraph topology of a sensor network, the signal layout of an
//! estimation task, and the combinatorial quantities derived from them.

use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::qcore::QubitLabel;

/// Sensor network: vertices `0..K` and entanglement sources (hyperedges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    num_vertices: usize,
    edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Build a hypergraph on vertices `0..num_vertices`. Each edge is sorted;
    /// edges keep the given order (it is the edge index used in labels).
    pub fn new(num_vertices: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (i, e) in edges.into_iter().enumerate() {
            let set: BTreeSet<usize> = e.iter().copied().collect();
            if set.len() != e.len() {
                return Err(Error::InvalidGraph(format!("edge {i} repeats a vertex")));
            }
            if set.len() < 2 {
                return Err(Error::InvalidGraph(format!("edge {i} has fewer than two vertices")));
            }
            if let Some(&v) = set.iter().find(|&&v| v >= num_vertices) {
                return Err(Error::InvalidGraph(format!("edge {i} uses unknown vertex {v}")));
            }
            let sorted: Vec<usize> = set.into_iter().collect();
            if !seen.insert(sorted.clone()) {
                return Err(Error::InvalidGraph(format!("edge {i} duplicates an earlier edge")));
            }
            normalized.push(sorted);
        }
        Ok(Hypergraph { num_vertices, edges: normalized })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> {
        0..self.num_vertices
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &[usize] {
        &self.edges[e]
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        v < self.num_vertices
    }

    /// Indices of the edges containing `v`.
    pub fn incident_edges(&self, v: usize) -> Vec<usize> {
        self.edges.iter().enumerate().filter(|(_, e)| e.contains(&v)).map(|(i, _)| i).collect()
    }

    /// Number of hyperedges containing `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.contains(&v)).count()
    }

    /// Vertices sharing at least one hyperedge with `v` (excluding `v`).
    pub fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.edges.iter().filter(|e| e.contains(&v)).flat_map(|e| e.iter().copied()).filter(|&u| u != v).collect()
    }

    pub fn max_edge_size(&self) -> usize {
        self.edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Whether the incidence structure connects all vertices.
    pub fn is_connected(&self) -> bool {
        let all: Vec<usize> = self.vertices().collect();
        connected_over(&all, &self.edges)
    }

    /// Whether removing `v` disconnects the remaining vertices. Each incident
    /// hyperedge shrinks to its other members and is dropped once fewer than
    /// two remain.
    pub fn is_cut_vertex(&self, v: usize) -> Result<bool> {
        if !self.contains_vertex(v) {
            return Err(Error::UnknownVertex(v));
        }
        let rest: Vec<usize> = self.vertices().filter(|&u| u != v).collect();
        let residual: Vec<Vec<usize>> = self
            .edges
            .iter()
            .map(|e| e.iter().copied().filter(|&u| u != v).collect::<Vec<_>>())
            .filter(|e| e.len() >= 2)
            .collect();
        Ok(!connected_over(&rest, &residual))
    }
}

fn connected_over(vertices: &[usize], edges: &[Vec<usize>]) -> bool {
    if vertices.len() <= 1 {
        return true;
    }
    let max = vertices.iter().copied().max().unwrap_or(0) + 1;
    let mut parent: Vec<usize> = (0..max).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for e in edges {
        for w in e.windows(2) {
            let a = find(&mut parent, w[0]);
            let b = find(&mut parent, w[1]);
            parent[a] = b;
        }
    }
    let root = find(&mut parent, vertices[0]);
    vertices.iter().all(|&v| find(&mut parent, v) == root)
}

/// How the generator of a signal is realized on the labeled qubits.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// `Σ Z/2` over every qubit held by the vertices of the signal.
    CollectiveZHalf,
    /// An explicit Hermitian matrix on the listed qubits.
    Explicit { qubits: Vec<QubitLabel>, matrix: CMatrix },
}

/// The signals of an estimation task, their generators and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalLayout {
    signals: Vec<Vec<usize>>,
    generators: Vec<GeneratorSpec>,
    weights: Vec<f64>,
}

impl SignalLayout {
    pub fn new(
        g: &Hypergraph,
        signals: Vec<Vec<usize>>,
        generators: Vec<GeneratorSpec>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::InvalidLayout("at least one signal is required".into()));
        }
        if weights.len() != signals.len() || generators.len() != signals.len() {
            return Err(Error::InvalidLayout(format!(
                "{} signals but {} weights and {} generators",
                signals.len(),
                weights.len(),
                generators.len()
            )));
        }
        let mut normalized = Vec::with_capacity(signals.len());
        for (i, s) in signals.into_iter().enumerate() {
            let set: BTreeSet<usize> = s.into_iter().collect();
            if set.is_empty() {
                return Err(Error::InvalidLayout(format!("signal {i} is empty")));
            }
            if let Some(&v) = set.iter().find(|&&v| !g.contains_vertex(v)) {
                return Err(Error::InvalidLayout(format!("signal {i} uses unknown vertex {v}")));
            }
            normalized.push(set.into_iter().collect());
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidLayout(format!("non-finite weight {w}")));
        }
        Ok(SignalLayout { signals: normalized, generators, weights })
    }

    /// One singleton signal per vertex, collective `Z/2` generators.
    pub fn singletons(g: &Hypergraph, weights: Vec<f64>) -> Result<Self> {
        let k = g.num_vertices();
        SignalLayout::new(g, (0..k).map(|v| vec![v]).collect(), vec![GeneratorSpec::CollectiveZHalf; k], weights)
    }

    /// Singleton signals with uniform weights `1/K` (estimating the average).
    pub fn singletons_average(g: &Hypergraph) -> Result<Self> {
        let k = g.num_vertices();
        SignalLayout::singletons(g, vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn signals(&self) -> &[Vec<usize>] {
        &self.signals
    }

    pub fn signal(&self, s: usize) -> &[usize] {
        &self.signals[s]
    }

    pub fn generators(&self) -> &[GeneratorSpec] {
        &self.generators
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::InvalidLayout("weight vector has wrong length".into()));
        }
        Ok(SignalLayout { weights, ..self.clone() })
    }
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|x| b.contains(x))
}

/// Influence `k_s`: over hyperedges touching signal `s`, the largest number of
/// signals that hyperedge touches.
pub fn influence(g: &Hypergraph, layout: &SignalLayout, s: usize) -> Result<usize> {
    if s >= layout.len() {
        return Err(Error::InvalidLayout(format!("signal index {s} out of range")));
    }
    let sig = layout.signal(s);
    g.edges()
        .iter()
        .filter(|e| intersects(e, sig))
        .map(|e| layout.signals().iter().filter(|t| intersects(t, e)).count())
        .max()
        .ok_or(Error::NoIncidentEdge(s))
}

/// Influence with the isolated-signal convention: a signal touching no
/// hyperedge influences only itself, `k_s = 1`.
pub fn influence_or_isolated(g: &Hypergraph, layout: &SignalLayout, s: usize) -> Result<usize> {
    match influence(g, layout, s) {
        Err(Error::NoIncidentEdge(_)) => {
            warn!("signal {s} touches no hyperedge; using k_s = 1");
            Ok(1)
        }
        other => other,
    }
}

/// All influences, with the isolated-signal convention applied.
pub fn influences(g: &Hypergraph, layout: &SignalLayout) -> Result<Vec<usize>> {
    (0..layout.len()).map(|s| influence_or_isolated(g, layout, s)).collect()
}

/// `k_max`, the largest influence. Propagates `NoIncidentEdge`.
pub fn max_influence(g: &Hypergraph, layout: &SignalLayout) -> Result<usize> {
    let mut best = 0;
    for s in 0..layout.len() {
        best = best.max(influence(g, layout, s)?);
    }
    Ok(best)
}

/// JSON form shared by every scenario that carries a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub vertices: Vec<usize>,
    pub edges: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl GraphDocument {
    pub fn from_graph(g: &Hypergraph, layout: Option<&SignalLayout>) -> Self {
        GraphDocument {
            vertices: g.vertices().collect(),
            edges: g.edges().to_vec(),
            signals: layout.map(|l| l.signals().to_vec()),
            weights: layout.map(|l| l.weights().to_vec()),
        }
    }

    pub fn graph(&self) -> Result<Hypergraph> {
        let k = self.vertices.len();
        if self.vertices.iter().copied().ne(0..k) {
            return Err(Error::InvalidGraph("vertices must be listed as 0..K-1".into()));
        }
        Hypergraph::new(k, self.edges.clone())
    }

    /// Signal layout with collective `Z/2` generators. Missing signals default
    /// to singletons and missing weights to the uniform average.
    pub fn layout(&self, g: &Hypergraph) -> Result<SignalLayout> {
        let signals = self.signals.clone().unwrap_or_else(|| g.vertices().map(|v| vec![v]).collect());
        let m = signals.len();
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0 / m as f64; m]);
        SignalLayout::new(g, signals, vec![GeneratorSpec::CollectiveZHalf; m], weights)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidGraph(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph document serializes")
    }
}

/// Small named networks used by tests, benches and the CLI.
pub mod fixtures {
    use super::Hypergraph;

    /// Three vertices, one bipartite source per pair.
    pub fn triangle() -> Hypergraph {
        cycle(3)
    }

    /// Cycle of `m` vertices with bipartite sources on consecutive pairs.
    /// `m = 2` degenerates to a single edge, since parallel edges are not
    /// allowed.
    pub fn cycle(m: usize) -> Hypergraph {
        assert!(m >= 2);
        if m == 2 {
            return Hypergraph::new(2, vec![vec![0, 1]]).unwrap();
        }
        let edges = (0..m).map(|i| vec![i, (i + 1) % m]).collect();
        Hypergraph::new(m, edges).unwrap()
    }

    /// Path `0 - 1 - … - (m-1)`.
    pub fn path(m: usize) -> Hypergraph {
        assert!(m >= 2);
        Hypergraph::new(m, (0..m - 1).map(|i| vec![i, i + 1]).collect()).unwrap()
    }

    /// Hub hyperedge on vertices `0..m` plus a pendant edge `{i, m+i}` for
    /// each hub vertex.
    pub fn sun(m: usize) -> Hypergraph {
        assert!(m >= 2);
        let mut edges = vec![(0..m).collect::<Vec<_>>()];
        edges.extend((0..m).map(|i| vec![i, m + i]));
        Hypergraph::new(2 * m, edges).unwrap()
    }

    /// A single source shared by all `m` vertices.
    pub fn single_source(m: usize) -> Hypergraph {
        Hypergraph::new(m, vec![(0..m).collect()]).unwrap()
    }
}
