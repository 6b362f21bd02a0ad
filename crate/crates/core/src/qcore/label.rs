use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of a qubit in a register.
///
/// Source qubits are written `[e,v]`: the share of source (hyperedge) `e`
/// held by vertex `v`. Ancillas are locally prepared qubits of vertex `v`.
/// The derived ordering is the canonical register order: sources by edge
/// index then vertex id, ancillas last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitLabel {
    Source { edge: usize, vertex: usize },
    Ancilla { vertex: usize, slot: usize },
}

impl QubitLabel {
    pub fn source(edge: usize, vertex: usize) -> Self {
        QubitLabel::Source { edge, vertex }
    }

    pub fn ancilla(vertex: usize, slot: usize) -> Self {
        QubitLabel::Ancilla { vertex, slot }
    }

    /// Plain site qubit `i`, used for chains and circuits.
    pub fn site(i: usize) -> Self {
        QubitLabel::Ancilla { vertex: i, slot: 0 }
    }

    /// The vertex holding this qubit.
    pub fn vertex(&self) -> usize {
        match *self {
            QubitLabel::Source { vertex, .. } | QubitLabel::Ancilla { vertex, .. } => vertex,
        }
    }

    pub fn edge(&self) -> Option<usize> {
        match *self {
            QubitLabel::Source { edge, .. } => Some(edge),
            QubitLabel::Ancilla { .. } => None,
        }
    }
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitLabel::Source { edge, vertex } => write!(f, "[{edge},{vertex}]"),
            QubitLabel::Ancilla { vertex, slot } => write!(f, "a({vertex},{slot})"),
        }
    }
}

/// Site labels `0..n`.
pub fn sites(n: usize) -> Vec<QubitLabel> {
    (0..n).map(QubitLabel::site).collect()
}
