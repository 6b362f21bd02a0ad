use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{GraphDocument, Hypergraph};
use crate::qcore::MAX_PURE_QUBITS;

/// How a protocol run is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    /// Monte-Carlo sampling of the measurement outcomes. A seed is mandatory
    /// before the run; it may be supplied late (e.g. from the command line).
    Sampled {
        #[serde(default)]
        seed: Option<u64>,
        shots: u64,
    },
}

/// Integer weights obtained from rational ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedWeights {
    pub weights: BTreeMap<usize, i64>,
    /// Smallest positive integer turning every raw weight into an integer.
    pub scale: i64,
    /// Signal queries per run, `M · max_v |α̃_v|`.
    pub queries_per_run: u64,
}

/// Multiply rational weights by the lcm of their denominators.
pub fn normalize_weights(raw: &BTreeMap<usize, Ratio<i64>>) -> Result<NormalizedWeights> {
    if let Some((&v, _)) = raw.iter().find(|(_, w)| *w.numer() == 0) {
        return Err(Error::ZeroWeight(v));
    }
    let scale = raw.values().fold(1i64, |acc, w| acc.lcm(w.denom()));
    let weights: BTreeMap<usize, i64> =
        raw.iter().map(|(&v, w)| (v, (w * Ratio::from_integer(scale)).to_integer())).collect();
    let max = weights.values().map(|w| w.unsigned_abs()).max().unwrap_or(0);
    Ok(NormalizedWeights { weights, scale, queries_per_run: raw.len() as u64 * max })
}

/// Parse `"3"`, `"-1/2"` or an integer JSON number into a rational.
fn parse_ratio(v: usize, value: &WeightValue) -> Result<Ratio<i64>> {
    match value {
        WeightValue::Integer(i) => Ok(Ratio::from_integer(*i)),
        WeightValue::Text(s) => {
            let bad = || Error::InvalidConfig(format!("weight of vertex {v}: cannot parse `{s}` as a rational"));
            let (n, d) = match s.split_once('/') {
                Some((n, d)) => {
                    (n.trim().parse::<i64>().map_err(|_| bad())?, d.trim().parse::<i64>().map_err(|_| bad())?)
                }
                None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
            };
            if d == 0 {
                return Err(bad());
            }
            Ok(Ratio::new(n, d))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum WeightValue {
    Integer(i64),
    Text(String),
}

/// A run of the weighted-sum estimation protocol: GHZ sources on every
/// hyperedge, one phase signal per vertex, and a center that collects
/// `Σ_v α̃_v θ_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub graph: Hypergraph,
    pub center: usize,
    /// Non-zero integer weight per vertex (the center included).
    pub alpha: BTreeMap<usize, i64>,
    /// Bound on `|α̃_v|`: every non-center sensor prepares this many probes.
    pub l: u64,
    pub theta: BTreeMap<usize, f64>,
    pub mode: Mode,
}

/// JSON form: the network document plus protocol fields. Weights may be
/// integers or rational strings such as `"1/2"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDocument {
    pub vertices: Vec<usize>,
    pub edges: Vec<Vec<usize>>,
    pub center: usize,
    alpha: BTreeMap<usize, WeightValue>,
    pub theta: BTreeMap<usize, f64>,
    #[serde(rename = "L", default)]
    pub l: Option<u64>,
    #[serde(default)]
    pub mode: Mode,
}

impl ProtocolDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Build and validate the config. Rational weights are scaled to
    /// integers; `L` defaults to the largest resulting `|α̃_v|`.
    pub fn config(&self) -> Result<ProtocolConfig> {
        let graph =
            GraphDocument { vertices: self.vertices.clone(), edges: self.edges.clone(), signals: None, weights: None }
                .graph()?;
        let raw = self.alpha.iter().map(|(&v, w)| Ok((v, parse_ratio(v, w)?))).collect::<Result<BTreeMap<_, _>>>()?;
        let norm = normalize_weights(&raw)?;
        if norm.scale > 1 {
            log::info!("rational weights scaled by {} to integers", norm.scale);
        }
        let max = norm.weights.values().map(|w| w.unsigned_abs()).max().unwrap_or(1);
        let cfg = ProtocolConfig {
            graph,
            center: self.center,
            alpha: norm.weights,
            l: self.l.unwrap_or(max),
            theta: self.theta.clone(),
            mode: self.mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &ProtocolConfig) -> Self {
        ProtocolDocument {
            vertices: cfg.graph.vertices().collect(),
            edges: cfg.graph.edges().to_vec(),
            center: cfg.center,
            alpha: cfg.alpha.iter().map(|(&v, &w)| (v, WeightValue::Integer(w))).collect(),
            theta: cfg.theta.clone(),
            l: Some(cfg.l),
            mode: cfg.mode,
        }
    }
}

impl ProtocolConfig {
    /// Unit weights, `L = 1`, exact mode.
    pub fn unit_weights(graph: Hypergraph, center: usize, theta: &[f64]) -> Result<Self> {
        let alpha = graph.vertices().map(|v| (v, 1)).collect();
        let theta = theta.iter().copied().enumerate().collect();
        let cfg = ProtocolConfig { graph, center, alpha, l: 1, theta, mode: Mode::Exact };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_theta(&self, theta: &[f64]) -> Self {
        ProtocolConfig { theta: theta.iter().copied().enumerate().collect(), ..self.clone() }
    }

    pub fn num_sensors(&self) -> usize {
        self.graph.num_vertices()
    }

    /// Non-center vertices in ascending order.
    pub fn sensors(&self) -> Vec<usize> {
        self.graph.vertices().filter(|&v| v != self.center).collect()
    }

    pub fn weight(&self, v: usize) -> i64 {
        self.alpha[&v]
    }

    pub fn angle(&self, v: usize) -> f64 {
        self.theta[&v]
    }

    /// `Σ_v α̃_v θ_v`, the phase the center ends up measuring.
    pub fn total_phase(&self) -> f64 {
        self.graph.vertices().map(|v| self.weight(v) as f64 * self.angle(v)).sum()
    }

    /// The estimated quantity `θ(α) = (1/M) Σ_v α̃_v θ_v`.
    pub fn target(&self) -> f64 {
        self.total_phase() / self.num_sensors() as f64
    }

    /// Qubits in the simulation: all source shares plus `|α̃_v|` probes per
    /// non-center sensor.
    pub fn qubit_count(&self) -> usize {
        let shares: usize = self.graph.edges().iter().map(Vec::len).sum();
        shares + self.sensors().iter().map(|&v| self.weight(v).unsigned_abs() as usize).sum::<usize>()
    }

    pub fn queries_per_run(&self) -> u64 {
        self.num_sensors() as u64 * self.l
    }

    /// Everything except the topological requirements on the center.
    pub(crate) fn validate_structure(&self) -> Result<()> {
        let g = &self.graph;
        if g.edges().is_empty() {
            return Err(Error::InvalidConfig("the network has no sources".into()));
        }
        if !g.contains_vertex(self.center) {
            return Err(Error::UnknownVertex(self.center));
        }
        if self.l < 1 {
            return Err(Error::InvalidConfig("L must be at least 1".into()));
        }
        for v in g.vertices() {
            let w = *self.alpha.get(&v).ok_or_else(|| Error::InvalidConfig(format!("no weight for vertex {v}")))?;
            if w == 0 {
                return Err(Error::ZeroWeight(v));
            }
            if w.unsigned_abs() > self.l {
                return Err(Error::InvalidConfig(format!("|weight| of vertex {v} is {} > L = {}", w.abs(), self.l)));
            }
            let t = self.theta.get(&v).ok_or_else(|| Error::InvalidConfig(format!("no angle for vertex {v}")))?;
            if !t.is_finite() {
                return Err(Error::InvalidConfig(format!("angle of vertex {v} is not finite")));
            }
        }
        if let Some(&v) = self.alpha.keys().chain(self.theta.keys()).find(|&&v| !g.contains_vertex(v)) {
            return Err(Error::UnknownVertex(v));
        }
        if let Mode::Sampled { seed, shots } = self.mode {
            if seed.is_none() {
                return Err(Error::InvalidConfig("sampled mode needs a seed".into()));
            }
            if shots == 0 {
                return Err(Error::InvalidConfig("sampled mode needs at least one shot".into()));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if !self.graph.is_connected() {
            return Err(Error::Disconnected);
        }
        if self.graph.is_cut_vertex(self.center)? {
            return Err(Error::CutVertexCenter(self.center));
        }
        Ok(())
    }

    pub(crate) fn check_size(&self) -> Result<()> {
        let n = self.qubit_count();
        if n > MAX_PURE_QUBITS {
            return Err(Error::TooLarge(format!("{n} qubits exceed the pure-state limit of {MAX_PURE_QUBITS}")));
        }
        Ok(())
    }
}
