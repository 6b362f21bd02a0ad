use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::netgraph::Hypergraph;
use crate::qcore::observable::ghz_ket;
use crate::qcore::{Channel, LabeledState, QubitLabel};
use crate::tol::Tolerances;

/// Channels applied per vertex; vertices not listed are left untouched.
pub type ChannelAssignment = BTreeMap<usize, Channel>;

/// Source qubits `[e,v]` of edge `e`, in vertex order.
pub fn edge_labels(g: &Hypergraph, e: usize) -> Vec<QubitLabel> {
    g.edge(e).iter().map(|&v| QubitLabel::source(e, v)).collect()
}

/// Canonical register of the network: every `[e,v]`, sorted.
pub fn network_register(g: &Hypergraph) -> Vec<QubitLabel> {
    let mut reg: Vec<QubitLabel> = (0..g.edges().len()).flat_map(|e| edge_labels(g, e)).collect();
    reg.sort();
    reg
}

/// GHZ source on edge `e` with relative phase `phase`.
pub fn ghz_source(g: &Hypergraph, e: usize, phase: f64) -> Result<LabeledState> {
    LabeledState::pure(edge_labels(g, e), ghz_ket(g.edge(e).len(), phase))
}

/// GHZ sources on every edge.
pub fn ghz_sources(g: &Hypergraph) -> Result<BTreeMap<usize, LabeledState>> {
    (0..g.edges().len()).map(|e| Ok((e, ghz_source(g, e, 0.0)?))).collect()
}

/// Haar-random pure source on edge `e`.
pub fn random_source<R: Rng + ?Sized>(rng: &mut R, g: &Hypergraph, e: usize) -> Result<LabeledState> {
    let labels = edge_labels(g, e);
    let d = 1usize << labels.len();
    LabeledState::pure(labels, linalg::random_state_vector(rng, d))
}

/// Random channel on each vertex's source qubits, with `rank` Kraus operators.
pub fn random_local_channels<R: Rng + ?Sized>(rng: &mut R, g: &Hypergraph, rank: usize) -> Result<ChannelAssignment> {
    let reg = network_register(g);
    let mut out = BTreeMap::new();
    for v in g.vertices() {
        let qs: Vec<QubitLabel> = reg.iter().copied().filter(|q| q.vertex() == v).collect();
        if !qs.is_empty() {
            out.insert(v, Channel::random(rng, qs, rank)?);
        }
    }
    Ok(out)
}

fn check_channels(channels: &ChannelAssignment, reg: &[QubitLabel]) -> Result<()> {
    for (&v, ch) in channels {
        for q in ch.support() {
            if q.vertex() != v {
                return Err(Error::LabelMismatch(format!("channel of vertex {v} acts on {q}")));
            }
            if !reg.contains(q) {
                return Err(Error::LabelMismatch(format!("channel of vertex {v} acts on unknown qubit {q}")));
            }
        }
    }
    Ok(())
}

fn apply_all(state: LabeledState, channels: &ChannelAssignment) -> Result<LabeledState> {
    channels.values().try_fold(state, |st, ch| st.apply_channel(ch))
}

/// Convex combination `Σ p_i ρ_i` of states on the same register.
pub fn mix(states: &[(f64, LabeledState)]) -> Result<LabeledState> {
    let (_, first) = states.first().ok_or_else(|| Error::BadDistribution("empty mixture".into()))?;
    let reg = first.register().to_vec();
    let aligned: Vec<(f64, LabeledState)> =
        states.iter().map(|(p, s)| Ok((*p, s.permuted(&reg)?))).collect::<Result<_>>()?;
    if aligned.len() == 1 {
        return Ok(aligned[0].1.clone());
    }
    if aligned.iter().all(|(_, s)| s.components().is_some()) {
        let comps: Vec<CVector> = aligned
            .iter()
            .flat_map(|(p, s)| {
                let c = C64::new(p.sqrt(), 0.0);
                s.components().unwrap().into_iter().map(move |v| v * c).collect::<Vec<_>>()
            })
            .filter(|v| v.norm_squared() > 0.0)
            .collect();
        return LabeledState::ensemble(reg, comps);
    }
    let d = first.dim();
    let mut rho = CMatrix::zeros(d, d);
    for (p, s) in &aligned {
        rho += s.density_matrix()? * C64::new(*p, 0.0);
    }
    LabeledState::mixed(reg, rho)
}

/// Network state `Σ_λ p_λ (⊗_v Φ_v^{(λ)})(⊗_e σ_e)` on the canonical register.
///
/// `local_channels` act in every branch, before the branch's own channels.
pub fn assemble_network_state(
    g: &Hypergraph,
    sources: &BTreeMap<usize, LabeledState>,
    local_channels: Option<&ChannelAssignment>,
    mixing: Option<&[(f64, ChannelAssignment)]>,
) -> Result<LabeledState> {
    let m = g.edges().len();
    if sources.len() != m || sources.keys().any(|&e| e >= m) {
        return Err(Error::LabelMismatch(format!("expected one source per edge ({m}), got {}", sources.len())));
    }
    let mut parts = Vec::with_capacity(m);
    for (e, src) in sources {
        let mut want = edge_labels(g, *e);
        want.sort();
        let mut have = src.register().to_vec();
        have.sort();
        if want != have {
            return Err(Error::LabelMismatch(format!(
                "source of edge {e} is on {:?}, expected {:?}",
                src.register().iter().map(ToString::to_string).collect::<Vec<_>>(),
                want.iter().map(ToString::to_string).collect::<Vec<_>>()
            )));
        }
        parts.push(src.clone());
    }
    let reg = network_register(g);
    let product = LabeledState::product(&parts)?.permuted(&reg)?;

    let base = match local_channels {
        Some(chs) => {
            check_channels(chs, &reg)?;
            apply_all(product, chs)?
        }
        None => product,
    };

    let Some(branches) = mixing else {
        return Ok(base);
    };
    if branches.is_empty() {
        return Err(Error::BadDistribution("mixing list is empty".into()));
    }
    if let Some((p, _)) = branches.iter().find(|(p, _)| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::BadDistribution(format!("probability {p}")));
    }
    let total: f64 = branches.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > Tolerances::current().trace {
        return Err(Error::BadDistribution(format!("probabilities sum to {total}")));
    }
    let mut weighted = Vec::with_capacity(branches.len());
    for (p, chs) in branches {
        check_channels(chs, &reg)?;
        if *p > 0.0 {
            weighted.push((*p, apply_all(base.clone(), chs)?));
        }
    }
    mix(&weighted)
}
