use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::metro::cov::{decompose_ops, LocalOp, ProductState};
use crate::metro::qfi::qfi_matrix_with;
use crate::netgraph::{Hypergraph, SignalLayout};
use crate::par::Execution;
use crate::qcore::{
    assemble_network_state, network_register, resolve_generators, Channel, ChannelAssignment, LabeledState, QubitLabel,
};
use crate::report::{json_f64, round_json};
use crate::tol::Tolerances;

/// Stinespring dilation of a channel: a unitary on (support ⊗ environment)
/// with `U (|ψ⟩ ⊗ |0⟩) = Σ_a K_a|ψ⟩ ⊗ |a⟩`, and the environment size in qubits.
pub fn dilation_unitary(channel: &Channel) -> (CMatrix, usize) {
    let kraus = channel.kraus();
    let m = kraus.len().next_power_of_two().trailing_zeros() as usize;
    let d = kraus[0].nrows();
    let de = 1usize << m;
    let mut iso = CMatrix::zeros(d * de, d);
    for (a, k) in kraus.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                iso[(i * de + a, j)] = k[(i, j)];
            }
        }
    }
    let completed = linalg::complete_to_unitary(&iso);
    // completed columns: the isometry first, then the orthogonal complement
    let mut u = CMatrix::zeros(d * de, d * de);
    let mut extra = d;
    for col in 0..d * de {
        if col % de == 0 {
            u.set_column(col, &completed.column(col / de));
        } else {
            u.set_column(col, &completed.column(extra));
            extra += 1;
        }
    }
    (u, m)
}

fn is_identity_channel(ch: &Channel) -> bool {
    let kraus = ch.kraus();
    if kraus.len() != 1 {
        return false;
    }
    let k = &kraus[0];
    let phase = k[(0, 0)];
    phase.norm() > 0.0
        && linalg::max_abs_diff(k, &(linalg::identity(k.nrows()) * phase)) <= Tolerances::current().trivial_action
}

/// T-matrices of a network state together with the checks of their defining
/// conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct TDecomposition {
    /// `T^{(e)}` per hyperedge.
    pub parts: Vec<CMatrix>,
    /// Signals meeting each hyperedge (the support of `Π^{(e)}`).
    pub projectors: Vec<Vec<usize>>,
    /// Name of every subsystem of the dilated product state.
    pub subsystems: Vec<String>,
    /// `Υ` per subsystem.
    pub upsilon: Vec<CMatrix>,
    pub qfi: DMatrix<f64>,
    pub variances: Vec<f64>,
    pub check: TConditions,
}

/// Residuals of the three T-matrix conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TConditions {
    /// Smallest eigenvalue of `Σ_e T^{(e)} − F_Q/4` (Hermitian matrices).
    pub qfi_gap_min_eig: f64,
    /// Same with the real symmetric part of `Σ_e T^{(e)}`.
    pub qfi_gap_min_eig_real: f64,
    /// Largest `|Σ_e T^{(e)}_ss − Var(ρ, H_s)|`.
    pub variance_defect: f64,
    /// Largest entry of `T^{(e)}` outside the block of signals meeting `e`.
    pub projector_defect: f64,
    /// Smallest eigenvalue over all `T^{(e)}`.
    pub part_min_eig: f64,
}

impl TConditions {
    pub fn holds(&self) -> bool {
        let psd = Tolerances::current().psd_order;
        self.qfi_gap_min_eig >= -psd
            && self.qfi_gap_min_eig_real >= -psd
            && self.variance_defect <= 1e-8
            && self.projector_defect <= 1e-10
            && self.part_min_eig >= -psd
    }
}

impl TDecomposition {
    pub fn to_json(&self) -> serde_json::Value {
        let mat = |m: &CMatrix| -> Vec<Vec<[f64; 2]>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
        };
        round_json(json!({
            "parts": self.parts.iter().map(mat).collect::<Vec<_>>(),
            "projectors": self.projectors,
            "subsystems": self.subsystems,
            "variances": self.variances,
            "qfi": (0..self.qfi.nrows()).map(|i| self.qfi.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "conditions": {
                "qfi_gap_min_eig": json_f64(self.check.qfi_gap_min_eig),
                "qfi_gap_min_eig_real": json_f64(self.check.qfi_gap_min_eig_real),
                "variance_defect": json_f64(self.check.variance_defect),
                "projector_defect": json_f64(self.check.projector_defect),
                "part_min_eig": json_f64(self.check.part_min_eig),
                "holds": self.check.holds(),
            },
        }))
    }
}

struct Dilation {
    unitary: CMatrix,
    /// channel support followed by environment labels
    labels: Vec<QubitLabel>,
    env: Vec<QubitLabel>,
}

/// Build the T-matrices of the network state `(⊗_v Φ_v)(⊗_e σ_e)`.
///
/// Each channel is dilated to a unitary with a fresh environment in `|0⟩`; the
/// covariance of the lifted generators is split over the product of sources
/// and environments, and each environment's share is divided evenly among the
/// hyperedges of its vertex.
pub fn t_decompose(
    g: &Hypergraph,
    layout: &SignalLayout,
    sources: &BTreeMap<usize, LabeledState>,
    channels: &ChannelAssignment,
) -> Result<TDecomposition> {
    t_decompose_with(g, layout, sources, channels, Execution::default())
}

pub fn t_decompose_with(
    g: &Hypergraph,
    layout: &SignalLayout,
    sources: &BTreeMap<usize, LabeledState>,
    channels: &ChannelAssignment,
    exec: Execution,
) -> Result<TDecomposition> {
    let reg = network_register(g);
    for (&v, ch) in channels {
        if !g.contains_vertex(v) {
            return Err(Error::NotNetworkForm(format!("channel assigned to unknown vertex {v}")));
        }
        if let Some(q) = ch.support().iter().find(|q| q.vertex() != v || !reg.contains(q)) {
            return Err(Error::NotNetworkForm(format!("channel of vertex {v} acts on {q}, not one of its qubits")));
        }
    }
    let rho = assemble_network_state(g, sources, Some(channels), None).map_err(|e| match e {
        Error::LabelMismatch(m) => Error::NotNetworkForm(m),
        other => other,
    })?;
    let gens = resolve_generators(layout, rho.register())?;

    let mut dilations: BTreeMap<usize, Dilation> = BTreeMap::new();
    for (&v, ch) in channels {
        if is_identity_channel(ch) {
            continue;
        }
        let (unitary, m) = dilation_unitary(ch);
        let env: Vec<QubitLabel> = (0..m).map(|slot| QubitLabel::ancilla(v, slot)).collect();
        let mut labels = ch.support().to_vec();
        labels.extend_from_slice(&env);
        dilations.insert(v, Dilation { unitary, labels, env });
    }

    // subsystems: sources in edge order, then environments in vertex order
    let mut factors = Vec::new();
    let mut names = Vec::new();
    for e in 0..g.edges().len() {
        factors.push(sources[&e].clone());
        names.push(format!("source {e}"));
    }
    let mut env_index: BTreeMap<usize, usize> = BTreeMap::new();
    for (&v, dil) in &dilations {
        if dil.env.is_empty() {
            continue;
        }
        env_index.insert(v, factors.len());
        let zeros: Vec<LabeledState> = dil.env.iter().map(|&q| LabeledState::zero(q)).collect();
        factors.push(LabeledState::product(&zeros)?);
        names.push(format!("environment {v}"));
    }
    let product = ProductState::new(factors)?;

    // lifted generators U† H U
    let lifted: Vec<LocalOp> = gens
        .iter()
        .map(|h| {
            let mut labels = h.support().to_vec();
            let touching: Vec<&Dilation> = dilations
                .iter()
                .filter(|(_, d)| d.labels.iter().any(|q| h.support().contains(q)))
                .map(|(_, d)| d)
                .collect();
            for d in &touching {
                for q in &d.labels {
                    if !labels.contains(q) {
                        labels.push(*q);
                    }
                }
            }
            let all: Vec<usize> = (0..labels.len()).collect();
            let from: Vec<usize> = (0..h.support().len()).collect();
            let mut m = linalg::embed(h.matrix(), &from, &all);
            for d in &touching {
                let pos: Vec<usize> = d.labels.iter().map(|q| labels.iter().position(|l| l == q).unwrap()).collect();
                m = linalg::conjugate_local(&m, labels.len(), &pos, &d.unitary.adjoint());
            }
            LocalOp { labels, matrix: m }
        })
        .collect();

    let dec = decompose_ops(&product, &lifted, exec)?;
    let s_count = gens.len();
    let mut parts = Vec::with_capacity(g.edges().len());
    let mut projectors = Vec::with_capacity(g.edges().len());
    for (e, edge) in g.edges().iter().enumerate() {
        let mut t = dec.parts[e].clone();
        for &v in edge {
            if let Some(&k) = env_index.get(&v) {
                t += dec.parts[k].scale(1.0 / g.degree(v) as f64);
            }
        }
        parts.push(t);
        projectors.push((0..s_count).filter(|&s| layout.signal(s).iter().any(|v| edge.contains(v))).collect());
    }

    let qfi = qfi_matrix_with(&rho, &gens, exec)?.matrix;
    let variances: Vec<f64> = gens.iter().map(|h| rho.variance(h)).collect::<Result<_>>()?;
    let check = conditions(&parts, &projectors, &qfi, &variances);
    Ok(TDecomposition { parts, projectors, subsystems: names, upsilon: dec.parts, qfi, variances, check })
}

fn conditions(parts: &[CMatrix], projectors: &[Vec<usize>], qfi: &DMatrix<f64>, variances: &[f64]) -> TConditions {
    let s = qfi.nrows();
    let total = parts.iter().fold(CMatrix::zeros(s, s), |acc, p| acc + p);
    let quarter = qfi.map(|x| C64::new(x / 4.0, 0.0));
    let gap = &total - &quarter;
    let gap_real = linalg::real_part(&total) - qfi / 4.0;
    let variance_defect = (0..s).map(|i| (total[(i, i)].re - variances[i]).abs()).fold(0.0, f64::max);
    let mut projector_defect: f64 = 0.0;
    for (t, proj) in parts.iter().zip(projectors) {
        for i in 0..s {
            for j in 0..s {
                if !(proj.contains(&i) && proj.contains(&j)) {
                    projector_defect = projector_defect.max(t[(i, j)].norm());
                }
            }
        }
    }
    let part_min_eig = parts.iter().map(linalg::min_eigenvalue_hermitian).fold(f64::INFINITY, f64::min);
    TConditions {
        qfi_gap_min_eig: linalg::min_eigenvalue_hermitian(&gap),
        qfi_gap_min_eig_real: linalg::min_eigenvalue_symmetric(&gap_real),
        variance_defect,
        projector_defect,
        part_min_eig,
    }
}

/// Apply a dilation to `ψ ⊗ |0⟩` and trace out the environment; used to
/// check that a dilation reproduces its channel.
pub fn dilated_channel_output(channel: &Channel, psi: &CVector) -> CMatrix {
    let (u, m) = dilation_unitary(channel);
    let de = 1usize << m;
    let mut input = CVector::zeros(psi.len() * de);
    for (j, a) in psi.iter().enumerate() {
        input[j * de] = *a;
    }
    let out = u * input;
    let n = channel.support().len() + m;
    let keep: Vec<usize> = (0..channel.support().len()).collect();
    linalg::partial_trace_vec(out.as_slice(), n, &keep)
}
