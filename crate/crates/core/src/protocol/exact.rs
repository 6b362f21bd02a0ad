use std::collections::BTreeSet;

use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::netgraph::Hypergraph;
use crate::qcore::{ghz_ket, ghz_source, LabeledState, Observable, QubitLabel};
use crate::report::{json_f64, round_json};
use crate::tol::Tolerances;

use super::config::ProtocolConfig;

/// Bookkeeping description of the signal state after some sensors succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStep {
    /// Sensor measured at this step.
    pub vertex: usize,
    /// Sensors that have succeeded so far (`S`).
    pub measured: BTreeSet<usize>,
    /// Unmeasured neighbours of `S` (`S̃`).
    pub frontier: BTreeSet<usize>,
    /// Shares `[e,v]` with `v ∈ S̃` of sources touching `S` (`Q_{S,S̃}`).
    pub shares: Vec<QubitLabel>,
    /// `Σ_{v∈S} α̃_v θ_v`.
    pub phase: f64,
}

fn frontier_of(g: &Hypergraph, measured: &BTreeSet<usize>) -> BTreeSet<usize> {
    measured.iter().flat_map(|&v| g.neighbors(v)).filter(|u| !measured.contains(u)).collect()
}

fn shares_of(g: &Hypergraph, measured: &BTreeSet<usize>) -> Vec<QubitLabel> {
    let mut q: Vec<QubitLabel> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.iter().any(|v| measured.contains(v)))
        .flat_map(|(i, e)| e.iter().filter(|v| !measured.contains(v)).map(move |&v| QubitLabel::source(i, v)))
        .collect();
    q.sort();
    q
}

fn check_order(cfg: &ProtocolConfig, order: &[usize]) -> Result<()> {
    let mut got = order.to_vec();
    got.sort_unstable();
    if got != cfg.sensors() {
        return Err(Error::InvalidConfig(format!(
            "measurement order {order:?} is not a permutation of the non-center sensors"
        )));
    }
    Ok(())
}

/// Predicted signal state along the recurrence `S' = S ∪ {v}`,
/// `S̃' = (S̃ ∖ {v}) ∪ (N(v) ∖ S)`. `order` is a priority list: the first step
/// measures `order[0]`, each later step the first listed sensor in `S̃`.
///
/// Only the structural part of the config is checked, so a center that is a
/// cut-vertex shows up here as `NotConvergent`.
pub fn signal_state_predict(cfg: &ProtocolConfig, order: &[usize]) -> Result<Vec<SignalStep>> {
    cfg.validate_structure()?;
    check_order(cfg, order)?;
    let g = &cfg.graph;
    let mut measured = BTreeSet::new();
    let mut frontier = BTreeSet::new();
    let mut phase = 0.0;
    let mut steps = Vec::new();
    loop {
        let next = if measured.is_empty() {
            order.first().copied()
        } else {
            order.iter().copied().find(|v| frontier.contains(v) && !measured.contains(v))
        };
        let Some(v) = next else { break };
        measured.insert(v);
        frontier.remove(&v);
        frontier.extend(g.neighbors(v).into_iter().filter(|u| !measured.contains(u)));
        phase += cfg.weight(v) as f64 * cfg.angle(v);
        steps.push(SignalStep {
            vertex: v,
            measured: measured.clone(),
            frontier: frontier.clone(),
            shares: shares_of(g, &measured),
            phase,
        });
    }
    let done = measured.len() + 1 == g.num_vertices() && frontier.len() == 1 && frontier.contains(&cfg.center);
    if !done {
        return Err(Error::NotConvergent(format!(
            "stopped with S = {measured:?}, S~ = {frontier:?} (center {})",
            cfg.center
        )));
    }
    Ok(steps)
}

/// One post-selected sensor measurement of an exact run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub vertex: usize,
    /// Qubits projected at this sensor (`n_v = |𝓔(v)| + |α̃_v|`).
    pub measured_qubits: usize,
    /// Success probability conditioned on every earlier sensor succeeding.
    pub probability: f64,
    pub signal: SignalStep,
    /// `|⟨predicted|simulated⟩|` when the succeeded set is connected, so
    /// that the prediction is a single phased GHZ state.
    pub signal_overlap: Option<f64>,
}

/// Result of an exact run along the all-success branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTrace {
    pub order: Vec<usize>,
    pub steps: Vec<StepRecord>,
    /// Probability that every non-center sensor succeeds.
    pub success_probability: f64,
    /// The same probability from projecting the initial state at once.
    pub joint_probability: f64,
    pub lower_bound: f64,
    pub lower_bound_exponent: u64,
    /// Center state conditioned on success, before its own signal.
    pub conditional_center_state: LabeledState,
    /// Center state after its own signal.
    pub final_center_state: LabeledState,
    /// Probability of the center's GHZ outcome (`P_θ`).
    pub center_probability: f64,
    /// `cos²(Σ_v α̃_v θ_v / 2)`.
    pub predicted_center_probability: f64,
    pub total_phase: f64,
    pub target: f64,
}

impl ProtocolTrace {
    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<serde_json::Value> = self
            .steps
            .iter()
            .map(|s| {
                json!({
                    "vertex": s.vertex,
                    "measured_qubits": s.measured_qubits,
                    "probability": json_f64(s.probability),
                    "succeeded": s.signal.measured,
                    "frontier": s.signal.frontier,
                    "signal_qubits": s.signal.shares.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
                    "signal_phase": json_f64(s.signal.phase),
                    "signal_overlap": s.signal_overlap.map(json_f64),
                })
            })
            .collect();
        let center = self
            .conditional_center_state
            .amplitudes()
            .map(|a| a.iter().map(|z| [json_f64(z.re), json_f64(z.im)]).collect::<Vec<_>>());
        round_json(json!({
            "order": self.order,
            "steps": steps,
            "success_probability": json_f64(self.success_probability),
            "joint_probability": json_f64(self.joint_probability),
            "success_probability_lower_bound": json_f64(self.lower_bound),
            "lower_bound_exponent": self.lower_bound_exponent,
            "center_qubits": self.conditional_center_state.register().iter().map(|q| q.to_string()).collect::<Vec<_>>(),
            "conditional_center_amplitudes": center,
            "center_probability": json_f64(self.center_probability),
            "predicted_center_probability": json_f64(self.predicted_center_probability),
            "total_phase": json_f64(self.total_phase),
            "target": json_f64(self.target),
        }))
    }
}

/// Probe qubits of a non-center sensor: `|α̃_v|` copies of `|+⟩` passed once
/// through `e^{-iθ_v Z/2}`, each followed by `X` when `α̃_v < 0`. Unused
/// probes (up to `L`) are never allocated.
pub(crate) fn probe_state(cfg: &ProtocolConfig, v: usize) -> Result<Option<LabeledState>> {
    let w = cfg.weight(v);
    let mut state: Option<LabeledState> = None;
    for slot in 0..w.unsigned_abs() as usize {
        let q = QubitLabel::ancilla(v, slot);
        let mut probe = LabeledState::plus(q).apply_phase(&q, cfg.angle(v), 1)?;
        if w < 0 {
            probe = probe.apply_unitary(&[q], &linalg::pauli_x())?;
        }
        state = Some(match state {
            None => probe,
            Some(s) => s.tensor(&probe)?,
        });
    }
    Ok(state)
}

/// Sources followed by the probes of every non-center sensor.
pub(crate) fn initial_state(cfg: &ProtocolConfig) -> Result<LabeledState> {
    cfg.check_size()?;
    let g = &cfg.graph;
    let mut state = ghz_source(g, 0, 0.0)?;
    for e in 1..g.edges().len() {
        state = state.tensor(&ghz_source(g, e, 0.0)?)?;
    }
    for v in cfg.sensors() {
        if let Some(p) = probe_state(cfg, v)? {
            state = state.tensor(&p)?;
        }
    }
    Ok(state)
}

/// Apply the center's own signal to its lowest-labeled qubit.
pub(crate) fn center_signal(cfg: &ProtocolConfig, state: &LabeledState, qubit: &QubitLabel) -> Result<LabeledState> {
    let w = cfg.weight(cfg.center);
    state.apply_phase(qubit, w.unsigned_abs() as f64 * cfg.angle(cfg.center), w.signum() as i32)
}

/// `-log₂` of the success-probability lower bound:
/// `Σ_{v≠v*} |α̃_v| + Σ_e |e| − |𝓔(v*)|`.
pub fn success_exponent(cfg: &ProtocolConfig) -> u64 {
    let probes: u64 = cfg.sensors().iter().map(|&v| cfg.weight(v).unsigned_abs()).sum();
    let shares: u64 = cfg.graph.edges().iter().map(|e| e.len() as u64).sum();
    probes + shares - cfg.graph.degree(cfg.center) as u64
}

pub fn success_prob_lower_bound(cfg: &ProtocolConfig) -> f64 {
    0.5f64.powi(success_exponent(cfg) as i32)
}

fn is_connected_set(g: &Hypergraph, set: &BTreeSet<usize>) -> bool {
    let Some(&start) = set.iter().next() else { return true };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for u in g.neighbors(v) {
            if set.contains(&u) && seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen.len() == set.len()
}

/// The state predicted after the sensors in `signal.measured` succeeded: the
/// phased GHZ state on `Q`, untouched sources, and the remaining probes.
fn predicted_state(cfg: &ProtocolConfig, signal: &SignalStep) -> Result<Option<LabeledState>> {
    let g = &cfg.graph;
    let mut parts = Vec::new();
    if !signal.shares.is_empty() {
        parts.push(LabeledState::pure(signal.shares.clone(), ghz_ket(signal.shares.len(), signal.phase))?);
    }
    for (i, e) in g.edges().iter().enumerate() {
        if !e.iter().any(|v| signal.measured.contains(v)) {
            parts.push(ghz_source(g, i, 0.0)?);
        }
    }
    for v in cfg.sensors().into_iter().filter(|v| !signal.measured.contains(v)) {
        if let Some(p) = probe_state(cfg, v)? {
            parts.push(p);
        }
    }
    let mut it = parts.into_iter();
    let Some(first) = it.next() else { return Ok(None) };
    it.try_fold(first, |acc, p| acc.tensor(&p)).map(Some)
}

/// Exact run with the default order (ascending vertex id).
pub fn run_exact(cfg: &ProtocolConfig) -> Result<ProtocolTrace> {
    run_exact_with_order(cfg, &cfg.sensors())
}

/// Exact pure-state simulation: each non-center sensor in `order` projects
/// all its qubits on their GHZ state and the branch is kept; the center then
/// applies its own signal and is measured against its GHZ state.
pub fn run_exact_with_order(cfg: &ProtocolConfig, order: &[usize]) -> Result<ProtocolTrace> {
    cfg.validate()?;
    check_order(cfg, order)?;
    let g = &cfg.graph;
    let tol = Tolerances::current().zero_probability;
    let initial = initial_state(cfg)?;

    // all projectors applied to the initial state at once, without renormalizing
    let mut joint = initial.clone();
    for &v in order {
        joint = joint.apply_operator(&Observable::ghz_projector(&initial.qubits_of_vertex(v)))?;
    }
    let joint_probability = joint.trace_weight();

    let mut state = initial;
    let mut measured = BTreeSet::new();
    let mut phase = 0.0;
    let mut steps = Vec::with_capacity(order.len());
    for &v in order {
        let qubits = state.qubits_of_vertex(v);
        let (p, rest) = state.post_select_out(&qubits, &ghz_ket(qubits.len(), 0.0), tol)?;
        state = rest;
        measured.insert(v);
        phase += cfg.weight(v) as f64 * cfg.angle(v);
        let signal = SignalStep {
            vertex: v,
            measured: measured.clone(),
            frontier: frontier_of(g, &measured),
            shares: shares_of(g, &measured),
            phase,
        };
        let signal_overlap = if is_connected_set(g, &measured) {
            match predicted_state(cfg, &signal)? {
                Some(pred) => Some(state.overlap_up_to_phase(&pred)?),
                None => None,
            }
        } else {
            None
        };
        steps.push(StepRecord { vertex: v, measured_qubits: qubits.len(), probability: p, signal, signal_overlap });
    }

    let conditional = state;
    let center_qubits = conditional.register().to_vec();
    if center_qubits.iter().any(|q| q.vertex() != cfg.center) || center_qubits.is_empty() {
        return Err(Error::InvalidState("post-selection left qubits outside the center".into()));
    }
    let lowest = *center_qubits.iter().min().expect("non-empty");
    let final_state = center_signal(cfg, &conditional, &lowest)?;
    let amps = final_state.amplitudes().ok_or_else(|| Error::InvalidState("center state is not pure".into()))?;
    let ghz = ghz_ket(center_qubits.len(), 0.0);
    let overlap: C64 = ghz.dotc(amps);
    let total_phase = cfg.total_phase();
    Ok(ProtocolTrace {
        order: order.to_vec(),
        success_probability: steps.iter().map(|s| s.probability).product(),
        steps,
        joint_probability,
        lower_bound: success_prob_lower_bound(cfg),
        lower_bound_exponent: success_exponent(cfg),
        conditional_center_state: conditional,
        final_center_state: final_state,
        center_probability: overlap.norm_sqr(),
        predicted_center_probability: (total_phase / 2.0).cos().powi(2),
        total_phase,
        target: cfg.target(),
    })
}

/// Central-difference step for the derivative of `P` in the target.
pub const FI_STEP: f64 = 1e-5;

/// Classical Fisher information of the center's binary outcome with respect
/// to the target `θ(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    pub target: f64,
    pub probability: f64,
    /// `dP/dθ` from Richardson-combined central differences.
    pub derivative: f64,
    /// Plain central difference at the full step, for comparison.
    pub derivative_coarse: f64,
    /// `(dP/dθ)² / (P(1−P))`.
    pub fisher_information: f64,
}

/// Move every angle along `sign(α̃_v) · M / Σ|α̃|`, which shifts the target
/// by exactly `t`.
fn shifted(cfg: &ProtocolConfig, t: f64) -> ProtocolConfig {
    let m = cfg.num_sensors() as f64;
    let norm: f64 = cfg.alpha.values().map(|w| w.abs() as f64).sum();
    let mut out = cfg.clone();
    for (v, th) in out.theta.iter_mut() {
        *th += t * cfg.weight(*v).signum() as f64 * m / norm;
    }
    out
}

pub fn fisher_information_of_estimate(cfg: &ProtocolConfig) -> Result<FisherReport> {
    let p_at = |t: f64| -> Result<f64> { Ok(run_exact(&shifted(cfg, t))?.center_probability) };
    let p = p_at(0.0)?;
    if p.min(1.0 - p) < 1e-9 {
        return Err(Error::DegenerateP(p));
    }
    let h = FI_STEP;
    let d_coarse = (p_at(h)? - p_at(-h)?) / (2.0 * h);
    let d_fine = (p_at(h / 2.0)? - p_at(-h / 2.0)?) / h;
    let derivative = (4.0 * d_fine - d_coarse) / 3.0;
    Ok(FisherReport {
        target: cfg.target(),
        probability: p,
        derivative,
        derivative_coarse: d_coarse,
        fisher_information: derivative * derivative / (p * (1.0 - p)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::fixtures;

    fn cycle3() -> ProtocolConfig {
        ProtocolConfig::unit_weights(fixtures::cycle(3), 2, &[0.3, 0.5, -0.2]).unwrap()
    }

    #[test]
    fn cycle_three_example() {
        let t = run_exact(&cycle3()).unwrap();
        assert!((t.center_probability - 0.3f64.cos().powi(2)).abs() < 1e-12);
        assert!((t.success_probability - 1.0 / 64.0).abs() < 1e-14);
        assert!((t.joint_probability - t.success_probability).abs() < 1e-14);
        assert_eq!(t.lower_bound_exponent, 6);
        for s in &t.steps {
            assert!((s.signal_overlap.unwrap() - 1.0).abs() < 1e-12);
        }
        let zero = run_exact(&cycle3().with_theta(&[0.0; 3])).unwrap();
        assert!((zero.center_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_follows_priority() {
        let steps = signal_state_predict(&cycle3(), &[0, 1]).unwrap();
        assert_eq!(steps[0].frontier, BTreeSet::from([1, 2]));
        assert_eq!(steps[1].frontier, BTreeSet::from([2]));
        assert!((steps[1].phase - 0.8).abs() < 1e-15);
        assert_eq!(steps[1].shares, vec![QubitLabel::source(1, 2), QubitLabel::source(2, 2)]);
        // a center at the end of a path converges
        let p = ProtocolConfig::unit_weights(fixtures::path(4), 3, &[0.0; 4]).unwrap();
        assert_eq!(signal_state_predict(&p, &[2, 1, 0]).unwrap().len(), 3);
        // a center in the middle does not
        let mut mid = p.clone();
        mid.center = 1;
        assert_eq!(mid.validate(), Err(Error::CutVertexCenter(1)));
        assert!(matches!(signal_state_predict(&mid, &[0, 2, 3]), Err(Error::NotConvergent(_))));
    }

    #[test]
    fn negative_and_larger_weights() {
        let mut cfg = cycle3();
        cfg.l = 2;
        cfg.alpha.insert(0, -2);
        cfg.alpha.insert(2, -1);
        let t = run_exact(&cfg).unwrap();
        let expected = ((-2.0 * 0.3 + 0.5 + 0.2) / 2.0f64).cos().powi(2);
        assert!((t.center_probability - expected).abs() < 1e-12);
        assert!((t.success_probability - 0.5f64.powi(7)).abs() < 1e-14);
        assert!(t.steps.iter().all(|s| (s.signal_overlap.unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn center_qubit_choice_is_irrelevant() {
        let cfg = cycle3();
        let t = run_exact(&cfg).unwrap();
        let ghz = ghz_ket(2, 0.0);
        for q in t.conditional_center_state.register() {
            let s = center_signal(&cfg, &t.conditional_center_state, q).unwrap();
            let p = ghz.dotc(s.amplitudes().unwrap()).norm_sqr();
            assert!((p - t.center_probability).abs() < 1e-14);
        }
    }

    #[test]
    fn order_invariance() {
        let cfg = ProtocolConfig::unit_weights(fixtures::cycle(4), 0, &[0.1, -0.4, 0.7, 0.2]).unwrap();
        let a = run_exact_with_order(&cfg, &[1, 2, 3]).unwrap();
        let b = run_exact_with_order(&cfg, &[3, 1, 2]).unwrap();
        assert!((a.success_probability - b.success_probability).abs() < 1e-14);
        assert!((a.center_probability - b.center_probability).abs() < 1e-12);
        assert!(a.conditional_center_state.approx_eq(&b.conditional_center_state).unwrap());
        // {3, 1} is not connected, so the intermediate step has no prediction
        assert!(b.steps[1].signal_overlap.is_none());
        assert!(run_exact_with_order(&cfg, &[1, 2]).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        for m in 3..=6 {
            let cfg = ProtocolConfig::unit_weights(fixtures::cycle(m), 0, &vec![0.0; m]).unwrap();
            assert_eq!(success_exponent(&cfg), 3 * m as u64 - 3);
        }
        let edge = ProtocolConfig::unit_weights(fixtures::cycle(2), 1, &[0.0; 2]).unwrap();
        assert_eq!(success_prob_lower_bound(&edge), 0.25);
    }

    #[test]
    fn fisher_information_is_m_squared() {
        for m in 2..=4 {
            let theta = vec![0.1; m];
            let cfg = ProtocolConfig::unit_weights(fixtures::cycle(m), m - 1, &theta).unwrap();
            let f = fisher_information_of_estimate(&cfg).unwrap();
            assert!((f.fisher_information - (m * m) as f64).abs() < 1e-5 * (m * m) as f64, "{f:?}");
        }
        let flat = ProtocolConfig::unit_weights(fixtures::cycle(3), 2, &[0.0; 3]).unwrap();
        assert!(matches!(fisher_information_of_estimate(&flat), Err(Error::DegenerateP(_))));
    }
}
