use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::par::{self, Execution};
use crate::qcore::{ghz_ket, Observable};
use crate::report::{fmt_f64, json_f64, round_json, Table};

use super::config::{Mode, ProtocolConfig};
use super::exact::{center_signal, initial_state};

/// Largest number of non-center sensors whose outcome patterns are enumerated.
pub const MAX_BRANCH_SENSORS: usize = 12;
/// Bound on `2^K · 2^n` for the enumeration.
const MAX_BRANCH_WORK: u64 = 1 << 24;

/// One joint outcome of the non-center sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Bit `j` set when sensor `sensors[j]` obtained its GHZ outcome.
    pub pattern: u64,
    pub probability: f64,
    /// Joint probability of this pattern and the center's GHZ outcome.
    pub center_ghz_probability: f64,
    /// Unnormalized center state `ρ(S)` (trace = `probability`), after the
    /// center's own signal.
    pub center_state: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    pub sensors: Vec<usize>,
    pub branches: Vec<Branch>,
}

impl BranchTable {
    pub fn full_pattern(&self) -> u64 {
        (1u64 << self.sensors.len()) - 1
    }

    pub fn succeeded(&self, pattern: u64) -> Vec<usize> {
        self.sensors.iter().enumerate().filter(|(j, _)| pattern >> j & 1 == 1).map(|(_, &v)| v).collect()
    }
}

/// Every outcome pattern of the non-center sensors, each obtained by applying
/// `Π_v` (success) or `1 − Π_v` (failure) to the state after all signals and
/// tracing down to the center.
pub fn branch_table(cfg: &ProtocolConfig, exec: Execution) -> Result<BranchTable> {
    cfg.validate()?;
    let sensors = cfg.sensors();
    let k = sensors.len();
    let n = cfg.qubit_count();
    if k > MAX_BRANCH_SENSORS || (1u64 << k) * (1u64 << n) > MAX_BRANCH_WORK {
        return Err(Error::TooLarge(format!("{k} sensors on {n} qubits is too many outcome branches")));
    }
    let mut state = initial_state(cfg)?;
    let mut center_qubits = state.qubits_of_vertex(cfg.center);
    center_qubits.sort();
    state = center_signal(cfg, &state, &center_qubits[0])?;
    let projectors: Vec<(Observable, Observable)> = sensors
        .iter()
        .map(|&v| {
            let qs = state.qubits_of_vertex(v);
            let pi = Observable::ghz_projector(&qs);
            let complement = Observable::new(qs.clone(), linalg::identity(1 << qs.len()) - pi.matrix())?;
            Ok((pi, complement))
        })
        .collect::<Result<_>>()?;
    let ghz = ghz_ket(center_qubits.len(), 0.0);
    let ghz_proj = &ghz * ghz.adjoint();
    let branches = par::map_range(exec, 1usize << k, |pattern| -> Result<Branch> {
        let mut s = state.clone();
        for (j, (pi, complement)) in projectors.iter().enumerate() {
            s = s.apply_operator(if pattern >> j & 1 == 1 { pi } else { complement })?;
        }
        let rho = s.reduced_density(&center_qubits)?;
        Ok(Branch {
            pattern: pattern as u64,
            probability: linalg::trace(&rho).re,
            center_ghz_probability: linalg::trace_product(&rho, &ghz_proj).re,
            center_state: rho,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BranchTable { sensors, branches })
}

/// Shots drawn from one generator stream group.
pub const SAMPLE_CHUNK: u64 = 4096;

/// Generator for sensor slot `slot` (the center uses slot `K`) in chunk
/// `chunk`: the run seed with stream `(chunk << 16) | slot`.
pub fn sample_rng(seed: u64, chunk: u64, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((chunk << 16) | slot as u64);
    rng
}

/// Empirical outcome counts of a sampled run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    pub seed: u64,
    pub shots: u64,
    pub sensors: Vec<usize>,
    /// Per sensor, the number of shots where it obtained its GHZ outcome.
    pub sensor_successes: Vec<u64>,
    /// Shots where every non-center sensor succeeded.
    pub success_count: u64,
    /// Among those, shots where the center obtained its GHZ outcome.
    pub center_ghz_given_success: u64,
    /// Center GHZ outcomes over all shots.
    pub center_ghz_total: u64,
    pub exact_success_probability: f64,
    pub exact_center_probability: f64,
}

impl SampledTrace {
    pub fn conditional_frequency(&self) -> Option<f64> {
        (self.success_count > 0).then(|| self.center_ghz_given_success as f64 / self.success_count as f64)
    }

    pub fn to_json(&self) -> serde_json::Value {
        round_json(json!({
            "seed": self.seed,
            "shots": self.shots,
            "sensors": self.sensors,
            "sensor_successes": self.sensor_successes,
            "success_count": self.success_count,
            "center_ghz_given_success": self.center_ghz_given_success,
            "center_ghz_total": self.center_ghz_total,
            "conditional_frequency": self.conditional_frequency().map(json_f64),
            "exact_success_probability": json_f64(self.exact_success_probability),
            "exact_center_probability": json_f64(self.exact_center_probability),
        }))
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["event", "count", "frequency", "exact"]);
        let freq = |c: u64| fmt_f64(c as f64 / self.shots as f64);
        t.push(vec![
            "all_success".into(),
            self.success_count.to_string(),
            freq(self.success_count),
            fmt_f64(self.exact_success_probability),
        ]);
        t.push(vec![
            "center_ghz_given_success".into(),
            self.center_ghz_given_success.to_string(),
            self.conditional_frequency().map_or_else(|| "nan".into(), fmt_f64),
            fmt_f64(self.exact_center_probability),
        ]);
        t.push(vec![
            "center_ghz_total".into(),
            self.center_ghz_total.to_string(),
            freq(self.center_ghz_total),
            String::new(),
        ]);
        for (v, c) in self.sensors.iter().zip(&self.sensor_successes) {
            t.push(vec![format!("sensor_{v}_success"), c.to_string(), freq(*c), String::new()]);
        }
        t
    }
}

/// Sample every sensor's outcome in ascending order from its exact
/// conditional probability, then the center's.
pub fn run_sampled(cfg: &ProtocolConfig) -> Result<SampledTrace> {
    run_sampled_with(cfg, Execution::default())
}

pub fn run_sampled_with(cfg: &ProtocolConfig, exec: Execution) -> Result<SampledTrace> {
    cfg.validate()?;
    let Mode::Sampled { seed: Some(seed), shots } = cfg.mode else {
        return Err(Error::InvalidConfig("run_sampled needs sampled mode with a seed".into()));
    };
    let table = branch_table(cfg, exec)?;
    let k = table.sensors.len();
    // prefix[j][p]: probability that the first j sensors produced bits p
    let mut prefix: Vec<Vec<f64>> = (0..=k).map(|j| vec![0.0; 1 << j]).collect();
    for b in &table.branches {
        for (j, level) in prefix.iter_mut().enumerate() {
            level[(b.pattern & ((1 << j) - 1)) as usize] += b.probability;
        }
    }
    let center_given: Vec<f64> = table
        .branches
        .iter()
        .map(|b| if b.probability > 0.0 { (b.center_ghz_probability / b.probability).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let full = table.full_pattern() as usize;

    let chunks = shots.div_ceil(SAMPLE_CHUNK);
    let partial = par::map_range(exec, chunks as usize, |c| {
        let c = c as u64;
        let count = SAMPLE_CHUNK.min(shots - c * SAMPLE_CHUNK);
        let mut rngs: Vec<ChaCha8Rng> = (0..=k).map(|slot| sample_rng(seed, c, slot)).collect();
        let mut sensor = vec![0u64; k];
        let (mut success, mut given, mut total) = (0u64, 0u64, 0u64);
        for _ in 0..count {
            let mut p = 0usize;
            for j in 0..k {
                let here = prefix[j][p];
                let yes = if here > 0.0 { prefix[j + 1][p | 1 << j] / here } else { 0.0 };
                if rngs[j].random::<f64>() < yes {
                    p |= 1 << j;
                    sensor[j] += 1;
                }
            }
            let ghz = rngs[k].random::<f64>() < center_given[p];
            total += ghz as u64;
            if p == full {
                success += 1;
                given += ghz as u64;
            }
        }
        (sensor, success, given, total)
    });
    let mut out = SampledTrace {
        seed,
        shots,
        sensors: table.sensors.clone(),
        sensor_successes: vec![0; k],
        success_count: 0,
        center_ghz_given_success: 0,
        center_ghz_total: 0,
        exact_success_probability: table.branches[full].probability,
        exact_center_probability: center_given[full],
    };
    for (sensor, success, given, total) in partial {
        for (acc, s) in out.sensor_successes.iter_mut().zip(sensor) {
            *acc += s;
        }
        out.success_count += success;
        out.center_ghz_given_success += given;
        out.center_ghz_total += total;
    }
    Ok(out)
}

/// Distances of the center's conditional states across probes for one set of
/// succeeding sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetAudit {
    pub succeeded: Vec<usize>,
    pub full_success: bool,
    /// Largest trace distance between `ρ(S)` of two probes with equal targets.
    pub max_distance_same_target: f64,
    /// Largest and smallest trace distance between `ρ(S)` of two probes with
    /// different targets (`None` when all targets agree).
    pub max_distance_other_target: Option<f64>,
    pub min_distance_other_target: Option<f64>,
    /// Largest difference of `tr ρ(S)` between any two probes.
    pub probability_spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    pub probes: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub subsets: Vec<SubsetAudit>,
    /// Partial success, any two probes.
    pub max_partial_distance: f64,
    /// Partial success, probes with equal targets.
    pub max_partial_distance_same_target: f64,
    pub max_full_distance_same_target: f64,
    /// Smallest full-success distance between probes whose targets differ.
    pub min_full_distance_other_target: Option<f64>,
    pub max_probability_spread: f64,
    /// Outcome probabilities are angle-independent and every `ρ(S)` depends
    /// on the angles only through the target.
    pub target_only: bool,
    /// Additionally, no partial-success `ρ(S)` depends on the angles at all.
    pub partial_angle_independent: bool,
}

impl PrivacyReport {
    pub fn to_json(&self) -> serde_json::Value {
        let subsets: Vec<serde_json::Value> = self
            .subsets
            .iter()
            .map(|s| {
                json!({
                    "succeeded": s.succeeded,
                    "full_success": s.full_success,
                    "max_distance_same_target": json_f64(s.max_distance_same_target),
                    "max_distance_other_target": s.max_distance_other_target.map(json_f64),
                    "min_distance_other_target": s.min_distance_other_target.map(json_f64),
                    "probability_spread": json_f64(s.probability_spread),
                })
            })
            .collect();
        round_json(json!({
            "probes": self.probes,
            "targets": self.targets,
            "subsets": subsets,
            "max_partial_distance": json_f64(self.max_partial_distance),
            "max_partial_distance_same_target": json_f64(self.max_partial_distance_same_target),
            "max_full_distance_same_target": json_f64(self.max_full_distance_same_target),
            "min_full_distance_other_target": self.min_full_distance_other_target.map(json_f64),
            "max_probability_spread": json_f64(self.max_probability_spread),
            "target_only": self.target_only,
            "partial_angle_independent": self.partial_angle_independent,
        }))
    }
}

/// Allowed trace distance between conditional states that should coincide.
pub const PRIVACY_DISTANCE_TOL: f64 = 1e-9;
/// Allowed spread of outcome probabilities across probes.
pub const PRIVACY_PROBABILITY_TOL: f64 = 1e-10;
/// Targets closer than this count as equal.
const SAME_TARGET_TOL: f64 = 1e-12;

fn fold_opt(acc: Option<f64>, d: f64, f: fn(f64, f64) -> f64) -> Option<f64> {
    Some(acc.map_or(d, |a| f(a, d)))
}

/// Compare the center's unnormalized conditional states `ρ(S)` for every
/// outcome set `S` across probe angle vectors, split by whether two probes
/// share the target `θ(α)`.
///
/// Failing sensors apply `1 − Π_v`, so by inclusion-exclusion a partial
/// `ρ(S)` contains the full-success term with its phase `e^{iΣα̃θ}`: it is
/// blind to the individual angles but not to the target.
pub fn privacy_audit(cfg: &ProtocolConfig, probes: &[Vec<f64>]) -> Result<PrivacyReport> {
    cfg.validate()?;
    if probes.len() < 2 {
        return Err(Error::InvalidConfig("the audit needs at least two probe angle vectors".into()));
    }
    if let Some(p) = probes.iter().find(|p| p.len() != cfg.num_sensors()) {
        return Err(Error::InvalidConfig(format!("probe {p:?} does not give one angle per vertex")));
    }
    let configs: Vec<ProtocolConfig> = probes.iter().map(|p| cfg.with_theta(p)).collect();
    let tables = configs.iter().map(|c| branch_table(c, Execution::default())).collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = configs.iter().map(|c| c.target()).collect();
    let full = tables[0].full_pattern();
    let mut subsets = Vec::new();
    for pattern in 0..=full {
        let mut audit = SubsetAudit {
            succeeded: tables[0].succeeded(pattern),
            full_success: pattern == full,
            max_distance_same_target: 0.0,
            max_distance_other_target: None,
            min_distance_other_target: None,
            probability_spread: 0.0,
        };
        for a in 0..tables.len() {
            for b in a + 1..tables.len() {
                let (x, y) = (&tables[a].branches[pattern as usize], &tables[b].branches[pattern as usize]);
                audit.probability_spread = audit.probability_spread.max((x.probability - y.probability).abs());
                let d = linalg::trace_distance(&x.center_state, &y.center_state);
                if (targets[a] - targets[b]).abs() > SAME_TARGET_TOL {
                    audit.max_distance_other_target = fold_opt(audit.max_distance_other_target, d, f64::max);
                    audit.min_distance_other_target = fold_opt(audit.min_distance_other_target, d, f64::min);
                } else {
                    audit.max_distance_same_target = audit.max_distance_same_target.max(d);
                }
            }
        }
        subsets.push(audit);
    }
    let partial = || subsets.iter().filter(|s| !s.full_success);
    let max_partial_distance_same_target = partial().map(|s| s.max_distance_same_target).fold(0.0, f64::max);
    let max_partial_distance = partial()
        .map(|s| s.max_distance_same_target.max(s.max_distance_other_target.unwrap_or(0.0)))
        .fold(0.0, f64::max);
    let full_audit = subsets.last().expect("at least the full pattern");
    let max_full_distance_same_target = full_audit.max_distance_same_target;
    let min_full_distance_other_target = full_audit.min_distance_other_target;
    let max_probability_spread = subsets.iter().map(|s| s.probability_spread).fold(0.0, f64::max);
    let target_only = max_partial_distance_same_target <= PRIVACY_DISTANCE_TOL
        && max_full_distance_same_target <= PRIVACY_DISTANCE_TOL
        && max_probability_spread <= PRIVACY_PROBABILITY_TOL;
    let partial_angle_independent = target_only && max_partial_distance <= PRIVACY_DISTANCE_TOL;
    Ok(PrivacyReport {
        probes: probes.to_vec(),
        targets,
        subsets,
        max_partial_distance,
        max_partial_distance_same_target,
        max_full_distance_same_target,
        min_full_distance_other_target,
        max_probability_spread,
        target_only,
        partial_angle_independent,
    })
}
