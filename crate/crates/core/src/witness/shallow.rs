use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg;
use crate::metro::qfi_matrix;
use crate::qcore::{LabeledState, Observable};
use crate::report::{json_f64, round_json};
use crate::witness::circuit::{
    heisenberg, light_cone_q, product_variance, site_factors, CircuitSpec, Geometry, SiteOperator,
};

/// Registers up to this size also get the exact QFI for comparison.
pub const EXACT_QFI_MAX_SITES: usize = 8;
/// Step of the fidelity finite difference.
pub const FD_STEP: f64 = 1e-4;

/// Light-cone bound on the QFI of a shallow-circuit output state.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowReport {
    pub q: usize,
    /// `Var(ρ, U†H_iU)` per term.
    pub variances: Vec<f64>,
    /// `4 q Σ_i Var(ρ, U†H_iU)`.
    pub bound: f64,
    /// `F_Q(UρU†, Σ_i H_i)` when the register is small enough.
    pub exact_qfi: Option<f64>,
}

impl ShallowReport {
    pub fn to_json(&self) -> serde_json::Value {
        round_json(json!({
            "model": "shallow_circuit",
            "q": self.q,
            "our_bound": json_f64(self.bound),
            "variances": self.variances,
            "exact_qfi": self.exact_qfi.map(json_f64),
        }))
    }
}

/// `F_Q(UρU†, Σ_i H_i) ≤ 4 q Σ_i Var(ρ, U†H_iU)` for a product input `ρ` on
/// the circuit sites (one single-qubit state per site).
pub fn shallow_qfi_bound(rho_in: &[LabeledState], spec: &CircuitSpec, terms: &[Observable]) -> Result<ShallowReport> {
    let n = spec.num_sites();
    let site_states = site_factors(rho_in, n)?;
    let q = light_cone_q(spec)?;
    let variances = terms
        .iter()
        .map(|t| {
            let op = SiteOperator::from_observable(t)?;
            product_variance(&site_states, &heisenberg(spec, &op, None, 0.0)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let bound = 4.0 * q as f64 * variances.iter().sum::<f64>();
    let exact_qfi = if n <= EXACT_QFI_MAX_SITES && !terms.is_empty() {
        let out = spec.apply(&LabeledState::product(&site_states)?, 0.0)?;
        let h = Observable::sum(terms)?;
        Some(qfi_matrix(&out, &[h])?.matrix[(0, 0)])
    } else if terms.is_empty() {
        Some(0.0)
    } else {
        None
    };
    Ok(ShallowReport { q, variances, bound, exact_qfi })
}

/// Bound for a parameter embedded in the gates themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedReport {
    /// `Σ_α Var(ρ, H̃_{j,α})` per layer `j = 1..D`.
    pub layer_variances: Vec<f64>,
    /// `4 Σ_j D(2j+D+4) Σ_α Var(ρ, H̃_{j,α})`.
    pub bound: f64,
    /// `F_Q(ρ, Σ H̃_{j,α})` from the QFI formula, for small registers.
    pub exact_qfi: Option<f64>,
    /// The same QFI from the fidelity of `σ(0)` and `σ(δ)`.
    pub finite_difference_qfi: Option<f64>,
}

impl EmbeddedReport {
    pub fn to_json(&self) -> serde_json::Value {
        round_json(json!({
            "model": "embedded_parameter",
            "our_bound": json_f64(self.bound),
            "layer_variances": self.layer_variances,
            "exact_qfi": self.exact_qfi.map(json_f64),
            "finite_difference_qfi": self.finite_difference_qfi.map(json_f64),
        }))
    }
}

/// Lifted gate generators `H̃_{j,α} = U_{≤j}† H_{j,α} U_{≤j}` (layer `j`
/// included), grouped by layer.
pub fn lifted_gate_generators(spec: &CircuitSpec) -> Result<Vec<Vec<SiteOperator>>> {
    spec.layers()
        .iter()
        .enumerate()
        .map(|(j, layer)| {
            layer
                .iter()
                .filter_map(|g| g.generator.as_ref().map(|h| (g, h)))
                .map(|(g, h)| {
                    let op = SiteOperator { sites: g.sites.clone(), matrix: h.clone() };
                    heisenberg(spec, &op, Some(j + 1), 0.0)
                })
                .collect()
        })
        .collect()
}

/// Fidelity-based QFI at `θ = 0` of `σ(θ) = U(θ) ρ U(θ)†`: `8(1 − F)/δ²`,
/// Richardson-extrapolated from steps `δ` and `δ/2`.
pub fn finite_difference_qfi(rho: &LabeledState, spec: &CircuitSpec, delta: f64) -> Result<f64> {
    let base = spec.apply(rho, 0.0)?;
    let estimate = |d: f64| -> Result<f64> {
        let moved = spec.apply(rho, d)?;
        let f = if base.is_pure() && moved.is_pure() {
            base.overlap_up_to_phase(&moved)?
        } else {
            linalg::root_fidelity(&base.density_matrix()?, &moved.density_matrix()?)
        };
        Ok(8.0 * (1.0 - f) / (d * d))
    };
    let coarse = estimate(delta)?;
    let fine = estimate(delta / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `F_Q ≤ 4 Σ_j D(2j+D+4) Σ_α Var(ρ, H̃_{j,α})` on a chain with gate-embedded
/// parameter; product input as for [`shallow_qfi_bound`].
pub fn embedded_param_qfi_bound(rho_in: &[LabeledState], spec: &CircuitSpec) -> Result<EmbeddedReport> {
    if spec.geometry() != Geometry::Chain1d {
        return Err(Error::UnsupportedGeometry("the embedded-parameter bound is derived for chains only".into()));
    }
    let n = spec.num_sites();
    let site_states = site_factors(rho_in, n)?;
    let lifted = lifted_gate_generators(spec)?;
    let d = spec.depth() as f64;
    let mut layer_variances = Vec::with_capacity(lifted.len());
    let mut bound = 0.0;
    for (j, ops) in lifted.iter().enumerate() {
        let v: f64 = ops.iter().map(|op| product_variance(&site_states, op)).sum::<Result<f64>>()?;
        let jj = (j + 1) as f64;
        bound += 4.0 * d * (2.0 * jj + d + 4.0) * v;
        layer_variances.push(v);
    }
    let (exact_qfi, finite_difference_qfi) = if n <= EXACT_QFI_MAX_SITES {
        let rho = LabeledState::product(&site_states)?;
        let terms: Vec<Observable> = lifted.iter().flatten().map(|op| op.to_observable()).collect::<Result<_>>()?;
        let exact = if terms.is_empty() {
            0.0
        } else {
            let all = Observable::sum(&terms)?;
            qfi_matrix(&rho, &[all])?.matrix[(0, 0)]
        };
        (Some(exact), Some(finite_difference_qfi(&rho, spec, FD_STEP)?))
    } else {
        (None, None)
    };
    Ok(EmbeddedReport { layer_variances, bound, exact_qfi, finite_difference_qfi })
}
