//! Numerical tolerances used throughout the crate.
//!
//! The defaults can be replaced once per process with [`Tolerances::install`];
//! the CLI does this from the `QNM_TOL` environment variable.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed deviation of a pure state's norm from one.
    pub norm: f64,
    /// Allowed deviation of a density matrix trace from one.
    pub trace: f64,
    /// Smallest admissible eigenvalue of a density matrix.
    pub state_psd: f64,
    /// Allowed entrywise anti-Hermitian part of observables and states.
    pub hermitian: f64,
    /// Completeness defect of Kraus operators.
    pub kraus: f64,
    /// Idempotency defect of projectors.
    pub projector: f64,
    /// Eigenvalue-sum cutoff in the QFI formula.
    pub rank_cutoff: f64,
    /// PSD-ordering tolerance for QFI bound certificates.
    pub psd_order: f64,
    /// Overlap tolerance for equality of pure states up to phase.
    pub phase_equal: f64,
    /// Operator-norm threshold below which an operator acts trivially on a qubit.
    pub trivial_action: f64,
    /// Probability below which a post-selection branch is impossible.
    pub zero_probability: f64,
    /// Variances within this distance below zero are clipped to zero.
    pub variance_clip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: 1e-10,
            trace: 1e-10,
            state_psd: 1e-10,
            hermitian: 1e-12,
            kraus: 1e-10,
            projector: 1e-10,
            rank_cutoff: 1e-12,
            psd_order: 1e-8,
            phase_equal: 1e-9,
            trivial_action: 1e-10,
            zero_probability: 1e-14,
            variance_clip: 1e-12,
        }
    }
}

static INSTALLED: OnceLock<Tolerances> = OnceLock::new();

impl Tolerances {
    /// The process-wide tolerances (defaults unless installed).
    pub fn current() -> &'static Tolerances {
        INSTALLED.get_or_init(Tolerances::default)
    }

    /// Install process-wide tolerances. Returns false if tolerances were
    /// already fixed, either by an earlier install or by a read.
    pub fn install(t: Tolerances) -> bool {
        INSTALLED.set(t).is_ok()
    }

    /// Parse overrides of the form `key=value,key=value` on top of the defaults.
    pub fn parse_overrides(spec: &str) -> Result<Tolerances, String> {
        let mut t = Tolerances::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let v: f64 = value.trim().parse().map_err(|_| format!("bad number `{value}` for `{key}`"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("tolerance `{key}` must be finite and non-negative"));
            }
            let slot = match key.trim() {
                "norm" => &mut t.norm,
                "trace" => &mut t.trace,
                "state_psd" => &mut t.state_psd,
                "hermitian" => &mut t.hermitian,
                "kraus" => &mut t.kraus,
                "projector" => &mut t.projector,
                "rank_cutoff" => &mut t.rank_cutoff,
                "psd_order" => &mut t.psd_order,
                "phase_equal" => &mut t.phase_equal,
                "trivial_action" => &mut t.trivial_action,
                "zero_probability" => &mut t.zero_probability,
                "variance_clip" => &mut t.variance_clip,
                other => return Err(format!("unknown tolerance `{other}`")),
            };
            *slot = v;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse() {
        let t = Tolerances::parse_overrides("psd_order=1e-6, norm=1e-9").unwrap();
        assert_eq!(t.psd_order, 1e-6);
        assert_eq!(t.norm, 1e-9);
        assert_eq!(t.kraus, Tolerances::default().kraus);
        assert!(Tolerances::parse_overrides("bogus=1").is_err());
        assert!(Tolerances::parse_overrides("norm").is_err());
        assert!(Tolerances::parse_overrides("norm=-1").is_err());
    }
}
