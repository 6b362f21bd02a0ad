//! Weighted-sum estimation over a GHZ network with local post-selection:
//! exact and sampled simulation, the signal-state recurrence, the
//! success-probability bound and the privacy audit.

mod branches;
mod config;
mod exact;

pub use branches::{
    branch_table, privacy_audit, run_sampled, run_sampled_with, sample_rng, Branch, BranchTable, PrivacyReport,
    SampledTrace, SubsetAudit, MAX_BRANCH_SENSORS, PRIVACY_DISTANCE_TOL, PRIVACY_PROBABILITY_TOL, SAMPLE_CHUNK,
};
pub use config::{normalize_weights, Mode, NormalizedWeights, ProtocolConfig, ProtocolDocument};
pub use exact::{
    fisher_information_of_estimate, run_exact, run_exact_with_order, signal_state_predict, success_exponent,
    success_prob_lower_bound, FisherReport, ProtocolTrace, SignalStep, StepRecord, FI_STEP,
};
