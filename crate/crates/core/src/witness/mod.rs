//! Closed-form precision bounds usable as entanglement witnesses, and
//! light-cone bounds on the QFI of states made by shallow circuits.

mod chain;
mod circuit;
mod shallow;

pub use chain::{
    ising_bound_compare, spin_chain_mse_bound, spin_chain_report, IsingComparison, SiteVariances, SpinChainSpec,
    ISING_EPS_CRITICAL,
};
pub use circuit::{
    brickwork_chain, brickwork_lattice, exact_lightcone_check, heisenberg, identity_layers, light_cone_q,
    random_generic, with_random_generators, CircuitSpec, Gate, Geometry, LightconeReport, SiteOperator,
    MAX_CONJUGATED_SUPPORT,
};
pub use shallow::{
    embedded_param_qfi_bound, finite_difference_qfi, lifted_gate_generators, shallow_qfi_bound, EmbeddedReport,
    ShallowReport, EXACT_QFI_MAX_SITES, FD_STEP,
};
