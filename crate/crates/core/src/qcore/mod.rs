//! Labeled qubit registers, states, observables and channels.

mod channel;
pub mod label;
mod network;
mod observable;
mod state;

pub use channel::Channel;
pub use label::{sites, QubitLabel};
pub use network::{
    assemble_network_state, edge_labels, ghz_source, ghz_sources, mix, network_register, random_local_channels,
    random_source, ChannelAssignment,
};
pub use observable::{ghz_ket, max_generator_norm, positions_in, resolve_generators, Observable};
pub use state::{ghz_state, LabeledState, MAX_MIXED_QUBITS, MAX_PURE_QUBITS};
