//! Simulation toolkit for multiparameter estimation on quantum sensor
//! networks: network topology, labeled quantum states, Fisher-information
//! bounds and their decompositions, the shallow-circuit witness, and the
//! weighted-sum estimation protocol.

pub mod error;
pub mod linalg;
pub mod netgraph;
pub mod par;
pub mod qcore;
pub mod tol;

pub use error::{Error, Result};
pub mod metro;
pub mod protocol;
pub mod report;
pub mod witness;
