//! Quantum Fisher information, the network-state precision bounds, and the
//! covariance and T-matrix decompositions behind them.

mod bounds;
mod cov;
mod qfi;
mod tdecomp;

pub use bounds::{
    bound_certificate, matrix_crb, mse_bound_from_parts, mse_lower_bound, qfi_diag_bound, signal_variances,
    verify_qfi_bound, BoundCertificate, QfiBoundCheck,
};
pub use cov::{cov_decompose, cov_decompose_with, cov_matrix, CovDecomposition, CovMatrix, ProductState};
pub use qfi::{generator_derivative, qfi_matrix, qfi_matrix_full_spectrum, qfi_matrix_with, sld_operators, QfiMatrix};
pub use tdecomp::{
    dilated_channel_output, dilation_unitary, t_decompose, t_decompose_with, TConditions, TDecomposition,
};
