use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg;
use crate::metro::qfi::{qfi_matrix, QfiMatrix};
use crate::netgraph::{influences, Hypergraph, SignalLayout};
use crate::qcore::{resolve_generators, LabeledState, MAX_MIXED_QUBITS};
use crate::report::{json_f64, round_json};
use crate::tol::Tolerances;

fn check_repetitions(nu: u64) -> Result<()> {
    if nu == 0 {
        return Err(Error::InvalidConfig("repetition count must be at least 1".into()));
    }
    Ok(())
}

/// `Var(ρ, H_s)` for every signal of the layout.
pub fn signal_variances(layout: &SignalLayout, rho: &LabeledState) -> Result<Vec<f64>> {
    resolve_generators(layout, rho.register())?.iter().map(|h| rho.variance(h)).collect()
}

/// `Σ_s α_s² / (4 ν k_s v_s)`; terms with `α_s = 0` vanish, a zero variance
/// under a nonzero weight makes the bound `+∞`.
pub fn mse_bound_from_parts(weights: &[f64], k: &[usize], variances: &[f64], nu: u64) -> Result<f64> {
    check_repetitions(nu)?;
    let mut total = 0.0;
    for ((&a, &ks), &v) in weights.iter().zip(k).zip(variances) {
        if a == 0.0 {
            continue;
        }
        if v <= Tolerances::current().variance_clip {
            return Ok(f64::INFINITY);
        }
        total += a * a / (4.0 * nu as f64 * ks as f64 * v);
    }
    Ok(total)
}

/// Lower bound on the mean squared error of any estimator of `θ(α)` from
/// `ν` copies of a network state.
pub fn mse_lower_bound(g: &Hypergraph, layout: &SignalLayout, rho: &LabeledState, nu: u64) -> Result<f64> {
    let k = influences(g, layout)?;
    let vars = signal_variances(layout, rho)?;
    mse_bound_from_parts(layout.weights(), &k, &vars, nu)
}

/// `diag{4 k_s Var(ρ, H_s)}`, an upper bound on the QFI matrix of a
/// network state.
pub fn qfi_diag_bound(g: &Hypergraph, layout: &SignalLayout, rho: &LabeledState) -> Result<QfiMatrix> {
    let k = influences(g, layout)?;
    let vars = signal_variances(layout, rho)?;
    let diag = DVector::from_iterator(k.len(), k.iter().zip(&vars).map(|(&ks, &v)| 4.0 * ks as f64 * v));
    Ok(QfiMatrix::new(DMatrix::from_diagonal(&diag)))
}

/// Outcome of comparing the diagonal bound with the exact QFI matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QfiBoundCheck {
    pub holds: bool,
    pub min_eigenvalue_of_gap: f64,
    pub qfi: QfiMatrix,
    pub diag: QfiMatrix,
}

/// Check `diag{4 k_s Var} − F_Q ≥ 0` through the smallest eigenvalue of the
/// difference.
pub fn verify_qfi_bound(g: &Hypergraph, layout: &SignalLayout, rho: &LabeledState) -> Result<QfiBoundCheck> {
    if rho.num_qubits() > MAX_MIXED_QUBITS {
        return Err(Error::TooLarge(format!(
            "bound verification needs an eigendecomposition on {} qubits",
            rho.num_qubits()
        )));
    }
    let gens = resolve_generators(layout, rho.register())?;
    let qfi = qfi_matrix(rho, &gens)?;
    let diag = qfi_diag_bound(g, layout, rho)?;
    let gap = linalg::min_eigenvalue_symmetric(&(&diag.matrix - &qfi.matrix));
    Ok(QfiBoundCheck { holds: gap >= -Tolerances::current().psd_order, min_eigenvalue_of_gap: gap, qfi, diag })
}

/// Matrix Cramér–Rao bound `(1/ν) αᵀ F⁻¹ α`; a singular `F` is pseudo-inverted.
pub fn matrix_crb(qfi: &QfiMatrix, nu: u64, alpha: &[f64]) -> Result<f64> {
    check_repetitions(nu)?;
    let n = qfi.matrix.nrows();
    if alpha.len() != n {
        return Err(Error::InvalidSize(format!("{} weights for a {n}x{n} QFI matrix", alpha.len())));
    }
    let sym = (&qfi.matrix + qfi.matrix.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = Tolerances::current().rank_cutoff * scale.max(1.0);
    let a = DVector::from_column_slice(alpha);
    let mut total = 0.0;
    let mut singular = false;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        let proj = eig.eigenvectors.column(i).dot(&a);
        if lam.abs() <= cut {
            singular = true;
            continue;
        }
        total += proj * proj / lam;
    }
    if singular {
        warn!("QFI matrix is singular; using the pseudo-inverse");
    }
    Ok(total / nu as f64)
}

/// Summary of the precision bound for one network state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub bound: f64,
    pub qfi_trace: f64,
    pub gap_min_eig: f64,
    pub holds: bool,
    pub k_values: Vec<usize>,
    pub variances: Vec<f64>,
}

impl BoundCertificate {
    pub fn to_json(&self) -> serde_json::Value {
        round_json(json!({
            "bound": json_f64(self.bound),
            "qfi_trace": json_f64(self.qfi_trace),
            "gap_min_eig": json_f64(self.gap_min_eig),
            "holds": self.holds,
            "k_values": self.k_values,
            "variances": self.variances,
        }))
    }
}

/// MSE bound, exact QFI trace and the diagonal-bound check for one state.
pub fn bound_certificate(
    g: &Hypergraph,
    layout: &SignalLayout,
    rho: &LabeledState,
    nu: u64,
) -> Result<BoundCertificate> {
    let check = verify_qfi_bound(g, layout, rho)?;
    let k = influences(g, layout)?;
    let vars = signal_variances(layout, rho)?;
    Ok(BoundCertificate {
        bound: mse_bound_from_parts(layout.weights(), &k, &vars, nu)?,
        qfi_trace: check.qfi.trace(),
        gap_min_eig: check.min_eigenvalue_of_gap,
        holds: check.holds,
        k_values: k,
        variances: vars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::fixtures;
    use crate::qcore::{assemble_network_state, ghz_sources, sites};

    fn triangle_state() -> (Hypergraph, LabeledState) {
        let g = fixtures::triangle();
        let st = assemble_network_state(&g, &ghz_sources(&g).unwrap(), None, None).unwrap();
        (g, st)
    }

    #[test]
    fn triangle_examples() {
        let (g, st) = triangle_state();
        let layout = SignalLayout::singletons_average(&g).unwrap();
        let b = mse_lower_bound(&g, &layout, &st, 1).unwrap();
        assert!((b - 1.0 / 12.0).abs() < 1e-12);
        let d = qfi_diag_bound(&g, &layout, &st).unwrap();
        assert!((d.matrix.clone() - DMatrix::from_diagonal_element(3, 3, 4.0)).abs().max() < 1e-12);
        let check = verify_qfi_bound(&g, &layout, &st).unwrap();
        assert!(check.holds);
        let crb = matrix_crb(&d, 1, layout.weights()).unwrap();
        assert!((crb - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_bounds() {
        let (g, st) = triangle_state();
        let zero = SignalLayout::singletons(&g, vec![0.0; 3]).unwrap();
        assert_eq!(mse_lower_bound(&g, &zero, &st, 1).unwrap(), 0.0);
        let flat = LabeledState::product(
            &crate::qcore::network_register(&g).into_iter().map(LabeledState::zero).collect::<Vec<_>>(),
        )
        .unwrap();
        let avg = SignalLayout::singletons_average(&g).unwrap();
        assert_eq!(mse_lower_bound(&g, &avg, &flat, 1).unwrap(), f64::INFINITY);
        assert!(matches!(mse_lower_bound(&g, &avg, &st, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn separable_probe_without_edges() {
        let g = Hypergraph::new(3, vec![]).unwrap();
        let layout = SignalLayout::new(
            &g,
            vec![vec![0], vec![1], vec![2]],
            vec![crate::netgraph::GeneratorSpec::CollectiveZHalf; 3],
            vec![1.0; 3],
        )
        .unwrap();
        let regs: Vec<LabeledState> = sites(3).into_iter().map(LabeledState::plus).collect();
        let st = LabeledState::product(&regs).unwrap();
        let d = qfi_diag_bound(&g, &layout, &st).unwrap();
        assert!((d.matrix - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn crb_examples() {
        let f = QfiMatrix::new(DMatrix::from_diagonal_element(3, 3, 4.0));
        let a = [1.0 / 3.0; 3];
        assert!((matrix_crb(&f, 1, &a).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((matrix_crb(&f, 10, &a).unwrap() - 1.0 / 120.0).abs() < 1e-15);
        let m = 5.0;
        let single = QfiMatrix::new(DMatrix::from_element(1, 1, m * m));
        assert!((matrix_crb(&single, 1, &[1.0]).unwrap() - 1.0 / (m * m)).abs() < 1e-15);
        let sing = QfiMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0])));
        assert!((matrix_crb(&sing, 1, &[1.0, 1.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn certificate_json_fields() {
        let (g, st) = triangle_state();
        let layout = SignalLayout::singletons_average(&g).unwrap();
        let c = bound_certificate(&g, &layout, &st, 1).unwrap();
        let v = c.to_json();
        for key in ["bound", "qfi_trace", "gap_min_eig", "k_values", "variances"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(c.k_values, vec![2, 2, 2]);
    }
}
