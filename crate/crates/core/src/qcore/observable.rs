use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::netgraph::{GeneratorSpec, SignalLayout};
use crate::qcore::QubitLabel;
use crate::tol::Tolerances;

/// Hermitian operator on a labeled sub-register.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    support: Vec<QubitLabel>,
    matrix: CMatrix,
}

impl Observable {
    pub fn new(support: Vec<QubitLabel>, matrix: CMatrix) -> Result<Self> {
        let dim = 1usize << support.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidSize(format!(
                "observable on {} qubits needs a {dim}x{dim} matrix, got {}x{}",
                support.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let uniq: BTreeSet<_> = support.iter().collect();
        if uniq.len() != support.len() {
            return Err(Error::LabelMismatch("observable support repeats a qubit".into()));
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > Tolerances::current().hermitian {
            return Err(Error::InvalidState(format!("observable is not Hermitian (defect {defect:e})")));
        }
        Ok(Observable { support, matrix })
    }

    /// Hermitian part of `matrix`, for operators assembled from round-off-prone
    /// products.
    pub fn new_symmetrized(support: Vec<QubitLabel>, matrix: CMatrix) -> Result<Self> {
        Observable::new(support, linalg::hermitian_part(&matrix))
    }

    pub fn support(&self) -> &[QubitLabel] {
        &self.support
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn pauli_z(q: QubitLabel) -> Self {
        Observable { support: vec![q], matrix: linalg::pauli_z() }
    }

    pub fn z_half(q: QubitLabel) -> Self {
        Observable { support: vec![q], matrix: linalg::pauli_z().scale(0.5) }
    }

    /// `Σ_q Z_q / 2` over the given qubits (zero operator for an empty list).
    pub fn collective_z_half(qubits: &[QubitLabel]) -> Self {
        let n = qubits.len();
        let diag = CVector::from_iterator(
            1 << n,
            (0..1usize << n).map(|i| {
                let ones = i.count_ones() as f64;
                C64::new((n as f64 - 2.0 * ones) / 2.0, 0.0)
            }),
        );
        Observable { support: qubits.to_vec(), matrix: CMatrix::from_diagonal(&diag) }
    }

    pub fn identity(qubits: &[QubitLabel]) -> Self {
        Observable { support: qubits.to_vec(), matrix: linalg::identity(1 << qubits.len()) }
    }

    /// Rank-one projector onto `ket` (normalized internally).
    pub fn projector(qubits: &[QubitLabel], ket: &CVector) -> Result<Self> {
        if ket.len() != 1 << qubits.len() {
            return Err(Error::InvalidSize("projector ket has wrong dimension".into()));
        }
        let n = ket.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("projector ket is zero".into()));
        }
        let k = ket / C64::new(n, 0.0);
        Ok(Observable { support: qubits.to_vec(), matrix: &k * k.adjoint() })
    }

    /// Projector onto the unphased GHZ state of the given qubits.
    pub fn ghz_projector(qubits: &[QubitLabel]) -> Self {
        let ket = ghz_ket(qubits.len(), 0.0);
        Observable { support: qubits.to_vec(), matrix: &ket * ket.adjoint() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Observable { support: self.support.clone(), matrix: self.matrix.scale(c) }
    }

    /// `self + c·1`.
    pub fn shifted(&self, c: f64) -> Self {
        let d = self.matrix.nrows();
        Observable { support: self.support.clone(), matrix: &self.matrix + linalg::identity(d).scale(c) }
    }

    /// This operator re-expressed on a superset of its support.
    pub fn embedded(&self, on: &[QubitLabel]) -> Result<CMatrix> {
        let pos = positions_in(on, &self.support)?;
        let space: Vec<usize> = (0..on.len()).collect();
        Ok(linalg::embed(&self.matrix, &pos, &space))
    }

    /// Sum of observables on the union of their supports.
    pub fn sum(terms: &[Observable]) -> Result<Observable> {
        let mut support: Vec<QubitLabel> = Vec::new();
        for t in terms {
            for q in &t.support {
                if !support.contains(q) {
                    support.push(*q);
                }
            }
        }
        support.sort();
        let d = 1usize << support.len();
        let mut m = CMatrix::zeros(d, d);
        for t in terms {
            m += t.embedded(&support)?;
        }
        Ok(Observable { support, matrix: m })
    }

    /// Operator norm.
    pub fn norm(&self) -> f64 {
        linalg::operator_norm_hermitian(&self.matrix)
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        linalg::max_abs_diff(&(&self.matrix * &self.matrix), &self.matrix) <= tol
    }
}

/// `(|0…0⟩ + e^{iφ}|1…1⟩)/√2` as a plain vector.
pub fn ghz_ket(n: usize, phase: f64) -> CVector {
    let mut v = CVector::zeros(1 << n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    v[0] = C64::new(h, 0.0);
    let last = (1 << n) - 1;
    v[last] += C64::from_polar(h, phase);
    v
}

/// Positions of `labels` inside `register`.
pub fn positions_in(register: &[QubitLabel], labels: &[QubitLabel]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            register
                .iter()
                .position(|r| r == l)
                .ok_or_else(|| Error::SupportMismatch(format!("qubit {l} not in register")))
        })
        .collect()
}

/// Concrete generator observables of a layout on a given register.
pub fn resolve_generators(layout: &SignalLayout, register: &[QubitLabel]) -> Result<Vec<Observable>> {
    layout
        .signals()
        .iter()
        .zip(layout.generators())
        .map(|(sig, spec)| match spec {
            GeneratorSpec::CollectiveZHalf => {
                let qubits: Vec<QubitLabel> = register.iter().copied().filter(|q| sig.contains(&q.vertex())).collect();
                Ok(Observable::collective_z_half(&qubits))
            }
            GeneratorSpec::Explicit { qubits, matrix } => {
                if let Some(q) = qubits.iter().find(|q| !sig.contains(&q.vertex())) {
                    return Err(Error::SupportMismatch(format!("generator acts on {q}, outside its signal {sig:?}")));
                }
                Observable::new(qubits.clone(), matrix.clone())
            }
        })
        .collect()
}

/// `h_max`: the largest generator norm.
pub fn max_generator_norm(generators: &[Observable]) -> f64 {
    generators.iter().map(Observable::norm).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collective_z_spectrum() {
        let qs = crate::qcore::label::sites(3);
        let h = Observable::collective_z_half(&qs);
        assert!((h.norm() - 1.5).abs() < 1e-12);
        let sum = Observable::sum(&qs.iter().map(|&q| Observable::z_half(q)).collect::<Vec<_>>()).unwrap();
        assert!(linalg::max_abs_diff(sum.matrix(), h.matrix()) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[linalg::ZERO, linalg::ONE, linalg::ZERO, linalg::ZERO]);
        assert!(Observable::new(vec![QubitLabel::site(0)], m).is_err());
        assert!(Observable::new(vec![QubitLabel::site(0)], linalg::identity(4)).is_err());
    }

    #[test]
    fn ghz_projector_is_projector() {
        let p = Observable::ghz_projector(&crate::qcore::label::sites(3));
        assert!(p.is_projector(1e-12));
    }
}
