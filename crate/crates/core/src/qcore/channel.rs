use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::qcore::QubitLabel;
use crate::tol::Tolerances;

/// Completely positive trace-preserving map in Kraus form on a labeled
/// sub-register.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    support: Vec<QubitLabel>,
    kraus: Vec<CMatrix>,
}

impl Channel {
    pub fn new(support: Vec<QubitLabel>, kraus: Vec<CMatrix>) -> Result<Self> {
        let d = 1usize << support.len();
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("no Kraus operators".into()));
        }
        if BTreeSet::from_iter(&support).len() != support.len() {
            return Err(Error::LabelMismatch("channel support repeats a qubit".into()));
        }
        for k in &kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::InvalidChannel(format!("Kraus operator is not {d}x{d}")));
            }
        }
        let sum = kraus.iter().fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
        let defect = linalg::max_abs_diff(&sum, &linalg::identity(d));
        if defect > Tolerances::current().kraus {
            return Err(Error::InvalidChannel(format!("completeness defect {defect:e}")));
        }
        Ok(Channel { support, kraus })
    }

    pub fn support(&self) -> &[QubitLabel] {
        &self.support
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn identity(support: Vec<QubitLabel>) -> Self {
        let d = 1 << support.len();
        Channel { support, kraus: vec![linalg::identity(d)] }
    }

    pub fn unitary(support: Vec<QubitLabel>, u: CMatrix) -> Result<Self> {
        Channel::new(support, vec![u])
    }

    /// `ρ ↦ (1-p) ρ + p·1/d` on the whole support, `0 ≤ p ≤ 1`.
    pub fn depolarizing(support: Vec<QubitLabel>, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidChannel(format!("depolarizing strength {p} outside [0,1]")));
        }
        let n = support.len();
        let d = (1usize << n) as f64;
        let paulis = [linalg::identity(2), linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z()];
        let mut kraus = Vec::with_capacity(1 << (2 * n));
        for idx in 0..1usize << (2 * n) {
            let factors: Vec<&CMatrix> = (0..n).map(|q| &paulis[(idx >> (2 * (n - 1 - q))) & 3]).collect();
            let pauli = linalg::kron_all(factors);
            let weight = if idx == 0 { 1.0 - p * (d * d - 1.0) / (d * d) } else { p / (d * d) };
            if weight > 0.0 {
                kraus.push(pauli.scale(weight.sqrt()));
            }
        }
        Channel::new(support, kraus)
    }

    /// Single-qubit phase flip with probability `p`.
    pub fn dephasing(q: QubitLabel, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidChannel(format!("dephasing probability {p} outside [0,1]")));
        }
        Channel::new(vec![q], vec![linalg::identity(2).scale((1.0 - p).sqrt()), linalg::pauli_z().scale(p.sqrt())])
    }

    pub fn amplitude_damping(q: QubitLabel, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidChannel(format!("damping {gamma} outside [0,1]")));
        }
        let z = linalg::ZERO;
        let k0 = CMatrix::from_row_slice(2, 2, &[linalg::ONE, z, z, C64::new((1.0 - gamma).sqrt(), 0.0)]);
        let k1 = CMatrix::from_row_slice(2, 2, &[z, C64::new(gamma.sqrt(), 0.0), z, z]);
        Channel::new(vec![q], vec![k0, k1])
    }

    /// Random channel with `rank` Kraus operators, cut from a Haar isometry.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, support: Vec<QubitLabel>, rank: usize) -> Result<Self> {
        let d = 1usize << support.len();
        let iso = linalg::random_isometry(rng, d * rank, d);
        let kraus = (0..rank).map(|a| iso.rows(a * d, d).into_owned()).collect();
        Channel::new(support, kraus)
    }

    /// Same channel acting on other qubits.
    pub fn relabeled(&self, support: Vec<QubitLabel>) -> Result<Self> {
        Channel::new(support, self.kraus.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constructors_are_complete() {
        let q = QubitLabel::site(0);
        Channel::depolarizing(vec![q], 0.3).unwrap();
        Channel::depolarizing(vec![q, QubitLabel::site(1)], 1.0).unwrap();
        Channel::dephasing(q, 0.2).unwrap();
        Channel::amplitude_damping(q, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = Channel::random(&mut rng, vec![q, QubitLabel::site(1)], 3).unwrap();
        assert_eq!(c.kraus().len(), 3);
    }

    #[test]
    fn rejects_incomplete() {
        let q = QubitLabel::site(0);
        assert!(Channel::new(vec![q], vec![linalg::pauli_z().scale(0.5)]).is_err());
        assert!(Channel::depolarizing(vec![q], 1.5).is_err());
    }
}
