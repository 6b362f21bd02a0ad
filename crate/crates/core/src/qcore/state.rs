use std::collections::BTreeSet;

use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::qcore::observable::{ghz_ket, positions_in, Observable};
use crate::qcore::{Channel, QubitLabel};
use crate::tol::Tolerances;

/// Largest register held as a state vector.
pub const MAX_PURE_QUBITS: usize = 20;
/// Largest register held as a dense density matrix.
pub const MAX_MIXED_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Pure(CVector),
    /// `ρ = Σ_a |φ_a⟩⟨φ_a|` with unnormalized components; what a pure state
    /// becomes under a channel before the rank reaches the dimension.
    Factored(Vec<CVector>),
    Mixed(CMatrix),
}

/// Quantum state over an ordered register of labeled qubits.
///
/// States stay in vector form until a channel or partial trace forces a
/// mixture. Every operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    register: Vec<QubitLabel>,
    repr: Repr,
}

fn check_unique(register: &[QubitLabel]) -> Result<()> {
    let set: BTreeSet<_> = register.iter().collect();
    if set.len() != register.len() {
        return Err(Error::LabelMismatch("register repeats a qubit label".into()));
    }
    Ok(())
}

fn check_dim(register: &[QubitLabel], len: usize) -> Result<()> {
    if len != 1usize << register.len() {
        return Err(Error::InvalidSize(format!(
            "{} qubits need dimension {}, got {len}",
            register.len(),
            1usize << register.len()
        )));
    }
    Ok(())
}

fn too_large_mixed(n: usize) -> Result<()> {
    if n > MAX_MIXED_QUBITS {
        return Err(Error::TooLarge(format!("density matrix on {n} qubits exceeds {MAX_MIXED_QUBITS}")));
    }
    Ok(())
}

impl LabeledState {
    /// Pure state from amplitudes; the norm must be one.
    pub fn pure(register: Vec<QubitLabel>, amplitudes: CVector) -> Result<Self> {
        check_unique(&register)?;
        check_dim(&register, amplitudes.len())?;
        if register.len() > MAX_PURE_QUBITS {
            return Err(Error::TooLarge(format!("{} qubits", register.len())));
        }
        let n = amplitudes.norm();
        if (n - 1.0).abs() > Tolerances::current().norm {
            return Err(Error::InvalidState(format!("state norm {n} is not one")));
        }
        Ok(LabeledState { register, repr: Repr::Pure(amplitudes) })
    }

    /// Pure state from any nonzero vector, normalizing it.
    pub fn pure_normalized(register: Vec<QubitLabel>, amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        LabeledState::pure(register, amplitudes / C64::new(n, 0.0))
    }

    /// Mixed state from a density matrix.
    pub fn mixed(register: Vec<QubitLabel>, rho: CMatrix) -> Result<Self> {
        check_unique(&register)?;
        check_dim(&register, rho.nrows())?;
        check_dim(&register, rho.ncols())?;
        too_large_mixed(register.len())?;
        let tol = Tolerances::current();
        let herm = linalg::hermiticity_defect(&rho);
        if herm > tol.hermitian {
            return Err(Error::InvalidState(format!("density matrix Hermiticity defect {herm:e}")));
        }
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::InvalidState(format!("density matrix trace {tr}")));
        }
        let min = linalg::min_eigenvalue_hermitian(&rho);
        if min < -tol.state_psd {
            return Err(Error::InvalidState(format!("density matrix eigenvalue {min:e}")));
        }
        Ok(LabeledState { register, repr: Repr::Mixed(rho) })
    }

    /// Mixture `Σ_a |φ_a⟩⟨φ_a|` of unnormalized components (total weight one).
    pub fn ensemble(register: Vec<QubitLabel>, components: Vec<CVector>) -> Result<Self> {
        check_unique(&register)?;
        if components.is_empty() {
            return Err(Error::InvalidState("empty ensemble".into()));
        }
        for c in &components {
            check_dim(&register, c.len())?;
        }
        let total: f64 = components.iter().map(|c| c.norm_squared()).sum();
        if (total - 1.0).abs() > Tolerances::current().trace {
            return Err(Error::InvalidState(format!("ensemble weight {total}")));
        }
        Ok(LabeledState { register, repr: Repr::Factored(components) }.compacted())
    }

    pub fn zero(q: QubitLabel) -> Self {
        LabeledState { register: vec![q], repr: Repr::Pure(CVector::from_vec(vec![linalg::ONE, ZERO])) }
    }

    pub fn plus(q: QubitLabel) -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        LabeledState { register: vec![q], repr: Repr::Pure(CVector::from_vec(vec![h, h])) }
    }

    /// `(|0⟩ + e^{iθ}|1⟩)/√2`.
    pub fn plus_phased(q: QubitLabel, theta: f64) -> Self {
        LabeledState { register: vec![q], repr: Repr::Pure(ghz_ket(1, theta)) }
    }

    pub fn maximally_mixed(register: Vec<QubitLabel>) -> Result<Self> {
        let d = 1usize << register.len();
        LabeledState::mixed(register, linalg::identity(d).scale(1.0 / d as f64))
    }

    /// Tensor product of the given states, left to right.
    pub fn product(states: &[LabeledState]) -> Result<Self> {
        let mut it = states.iter();
        let first = it.next().ok_or_else(|| Error::InvalidState("empty product".into()))?.clone();
        it.try_fold(first, |acc, s| acc.tensor(s))
    }

    pub fn register(&self) -> &[QubitLabel] {
        &self.register
    }

    pub fn num_qubits(&self) -> usize {
        self.register.len()
    }

    pub fn dim(&self) -> usize {
        1usize << self.register.len()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    /// Amplitudes when the state is held as a vector.
    pub fn amplitudes(&self) -> Option<&CVector> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            _ => None,
        }
    }

    /// Unnormalized components `φ_a` with `ρ = Σ|φ_a⟩⟨φ_a|`, when the state is
    /// held in vector form.
    pub fn components(&self) -> Option<Vec<&CVector>> {
        match &self.repr {
            Repr::Pure(v) => Some(vec![v]),
            Repr::Factored(vs) => Some(vs.iter().collect()),
            Repr::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> Result<CMatrix> {
        too_large_mixed(self.num_qubits())?;
        Ok(match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Factored(vs) => {
                vs.iter().fold(CMatrix::zeros(self.dim(), self.dim()), |acc, v| acc + v * v.adjoint())
            }
            Repr::Mixed(m) => m.clone(),
        })
    }

    /// The same state held as a dense density matrix.
    pub fn to_mixed(&self) -> Result<LabeledState> {
        Ok(LabeledState { register: self.register.clone(), repr: Repr::Mixed(self.density_matrix()?) })
    }

    pub fn position(&self, q: &QubitLabel) -> Result<usize> {
        self.register.iter().position(|r| r == q).ok_or_else(|| Error::UnknownQubit(q.to_string()))
    }

    fn positions(&self, qs: &[QubitLabel]) -> Result<Vec<usize>> {
        qs.iter().map(|q| self.position(q)).collect()
    }

    /// Qubits held by vertex `v`, in register order.
    pub fn qubits_of_vertex(&self, v: usize) -> Vec<QubitLabel> {
        self.register.iter().copied().filter(|q| q.vertex() == v).collect()
    }

    /// Replace the labels without touching the amplitudes.
    pub fn relabeled(&self, register: Vec<QubitLabel>) -> Result<Self> {
        if register.len() != self.register.len() {
            return Err(Error::LabelMismatch("relabeling changes the qubit count".into()));
        }
        check_unique(&register)?;
        Ok(LabeledState { register, repr: self.repr.clone() })
    }

    /// Reorder the register to `order` (a permutation of the current labels).
    pub fn permuted(&self, order: &[QubitLabel]) -> Result<Self> {
        let now: BTreeSet<_> = self.register.iter().collect();
        let want: BTreeSet<_> = order.iter().collect();
        if now != want || order.len() != self.register.len() {
            return Err(Error::LabelMismatch("target order is not a permutation of the register".into()));
        }
        let from: Vec<usize> =
            (0..order.len()).map(|i| order.iter().position(|q| *q == self.register[i]).unwrap()).collect();
        let to: Vec<usize> = (0..order.len()).collect();
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure(linalg::permute_vector(v, &from, &to)),
            Repr::Factored(vs) => Repr::Factored(vs.iter().map(|v| linalg::permute_vector(v, &from, &to)).collect()),
            Repr::Mixed(m) => Repr::Mixed(linalg::permute_operator(m, &from, &to)),
        };
        Ok(LabeledState { register: order.to_vec(), repr })
    }

    /// Register sorted into canonical order.
    pub fn canonicalized(&self) -> Self {
        let mut order = self.register.clone();
        order.sort();
        self.permuted(&order).expect("sorted register is a permutation")
    }

    pub fn tensor(&self, other: &LabeledState) -> Result<Self> {
        let mut register = self.register.clone();
        register.extend_from_slice(&other.register);
        check_unique(&register)?;
        let n = register.len();
        let repr = match (&self.repr, &other.repr) {
            (Repr::Mixed(_), _) | (_, Repr::Mixed(_)) => {
                too_large_mixed(n)?;
                Repr::Mixed(self.density_matrix()?.kronecker(&other.density_matrix()?))
            }
            (a, b) => {
                if n > MAX_PURE_QUBITS {
                    return Err(Error::TooLarge(format!("{n} qubits")));
                }
                let left = match a {
                    Repr::Pure(v) => vec![v.clone()],
                    Repr::Factored(vs) => vs.clone(),
                    Repr::Mixed(_) => unreachable!(),
                };
                let right = match b {
                    Repr::Pure(v) => vec![v.clone()],
                    Repr::Factored(vs) => vs.clone(),
                    Repr::Mixed(_) => unreachable!(),
                };
                let comps: Vec<CVector> = left.iter().flat_map(|l| right.iter().map(move |r| l.kronecker(r))).collect();
                if comps.len() == 1 {
                    Repr::Pure(comps.into_iter().next().unwrap())
                } else {
                    Repr::Factored(comps)
                }
            }
        };
        Ok(LabeledState { register, repr }.compacted())
    }

    /// Switch an over-long ensemble to a dense matrix when that is smaller.
    fn compacted(self) -> Self {
        match &self.repr {
            Repr::Factored(vs) if vs.len() > self.dim() && self.num_qubits() <= MAX_MIXED_QUBITS => {
                let rho = self.density_matrix().expect("size checked");
                LabeledState { register: self.register, repr: Repr::Mixed(rho) }
            }
            _ => self,
        }
    }

    /// Apply a unitary acting on `qubits` (in that order).
    pub fn apply_unitary(&self, qubits: &[QubitLabel], u: &CMatrix) -> Result<Self> {
        let pos = self.positions(qubits)?;
        check_dim(qubits, u.nrows())?;
        let n = self.num_qubits();
        let repr = match &self.repr {
            Repr::Pure(v) => {
                let mut w = v.clone();
                linalg::apply_local_vec(w.as_mut_slice(), n, &pos, u);
                Repr::Pure(w)
            }
            Repr::Factored(vs) => Repr::Factored(
                vs.iter()
                    .map(|v| {
                        let mut w = v.clone();
                        linalg::apply_local_vec(w.as_mut_slice(), n, &pos, u);
                        w
                    })
                    .collect(),
            ),
            Repr::Mixed(m) => Repr::Mixed(linalg::conjugate_local(m, n, &pos, u)),
        };
        Ok(LabeledState { register: self.register.clone(), repr })
    }

    /// Phase gate `e^{-iθZ/2}` on one qubit, or its X-conjugate
    /// `X e^{-iθZ/2} X` when `sign` is negative.
    pub fn apply_phase(&self, qubit: &QubitLabel, theta: f64, sign: i32) -> Result<Self> {
        let s = if sign < 0 { -1.0 } else { 1.0 };
        let half = s * theta / 2.0;
        let gate =
            CMatrix::from_row_slice(2, 2, &[C64::from_polar(1.0, -half), ZERO, ZERO, C64::from_polar(1.0, half)]);
        self.apply_unitary(std::slice::from_ref(qubit), &gate)
    }

    pub fn apply_channel(&self, channel: &Channel) -> Result<Self> {
        let pos = self.positions(channel.support())?;
        let n = self.num_qubits();
        let kraus = channel.kraus();
        let apply = |v: &CVector, k: &CMatrix| {
            let mut w = v.clone();
            linalg::apply_local_vec(w.as_mut_slice(), n, &pos, k);
            w
        };
        let repr = match &self.repr {
            Repr::Pure(v) if kraus.len() == 1 => Repr::Pure(apply(v, &kraus[0])),
            Repr::Pure(v) => {
                Repr::Factored(kraus.iter().map(|k| apply(v, k)).filter(|w| w.norm_squared() > 0.0).collect())
            }
            Repr::Factored(vs) => Repr::Factored(
                vs.iter()
                    .flat_map(|v| kraus.iter().map(move |k| (v, k)))
                    .map(|(v, k)| apply(v, k))
                    .filter(|w| w.norm_squared() > 0.0)
                    .collect(),
            ),
            Repr::Mixed(m) => {
                let mut acc = CMatrix::zeros(m.nrows(), m.ncols());
                for k in kraus {
                    acc += linalg::conjugate_local(m, n, &pos, k);
                }
                Repr::Mixed(acc)
            }
        };
        Ok(LabeledState { register: self.register.clone(), repr }.compacted())
    }

    fn reduced_at(&self, pos: &[usize]) -> CMatrix {
        let n = self.num_qubits();
        match &self.repr {
            Repr::Pure(v) => linalg::partial_trace_vec(v.as_slice(), n, pos),
            Repr::Factored(vs) => {
                let slices: Vec<&[C64]> = vs.iter().map(|v| v.as_slice()).collect();
                linalg::partial_trace_ensemble(&slices, n, pos)
            }
            Repr::Mixed(m) => linalg::partial_trace_mat(m, n, pos),
        }
    }

    /// Reduced density matrix on `keep`, in the given order.
    pub fn reduced_density(&self, keep: &[QubitLabel]) -> Result<CMatrix> {
        let pos = self.positions(keep)?;
        check_unique(keep)?;
        too_large_mixed(keep.len())?;
        Ok(self.reduced_at(&pos))
    }

    /// Reduced state on `keep`, as a mixed state.
    pub fn partial_trace(&self, keep: &[QubitLabel]) -> Result<Self> {
        let rho = self.reduced_density(keep)?;
        Ok(LabeledState { register: keep.to_vec(), repr: Repr::Mixed(rho) })
    }

    fn support_density(&self, obs: &Observable) -> Result<CMatrix> {
        let pos = positions_in(&self.register, obs.support())?;
        Ok(self.reduced_at(&pos))
    }

    /// `tr(ρ O)`.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        let rho = self.support_density(obs)?;
        Ok(linalg::trace_product(&rho, obs.matrix()).re)
    }

    /// `tr(ρ O²) − tr(ρ O)²`, clipped at zero when slightly negative.
    pub fn variance(&self, obs: &Observable) -> Result<f64> {
        let rho = self.support_density(obs)?;
        let m = obs.matrix();
        let mean = linalg::trace_product(&rho, m).re;
        let second = linalg::trace_product(&rho, &(m * m)).re;
        let var = second - mean * mean;
        Ok(if var < 0.0 && var >= -Tolerances::current().variance_clip { 0.0 } else { var })
    }

    /// Apply a projector and renormalize. Fails with `ZeroProbability` when the
    /// branch probability is below `tolerance`.
    pub fn project_and_renormalize(&self, projector: &Observable, tolerance: f64) -> Result<(f64, LabeledState)> {
        if !projector.is_projector(Tolerances::current().projector) {
            return Err(Error::InvalidState("operator is not a projector".into()));
        }
        let unnorm = self.apply_operator(projector)?;
        let p = unnorm.trace_weight();
        if p < tolerance {
            return Err(Error::ZeroProbability(p));
        }
        Ok((p, unnorm.scaled_weight(1.0 / p)))
    }

    /// `O ρ O†` (or `O|ψ⟩`), without renormalizing.
    pub(crate) fn apply_operator(&self, obs: &Observable) -> Result<Self> {
        let pos = positions_in(&self.register, obs.support())?;
        let n = self.num_qubits();
        let m = obs.matrix();
        let repr = match &self.repr {
            Repr::Pure(v) => {
                let mut w = v.clone();
                linalg::apply_local_vec(w.as_mut_slice(), n, &pos, m);
                Repr::Pure(w)
            }
            Repr::Factored(vs) => Repr::Factored(
                vs.iter()
                    .map(|v| {
                        let mut w = v.clone();
                        linalg::apply_local_vec(w.as_mut_slice(), n, &pos, m);
                        w
                    })
                    .collect(),
            ),
            Repr::Mixed(r) => Repr::Mixed(linalg::conjugate_local(r, n, &pos, m)),
        };
        Ok(LabeledState { register: self.register.clone(), repr })
    }

    /// Trace of the (possibly unnormalized) state.
    pub(crate) fn trace_weight(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Factored(vs) => vs.iter().map(|v| v.norm_squared()).sum(),
            Repr::Mixed(m) => m.trace().re,
        }
    }

    /// Multiply the density operator by `c ≥ 0`.
    pub(crate) fn scaled_weight(&self, c: f64) -> Self {
        let s = C64::new(c.sqrt(), 0.0);
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure(v * s),
            Repr::Factored(vs) => Repr::Factored(vs.iter().map(|v| v * s).collect()),
            Repr::Mixed(m) => Repr::Mixed(m.scale(c)),
        };
        LabeledState { register: self.register.clone(), repr }
    }

    /// Post-select `qubits` on `|ket⟩` and remove them from the register.
    /// Returns the branch probability and the normalized remainder.
    pub fn post_select_out(&self, qubits: &[QubitLabel], ket: &CVector, tolerance: f64) -> Result<(f64, LabeledState)> {
        let pos = self.positions(qubits)?;
        check_dim(qubits, ket.len())?;
        let n = self.num_qubits();
        let rest_pos: Vec<usize> = (0..n).filter(|p| !pos.contains(p)).collect();
        let rest: Vec<QubitLabel> = rest_pos.iter().map(|&p| self.register[p]).collect();
        let contract = |v: &CVector| -> CVector {
            let space: Vec<usize> = (0..n).collect();
            let pm = linalg::masks_in(&space, &pos);
            let rm = linalg::masks_in(&space, &rest_pos);
            let mut out = CVector::zeros(1 << rest_pos.len());
            for (i, amp) in v.iter().enumerate() {
                if *amp != ZERO {
                    out[linalg::gather_bits(i, &rm)] += ket[linalg::gather_bits(i, &pm)].conj() * amp;
                }
            }
            out
        };
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure(contract(v)),
            Repr::Factored(vs) => Repr::Factored(vs.iter().map(contract).collect()),
            Repr::Mixed(m) => {
                let proj = ket * ket.adjoint();
                let all: Vec<usize> = (0..n).collect();
                Repr::Mixed(linalg::weighted_partial_trace(m, &all, &proj, &pos))
            }
        };
        let unnorm = LabeledState { register: rest, repr };
        let p = unnorm.trace_weight();
        if p < tolerance {
            return Err(Error::ZeroProbability(p));
        }
        Ok((p, unnorm.scaled_weight(1.0 / p)))
    }

    /// Eigenpairs of the density operator with eigenvalue above `cutoff`
    /// (eigenvectors as columns).
    pub fn spectral(&self, cutoff: f64) -> Result<(Vec<f64>, CMatrix)> {
        match &self.repr {
            Repr::Pure(v) => {
                let n2 = v.norm_squared();
                let col = v / C64::new(n2.sqrt(), 0.0);
                Ok((vec![n2], CMatrix::from_columns(&[col])))
            }
            Repr::Factored(vs) => {
                let phi = CMatrix::from_columns(vs);
                let gram = phi.adjoint() * &phi;
                let (vals, w) = linalg::hermitian_eigen(&gram);
                let mut out_vals = Vec::new();
                let mut cols = Vec::new();
                for (k, &lam) in vals.iter().enumerate() {
                    if lam > cutoff {
                        out_vals.push(lam);
                        cols.push(&phi * w.column(k) / C64::new(lam.sqrt(), 0.0));
                    }
                }
                Ok((out_vals, CMatrix::from_columns(&cols)))
            }
            Repr::Mixed(m) => {
                let (vals, vecs) = linalg::hermitian_eigen(m);
                let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > cutoff).collect();
                let cols: Vec<CVector> = keep.iter().map(|&k| vecs.column(k).into_owned()).collect();
                if cols.is_empty() {
                    return Ok((Vec::new(), CMatrix::zeros(self.dim(), 0)));
                }
                Ok((keep.iter().map(|&k| vals[k]).collect(), CMatrix::from_columns(&cols)))
            }
        }
    }

    /// `|⟨ψ|φ⟩|` for two vector states on the same labels (order may differ).
    pub fn overlap_up_to_phase(&self, other: &LabeledState) -> Result<f64> {
        let other = other.permuted(&self.register)?;
        match (&self.repr, &other.repr) {
            (Repr::Pure(a), Repr::Pure(b)) => Ok(a.dotc(b).norm()),
            _ => Err(Error::InvalidState("overlap needs two pure states".into())),
        }
    }

    /// Equality with global phases ignored (pure) or entrywise (mixed).
    pub fn approx_eq(&self, other: &LabeledState) -> Result<bool> {
        let tol = Tolerances::current().phase_equal;
        if self.is_pure() && other.is_pure() {
            return Ok((self.overlap_up_to_phase(other)? - 1.0).abs() <= tol);
        }
        let other = other.permuted(&self.register)?;
        Ok(linalg::max_abs_diff(&self.density_matrix()?, &other.density_matrix()?) <= tol)
    }

    /// Check the representation invariants against the current tolerances.
    pub fn validate(&self) -> Result<()> {
        let tol = Tolerances::current();
        match &self.repr {
            Repr::Pure(v) => {
                let n = v.norm();
                if (n - 1.0).abs() > tol.norm {
                    return Err(Error::InvalidState(format!("norm {n}")));
                }
            }
            Repr::Factored(_) => {
                let t = self.trace_weight();
                if (t - 1.0).abs() > tol.trace {
                    return Err(Error::InvalidState(format!("trace {t}")));
                }
            }
            Repr::Mixed(m) => {
                LabeledState::mixed(self.register.clone(), m.clone())?;
            }
        }
        Ok(())
    }

    /// Debug dump: labels plus flattened `[re, im]` entries (amplitudes for a
    /// pure state, row-major density matrix otherwise).
    pub fn to_debug_json(&self) -> Result<serde_json::Value> {
        let labels: Vec<String> = self.register.iter().map(ToString::to_string).collect();
        let (kind, entries): (&str, Vec<[f64; 2]>) = match &self.repr {
            Repr::Pure(v) => ("pure", v.iter().map(|z| [z.re, z.im]).collect()),
            _ => {
                let m = self.density_matrix()?;
                let d = m.nrows();
                ("mixed", (0..d * d).map(|k| m[(k / d, k % d)]).map(|z| [z.re, z.im]).collect())
            }
        };
        Ok(json!({ "register": labels, "representation": kind, "entries": entries }))
    }
}

/// `(|0…0⟩ + e^{i·phase}|1…1⟩)/√2` on `n` site qubits.
pub fn ghz_state(n: usize, phase: f64) -> Result<LabeledState> {
    if n < 1 {
        return Err(Error::InvalidSize("GHZ state needs at least one qubit".into()));
    }
    if n > MAX_PURE_QUBITS {
        return Err(Error::TooLarge(format!("{n} qubits")));
    }
    LabeledState::pure(crate::qcore::label::sites(n), ghz_ket(n, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::label::sites;
    use std::f64::consts::PI;

    fn s(i: usize) -> QubitLabel {
        QubitLabel::site(i)
    }

    #[test]
    fn ghz_examples() {
        let plus = ghz_state(1, 0.0).unwrap();
        assert!(plus.approx_eq(&LabeledState::plus(s(0))).unwrap());
        let g3 = ghz_state(3, 0.0).unwrap();
        let a = g3.amplitudes().unwrap();
        assert!((a[0].re - 0.5f64.sqrt()).abs() < 1e-15 && (a[7].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(a.iter().skip(1).take(6).all(|z| z.norm() == 0.0));
        let g2 = ghz_state(2, PI).unwrap();
        assert!((g2.amplitudes().unwrap()[3].re + 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(ghz_state(0, 0.0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn phase_gate_examples() {
        let theta = 0.37;
        let out = LabeledState::plus(s(0)).apply_phase(&s(0), theta, 1).unwrap();
        assert!(out.approx_eq(&LabeledState::plus_phased(s(0), theta)).unwrap());
        let neg = LabeledState::plus(s(0)).apply_phase(&s(0), theta, -1).unwrap();
        assert!(neg.approx_eq(&LabeledState::plus_phased(s(0), -theta)).unwrap());
        let z = LabeledState::zero(s(0)).apply_phase(&s(0), 1.3, 1).unwrap();
        assert!(z.approx_eq(&LabeledState::zero(s(0))).unwrap());
        assert!(matches!(LabeledState::zero(s(0)).apply_phase(&s(4), 1.0, 1), Err(Error::UnknownQubit(_))));
    }

    #[test]
    fn partial_trace_examples() {
        let bell = ghz_state(2, 0.0).unwrap();
        let r = bell.reduced_density(&[s(0)]).unwrap();
        assert!(linalg::max_abs_diff(&r, &linalg::identity(2).scale(0.5)) < 1e-15);
        let prod = LabeledState::zero(s(0)).tensor(&LabeledState::plus(s(1))).unwrap();
        let r = prod.partial_trace(&[s(1)]).unwrap();
        let plus = LabeledState::plus(s(1)).density_matrix().unwrap();
        assert!(linalg::max_abs_diff(&r.density_matrix().unwrap(), &plus) < 1e-15);
        let g3 = ghz_state(3, 0.0).unwrap();
        let r = g3.reduced_density(&[s(0), s(2)]).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = C64::new(0.5, 0.0);
        want[(3, 3)] = C64::new(0.5, 0.0);
        assert!(linalg::max_abs_diff(&r, &want) < 1e-15);
        assert!(matches!(g3.partial_trace(&[s(9)]), Err(Error::UnknownQubit(_))));
    }

    #[test]
    fn expectation_and_variance_examples() {
        let zh = Observable::z_half(s(0));
        let plus = LabeledState::plus(s(0));
        assert!(plus.expectation(&zh).unwrap().abs() < 1e-15);
        assert!((plus.variance(&zh).unwrap() - 0.25).abs() < 1e-15);
        for m in 1..=6 {
            let g = ghz_state(m, 0.0).unwrap();
            let h = Observable::collective_z_half(&sites(m));
            assert!((g.variance(&h).unwrap() - (m * m) as f64 / 4.0).abs() < 1e-12);
        }
        let mm = LabeledState::maximally_mixed(vec![s(0)]).unwrap();
        assert!((mm.variance(&Observable::pauli_z(s(0))).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(plus.expectation(&Observable::z_half(s(3))), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn projection_examples() {
        let p0 = Observable::projector(&[s(0)], &CVector::from_vec(vec![linalg::ONE, ZERO])).unwrap();
        let (p, post) = LabeledState::plus(s(0)).project_and_renormalize(&p0, 1e-12).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(post.approx_eq(&LabeledState::zero(s(0))).unwrap());

        let mut ket01 = CVector::zeros(4);
        ket01[1] = linalg::ONE;
        let p01 = Observable::projector(&sites(2), &ket01).unwrap();
        let bell = ghz_state(2, 0.0).unwrap();
        assert!(matches!(bell.project_and_renormalize(&p01, 1e-12), Err(Error::ZeroProbability(_))));

        // ⟨GHZ|(|+_θ⟩|+⟩) = (1 + e^{iθ}) / (2√2) → probability (1 + cos θ)/4
        for &theta in &[0.0, 0.4, 1.9, PI] {
            let st = LabeledState::plus_phased(s(0), theta).tensor(&LabeledState::plus(s(1))).unwrap();
            let ghz = Observable::ghz_projector(&sites(2));
            let want = (1.0 + f64::cos(theta)) / 4.0;
            match st.project_and_renormalize(&ghz, 1e-12) {
                Ok((p, _)) => assert!((p - want).abs() < 1e-14),
                Err(Error::ZeroProbability(p)) => assert!(want < 1e-12 && p < 1e-12),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn complete_projector_set_sums_to_one() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(8);
        let psi = linalg::random_state_vector(&mut rng, 8);
        let st = LabeledState::pure(sites(3), psi).unwrap();
        let ghz = Observable::ghz_projector(&sites(2));
        let comp = Observable::new(sites(2), linalg::identity(4) - ghz.matrix()).unwrap();
        let a = st.project_and_renormalize(&ghz, 0.0).unwrap().0;
        let b = st.project_and_renormalize(&comp, 0.0).unwrap().0;
        assert!((a + b - 1.0).abs() < 1e-10);
    }

    #[test]
    fn channel_preserves_trace_and_positivity() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(21);
        let psi = linalg::random_state_vector(&mut rng, 8);
        let mut st = LabeledState::pure(sites(3), psi).unwrap();
        for q in 0..3 {
            let ch = Channel::random(&mut rng, vec![s(q)], 2).unwrap();
            st = st.apply_channel(&ch).unwrap();
            let rho = st.density_matrix().unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-10);
            assert!(linalg::min_eigenvalue_hermitian(&rho) > -1e-9);
        }
        // factored and dense routes agree
        let dense = LabeledState::pure(sites(3), linalg::random_state_vector(&mut rng, 8)).unwrap();
        let ch = Channel::random(&mut rng, vec![s(2), s(0)], 3).unwrap();
        let a = dense.apply_channel(&ch).unwrap().density_matrix().unwrap();
        let b = dense.to_mixed().unwrap().apply_channel(&ch).unwrap().density_matrix().unwrap();
        assert!(linalg::max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn post_select_out_matches_projection() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        let st = LabeledState::pure(sites(4), linalg::random_state_vector(&mut rng, 16)).unwrap();
        let ket = ghz_ket(2, 0.0);
        let (p1, rest) = st.post_select_out(&[s(3), s(1)], &ket, 0.0).unwrap();
        let proj = Observable::projector(&[s(3), s(1)], &ket).unwrap();
        let (p2, full) = st.project_and_renormalize(&proj, 0.0).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
        let reduced = full.reduced_density(&[s(0), s(2)]).unwrap();
        assert!(linalg::max_abs_diff(&reduced, &rest.density_matrix().unwrap()) < 1e-12);
        let (p3, rest_m) = st.to_mixed().unwrap().post_select_out(&[s(3), s(1)], &ket, 0.0).unwrap();
        assert!((p3 - p1).abs() < 1e-12);
        assert!(linalg::max_abs_diff(&rest_m.density_matrix().unwrap(), &rest.density_matrix().unwrap()) < 1e-12);
    }

    #[test]
    fn spectral_routes_agree() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(6);
        let st = LabeledState::pure(sites(3), linalg::random_state_vector(&mut rng, 8)).unwrap();
        let ch = Channel::random(&mut rng, vec![s(1)], 2).unwrap();
        let mixed = st.apply_channel(&ch).unwrap();
        let (v1, _) = mixed.spectral(1e-12).unwrap();
        let (v2, _) = mixed.to_mixed().unwrap().spectral(1e-12).unwrap();
        assert_eq!(v1.len(), v2.len());
        for (a, b) in v1.iter().zip(&v2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_states_rejected() {
        let bad = CVector::from_vec(vec![linalg::ONE, linalg::ONE]);
        assert!(LabeledState::pure(vec![s(0)], bad).is_err());
        assert!(LabeledState::pure(vec![s(0), s(0)], CVector::zeros(4)).is_err());
        let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.2, 0.0), C64::new(-0.2, 0.0)]));
        assert!(LabeledState::mixed(vec![s(0)], rho).is_err());
    }

    #[test]
    fn debug_json_shape() {
        let v = ghz_state(2, 0.0).unwrap().to_debug_json().unwrap();
        assert_eq!(v["register"].as_array().unwrap().len(), 2);
        assert_eq!(v["entries"].as_array().unwrap().len(), 4);
        let m = LabeledState::maximally_mixed(vec![s(0)]).unwrap().to_debug_json().unwrap();
        assert_eq!(m["representation"], "mixed");
        assert_eq!(m["entries"].as_array().unwrap().len(), 4);
    }
}
