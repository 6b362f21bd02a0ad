use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::metro::qfi::spectral_action;
use crate::par::{self, Execution};
use crate::qcore::{LabeledState, Observable, QubitLabel};

/// `Cov_ij = tr(A_i A_j ρ) − tr(A_i ρ) tr(A_j ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub matrix: CMatrix,
}

/// Covariance matrix of observables in a state.
pub fn cov_matrix(rho: &LabeledState, observables: &[Observable]) -> Result<CovMatrix> {
    let act = spectral_action(rho, observables, 0.0, Execution::Sequential)?;
    let s = observables.len();
    let weighted = |x: &CMatrix, y: &CMatrix| -> C64 {
        act.lambdas.iter().enumerate().map(|(k, &l)| x.column(k).dotc(&y.column(k)) * l).sum()
    };
    let means: Vec<C64> = act.w.iter().map(|w| weighted(&act.v, w)).collect();
    let mut m = CMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            m[(i, j)] = weighted(&act.w[i], &act.w[j]) - means[i] * means[j];
        }
    }
    Ok(CovMatrix { matrix: m })
}

/// Explicit tensor product of states on disjoint registers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    factors: Vec<LabeledState>,
}

impl ProductState {
    pub fn new(factors: Vec<LabeledState>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::NotProductInput("no subsystems".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &factors {
            for q in f.register() {
                if !seen.insert(*q) {
                    return Err(Error::NotProductInput(format!("qubit {q} appears in two subsystems")));
                }
            }
        }
        Ok(ProductState { factors })
    }

    pub fn factors(&self) -> &[LabeledState] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// The full state, registers concatenated in subsystem order.
    pub fn joint(&self) -> Result<LabeledState> {
        LabeledState::product(&self.factors)
    }
}

/// The terms `Υ^{(k)}` of the covariance matrix, one per subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct CovDecomposition {
    pub parts: Vec<CMatrix>,
}

impl CovDecomposition {
    pub fn total(&self) -> CMatrix {
        let s = self.parts.first().map_or(0, |p| p.nrows());
        self.parts.iter().fold(CMatrix::zeros(s, s), |acc, p| acc + p)
    }
}

/// Operator on a few labeled qubits; not required to be exactly Hermitian.
#[derive(Debug, Clone)]
pub(crate) struct LocalOp {
    pub labels: Vec<QubitLabel>,
    pub matrix: CMatrix,
}

struct Layout<'a> {
    product: &'a ProductState,
    owner: BTreeMap<QubitLabel, (usize, usize)>,
}

impl<'a> Layout<'a> {
    fn new(product: &'a ProductState) -> Self {
        let mut owner = BTreeMap::new();
        for (f, st) in product.factors.iter().enumerate() {
            for (p, q) in st.register().iter().enumerate() {
                owner.insert(*q, (f, p));
            }
        }
        Layout { product, owner }
    }

    fn factor_of(&self, q: &QubitLabel) -> usize {
        self.owner[q].0
    }

    /// `tr_k[(ρ_k ⊗ 1) A]` over the qubits of `A` that belong to subsystem `k`.
    fn reduce(&self, op: &LocalOp, k: usize) -> Result<LocalOp> {
        let traced: Vec<QubitLabel> = op.labels.iter().copied().filter(|q| self.factor_of(q) == k).collect();
        if traced.is_empty() {
            return Ok(op.clone());
        }
        let w = self.product.factors[k].reduced_density(&traced)?;
        let idx: Vec<usize> = (0..op.labels.len()).collect();
        let tpos: Vec<usize> = traced.iter().map(|q| op.labels.iter().position(|l| l == q).unwrap()).collect();
        let matrix = linalg::weighted_partial_trace(&op.matrix, &idx, &w, &tpos);
        let labels = op.labels.iter().copied().filter(|q| self.factor_of(q) != k).collect();
        Ok(LocalOp { labels, matrix })
    }

    /// Reduced product state on `labels`, which are sorted by subsystem so the
    /// density is a Kronecker product of per-subsystem reductions.
    fn reduced_product(&self, labels: &[QubitLabel]) -> Result<CMatrix> {
        let mut by_factor: BTreeMap<usize, Vec<QubitLabel>> = BTreeMap::new();
        for q in labels {
            by_factor.entry(self.factor_of(q)).or_default().push(*q);
        }
        let mut rho = CMatrix::from_element(1, 1, linalg::ONE);
        for (f, qs) in by_factor {
            rho = rho.kronecker(&self.product.factors[f].reduced_density(&qs)?);
        }
        Ok(rho)
    }

    fn sorted_union(&self, a: &[QubitLabel], b: &[QubitLabel]) -> Vec<QubitLabel> {
        let mut u: Vec<QubitLabel> = a.iter().chain(b).copied().collect::<BTreeSet<_>>().into_iter().collect();
        u.sort_by_key(|q| self.owner[q]);
        u
    }
}

fn embed_op(op: &LocalOp, on: &[QubitLabel]) -> CMatrix {
    let to: Vec<usize> = (0..on.len()).collect();
    let from: Vec<usize> = op.labels.iter().map(|q| on.iter().position(|l| l == q).unwrap()).collect();
    linalg::embed(&op.matrix, &from, &to)
}

/// `tr[X Y ρ_U]` with `X`, `Y` on subsets of `U` and `ρ_U` the reduced
/// product state on `U`.
fn product_expectation(layout: &Layout, x: &LocalOp, y: &LocalOp) -> Result<C64> {
    let u = layout.sorted_union(&x.labels, &y.labels);
    let rho = layout.reduced_product(&u)?;
    let xe = embed_op(x, &u);
    let ye = embed_op(y, &u);
    Ok(linalg::trace_product(&xe, &(ye * rho)))
}

/// Covariance matrix of `observables` in a product state, split into one
/// positive term per subsystem.
///
/// With `A_i^{(0)} = A_i` and `A_i^{(k)} = tr_{≤k}(A_i ρ_{≤k})`, subsystem `k`
/// contributes `Υ^{(k)}_ij = tr[B_i B_j ρ_{k→}]` where
/// `B_i = A_i^{(k−1)} − 1_k ⊗ A_i^{(k)}`. The terms telescope to the
/// covariance, and `Υ^{(k)}_ij = 0` whenever `A_i` or `A_j` acts trivially on
/// subsystem `k`.
pub fn cov_decompose(product: &ProductState, observables: &[Observable]) -> Result<CovDecomposition> {
    cov_decompose_with(product, observables, Execution::default())
}

pub fn cov_decompose_with(
    product: &ProductState,
    observables: &[Observable],
    exec: Execution,
) -> Result<CovDecomposition> {
    let ops: Vec<LocalOp> =
        observables.iter().map(|o| LocalOp { labels: o.support().to_vec(), matrix: o.matrix().clone() }).collect();
    decompose_ops(product, &ops, exec)
}

pub(crate) fn decompose_ops(product: &ProductState, ops: &[LocalOp], exec: Execution) -> Result<CovDecomposition> {
    let layout = Layout::new(product);
    for op in ops {
        if let Some(q) = op.labels.iter().find(|q| !layout.owner.contains_key(q)) {
            return Err(Error::SupportMismatch(format!("qubit {q} is in no subsystem")));
        }
    }
    let k_count = product.len();
    let s = ops.len();
    // chain[i][k] = A_i^{(k)}
    let chains: Vec<Vec<LocalOp>> = par::map(exec, ops, |op| {
        let mut chain = vec![op.clone()];
        for k in 0..k_count {
            let next = layout.reduce(chain.last().unwrap(), k)?;
            chain.push(next);
        }
        Ok(chain)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut parts = Vec::with_capacity(k_count);
    for k in 0..k_count {
        // B_i on the labels of A_i^{(k−1)}; None when A_i misses subsystem k
        let b: Vec<Option<LocalOp>> = (0..s)
            .map(|i| {
                let before = &chains[i][k];
                let after = &chains[i][k + 1];
                if before.labels.len() == after.labels.len() {
                    return None;
                }
                let lifted = embed_op(after, &before.labels);
                Some(LocalOp { labels: before.labels.clone(), matrix: &before.matrix - lifted })
            })
            .collect();
        let active: Vec<usize> = (0..s).filter(|&i| b[i].is_some()).collect();
        let pairs: Vec<(usize, usize)> =
            active.iter().enumerate().flat_map(|(a, &i)| active[a..].iter().map(move |&j| (i, j))).collect();
        let values = par::map(exec, &pairs, |&(i, j)| {
            product_expectation(&layout, b[i].as_ref().unwrap(), b[j].as_ref().unwrap())
        });
        let mut m = CMatrix::from_element(s, s, ZERO);
        for (&(i, j), v) in pairs.iter().zip(values) {
            let v = v?;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
        for &i in &active {
            m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        }
        parts.push(m);
    }
    Ok(CovDecomposition { parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{ghz_state, sites};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(i: usize) -> QubitLabel {
        QubitLabel::site(i)
    }

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
    }

    #[test]
    fn cov_examples() {
        let pp = LabeledState::plus(s(0)).tensor(&LabeledState::plus(s(1))).unwrap();
        let zs = [Observable::pauli_z(s(0)), Observable::pauli_z(s(1))];
        let c = cov_matrix(&pp, &zs).unwrap();
        assert!(linalg::max_abs_diff(&c.matrix, &diag(&[1.0, 1.0])) < 1e-14);
        let bell = ghz_state(2, 0.0).unwrap();
        let c = cov_matrix(&bell, &zs).unwrap();
        assert!(linalg::max_abs_diff(&c.matrix, &CMatrix::from_element(2, 2, linalg::ONE)) < 1e-14);
        let with_id = [Observable::identity(&[s(0)]), Observable::pauli_z(s(1))];
        let c = cov_matrix(&bell, &with_id).unwrap();
        for j in 0..2 {
            assert!(c.matrix[(0, j)].norm() < 1e-14 && c.matrix[(j, 0)].norm() < 1e-14);
        }
    }

    #[test]
    fn decompose_examples() {
        let prod = ProductState::new(vec![LabeledState::plus(s(0)), LabeledState::plus(s(1))]).unwrap();
        let zs = [Observable::pauli_z(s(0)), Observable::pauli_z(s(1))];
        let d = cov_decompose(&prod, &zs).unwrap();
        assert!(linalg::max_abs_diff(&d.parts[0], &diag(&[1.0, 0.0])) < 1e-14);
        assert!(linalg::max_abs_diff(&d.parts[1], &diag(&[0.0, 1.0])) < 1e-14);

        let single = ProductState::new(vec![ghz_state(3, 0.4).unwrap()]).unwrap();
        let obs = [Observable::collective_z_half(&sites(3)), Observable::pauli_z(s(1))];
        let d = cov_decompose(&single, &obs).unwrap();
        let c = cov_matrix(&single.joint().unwrap(), &obs).unwrap();
        assert!(linalg::max_abs_diff(&d.parts[0], &c.matrix) < 1e-12);

        let prod = ProductState::new(vec![LabeledState::zero(s(0)), LabeledState::plus(s(1))]).unwrap();
        let obs = [Observable::pauli_z(s(1)), Observable::pauli_z(s(0))];
        let d = cov_decompose(&prod, &obs).unwrap();
        for j in 0..2 {
            assert!(d.parts[0][(0, j)].norm() < 1e-14);
        }
    }

    #[test]
    fn overlapping_factors_rejected() {
        let a = LabeledState::plus(s(0));
        assert!(matches!(ProductState::new(vec![a.clone(), a]), Err(Error::NotProductInput(_))));
    }

    #[test]
    fn telescoped_form_agrees() {
        // Υ^{(k)} = tr[A^{(k−1)}A^{(k−1)}ρ_{k→}] − tr[A^{(k)}A^{(k)}ρ_{k+1→}]
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f0 = LabeledState::pure(vec![s(0), s(1)], linalg::random_state_vector(&mut rng, 4)).unwrap();
        let f1 = LabeledState::pure(vec![s(2)], linalg::random_state_vector(&mut rng, 2)).unwrap();
        let f2 = LabeledState::pure(vec![s(3), s(4)], linalg::random_state_vector(&mut rng, 4)).unwrap();
        let prod = ProductState::new(vec![f0, f1, f2]).unwrap();
        let obs: Vec<Observable> = [vec![s(0), s(2)], vec![s(1), s(3)], vec![s(2), s(4)], vec![s(4)]]
            .into_iter()
            .map(|sup| {
                let d = 1 << sup.len();
                Observable::new(sup, linalg::random_hermitian(&mut rng, d)).unwrap()
            })
            .collect();
        let d = cov_decompose(&prod, &obs).unwrap();
        let layout = Layout::new(&prod);
        let ops: Vec<LocalOp> =
            obs.iter().map(|o| LocalOp { labels: o.support().to_vec(), matrix: o.matrix().clone() }).collect();
        let mut chains = vec![ops.clone()];
        for k in 0..3 {
            let next: Vec<LocalOp> = chains[k].iter().map(|op| layout.reduce(op, k).unwrap()).collect();
            chains.push(next);
        }
        let second = |ops: &[LocalOp], i: usize, j: usize| -> C64 {
            if ops[i].labels.is_empty() && ops[j].labels.is_empty() {
                return ops[i].matrix[(0, 0)] * ops[j].matrix[(0, 0)];
            }
            product_expectation(&layout, &ops[i], &ops[j]).unwrap()
        };
        for k in 0..3 {
            for i in 0..4 {
                for j in 0..4 {
                    let want = second(&chains[k], i, j) - second(&chains[k + 1], i, j);
                    assert!((d.parts[k][(i, j)] - want).norm() < 1e-10, "k={k} i={i} j={j}");
                }
            }
        }
    }
}
