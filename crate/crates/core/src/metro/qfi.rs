use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, I, ZERO};
use crate::par::{self, Execution};
use crate::qcore::{positions_in, LabeledState, Observable};
use crate::tol::Tolerances;

/// Quantum Fisher information matrix over a list of signals.
#[derive(Debug, Clone, PartialEq)]
pub struct QfiMatrix {
    pub matrix: DMatrix<f64>,
    /// Signal index of each row.
    pub basis: Vec<usize>,
}

impl QfiMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let basis = (0..matrix.nrows()).collect();
        QfiMatrix { matrix, basis }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue_symmetric(&self.matrix)
    }
}

/// Eigenpairs of `ρ` above the rank cutoff together with `H_s V` for every
/// generator.
pub(crate) struct Action {
    pub lambdas: Vec<f64>,
    pub v: CMatrix,
    pub w: Vec<CMatrix>,
}

pub(crate) fn spectral_action(rho: &LabeledState, ops: &[Observable], cutoff: f64, exec: Execution) -> Result<Action> {
    let positions: Vec<Vec<usize>> =
        ops.iter().map(|o| positions_in(rho.register(), o.support())).collect::<Result<_>>()?;
    let (lambdas, v) = rho.spectral(cutoff)?;
    let n = rho.num_qubits();
    let w = par::map_range(exec, ops.len(), |s| linalg::left_multiply_local(&v, n, &positions[s], ops[s].matrix()));
    Ok(Action { lambdas, v, w })
}

/// QFI matrix of `U(θ) ρ U(θ)†` at `θ = 0` with `U = exp(-i Σ θ_s H_s)`.
pub fn qfi_matrix(rho: &LabeledState, generators: &[Observable]) -> Result<QfiMatrix> {
    qfi_matrix_with(rho, generators, Execution::default())
}

/// [`qfi_matrix`] with an explicit execution mode.
///
/// Only the eigenvectors in the support of `ρ` are formed; pairs with one
/// index outside the support are summed through the complement projector.
pub fn qfi_matrix_with(rho: &LabeledState, generators: &[Observable], exec: Execution) -> Result<QfiMatrix> {
    let cutoff = Tolerances::current().rank_cutoff;
    let act = spectral_action(rho, generators, cutoff, exec)?;
    let r = act.lambdas.len();
    let s_count = generators.len();
    // A_s = V† H_s V
    let a: Vec<CMatrix> = par::map(exec, &act.w, |w| act.v.adjoint() * w);
    let pairs: Vec<(usize, usize)> = (0..s_count).flat_map(|s| (s..s_count).map(move |t| (s, t))).collect();
    let values = par::map(exec, &pairs, |&(s, t)| {
        let (a_s, a_t) = (&a[s], &a[t]);
        let mut f = 0.0;
        for k in 0..r {
            let lk = act.lambdas[k];
            for l in 0..r {
                let ll = act.lambdas[l];
                let sum = lk + ll;
                if sum > cutoff && k != l {
                    f += 2.0 * (lk - ll).powi(2) / sum * (a_s[(k, l)] * a_t[(l, k)]).re;
                }
            }
            // ⟨k|H_s (1 − P) H_t|k⟩ with P the support projector
            let full = act.w[s].column(k).dotc(&act.w[t].column(k));
            let inside: C64 = (0..r).map(|l| a_s[(k, l)] * a_t[(l, k)]).sum();
            f += 4.0 * lk * (full - inside).re;
        }
        f
    });
    let mut m = DMatrix::zeros(s_count, s_count);
    for (&(s, t), f) in pairs.iter().zip(values) {
        m[(s, t)] = f;
        m[(t, s)] = f;
    }
    Ok(QfiMatrix::new(m))
}

fn full_spectrum(rho: &LabeledState, generators: &[Observable]) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    let dense = rho.density_matrix()?;
    let n = rho.num_qubits();
    let all: Vec<usize> = (0..n).collect();
    let (lambdas, v) = linalg::hermitian_eigen(&dense);
    let hs = generators
        .iter()
        .map(|g| {
            let pos = positions_in(rho.register(), g.support())?;
            let full = linalg::embed(g.matrix(), &pos, &all);
            Ok(v.adjoint() * full * &v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((lambdas, hs))
}

/// QFI matrix from the complete eigendecomposition of the dense density
/// matrix, summing every eigenvalue pair. Independent of [`qfi_matrix`];
/// intended for small registers.
pub fn qfi_matrix_full_spectrum(rho: &LabeledState, generators: &[Observable]) -> Result<QfiMatrix> {
    let cutoff = Tolerances::current().rank_cutoff;
    let (lambdas, hs) = full_spectrum(rho, generators)?;
    let d = lambdas.len();
    let s_count = generators.len();
    let mut m = DMatrix::zeros(s_count, s_count);
    for s in 0..s_count {
        for t in s..s_count {
            let mut f = 0.0;
            for k in 0..d {
                for l in 0..d {
                    let sum = lambdas[k] + lambdas[l];
                    if sum > cutoff {
                        f += 2.0 * (lambdas[k] - lambdas[l]).powi(2) / sum * (hs[s][(k, l)] * hs[t][(l, k)]).re;
                    }
                }
            }
            m[(s, t)] = f;
            m[(t, s)] = f;
        }
    }
    Ok(QfiMatrix::new(m))
}

/// Symmetric logarithmic derivatives `L_s` (dense, on the full register),
/// solving `∂_s ρ = (L_s ρ + ρ L_s)/2` on the support of `ρ`.
pub fn sld_operators(rho: &LabeledState, generators: &[Observable]) -> Result<Vec<CMatrix>> {
    if rho.num_qubits() > 10 {
        return Err(Error::TooLarge("SLD operators are only formed up to 10 qubits".into()));
    }
    let cutoff = Tolerances::current().rank_cutoff;
    let dense = rho.density_matrix()?;
    let (lambdas, v) = linalg::hermitian_eigen(&dense);
    let (_, hs) = full_spectrum(rho, generators)?;
    let d = lambdas.len();
    Ok(hs
        .iter()
        .map(|h| {
            let mut l = CMatrix::zeros(d, d);
            for k in 0..d {
                for j in 0..d {
                    let sum = lambdas[k] + lambdas[j];
                    if sum > cutoff {
                        l[(k, j)] = I * h[(k, j)] * (2.0 * (lambdas[k] - lambdas[j]) / sum);
                    } else {
                        l[(k, j)] = ZERO;
                    }
                }
            }
            &v * l * v.adjoint()
        })
        .collect())
}

/// `∂_s ρ = -i[H_s, ρ]` as a dense matrix.
pub fn generator_derivative(rho: &LabeledState, generator: &Observable) -> Result<CMatrix> {
    let dense = rho.density_matrix()?;
    let all: Vec<usize> = (0..rho.num_qubits()).collect();
    let pos = positions_in(rho.register(), generator.support())?;
    let h = linalg::embed(generator.matrix(), &pos, &all);
    Ok((&h * &dense - &dense * &h) * (-I))
}
