//! Dense complex linear algebra on qubit registers.
//!
//! Every matrix in this crate acts on an ordered list of qubits. The first
//! qubit of the list is the most significant bit of the basis index, so the
//! matrix of `A ⊗ B` on qubits `[a, b]` is the ordinary Kronecker product.
//! Qubits are identified by their position in an enclosing register
//! (`usize`), and helpers here translate between nested qubit lists.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all<'a>(mats: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    mats.into_iter().fold(CMatrix::identity(1, 1), |acc, m| acc.kronecker(m))
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

/// Bit mask, inside a space of qubits `space`, for each qubit of `qubits`.
///
/// Panics if a qubit is missing from `space`; callers validate labels first.
pub fn masks_in(space: &[usize], qubits: &[usize]) -> Vec<usize> {
    let n = space.len();
    qubits
        .iter()
        .map(|q| {
            let pos = space.iter().position(|s| s == q).expect("qubit not present in enclosing space");
            1usize << (n - 1 - pos)
        })
        .collect()
}

/// Compress the bits selected by `masks` into a local index (first mask is the
/// most significant local bit).
#[inline]
pub fn gather_bits(idx: usize, masks: &[usize]) -> usize {
    let k = masks.len();
    let mut out = 0;
    for (t, &m) in masks.iter().enumerate() {
        if idx & m != 0 {
            out |= 1 << (k - 1 - t);
        }
    }
    out
}

/// Inverse of [`gather_bits`]: spread a local index onto the masked bits.
#[inline]
pub fn scatter_bits(local: usize, masks: &[usize]) -> usize {
    let k = masks.len();
    let mut out = 0;
    for (t, &m) in masks.iter().enumerate() {
        if local >> (k - 1 - t) & 1 == 1 {
            out |= m;
        }
    }
    out
}

/// Apply `op` (acting on `targets`, in that order) to a state vector living
/// on `n` qubits, in place.
pub fn apply_local_vec(psi: &mut [C64], n: usize, targets: &[usize], op: &CMatrix) {
    let k = targets.len();
    let dk = 1usize << k;
    debug_assert_eq!(op.nrows(), dk);
    debug_assert_eq!(psi.len(), 1usize << n);
    let space: Vec<usize> = (0..n).collect();
    let masks = masks_in(&space, targets);
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..dk).map(|a| scatter_bits(a, &masks)).collect();
    // row-major copy of op for the inner loop
    let rows: Vec<C64> = (0..dk).flat_map(|r| (0..dk).map(move |c| (r, c))).map(|(r, c)| op[(r, c)]).collect();
    let mut buf = vec![ZERO; dk];
    for base in 0..psi.len() {
        if base & all != 0 {
            continue;
        }
        for a in 0..dk {
            buf[a] = psi[base + offsets[a]];
        }
        for r in 0..dk {
            let row = &rows[r * dk..(r + 1) * dk];
            let mut acc = ZERO;
            for c in 0..dk {
                acc += row[c] * buf[c];
            }
            psi[base + offsets[r]] = acc;
        }
    }
}

/// `rho ← (op ⊗ 1) rho (op ⊗ 1)†` for a density matrix on `n` qubits.
pub fn conjugate_local(rho: &CMatrix, n: usize, targets: &[usize], op: &CMatrix) -> CMatrix {
    let left = left_multiply_local(rho, n, targets, op);
    left_multiply_local(&left.adjoint(), n, targets, op).adjoint()
}

/// `(op ⊗ 1) · m` where `m` has `2^n` rows.
pub fn left_multiply_local(m: &CMatrix, n: usize, targets: &[usize], op: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    let d = out.nrows();
    let cols = out.ncols();
    let data = out.as_mut_slice();
    for j in 0..cols {
        apply_local_vec(&mut data[j * d..(j + 1) * d], n, targets, op);
    }
    out
}

/// Re-express an operator given on qubit list `from` as an operator on the
/// superset `to` (identity on the extra qubits, legs permuted as needed).
pub fn embed(op: &CMatrix, from: &[usize], to: &[usize]) -> CMatrix {
    let d_to = 1usize << to.len();
    let masks = masks_in(to, from);
    let all: usize = masks.iter().sum();
    let dk = 1usize << from.len();
    let offsets: Vec<usize> = (0..dk).map(|a| scatter_bits(a, &masks)).collect();
    let mut out = CMatrix::zeros(d_to, d_to);
    for base in 0..d_to {
        if base & all != 0 {
            continue;
        }
        for r in 0..dk {
            for c in 0..dk {
                let v = op[(r, c)];
                if v != ZERO {
                    out[(base + offsets[r], base + offsets[c])] = v;
                }
            }
        }
    }
    out
}

/// Reorder the legs of an operator given on `from` so that it is expressed on
/// `to`, which must be a permutation of `from`.
pub fn permute_operator(op: &CMatrix, from: &[usize], to: &[usize]) -> CMatrix {
    debug_assert_eq!(from.len(), to.len());
    embed(op, from, to)
}

/// Reorder a state vector from qubit order `from` to order `to`.
pub fn permute_vector(psi: &CVector, from: &[usize], to: &[usize]) -> CVector {
    let masks = masks_in(to, from);
    let mut out = CVector::zeros(psi.len());
    for (i, amp) in psi.iter().enumerate() {
        out[scatter_bits(i, &masks)] = *amp;
    }
    out
}

/// Reduced density matrix of a pure state on `keep` (in that order).
pub fn partial_trace_vec(psi: &[C64], n: usize, keep: &[usize]) -> CMatrix {
    partial_trace_ensemble(std::slice::from_ref(&psi), n, keep)
}

/// Reduced density matrix of `Σ_a |φ_a⟩⟨φ_a|` on `keep`.
pub fn partial_trace_ensemble<V: AsRef<[C64]>>(vecs: &[V], n: usize, keep: &[usize]) -> CMatrix {
    let space: Vec<usize> = (0..n).collect();
    let traced: Vec<usize> = space.iter().copied().filter(|q| !keep.contains(q)).collect();
    let km = masks_in(&space, keep);
    let tm = masks_in(&space, &traced);
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let mut big = CMatrix::zeros(dk, dt * vecs.len());
    for (a, v) in vecs.iter().enumerate() {
        let v = v.as_ref();
        for (i, amp) in v.iter().enumerate() {
            if *amp == ZERO {
                continue;
            }
            let r = gather_bits(i, &km);
            let c = gather_bits(i, &tm);
            big[(r, a * dt + c)] = *amp;
        }
    }
    &big * big.adjoint()
}

/// Reduced density matrix of a mixed state on `keep`.
pub fn partial_trace_mat(rho: &CMatrix, n: usize, keep: &[usize]) -> CMatrix {
    let space: Vec<usize> = (0..n).collect();
    let traced: Vec<usize> = space.iter().copied().filter(|q| !keep.contains(q)).collect();
    let km = masks_in(&space, keep);
    let tm = masks_in(&space, &traced);
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let kofs: Vec<usize> = (0..dk).map(|a| scatter_bits(a, &km)).collect();
    let tofs: Vec<usize> = (0..dt).map(|a| scatter_bits(a, &tm)).collect();
    let mut out = CMatrix::zeros(dk, dk);
    for r in 0..dk {
        for c in 0..dk {
            let mut acc = ZERO;
            for t in &tofs {
                acc += rho[(kofs[r] + t, kofs[c] + t)];
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// `tr_T[(w_T ⊗ 1) O]` for an operator `O` on `qubits`, where `w` is a matrix
/// on the ordered subset `traced`. The result acts on the remaining qubits of
/// `qubits`, in their original order.
pub fn weighted_partial_trace(op: &CMatrix, qubits: &[usize], w: &CMatrix, traced: &[usize]) -> CMatrix {
    let rest: Vec<usize> = qubits.iter().copied().filter(|q| !traced.contains(q)).collect();
    let tm = masks_in(qubits, traced);
    let rm = masks_in(qubits, &rest);
    let dt = 1usize << traced.len();
    let dr = 1usize << rest.len();
    let tofs: Vec<usize> = (0..dt).map(|a| scatter_bits(a, &tm)).collect();
    let rofs: Vec<usize> = (0..dr).map(|a| scatter_bits(a, &rm)).collect();
    let mut out = CMatrix::zeros(dr, dr);
    for a in 0..dr {
        for b in 0..dr {
            let mut acc = ZERO;
            for t in 0..dt {
                for t2 in 0..dt {
                    let wv = w[(t2, t)];
                    if wv != ZERO {
                        acc += wv * op[(rofs[a] + tofs[t], rofs[b] + tofs[t2])];
                    }
                }
            }
            out[(a, b)] = acc;
        }
    }
    out
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn min_eigenvalue_hermitian(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_part(m).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn min_eigenvalue_symmetric(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest absolute eigenvalue of a Hermitian matrix (its operator norm).
pub fn operator_norm_hermitian(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_part(m).symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Positive square root of a PSD Hermitian matrix (negative round-off clipped).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Uhlmann root fidelity `tr √(√ρ σ √ρ)`.
pub fn root_fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let s = psd_sqrt(rho);
    let inner = &s * sigma * &s;
    let (vals, _) = hermitian_eigen(&inner);
    vals.iter().map(|v| v.max(0.0).sqrt()).sum()
}

/// Trace distance `½‖ρ − σ‖₁` of two Hermitian matrices.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(&(rho - sigma));
    0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn unitary_from_hamiltonian(h: &CMatrix, t: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(h);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(vals.len(), vals.iter().map(|v| (-I * t * *v).exp())));
    &vecs * d * vecs.adjoint()
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with orthonormal columns drawn from the Haar measure.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols);
    let g = CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // fix column phases so the distribution is Haar
    let mut out = q.columns(0, cols).into_owned();
    for j in 0..cols {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = out.column_mut(j);
        col *= ph;
    }
    out
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    random_isometry(rng, dim, dim)
}

pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVector {
    let v = CVector::from_fn(dim, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    hermitian_part(&g)
}

/// Extend a matrix with orthonormal columns to a full unitary by
/// Gram–Schmidt against the standard basis.
pub fn complete_to_unitary(iso: &CMatrix) -> CMatrix {
    let d = iso.nrows();
    let mut cols: Vec<CVector> = (0..iso.ncols()).map(|j| iso.column(j).into_owned()).collect();
    for k in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v = CVector::zeros(d);
        v[k] = ONE;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v / C64::new(n, 0.0));
        }
    }
    let mut out = CMatrix::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn local_application_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_state_vector(&mut rng, 8);
        let u = random_unitary(&mut rng, 4);
        // op on qubits [2, 0] of a 3-qubit register
        let mut got = psi.clone();
        apply_local_vec(got.as_mut_slice(), 3, &[2, 0], &u);
        let full = embed(&u, &[2, 0], &[0, 1, 2]);
        let want = &full * &psi;
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn embed_on_leading_qubits_is_kron() {
        let x = pauli_x();
        let z = pauli_z();
        let xz = kron(&x, &z);
        let got = embed(&xz, &[0, 1], &[0, 1, 2]);
        let want = kron(&xz, &identity(2));
        assert!(max_abs_diff(&got, &want) < 1e-15);
        let swapped = embed(&xz, &[1, 0], &[0, 1]);
        assert!(max_abs_diff(&swapped, &kron(&z, &x)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_state_vector(&mut rng, 2);
        let b = random_state_vector(&mut rng, 4);
        let ab = kron_vec(&a, &b);
        let ra = partial_trace_vec(ab.as_slice(), 3, &[0]);
        let want = &a * a.adjoint();
        assert!(max_abs_diff(&ra, &want) < 1e-12);
        let full = &ab * ab.adjoint();
        let rb = partial_trace_mat(&full, 3, &[1, 2]);
        assert!(max_abs_diff(&rb, &(&b * b.adjoint())) < 1e-12);
    }

    #[test]
    fn weighted_trace_against_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let op = random_hermitian(&mut rng, 8);
        let w = random_hermitian(&mut rng, 2);
        // trace out the middle qubit
        let got = weighted_partial_trace(&op, &[0, 1, 2], &w, &[1]);
        let lifted = embed(&w, &[1], &[0, 1, 2]);
        let want = partial_trace_mat(&(&lifted * &op), 3, &[0, 2]);
        assert!(max_abs_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn completion_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let iso = random_isometry(&mut rng, 8, 3);
        let u = complete_to_unitary(&iso);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(8)) < 1e-10);
        assert!(max_abs_diff(&u.columns(0, 3).into_owned(), &iso) < 1e-12);
    }

    #[test]
    fn fidelity_of_identical_states_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_state_vector(&mut rng, 4);
        let rho = &v * v.adjoint();
        assert!((root_fidelity(&rho, &rho) - 1.0).abs() < 1e-7);
        assert!(trace_distance(&rho, &rho) < 1e-12);
    }
}
