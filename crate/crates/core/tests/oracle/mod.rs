//! Reference computations for the integration tests. Everything here works on
//! dense matrices over the full register and shares no code with the library
//! routes it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qnm_core::netgraph::{fixtures, Hypergraph, SignalLayout};
use qnm_core::qcore::{self, ChannelAssignment, LabeledState, Observable, QubitLabel};

pub type M = DMatrix<Complex64>;

/// `op` (on `support`) lifted to `register`, first qubit most significant.
pub fn embed(register: &[QubitLabel], support: &[QubitLabel], op: &M) -> M {
    let n = register.len();
    let pos: Vec<usize> =
        support.iter().map(|q| register.iter().position(|r| r == q).expect("qubit in register")).collect();
    let mask: usize = pos.iter().map(|&p| 1usize << (n - 1 - p)).sum();
    let sub = |x: usize| pos.iter().fold(0usize, |acc, &p| (acc << 1) | ((x >> (n - 1 - p)) & 1));
    let dim = 1usize << n;
    let mut out = M::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if i & !mask == j & !mask {
                out[(i, j)] = op[(sub(i), sub(j))];
            }
        }
    }
    out
}

pub fn embed_obs(register: &[QubitLabel], o: &Observable) -> M {
    embed(register, o.support(), o.matrix())
}

pub fn tr(m: &M) -> Complex64 {
    m.diagonal().sum()
}

/// QFI matrix from the spectral formula
/// `F_ij = 2 Σ_{λ_k+λ_l>0} (λ_k−λ_l)²/(λ_k+λ_l) Re(⟨k|H_i|l⟩⟨l|H_j|k⟩)`.
pub fn qfi(rho: &M, gens: &[M]) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(rho.clone());
    let v = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let hs: Vec<M> = gens.iter().map(|h| v.adjoint() * h * v).collect();
    let d = rho.nrows();
    let mut f = DMatrix::zeros(gens.len(), gens.len());
    for a in 0..gens.len() {
        for b in 0..gens.len() {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    let p = lam[k] + lam[l];
                    if p > 1e-12 {
                        s += 2.0 * (lam[k] - lam[l]).powi(2) / p * (hs[a][(k, l)] * hs[b][(l, k)]).re;
                    }
                }
            }
            f[(a, b)] = s;
        }
    }
    f
}

pub fn variance(rho: &M, h: &M) -> f64 {
    tr(&(rho * h * h)).re - tr(&(rho * h)).re.powi(2)
}

/// `Cov_ij = tr(ρ A_i A_j) − tr(ρ A_i) tr(ρ A_j)`.
pub fn covariance(rho: &M, obs: &[M]) -> M {
    let means: Vec<Complex64> = obs.iter().map(|a| tr(&(rho * a))).collect();
    M::from_fn(obs.len(), obs.len(), |i, j| tr(&(rho * &obs[i] * &obs[j])) - means[i] * means[j])
}

pub fn min_eig_hermitian(m: &M) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(h).eigenvalues.min()
}

pub fn min_eig_real(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.min()
}

/// Networks on at most 4 vertices with at most 8 source qubits.
pub fn small_networks() -> Vec<Hypergraph> {
    vec![
        fixtures::triangle(),
        fixtures::cycle(2),
        fixtures::cycle(4),
        fixtures::path(3),
        fixtures::path(4),
        fixtures::single_source(3),
        fixtures::single_source(4),
        Hypergraph::new(4, vec![vec![0, 1, 2], vec![2, 3], vec![0, 3]]).unwrap(),
        Hypergraph::new(4, vec![vec![0, 1, 2, 3], vec![1, 3]]).unwrap(),
    ]
}

pub struct RandomNetwork {
    pub graph: Hypergraph,
    pub layout: SignalLayout,
    pub sources: BTreeMap<usize, LabeledState>,
    pub channels: ChannelAssignment,
    pub state: LabeledState,
}

/// Random sources, random local Kraus channels (rank 1..=3) and random
/// signal weights on one of [`small_networks`].
pub fn random_network(seed: u64) -> RandomNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nets = small_networks();
    let graph = nets[rng.random_range(0..nets.len())].clone();
    let sources: BTreeMap<usize, LabeledState> =
        (0..graph.edges().len()).map(|e| (e, qcore::random_source(&mut rng, &graph, e).unwrap())).collect();
    let rank = rng.random_range(1..=3);
    let channels = qcore::random_local_channels(&mut rng, &graph, rank).unwrap();
    let weights: Vec<f64> = (0..graph.num_vertices()).map(|_| rng.random_range(0.1..1.0)).collect();
    let layout = SignalLayout::singletons(&graph, weights).unwrap();
    let state = qcore::assemble_network_state(&graph, &sources, Some(&channels), None).unwrap();
    RandomNetwork { graph, layout, sources, channels, state }
}

/// Local `Z/2` generators of singleton signals as dense operators.
pub fn vertex_generators(state: &LabeledState, k: usize) -> Vec<M> {
    let reg = state.register();
    (0..k)
        .map(|v| {
            let qs: Vec<QubitLabel> = reg.iter().copied().filter(|q| q.vertex() == v).collect();
            embed_obs(reg, &Observable::collective_z_half(&qs))
        })
        .collect()
}

/// Influence of a singleton signal: the largest source touching it.
pub fn singleton_influence(g: &Hypergraph, v: usize) -> usize {
    g.edges().iter().filter(|e| e.contains(&v)).map(Vec::len).max().unwrap_or(1)
}

/// Sites on which `op` (over `n` sites) acts nontrivially, from
/// `op ≠ tr_j(op)/2 ⊗ 1_j`.
pub fn dense_support(op: &M, n: usize, tol: f64) -> Vec<usize> {
    (0..n)
        .filter(|&j| {
            let bit = 1usize << (n - 1 - j);
            let dim = 1usize << n;
            let mut dev: f64 = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    // average of op over the two values of qubit j, kept only where j agrees
                    let expect = if (a & bit) == (b & bit) {
                        (op[(a & !bit, b & !bit)] + op[(a | bit, b | bit)]) * 0.5
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    dev = dev.max((op[(a, b)] - expect).norm());
                }
            }
            dev > tol
        })
        .collect()
}
