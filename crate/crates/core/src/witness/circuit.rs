use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qcore::{positions_in, LabeledState, Observable, QubitLabel};
use crate::tol::Tolerances;

/// Largest operator support tracked during Heisenberg conjugation.
pub const MAX_CONJUGATED_SUPPORT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Generic,
    #[serde(rename = "chain-1d")]
    Chain1d,
    /// Row-major `width × height` grid of sites.
    #[serde(rename = "lattice-2d")]
    Lattice2d {
        width: usize,
        height: usize,
    },
}

/// One gate `e^{-iθH} W` on a few sites; `W` alone at `θ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub sites: Vec<usize>,
    pub unitary: CMatrix,
    pub generator: Option<CMatrix>,
}

impl Gate {
    pub fn new(sites: Vec<usize>, unitary: CMatrix) -> Self {
        Gate { sites, unitary, generator: None }
    }

    /// `e^{-iθH} W`.
    pub fn at(&self, theta: f64) -> CMatrix {
        match &self.generator {
            Some(h) if theta != 0.0 => linalg::unitary_from_hamiltonian(h, theta) * &self.unitary,
            _ => self.unitary.clone(),
        }
    }

    fn labels(&self) -> Vec<QubitLabel> {
        self.sites.iter().map(|&s| QubitLabel::site(s)).collect()
    }
}

/// A depth-`D` circuit of `l`-local gates, layer 1 applied first.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    geometry: Geometry,
    num_sites: usize,
    gate_locality: usize,
    ham_locality: usize,
    layers: Vec<Vec<Gate>>,
}

fn adjacent(geometry: Geometry, a: usize, b: usize) -> bool {
    match geometry {
        Geometry::Generic => true,
        Geometry::Chain1d => a.abs_diff(b) == 1,
        Geometry::Lattice2d { width, .. } => {
            let (ra, ca) = (a / width, a % width);
            let (rb, cb) = (b / width, b % width);
            ra.abs_diff(rb) + ca.abs_diff(cb) == 1
        }
    }
}

impl CircuitSpec {
    pub fn new(
        geometry: Geometry,
        num_sites: usize,
        gate_locality: usize,
        ham_locality: usize,
        layers: Vec<Vec<Gate>>,
    ) -> Result<Self> {
        if gate_locality < 1 || ham_locality < 1 {
            return Err(Error::InvalidCircuit("gate and Hamiltonian locality must be at least 1".into()));
        }
        if let Geometry::Lattice2d { width, height } = geometry {
            if width * height != num_sites {
                return Err(Error::InvalidCircuit(format!("{width}x{height} lattice but {num_sites} sites")));
            }
        }
        for (j, layer) in layers.iter().enumerate() {
            let mut used = BTreeSet::new();
            for gate in layer {
                let d = 1usize << gate.sites.len();
                if gate.sites.is_empty() || gate.sites.len() > gate_locality {
                    return Err(Error::InvalidCircuit(format!(
                        "layer {j} has a gate on {} sites, locality is {gate_locality}",
                        gate.sites.len()
                    )));
                }
                if gate.unitary.nrows() != d || gate.unitary.ncols() != d {
                    return Err(Error::InvalidCircuit(format!("layer {j} gate matrix is not {d}x{d}")));
                }
                if let Some(h) = &gate.generator {
                    if h.nrows() != d || linalg::hermiticity_defect(h) > Tolerances::current().hermitian {
                        return Err(Error::InvalidCircuit(format!(
                            "layer {j} gate generator is not Hermitian {d}x{d}"
                        )));
                    }
                }
                for &s in &gate.sites {
                    if s >= num_sites {
                        return Err(Error::InvalidCircuit(format!("layer {j} uses site {s} of {num_sites}")));
                    }
                    if !used.insert(s) {
                        return Err(Error::InvalidCircuit(format!("gates of layer {j} overlap on site {s}")));
                    }
                }
                if gate.sites.len() == 2 && !adjacent(geometry, gate.sites[0], gate.sites[1]) {
                    return Err(Error::InvalidCircuit(format!(
                        "layer {j} gate {:?} does not join neighbouring sites",
                        gate.sites
                    )));
                }
            }
        }
        Ok(CircuitSpec { geometry, num_sites, gate_locality, ham_locality, layers })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn gate_locality(&self) -> usize {
        self.gate_locality
    }

    pub fn ham_locality(&self) -> usize {
        self.ham_locality
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    /// Apply layers `1..=D` with every gate at parameter `theta`.
    pub fn apply(&self, state: &LabeledState, theta: f64) -> Result<LabeledState> {
        let mut st = state.clone();
        for layer in &self.layers {
            for gate in layer {
                st = st.apply_unitary(&gate.labels(), &gate.at(theta))?;
            }
        }
        Ok(st)
    }
}

fn haar_gate<R: Rng + ?Sized>(rng: &mut R, sites: Vec<usize>) -> Gate {
    let d = 1usize << sites.len();
    Gate::new(sites, linalg::random_unitary(rng, d))
}

/// Brickwork of Haar-random two-qubit gates on a chain: odd layers pair
/// `(0,1),(2,3),…`, even layers `(1,2),(3,4),…`.
pub fn brickwork_chain<R: Rng + ?Sized>(rng: &mut R, n: usize, depth: usize) -> Result<CircuitSpec> {
    let layers = (0..depth)
        .map(|j| (j % 2..n.saturating_sub(1)).step_by(2).map(|i| haar_gate(rng, vec![i, i + 1])).collect())
        .collect();
    CircuitSpec::new(Geometry::Chain1d, n, 2, 1, layers)
}

/// Brickwork on a row-major grid cycling through horizontal-even,
/// horizontal-odd, vertical-even and vertical-odd bonds.
pub fn brickwork_lattice<R: Rng + ?Sized>(
    rng: &mut R,
    width: usize,
    height: usize,
    depth: usize,
) -> Result<CircuitSpec> {
    let mut layers = Vec::with_capacity(depth);
    for j in 0..depth {
        let mut layer = Vec::new();
        let parity = (j / 2) % 2;
        if j % 2 == 0 {
            for r in 0..height {
                for c in (parity..width.saturating_sub(1)).step_by(2) {
                    layer.push(haar_gate(rng, vec![r * width + c, r * width + c + 1]));
                }
            }
        } else {
            for r in (parity..height.saturating_sub(1)).step_by(2) {
                for c in 0..width {
                    layer.push(haar_gate(rng, vec![r * width + c, (r + 1) * width + c]));
                }
            }
        }
        layers.push(layer);
    }
    CircuitSpec::new(Geometry::Lattice2d { width, height }, width * height, 2, 1, layers)
}

/// Layers of random disjoint `l`-site gates on arbitrary sites.
pub fn random_generic<R: Rng + ?Sized>(rng: &mut R, n: usize, l: usize, depth: usize) -> Result<CircuitSpec> {
    use rand::seq::SliceRandom;
    let mut layers = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut sites: Vec<usize> = (0..n).collect();
        sites.shuffle(rng);
        let layer = sites.chunks(l).filter(|c| c.len() == l).map(|c| haar_gate(rng, c.to_vec())).collect();
        layers.push(layer);
    }
    CircuitSpec::new(Geometry::Generic, n, l, 1, layers)
}

/// Every gate replaced by the identity.
pub fn identity_layers(spec: &CircuitSpec) -> CircuitSpec {
    let layers = spec
        .layers
        .iter()
        .map(|layer| layer.iter().map(|g| Gate::new(g.sites.clone(), linalg::identity(1 << g.sites.len()))).collect())
        .collect();
    CircuitSpec { layers, ..spec.clone() }
}

/// Attach a Haar-random Hermitian generator to every gate.
pub fn with_random_generators<R: Rng + ?Sized>(rng: &mut R, spec: &CircuitSpec) -> CircuitSpec {
    let layers = spec
        .layers
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|g| Gate { generator: Some(linalg::random_hermitian(rng, 1 << g.sites.len())), ..g.clone() })
                .collect()
        })
        .collect();
    CircuitSpec { layers, ..spec.clone() }
}

/// Bound on the locality of `U† H U` for `p`-local terms: `l^D p` in general,
/// `2D+1` on a chain and `D² + (D+1)²` on a square lattice (two-qubit gates,
/// single-site terms). Depth zero leaves the locality at `p`.
pub fn light_cone_q(spec: &CircuitSpec) -> Result<usize> {
    let d = spec.depth();
    let (l, p) = (spec.gate_locality, spec.ham_locality);
    if d == 0 {
        return Ok(p);
    }
    match spec.geometry {
        Geometry::Generic => {
            let lp = (l as u64).checked_pow(d as u32).and_then(|x| x.checked_mul(p as u64));
            lp.map(|x| x as usize).ok_or_else(|| Error::InvalidCircuit("light cone overflows".into()))
        }
        Geometry::Chain1d | Geometry::Lattice2d { .. } if l != 2 || p != 1 => Err(Error::UnsupportedGeometry(format!(
            "geometric light cones need two-qubit gates and single-site terms (l={l}, p={p})"
        ))),
        Geometry::Chain1d => Ok(2 * d + 1),
        Geometry::Lattice2d { .. } => Ok(d * d + (d + 1) * (d + 1)),
    }
}

/// Operator on a set of sites.
#[derive(Debug, Clone)]
pub struct SiteOperator {
    pub sites: Vec<usize>,
    pub matrix: CMatrix,
}

impl SiteOperator {
    pub fn from_observable(obs: &Observable) -> Result<Self> {
        let sites = obs
            .support()
            .iter()
            .map(|q| match q {
                QubitLabel::Ancilla { vertex, slot: 0 } => Ok(*vertex),
                other => Err(Error::SupportMismatch(format!("{other} is not a circuit site"))),
            })
            .collect::<Result<_>>()?;
        Ok(SiteOperator { sites, matrix: obs.matrix().clone() })
    }

    pub fn labels(&self) -> Vec<QubitLabel> {
        self.sites.iter().map(|&s| QubitLabel::site(s)).collect()
    }

    pub fn to_observable(&self) -> Result<Observable> {
        Observable::new_symmetrized(self.labels(), self.matrix.clone())
    }

    /// Conjugate by one gate, `G† O G`, widening the support when they overlap.
    fn conjugate_by(&mut self, gate: &Gate, theta: f64) -> Result<()> {
        if !gate.sites.iter().any(|s| self.sites.contains(s)) {
            return Ok(());
        }
        let mut sites = self.sites.clone();
        for &s in &gate.sites {
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
        if sites.len() > MAX_CONJUGATED_SUPPORT {
            return Err(Error::TooLarge(format!(
                "conjugated operator reaches {} sites (limit {MAX_CONJUGATED_SUPPORT})",
                sites.len()
            )));
        }
        let all: Vec<usize> = (0..sites.len()).collect();
        let from: Vec<usize> = (0..self.sites.len()).collect();
        let m = linalg::embed(&self.matrix, &from, &all);
        let pos: Vec<usize> = gate.sites.iter().map(|s| sites.iter().position(|x| x == s).unwrap()).collect();
        self.matrix = linalg::conjugate_local(&m, sites.len(), &pos, &gate.at(theta).adjoint());
        self.sites = sites;
        Ok(())
    }

    /// Drop every site on which the operator acts as the identity, judged by
    /// the operator norm of `O − 1_q ⊗ tr_q(O)/2`.
    pub fn trimmed(&self, threshold: f64) -> SiteOperator {
        let mut op = self.clone();
        loop {
            let n = op.sites.len();
            let idx: Vec<usize> = (0..n).collect();
            let mut dropped = false;
            for q in 0..n {
                let reduced = linalg::weighted_partial_trace(&op.matrix, &idx, &linalg::identity(2), &[q]).scale(0.5);
                let rest: Vec<usize> = idx.iter().copied().filter(|&x| x != q).collect();
                let lifted = linalg::embed(&reduced, &rest, &idx);
                if linalg::operator_norm_hermitian(&(&op.matrix - lifted)) <= threshold {
                    op.matrix = reduced;
                    op.sites.remove(q);
                    dropped = true;
                    break;
                }
            }
            if !dropped {
                return op;
            }
        }
    }
}

/// `U_{≤j}† O U_{≤j}` for the first `upto` layers (all layers when `None`).
pub fn heisenberg(spec: &CircuitSpec, op: &SiteOperator, upto: Option<usize>, theta: f64) -> Result<SiteOperator> {
    let upto = upto.unwrap_or(spec.depth()).min(spec.depth());
    let mut out = op.clone();
    for layer in spec.layers[..upto].iter().rev() {
        for gate in layer {
            out.conjugate_by(gate, theta)?;
        }
    }
    Ok(out)
}

/// Exact supports of every conjugated term.
#[derive(Debug, Clone, PartialEq)]
pub struct LightconeReport {
    pub supports: Vec<Vec<usize>>,
    pub max_support: usize,
    pub bound: usize,
}

/// Conjugate each term by the circuit and measure the sites it acts on
/// nontrivially; compare the largest with [`light_cone_q`].
pub fn exact_lightcone_check(spec: &CircuitSpec, terms: &[Observable]) -> Result<LightconeReport> {
    let bound = light_cone_q(spec)?;
    let threshold = Tolerances::current().trivial_action;
    let mut supports = Vec::with_capacity(terms.len());
    for t in terms {
        let op = SiteOperator::from_observable(t)?;
        if let Some(&s) = op.sites.iter().find(|&&s| s >= spec.num_sites) {
            return Err(Error::SupportMismatch(format!("term acts on site {s} outside the circuit")));
        }
        let conj = heisenberg(spec, &op, None, 0.0)?.trimmed(threshold);
        let mut sites = conj.sites;
        sites.sort_unstable();
        supports.push(sites);
    }
    let max_support = supports.iter().map(Vec::len).max().unwrap_or(0);
    Ok(LightconeReport { supports, max_support, bound })
}

/// Check an explicit single-site product state covering sites `0..n`.
pub(crate) fn site_factors(factors: &[LabeledState], n: usize) -> Result<Vec<LabeledState>> {
    let mut by_site: Vec<Option<LabeledState>> = vec![None; n];
    for f in factors {
        if f.num_qubits() != 1 {
            return Err(Error::NotSeparableInput(format!(
                "input factor on {} qubits; a product of single-site states is required",
                f.num_qubits()
            )));
        }
        let site = match f.register()[0] {
            QubitLabel::Ancilla { vertex, slot: 0 } if vertex < n => vertex,
            other => return Err(Error::NotSeparableInput(format!("factor on {other} is not a circuit site"))),
        };
        if by_site[site].replace(f.clone()).is_some() {
            return Err(Error::NotSeparableInput(format!("site {site} given twice")));
        }
    }
    by_site
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| Error::NotSeparableInput(format!("no state for site {i}"))))
        .collect()
}

/// `Var(ρ, O)` for a product of single-site states and an operator on a few
/// sites.
pub(crate) fn product_variance(sites: &[LabeledState], op: &SiteOperator) -> Result<f64> {
    if op.sites.is_empty() {
        return Ok(0.0);
    }
    let local: Vec<LabeledState> = op.sites.iter().map(|&s| sites[s].clone()).collect();
    let rho = LabeledState::product(&local)?;
    let obs = op.to_observable()?;
    positions_in(rho.register(), obs.support())?;
    rho.variance(&obs)
}
