use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use qnm_core::linalg::{self, CMatrix};
use qnm_core::metro::{self, ProductState};
use qnm_core::netgraph::{fixtures, GraphDocument, Hypergraph, SignalLayout};
use qnm_core::protocol::{self, Mode, ProtocolConfig, ProtocolDocument};
use qnm_core::qcore::{self, Channel, LabeledState, Observable, QubitLabel};
use qnm_core::report::{fmt_f64, fmt_list, json_f64, round_json, Table};
use qnm_core::witness::{self, CircuitSpec, Geometry, SpinChainSpec};

use crate::scenario::{invalid, parse, CliResult, Kind};

/// Result of one scenario point.
pub struct Outcome {
    pub report: Value,
    /// Flat record used for sweep tables and single-row CSV output.
    pub row: Vec<(&'static str, String)>,
    /// Richer CSV form of a single run, when the command has one.
    pub table: Option<Table>,
    /// Description of a violated invariant (exit code 4).
    pub alarm: Option<String>,
}

impl Outcome {
    fn new(report: Value, row: Vec<(&'static str, String)>) -> Self {
        Outcome { report: round_json(report), row, table: None, alarm: None }
    }

    fn alarm_if(mut self, cond: bool, msg: impl FnOnce() -> String) -> Self {
        if cond {
            self.alarm = Some(msg());
        }
        self
    }
}

/// Options given on the command line that override the payload.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
}

pub fn run(kind: Kind, payload: &Value, ov: Overrides) -> CliResult<Outcome> {
    let mut payload = payload.clone();
    let obj = payload.as_object_mut().ok_or_else(|| invalid("payload must be a JSON object"))?;
    if let Some(seed) = ov.seed {
        obj.insert("seed".into(), Value::from(seed));
    }
    if let Some(shots) = ov.shots {
        if kind != Kind::Protocol {
            return Err(invalid("--shots only applies to protocol scenarios"));
        }
        obj.insert("shots".into(), Value::from(shots));
    }
    match kind {
        Kind::Bound => cmd_bound(&payload),
        Kind::Witness => cmd_witness(&payload),
        Kind::Protocol => cmd_protocol(&payload),
        Kind::Decompose => cmd_decompose(&payload),
        Kind::Lightcone => cmd_lightcone(&payload),
    }
}

fn b(x: bool) -> String {
    x.to_string()
}

fn mat_json(m: &CMatrix) -> Value {
    let rows: Vec<Vec<[Value; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [json_f64(m[(i, j)].re), json_f64(m[(i, j)].im)]).collect())
        .collect();
    json!(rows)
}

fn take<T: for<'de> Deserialize<'de>>(v: &mut Value, key: &str) -> CliResult<Option<T>> {
    match v.as_object_mut().and_then(|o| o.remove(key)) {
        None | Some(Value::Null) => Ok(None),
        Some(x) => parse(key, &x).map(Some),
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Family {
    Triangle,
    Cycle,
    Path,
    Sun,
    SingleSource,
}

fn family_graph(f: Family, m: Option<usize>) -> CliResult<Hypergraph> {
    let need = |lo: usize| -> CliResult<usize> {
        let m = m.ok_or_else(|| invalid("this family needs `m`"))?;
        if m < lo {
            return Err(invalid(format!("m must be at least {lo}")));
        }
        Ok(m)
    };
    Ok(match f {
        Family::Triangle => fixtures::triangle(),
        Family::Cycle => fixtures::cycle(need(2)?),
        Family::Path => fixtures::path(need(2)?),
        Family::Sun => fixtures::sun(need(2)?),
        Family::SingleSource => fixtures::single_source(need(2)?),
    })
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum StateSpec {
    /// GHZ sources, no channels.
    #[default]
    Ghz,
    /// Haar-random sources and random local channels of the given Kraus rank
    /// (0 for none), drawn from the payload seed.
    Random { channel_rank: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkPayload {
    family: Option<Family>,
    m: Option<usize>,
    vertices: Option<Vec<usize>>,
    edges: Option<Vec<Vec<usize>>>,
    signals: Option<Vec<Vec<usize>>>,
    weights: Option<Vec<f64>>,
    #[serde(default)]
    state: StateSpec,
    #[serde(default = "one")]
    nu: u64,
    seed: Option<u64>,
}

fn one() -> u64 {
    1
}

struct Network {
    graph: Hypergraph,
    layout: SignalLayout,
    sources: BTreeMap<usize, LabeledState>,
    channels: qcore::ChannelAssignment,
    state: LabeledState,
    nu: u64,
}

fn build_network(p: &NetworkPayload) -> CliResult<Network> {
    let (graph, doc) = match (p.family, &p.vertices, &p.edges) {
        (Some(f), None, None) => {
            let g = family_graph(f, p.m)?;
            let doc = GraphDocument {
                signals: p.signals.clone(),
                weights: p.weights.clone(),
                ..GraphDocument::from_graph(&g, None)
            };
            (g, doc)
        }
        (None, Some(v), Some(e)) => {
            let doc = GraphDocument {
                vertices: v.clone(),
                edges: e.clone(),
                signals: p.signals.clone(),
                weights: p.weights.clone(),
            };
            (doc.graph()?, doc)
        }
        _ => return Err(invalid("give either `family` (with `m`) or `vertices` and `edges`")),
    };
    let layout = doc.layout(&graph)?;
    let (sources, channels) = match p.state {
        StateSpec::Ghz => (qcore::ghz_sources(&graph)?, BTreeMap::new()),
        StateSpec::Random { channel_rank } => {
            let seed = p.seed.ok_or_else(|| invalid("a random state needs `seed`"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sources = (0..graph.edges().len())
                .map(|e| Ok((e, qcore::random_source(&mut rng, &graph, e)?)))
                .collect::<qnm_core::Result<BTreeMap<_, _>>>()?;
            let channels = if channel_rank == 0 {
                BTreeMap::new()
            } else {
                qcore::random_local_channels(&mut rng, &graph, channel_rank)?
            };
            (sources, channels)
        }
    };
    let state = qcore::assemble_network_state(&graph, &sources, Some(&channels), None)?;
    Ok(Network { graph, layout, sources, channels, state, nu: p.nu })
}

fn cmd_bound(payload: &Value) -> CliResult<Outcome> {
    let p: NetworkPayload = parse("bound payload", payload)?;
    let net = build_network(&p)?;
    let cert = metro::bound_certificate(&net.graph, &net.layout, &net.state, net.nu)?;
    let mut report = cert.to_json();
    report["M"] = json!(net.graph.num_vertices());
    report["qubits"] = json!(net.state.num_qubits());
    let row = vec![
        ("M", net.graph.num_vertices().to_string()),
        ("bound", fmt_f64(cert.bound)),
        ("qfi_trace", fmt_f64(cert.qfi_trace)),
        ("gap_min_eig", fmt_f64(cert.gap_min_eig)),
        ("holds", b(cert.holds)),
        ("k_values", cert.k_values.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")),
        ("variances", fmt_list(&cert.variances)),
    ];
    let gap = cert.gap_min_eig;
    Ok(Outcome::new(report, row).alarm_if(!cert.holds, || format!("QFI bound violated: gap eigenvalue {gap:e}")))
}

fn cmd_decompose(payload: &Value) -> CliResult<Outcome> {
    let mut payload = payload.clone();
    let method: String = take(&mut payload, "method")?.ok_or_else(|| invalid("decompose needs `method` (cov|t)"))?;
    match method.as_str() {
        "cov" => decompose_cov(&payload),
        "t" => decompose_t(&payload),
        other => Err(invalid(format!("unknown decompose method `{other}`"))),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CovPayload {
    seed: u64,
    /// Qubits of each subsystem.
    subsystem_qubits: Vec<usize>,
    observables: usize,
    /// Largest support of a random observable.
    #[serde(default = "two")]
    max_support: usize,
    #[serde(default)]
    mixed: bool,
}

fn two() -> usize {
    2
}

/// Allowed deviation in the covariance decomposition checks.
const COV_TOL: f64 = 1e-9;
const ZERO_BLOCK_TOL: f64 = 1e-10;

fn decompose_cov(payload: &Value) -> CliResult<Outcome> {
    let p: CovPayload = parse("cov payload", payload)?;
    if p.subsystem_qubits.is_empty() || p.subsystem_qubits.contains(&0) {
        return Err(invalid("every subsystem needs at least one qubit"));
    }
    if p.max_support == 0 {
        return Err(invalid("max_support must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut factors = Vec::new();
    for (k, &nq) in p.subsystem_qubits.iter().enumerate() {
        let labels: Vec<QubitLabel> = (0..nq).map(|j| QubitLabel::ancilla(k, j)).collect();
        let mut st = LabeledState::pure(labels.clone(), linalg::random_state_vector(&mut rng, 1 << nq))?;
        if p.mixed {
            st = st.apply_channel(&Channel::random(&mut rng, labels, 2)?)?;
        }
        factors.push(st);
    }
    let all: Vec<QubitLabel> = factors.iter().flat_map(|f| f.register().to_vec()).collect();
    let observables = (0..p.observables)
        .map(|_| {
            let size = rng.random_range(1..=p.max_support.min(all.len()));
            let mut pool = all.clone();
            let mut support = Vec::with_capacity(size);
            for _ in 0..size {
                support.push(pool.swap_remove(rng.random_range(0..pool.len())));
            }
            Observable::new(support, linalg::random_hermitian(&mut rng, 1 << size))
        })
        .collect::<qnm_core::Result<Vec<_>>>()?;
    let product = ProductState::new(factors)?;
    let dec = metro::cov_decompose(&product, &observables)?;
    let cov = metro::cov_matrix(&product.joint()?, &observables)?;
    let sum_defect = linalg::max_abs_diff(&dec.total(), &cov.matrix);
    let mut zero_defect = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut parts = Vec::new();
    for (k, part) in dec.parts.iter().enumerate() {
        let eig = linalg::min_eigenvalue_hermitian(part);
        min_eig = min_eig.min(eig);
        for (i, o) in observables.iter().enumerate() {
            if o.support().iter().all(|q| q.vertex() != k) {
                for j in 0..observables.len() {
                    zero_defect = zero_defect.max(part[(i, j)].norm()).max(part[(j, i)].norm());
                }
            }
        }
        parts.push(json!({
            "subsystem": k,
            "upsilon": mat_json(part),
            "min_eigenvalue": json_f64(eig),
            "psd": eig >= -COV_TOL,
        }));
    }
    let holds = sum_defect <= COV_TOL && min_eig >= -COV_TOL && zero_defect <= ZERO_BLOCK_TOL;
    let report = json!({
        "method": "cov",
        "subsystems": p.subsystem_qubits,
        "observables": observables.iter().map(|o| o.support().iter().map(|q| q.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "covariance": mat_json(&cov.matrix),
        "parts": parts,
        "sum_defect": json_f64(sum_defect),
        "zero_block_defect": json_f64(zero_defect),
        "min_eigenvalue": json_f64(min_eig),
        "holds": holds,
    });
    let row = vec![
        ("seed", p.seed.to_string()),
        ("subsystems", p.subsystem_qubits.len().to_string()),
        ("observables", p.observables.to_string()),
        ("sum_defect", fmt_f64(sum_defect)),
        ("min_eigenvalue", fmt_f64(min_eig)),
        ("zero_block_defect", fmt_f64(zero_defect)),
        ("holds", b(holds)),
    ];
    Ok(Outcome::new(report, row).alarm_if(!holds, || "covariance decomposition check failed".into()))
}

fn decompose_t(payload: &Value) -> CliResult<Outcome> {
    let p: NetworkPayload = parse("t payload", payload)?;
    let net = build_network(&p)?;
    let dec = metro::t_decompose(&net.graph, &net.layout, &net.sources, &net.channels)?;
    let mut report = dec.to_json();
    report["method"] = json!("t");
    let c = dec.check;
    let row = vec![
        ("M", net.graph.num_vertices().to_string()),
        ("qfi_gap_min_eig", fmt_f64(c.qfi_gap_min_eig)),
        ("variance_defect", fmt_f64(c.variance_defect)),
        ("projector_defect", fmt_f64(c.projector_defect)),
        ("part_min_eig", fmt_f64(c.part_min_eig)),
        ("holds", b(c.holds())),
    ];
    Ok(Outcome::new(report, row).alarm_if(!c.holds(), || format!("T-matrix conditions violated: {c:?}")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
enum WitnessPayload {
    Ising {
        #[serde(rename = "M")]
        m: usize,
        #[serde(default = "one_usize")]
        r: usize,
        epsilon: f64,
    },
    SpinChain(SpinChainSpec),
    ShallowCircuit(CircuitPayload),
    EmbeddedParameter(CircuitPayload),
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitPayload {
    geometry: Geometry,
    /// Sites (chain and generic); the lattice takes its size from the geometry.
    n: Option<usize>,
    depth: usize,
    seed: u64,
    /// Gate locality of generic circuits.
    #[serde(default = "two")]
    l: usize,
    #[serde(default)]
    input: InputKind,
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum InputKind {
    #[default]
    Plus,
    Random,
}

fn build_circuit(p: &CircuitPayload, rng: &mut ChaCha8Rng) -> CliResult<CircuitSpec> {
    let n = || p.n.ok_or_else(|| invalid("this geometry needs `n`"));
    Ok(match p.geometry {
        Geometry::Chain1d => witness::brickwork_chain(rng, n()?, p.depth)?,
        Geometry::Lattice2d { width, height } => witness::brickwork_lattice(rng, width, height, p.depth)?,
        Geometry::Generic => witness::random_generic(rng, n()?, p.l, p.depth)?,
    })
}

fn site_inputs(kind: InputKind, n: usize, rng: &mut ChaCha8Rng) -> CliResult<Vec<LabeledState>> {
    qcore::sites(n)
        .into_iter()
        .map(|q| match kind {
            InputKind::Plus => Ok(LabeledState::plus(q)),
            InputKind::Random => Ok(LabeledState::pure(vec![q], linalg::random_state_vector(rng, 2))?),
        })
        .collect()
}

fn z_terms(n: usize) -> Vec<Observable> {
    qcore::sites(n).into_iter().map(Observable::z_half).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_f64)
}

fn cmd_witness(payload: &Value) -> CliResult<Outcome> {
    let p: WitnessPayload = parse("witness payload", payload)?;
    Ok(match p {
        WitnessPayload::Ising { m, r, epsilon } => {
            let c = witness::ising_bound_compare(m, epsilon, r)?;
            let row = vec![
                ("M", m.to_string()),
                ("r", r.to_string()),
                ("epsilon", fmt_f64(epsilon)),
                ("our_bound", fmt_f64(c.ours)),
                ("separable_small_eps", fmt_f64(c.separable_small_eps)),
                ("separable_large_eps", fmt_f64(c.separable_large_eps)),
                ("large_eps_regime", b(c.large_eps_regime)),
            ];
            Outcome::new(c.to_json(), row)
        }
        WitnessPayload::SpinChain(spec) => {
            let report = witness::spin_chain_report(&spec)?;
            let bound = witness::spin_chain_mse_bound(&spec)?;
            let row = vec![
                ("M", spec.m.to_string()),
                ("r", spec.r.to_string()),
                ("tau", spec.tau.to_string()),
                ("nu", spec.nu.to_string()),
                ("our_bound", fmt_f64(bound)),
            ];
            Outcome::new(report, row)
        }
        WitnessPayload::ShallowCircuit(cp) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cp.seed);
            let spec = build_circuit(&cp, &mut rng)?;
            let inputs = site_inputs(cp.input, spec.num_sites(), &mut rng)?;
            let r = witness::shallow_qfi_bound(&inputs, &spec, &z_terms(spec.num_sites()))?;
            let row = vec![
                ("sites", spec.num_sites().to_string()),
                ("depth", spec.depth().to_string()),
                ("q", r.q.to_string()),
                ("our_bound", fmt_f64(r.bound)),
                ("exact_qfi", opt(r.exact_qfi)),
            ];
            let violated = r.exact_qfi.is_some_and(|f| f > r.bound + 1e-9);
            let (bound, exact) = (r.bound, r.exact_qfi);
            Outcome::new(r.to_json(), row)
                .alarm_if(violated, || format!("exact QFI {exact:?} exceeds the light-cone bound {bound}"))
        }
        WitnessPayload::EmbeddedParameter(cp) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cp.seed);
            let base = build_circuit(&cp, &mut rng)?;
            let spec = witness::with_random_generators(&mut rng, &base);
            let inputs = site_inputs(cp.input, spec.num_sites(), &mut rng)?;
            let r = witness::embedded_param_qfi_bound(&inputs, &spec)?;
            let row = vec![
                ("sites", spec.num_sites().to_string()),
                ("depth", spec.depth().to_string()),
                ("our_bound", fmt_f64(r.bound)),
                ("exact_qfi", opt(r.exact_qfi)),
                ("finite_difference_qfi", opt(r.finite_difference_qfi)),
            ];
            let violated = r.exact_qfi.is_some_and(|f| f > r.bound + 1e-9);
            let bound = r.bound;
            Outcome::new(r.to_json(), row).alarm_if(violated, || format!("exact QFI exceeds the bound {bound}"))
        }
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightconePayload {
    geometry: Geometry,
    n: Option<usize>,
    depth: usize,
    seed: u64,
    #[serde(default = "two")]
    l: usize,
}

fn cmd_lightcone(payload: &Value) -> CliResult<Outcome> {
    let p: LightconePayload = parse("lightcone payload", payload)?;
    let cp =
        CircuitPayload { geometry: p.geometry, n: p.n, depth: p.depth, seed: p.seed, l: p.l, input: InputKind::Plus };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let spec = build_circuit(&cp, &mut rng)?;
    let r = witness::exact_lightcone_check(&spec, &z_terms(spec.num_sites()))?;
    let report = json!({
        "geometry": p.geometry,
        "sites": spec.num_sites(),
        "depth": p.depth,
        "q_bound": r.bound,
        "max_support": r.max_support,
        "supports": r.supports,
    });
    let row = vec![
        ("sites", spec.num_sites().to_string()),
        ("depth", p.depth.to_string()),
        ("q_bound", r.bound.to_string()),
        ("max_support", r.max_support.to_string()),
        ("within_bound", b(r.max_support <= r.bound)),
    ];
    let (m, q) = (r.max_support, r.bound);
    Ok(Outcome::new(report, row).alarm_if(m > q, || format!("conjugated support {m} exceeds the light cone {q}")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PerVertex<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Copy> PerVertex<T> {
    fn expand(&self, k: usize, what: &str) -> CliResult<BTreeMap<usize, T>> {
        match self {
            PerVertex::All(x) => Ok((0..k).map(|v| (v, *x)).collect()),
            PerVertex::Each(xs) if xs.len() == k => Ok(xs.iter().copied().enumerate().collect()),
            PerVertex::Each(xs) => Err(invalid(format!("{} values of `{what}` for {k} vertices", xs.len()))),
        }
    }
}

/// A protocol on a named network family.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolFixture {
    family: Family,
    m: Option<usize>,
    /// Defaults to the last vertex.
    center: Option<usize>,
    theta: PerVertex<f64>,
    alpha: Option<PerVertex<i64>>,
    #[serde(rename = "L")]
    l: Option<u64>,
    #[serde(default)]
    mode: Mode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditSpec {
    probes: Vec<Vec<f64>>,
}

/// A protocol payload with the CLI-only keys split off.
struct ProtocolRequest {
    cfg: ProtocolConfig,
    order: Option<Vec<usize>>,
    fisher: bool,
    audit: Option<AuditSpec>,
}

fn config_error(e: qnm_core::Error) -> crate::scenario::CliError {
    match e {
        qnm_core::Error::InvalidConfig(m) => invalid(m),
        other => other.into(),
    }
}

fn protocol_request(mut payload: Value) -> CliResult<ProtocolRequest> {
    let order: Option<Vec<usize>> = take(&mut payload, "order")?;
    let fisher: bool = take(&mut payload, "fisher")?.unwrap_or(false);
    let audit: Option<AuditSpec> = take(&mut payload, "audit")?;
    let seed: Option<u64> = take(&mut payload, "seed")?;
    let shots: Option<u64> = take(&mut payload, "shots")?;
    let mut cfg = if payload.get("family").is_some() {
        let f: ProtocolFixture = parse("protocol payload", &payload)?;
        let graph = family_graph(f.family, f.m)?;
        let k = graph.num_vertices();
        let alpha = f.alpha.unwrap_or(PerVertex::All(1)).expand(k, "alpha")?;
        let max = alpha.values().map(|w| w.unsigned_abs()).max().unwrap_or(1);
        ProtocolConfig {
            center: f.center.unwrap_or(k - 1),
            theta: f.theta.expand(k, "theta")?,
            alpha,
            l: f.l.unwrap_or(max),
            mode: f.mode,
            graph,
        }
    } else {
        let mut doc = ProtocolDocument::from_value(payload).map_err(config_error)?;
        // validation inside config() must already see a seed given on the command line
        if let (Mode::Sampled { seed: None, shots }, Some(s)) = (doc.mode, seed) {
            doc.mode = Mode::Sampled { seed: Some(s), shots };
        }
        doc.config().map_err(config_error)?
    };
    if let Some(n) = shots {
        cfg.mode = Mode::Sampled { seed: None, shots: n };
    }
    // a command-line seed wins over the scenario's
    if let (Mode::Sampled { shots, .. }, Some(s)) = (cfg.mode, seed) {
        cfg.mode = Mode::Sampled { seed: Some(s), shots };
    }
    cfg.validate().map_err(config_error)?;
    Ok(ProtocolRequest { cfg, order, fisher, audit })
}

fn cmd_protocol(payload: &Value) -> CliResult<Outcome> {
    let ProtocolRequest { cfg, order, fisher, audit } = protocol_request(payload.clone())?;
    let m = cfg.num_sensors();
    if let Mode::Sampled { .. } = cfg.mode {
        let s = protocol::run_sampled(&cfg)?;
        let row = vec![
            ("M", m.to_string()),
            ("shots", s.shots.to_string()),
            ("success_count", s.success_count.to_string()),
            ("center_ghz_given_success", s.center_ghz_given_success.to_string()),
            ("conditional_frequency", opt(s.conditional_frequency())),
            ("exact_success_probability", fmt_f64(s.exact_success_probability)),
            ("exact_center_probability", fmt_f64(s.exact_center_probability)),
        ];
        let mut out = Outcome::new(s.to_json(), row);
        out.table = Some(s.to_table());
        return Ok(out);
    }
    let trace = match &order {
        Some(o) => protocol::run_exact_with_order(&cfg, o)?,
        None => protocol::run_exact(&cfg)?,
    };
    let mut report = trace.to_json();
    report["M"] = json!(m);
    report["qubits"] = json!(cfg.qubit_count());
    report["queries_per_run"] = json!(cfg.queries_per_run());
    let mut alarms = Vec::new();
    if (trace.center_probability - trace.predicted_center_probability).abs() > 1e-9 {
        alarms.push(format!(
            "center probability {} differs from cos²(Σα̃θ/2) = {}",
            trace.center_probability, trace.predicted_center_probability
        ));
    }
    if trace.success_probability < trace.lower_bound * (1.0 - 1e-12) {
        alarms.push(format!("success probability {} below the bound {}", trace.success_probability, trace.lower_bound));
    }
    let fi = if fisher {
        let f = protocol::fisher_information_of_estimate(&cfg)?;
        report["fisher"] = round_json(json!({
            "target": f.target,
            "probability": f.probability,
            "derivative": f.derivative,
            "derivative_coarse": f.derivative_coarse,
            "fisher_information": f.fisher_information,
        }));
        Some(f.fisher_information)
    } else {
        None
    };
    if let Some(a) = audit {
        let r = protocol::privacy_audit(&cfg, &a.probes)?;
        if !r.target_only {
            alarms.push("privacy audit: conditional states depend on more than the target".into());
        }
        report["privacy"] = r.to_json();
    }
    let row = vec![
        ("M", m.to_string()),
        ("qubits", cfg.qubit_count().to_string()),
        ("success_probability", fmt_f64(trace.success_probability)),
        ("success_probability_lower_bound", fmt_f64(trace.lower_bound)),
        ("center_probability", fmt_f64(trace.center_probability)),
        ("predicted_center_probability", fmt_f64(trace.predicted_center_probability)),
        ("fisher_information", opt(fi)),
    ];
    let mut out = Outcome::new(report, row);
    if !alarms.is_empty() {
        out.alarm = Some(alarms.join("; "));
    }
    Ok(out)
}

/// Least-squares slope and intercept of `log y` against `log x`.
pub fn log_log_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
