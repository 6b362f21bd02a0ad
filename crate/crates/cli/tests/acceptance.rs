//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qnm_core::linalg;
use qnm_core::metro::{self, ProductState};
use qnm_core::netgraph::{fixtures, SignalLayout};
use qnm_core::protocol::{self, ProtocolConfig};
use qnm_core::qcore::{self, Channel, LabeledState, Observable, QubitLabel};
use qnm_core::witness;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn qfi_bound_on_random_networks() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut worst_oracle = f64::INFINITY;
    let mut max_qubits = 0;
    for seed in 0..100u64 {
        let net = oracle::random_network(seed);
        max_qubits = max_qubits.max(net.state.num_qubits());
        let k = net.graph.num_vertices();
        let check = metro::verify_qfi_bound(&net.graph, &net.layout, &net.state).map_err(|e| e.to_string())?;
        ensure(check.holds, || format!("seed {seed}: bound check failed"))?;
        worst = worst.min(check.min_eigenvalue_of_gap);

        let rho = net.state.density_matrix().map_err(|e| e.to_string())?;
        let gens = oracle::vertex_generators(&net.state, k);
        let f = oracle::qfi(&rho, &gens);
        let diff = (&check.qfi.matrix - &f).abs().max();
        ensure(diff < 1e-8, || format!("seed {seed}: QFI differs from the reference by {diff:e}"))?;
        let mut gap = -f;
        for v in 0..k {
            gap[(v, v)] += 4.0 * oracle::singleton_influence(&net.graph, v) as f64 * oracle::variance(&rho, &gens[v]);
        }
        worst_oracle = worst_oracle.min(oracle::min_eig_real(&gap));
    }
    let elapsed = start.elapsed();
    ensure(worst >= -1e-8 && worst_oracle >= -1e-8, || {
        format!("gap min eigenvalue {worst:e} (reference {worst_oracle:e})")
    })?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100 states, ≤ 4 vertices, ≤ {max_qubits} qubits; min gap eigenvalue {worst:.3e} (reference {worst_oracle:.3e}); {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn random_product_instance(seed: u64) -> (ProductState, Vec<Observable>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=4);
    let mut factors = Vec::new();
    for f in 0..k {
        let nq = rng.random_range(1..=2);
        let labels: Vec<QubitLabel> = (0..nq).map(|j| QubitLabel::ancilla(f, j)).collect();
        let mut st = LabeledState::pure(labels.clone(), linalg::random_state_vector(&mut rng, 1 << nq)).unwrap();
        if rng.random_bool(0.5) {
            st = st.apply_channel(&Channel::random(&mut rng, labels, 2).unwrap()).unwrap();
        }
        factors.push(st);
    }
    let all: Vec<QubitLabel> = factors.iter().flat_map(|f| f.register().to_vec()).collect();
    let s = rng.random_range(1..=4);
    let obs = (0..s)
        .map(|_| {
            let size = rng.random_range(1..=2.min(all.len()));
            let mut pool = all.clone();
            let support: Vec<QubitLabel> =
                (0..size).map(|_| pool.swap_remove(rng.random_range(0..pool.len()))).collect();
            Observable::new(support, linalg::random_hermitian(&mut rng, 1 << size)).unwrap()
        })
        .collect();
    (ProductState::new(factors).unwrap(), obs)
}

fn covariance_decomposition() -> Outcome {
    let start = Instant::now();
    let (mut sum_err, mut min_eig, mut zero_err) = (0.0f64, f64::INFINITY, 0.0f64);
    for seed in 0..100u64 {
        let (product, obs) = random_product_instance(seed);
        let joint = product.joint().map_err(|e| e.to_string())?;
        let reg = joint.register().to_vec();
        let rho = joint.density_matrix().map_err(|e| e.to_string())?;
        let dense: Vec<oracle::M> = obs.iter().map(|o| oracle::embed_obs(&reg, o)).collect();
        let cov = oracle::covariance(&rho, &dense);
        let dec = metro::cov_decompose(&product, &obs).map_err(|e| e.to_string())?;
        sum_err = sum_err.max((dec.total() - &cov).iter().map(|z| z.norm()).fold(0.0, f64::max));
        for (k, part) in dec.parts.iter().enumerate() {
            min_eig = min_eig.min(oracle::min_eig_hermitian(part));
            for (i, o) in obs.iter().enumerate() {
                if o.support().iter().all(|q| q.vertex() != k) {
                    for j in 0..obs.len() {
                        zero_err = zero_err.max(part[(i, j)].norm()).max(part[(j, i)].norm());
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(sum_err <= 1e-9, || format!("Σ Υ − Cov = {sum_err:e}"))?;
    ensure(min_eig >= -1e-9, || format!("Υ min eigenvalue {min_eig:e}"))?;
    ensure(zero_err <= 1e-10, || format!("trivial-action block {zero_err:e}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100 instances; max |ΣΥ−Cov| {sum_err:.2e}, min eig {min_eig:.2e}, zero blocks {zero_err:.1e}; {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn t_certificate() -> Outcome {
    let g = fixtures::triangle();
    let layout = SignalLayout::singletons_average(&g).map_err(|e| e.to_string())?;
    let sources = qcore::ghz_sources(&g).map_err(|e| e.to_string())?;
    let dec = metro::t_decompose(&g, &layout, &sources, &Default::default()).map_err(|e| e.to_string())?;
    ensure(dec.check.holds(), || format!("triangle: {:?}", dec.check))?;
    let mut worst_gap = dec.check.qfi_gap_min_eig;
    for seed in 0..20u64 {
        let net = oracle::random_network(7000 + seed);
        let dec =
            metro::t_decompose(&net.graph, &net.layout, &net.sources, &net.channels).map_err(|e| e.to_string())?;
        ensure(dec.check.holds(), || format!("seed {seed}: {:?}", dec.check))?;
        // independent check of conditions 1 and 2 against the reference QFI and variances
        let rho = net.state.density_matrix().map_err(|e| e.to_string())?;
        let gens = oracle::vertex_generators(&net.state, net.graph.num_vertices());
        let f = oracle::qfi(&rho, &gens);
        let sum = dec.parts.iter().skip(1).fold(dec.parts[0].clone(), |a, p| a + p);
        let gap = oracle::M::from_fn(f.nrows(), f.ncols(), |i, j| sum[(i, j)] - Complex64::new(f[(i, j)] / 4.0, 0.0));
        let e = oracle::min_eig_hermitian(&gap);
        ensure(e >= -1e-8, || format!("seed {seed}: Σ T − F/4 has eigenvalue {e:e}"))?;
        for (v, h) in gens.iter().enumerate() {
            let d = (sum[(v, v)].re - oracle::variance(&rho, h)).abs();
            ensure(d <= 1e-8, || format!("seed {seed}: variance defect {d:e}"))?;
        }
        worst_gap = worst_gap.min(dec.check.qfi_gap_min_eig);
    }
    Ok(format!("triangle GHZ + 20 random instances; min eig(ΣT − F/4) {worst_gap:.2e}"))
}

fn protocol_exactness() -> Outcome {
    let mut notes = Vec::new();
    for m in 3..=5usize {
        let start = Instant::now();
        let theta: Vec<f64> = (0..m).map(|i| 0.37 * (i as f64 + 1.0) - 0.5).collect();
        let cfg = ProtocolConfig::unit_weights(fixtures::cycle(m), m - 1, &theta).map_err(|e| e.to_string())?;
        let t = protocol::run_exact(&cfg).map_err(|e| e.to_string())?;
        let p = (theta.iter().sum::<f64>() / 2.0).cos().powi(2);
        let expected = 2f64.powi(-(3 * m as i32 - 3));
        let elapsed = start.elapsed();
        ensure((t.center_probability - p).abs() <= 1e-9, || format!("M={m}: P {} vs {p}", t.center_probability))?;
        ensure((t.success_probability - expected).abs() <= 1e-12, || {
            format!("M={m}: success {} vs {expected}", t.success_probability)
        })?;
        ensure(elapsed < Duration::from_secs(60), || format!("M={m} took {elapsed:?}"))?;
        notes.push(format!("M={m} ({} qubits) {:.2}s", cfg.qubit_count(), elapsed.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn heisenberg_scaling() -> Outcome {
    let mut pts = Vec::new();
    for m in 2..=5usize {
        let cfg = ProtocolConfig::unit_weights(fixtures::cycle(m), m - 1, &vec![0.1; m]).map_err(|e| e.to_string())?;
        let f = protocol::fisher_information_of_estimate(&cfg).map_err(|e| e.to_string())?;
        pts.push(((m as f64).ln(), f.fisher_information.ln(), f.fisher_information));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let fis: Vec<String> = pts.iter().map(|p| format!("{:.4}", p.2)).collect();
    ensure((slope - 2.0).abs() <= 0.05, || format!("slope {slope}"))?;
    Ok(format!("slope {slope:.6}; FI(M=2..5) = [{}]", fis.join(", ")))
}

fn privacy() -> Outcome {
    let cfg = ProtocolConfig::unit_weights(fixtures::cycle(3), 2, &[0.3, 0.5, -0.2]).map_err(|e| e.to_string())?;
    let probes = vec![
        vec![0.3, 0.5, -0.2],
        vec![0.6, 0.2, -0.2],
        vec![-1.0, 1.2, 0.4],
        vec![2.5, -0.7, 0.9],
        vec![0.0, 0.0, 0.0],
        vec![1.1, -2.3, 0.4],
    ];
    let r = protocol::privacy_audit(&cfg, &probes).map_err(|e| e.to_string())?;
    let control = r.min_full_distance_other_target.unwrap_or(0.0);
    let detail = format!(
        "{} probes; partial sets: max distance {:.3e} over all probes, {:.3e} within equal θ(α); \
         full success at equal θ(α) {:.3e}; control {:.3e}",
        probes.len(),
        r.max_partial_distance,
        r.max_partial_distance_same_target,
        r.max_full_distance_same_target,
        control
    );
    ensure(r.max_full_distance_same_target <= 1e-9, || format!("full-success states differ: {detail}"))?;
    ensure(control > 1e-3, || format!("positive control too small: {detail}"))?;
    ensure(r.max_probability_spread <= 1e-10, || format!("success probabilities depend on θ: {detail}"))?;
    ensure(r.max_partial_distance <= 1e-9, || format!("partial-success states depend on θ(α): {detail}"))?;
    Ok(detail)
}

fn witness_formulas() -> Outcome {
    let m = 10usize;
    for eps in [0.0, 0.1, 0.8] {
        let c = witness::ising_bound_compare(m, eps, 1).map_err(|e| e.to_string())?;
        let mf = m as f64;
        let ours = mf * (2.0 + 2.0 * eps + eps * eps / 2.0);
        let small = mf * (1.0 + 5.0 * eps * eps / 4.0);
        let large = mf * (0.5 + eps + eps * eps / 2.0);
        ensure((c.ours - ours).abs() <= 1e-12 * ours, || format!("ε={eps}: ours {} vs {ours}", c.ours))?;
        ensure((c.separable_small_eps - small).abs() <= 1e-12 * small, || format!("ε={eps}: small-ε form"))?;
        ensure((c.separable_large_eps - large).abs() <= 1e-12 * large, || format!("ε={eps}: large-ε form"))?;
        ensure(c.large_eps_regime == (eps > witness::ISING_EPS_CRITICAL), || format!("ε={eps}: regime flag"))?;
    }
    Ok(format!("ε ∈ {{0, 0.1, 0.8}} at M={m}; regime switch at ε_c = {}", witness::ISING_EPS_CRITICAL))
}

fn light_cone() -> Outcome {
    let mut worst_slack = usize::MAX;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=10);
        let depth = rng.random_range(1..=3);
        let spec = witness::brickwork_chain(&mut rng, n, depth).map_err(|e| e.to_string())?;
        let terms: Vec<Observable> = qcore::sites(n).into_iter().map(Observable::z_half).collect();
        let r = witness::exact_lightcone_check(&spec, &terms).map_err(|e| e.to_string())?;
        ensure(r.max_support <= r.bound, || format!("seed {seed}: support {} > q {}", r.max_support, r.bound))?;
        worst_slack = worst_slack.min(r.bound - r.max_support);
    }
    for (d, q) in [(1usize, 5usize), (2, 13)] {
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let spec = witness::brickwork_lattice(&mut rng, 3, 3, d).map_err(|e| e.to_string())?;
        let got = witness::light_cone_q(&spec).map_err(|e| e.to_string())?;
        ensure(got == q, || format!("lattice D={d}: q = {got}, expected {q}"))?;
    }
    let mut shallow = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let n = rng.random_range(3..=8);
        let depth = rng.random_range(1..=3);
        let spec = witness::brickwork_chain(&mut rng, n, depth).map_err(|e| e.to_string())?;
        let inputs: Vec<LabeledState> = qcore::sites(n)
            .into_iter()
            .map(|q| LabeledState::pure(vec![q], linalg::random_state_vector(&mut rng, 2)).unwrap())
            .collect();
        let terms: Vec<Observable> = qcore::sites(n).into_iter().map(Observable::z_half).collect();
        let r = witness::shallow_qfi_bound(&inputs, &spec, &terms).map_err(|e| e.to_string())?;
        let exact = r.exact_qfi.ok_or("exact QFI missing")?;
        ensure(r.bound >= exact - 1e-9, || format!("seed {seed}: bound {} < QFI {exact}", r.bound))?;
        shallow += 1;
    }
    Ok(format!("50 chains (min slack {worst_slack}), lattice q(1)=5, q(2)=13, {shallow} shallow-circuit QFI checks"))
}

fn cli_reproducibility() -> Outcome {
    let fixtures_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut names: Vec<String> = std::fs::read_dir(&fixtures_dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    let mut runs: Vec<(String, Vec<String>)> = names.iter().map(|n| (n.clone(), vec![])).collect();
    runs.push(("cycle_bound.json".into(), vec!["--sweep".into(), "m=2:5:1".into()]));
    runs.push(("fisher_scaling.json".into(), vec!["--sweep".into(), "m=2:5:1".into()]));
    runs.push(("ising_sweep.json".into(), vec!["--sweep".into(), "epsilon=0:1:0.1".into()]));
    runs.push(("chain_lightcone.json".into(), vec!["--sweep".into(), "depth=1:3:1".into()]));
    runs.push(("cycle3_protocol.json".into(), vec!["--shots".into(), "5000".into(), "--seed".into(), "17".into()]));
    runs.push(("random_bound.json".into(), vec!["--seed".into(), "99".into(), "--format".into(), "csv".into()]));
    for (i, (name, extra)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("run{i}.{rep}"));
            let o = Command::new(env!("CARGO_BIN_EXE_qnm"))
                .arg("--scenario")
                .arg(fixtures_dir.join(name))
                .arg("--out")
                .arg(&out)
                .args(extra)
                .env_remove("QNM_TOL")
                .output()
                .map_err(|e| e.to_string())?;
            ensure(o.status.code() == Some(0), || {
                format!("{name} {extra:?}: exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr))
            })?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        ensure(outputs[0] == outputs[1], || format!("{name} {extra:?}: outputs differ"))?;
    }
    Ok(format!("{} runs, each twice, byte-identical", runs.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("QFI bound on random network states", qfi_bound_on_random_networks),
        ("covariance decomposition", covariance_decomposition),
        ("T-matrix certificate", t_certificate),
        ("protocol exactness on cycles", protocol_exactness),
        ("Heisenberg scaling of the estimate", heisenberg_scaling),
        ("privacy of conditional center states", privacy),
        ("witness closed forms", witness_formulas),
        ("light cone", light_cone),
        ("CLI reproducibility", cli_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("[criterion {}] PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[criterion {}] FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
