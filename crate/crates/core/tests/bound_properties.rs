mod oracle;

use proptest::prelude::*;

use qnm_core::metro;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn qfi_bounded_by_influence_weighted_variances(seed in any::<u64>()) {
        let net = oracle::random_network(seed);
        let k = net.graph.num_vertices();
        let rho = net.state.density_matrix().unwrap();
        let gens = oracle::vertex_generators(&net.state, k);
        let f = oracle::qfi(&rho, &gens);

        let check = metro::verify_qfi_bound(&net.graph, &net.layout, &net.state).unwrap();
        prop_assert!(check.holds);
        prop_assert!(check.min_eigenvalue_of_gap >= -1e-8);
        prop_assert!((&check.qfi.matrix - &f).abs().max() < 1e-8);

        let mut gap = -f.clone();
        for v in 0..k {
            gap[(v, v)] += 4.0 * oracle::singleton_influence(&net.graph, v) as f64 * oracle::variance(&rho, &gens[v]);
        }
        prop_assert!(oracle::min_eig_real(&gap) >= -1e-8);

        let expected: f64 = (0..k)
            .map(|v| {
                let a = net.layout.weights()[v];
                a * a / (4.0 * oracle::singleton_influence(&net.graph, v) as f64 * oracle::variance(&rho, &gens[v]))
            })
            .sum();
        let bound = metro::mse_lower_bound(&net.graph, &net.layout, &net.state, 1).unwrap();
        prop_assert!((bound - expected).abs() <= 1e-8 * expected.max(1.0));
    }

    #[test]
    fn qfi_routes_agree(seed in any::<u64>()) {
        let net = oracle::random_network(seed);
        let reg = net.state.register().to_vec();
        let gens = qnm_core::qcore::resolve_generators(&net.layout, &reg).unwrap();
        let a = metro::qfi_matrix(&net.state, &gens).unwrap();
        let b = metro::qfi_matrix_full_spectrum(&net.state, &gens).unwrap();
        prop_assert!((&a.matrix - &b.matrix).abs().max() < 1e-8);
    }
}

#[test]
fn ghz_triangle_bound_is_one_twelfth() {
    let g = qnm_core::netgraph::fixtures::triangle();
    let layout = qnm_core::netgraph::SignalLayout::singletons_average(&g).unwrap();
    let st =
        qnm_core::qcore::assemble_network_state(&g, &qnm_core::qcore::ghz_sources(&g).unwrap(), None, None).unwrap();
    // each vertex holds two halves of Bell pairs: Var(Z/2+Z/2) = 1/2, k = 2
    let expected = 3.0 * (1.0 / 9.0) / (4.0 * 2.0 * 0.5);
    let b = metro::mse_lower_bound(&g, &layout, &st, 1).unwrap();
    assert!((b - expected).abs() < 1e-12);
    assert!((expected - 1.0 / 12.0).abs() < 1e-15);
}
