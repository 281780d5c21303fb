use bmatch_core::io::{read_budgets, read_edge_list, write_budgets, write_edge_list};
use bmatch_core::lp::{constant_approx_bmatching, full_mpc, is_feasible, loose_sets, Alpha, LpInstance, LpParams};
use bmatch_core::mpc::{MachineCluster, MpcConfig};
use bmatch_core::oracle::exact_max_bmatching;
use bmatch_core::streaming::{streaming_unweighted, FileStream, StreamingParams, VecStream};
use bmatch_core::unweighted::{unweighted_one_plus_eps, UnweightedParams};
use bmatch_core::weighted::{weighted_one_plus_eps, WeightedParams};
use bmatch_core::*;
use proptest::prelude::*;

fn cluster(g: &Graph, seed: u64) -> MachineCluster {
    MachineCluster::for_graph(MpcConfig::with_seed(seed), g)
}

#[test]
fn file_roundtrip_preserves_graph_and_budgets() {
    let g = gen::gnp(40, 0.2, Some(9), 3).unwrap();
    let b = gen::uniform_budgets(40, 4, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let gp = dir.path().join("g.txt");
    let bp = dir.path().join("b.txt");
    write_edge_list(&g, std::fs::File::create(&gp).unwrap()).unwrap();
    write_budgets(&b, std::fs::File::create(&bp).unwrap()).unwrap();
    let g2 = read_edge_list(std::io::BufReader::new(std::fs::File::open(&gp).unwrap())).unwrap();
    let b2 = read_budgets(std::io::BufReader::new(std::fs::File::open(&bp).unwrap()), g2.n()).unwrap();
    assert_eq!(g.pairs(), g2.pairs());
    assert!((0..g.m()).all(|e| g.weight(e) == g2.weight(e)));
    assert_eq!(b, b2);
}

#[test]
fn file_stream_matches_in_memory_stream() {
    let g = gen::gnp(60, 0.08, None, 9).unwrap();
    let b = gen::uniform_budgets(60, 2, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let gp = dir.path().join("g.txt");
    write_edge_list(&g, std::fs::File::create(&gp).unwrap()).unwrap();
    let p = StreamingParams::default();
    let a = streaming_unweighted(&mut VecStream::from_graph(&g), &b, &p, 5).unwrap();
    let f = streaming_unweighted(&mut FileStream::open(&gp).unwrap(), &b, &p, 5).unwrap();
    assert_eq!(a.edges, f.edges);
    assert_eq!(a.passes, f.passes);
    assert!(a.to_bmatching(&g, &b).unwrap().is_valid_for(&g, &b));
}

#[test]
fn engines_agree_with_oracle_on_small_instances() {
    for seed in 0..12 {
        let (g, b) = gen::small_instance(8 + (seed % 5) as usize, 0.35, None, 2, 20, seed).unwrap();
        let opt = exact_max_bmatching(&g, &b, false).unwrap().value;
        let c = constant_approx_bmatching(&g, &b, &mut cluster(&g, seed), &LpParams::default()).unwrap();
        assert!(c.matching.is_valid_for(&g, &b));
        let u = unweighted_one_plus_eps(&g, &b, &mut cluster(&g, seed), &UnweightedParams::default()).unwrap();
        assert!(u.matching.is_valid_for(&g, &b));
        assert!(Weight::from(u.size as i64) <= opt);
        assert!(u.size >= u.size_history[0]);
        let s = streaming_unweighted(&mut VecStream::from_graph(&g), &b, &StreamingParams::default(), seed).unwrap();
        assert!(s.to_bmatching(&g, &b).unwrap().is_valid_for(&g, &b));
        assert!(Weight::from(s.size as i64) <= opt);
    }
}

#[test]
fn weighted_engine_is_valid_and_bounded_by_optimum() {
    for seed in 0..4 {
        let (g, b) = gen::small_instance(6, 0.5, Some(8), 2, 12, seed).unwrap();
        let opt = exact_max_bmatching(&g, &b, true).unwrap().value;
        let p = WeightedParams { phase_budget: 8, repetitions: Some(1), ..Default::default() };
        let out = weighted_one_plus_eps(&g, &b, &mut cluster(&g, seed), &p).unwrap();
        assert!(out.matching.is_valid_for(&g, &b));
        assert_eq!(out.matching.weight(&g), out.weight);
        assert!(out.weight <= opt);
    }
}

#[test]
fn full_mpc_log_stays_within_local_memory() {
    let g = gen::gnp_avg_degree(2000, 12.0, None, 1).unwrap();
    let b = gen::uniform_budgets(2000, 3, 1).unwrap();
    let mut c = cluster(&g, 1);
    let out = full_mpc(&LpInstance::unit(&g, &b), &mut c, &LpParams::default()).unwrap();
    let inst = LpInstance::unit(&g, &b);
    assert!(is_feasible(&inst, &out.x));
    assert!(loose_sets(&inst, &out.x, Alpha::new(1, 20)).is_tight());
    assert!(c.log().violations.is_empty());
    assert!(c.log().max_peak() <= c.local_memory_words());
}

#[test]
fn config_parses_from_toml() {
    let c: MpcConfig = toml::from_str("machines = 4\nseed = 9\n").unwrap();
    assert_eq!(c.machines, 4);
    assert_eq!(c.seed, 9);
    assert_eq!(c.local_mem_factor, MpcConfig::default().local_mem_factor);
    assert!(toml::from_str::<MpcConfig>("machine = 4\n").is_err());
}

fn arb_instance() -> impl Strategy<Value = (Graph, BudgetVector)> {
    (2usize..9, 0.1f64..0.9, 1u32..4, any::<u64>()).prop_map(|(n, p, bmax, seed)| {
        (gen::gnp(n, p, Some(5), seed).unwrap(), gen::uniform_budgets(n, bmax, seed).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_witness_is_valid_and_achieves_value((g, b) in arb_instance()) {
        prop_assume!(g.m() <= 16);
        for weighted in [false, true] {
            let r = exact_max_bmatching(&g, &b, weighted).unwrap();
            prop_assert!(r.witness.is_valid_for(&g, &b));
            let v = if weighted { r.witness.weight(&g) } else { Weight::from(r.witness.len() as i64) };
            prop_assert_eq!(v, r.value);
        }
    }

    #[test]
    fn constant_approx_is_valid((g, b) in arb_instance(), seed in any::<u64>()) {
        let out = constant_approx_bmatching(&g, &b, &mut cluster(&g, seed), &LpParams::default()).unwrap();
        prop_assert!(validate_bmatching(&g, &b, &out.matching.edge_ids()).is_valid());
    }

    #[test]
    fn augmentation_never_shrinks((g, b) in arb_instance(), seed in any::<u64>()) {
        let p = UnweightedParams { repetitions: Some(1), ..Default::default() };
        let out = unweighted_one_plus_eps(&g, &b, &mut cluster(&g, seed), &p).unwrap();
        prop_assert!(out.size_history.windows(2).all(|w| w[0] <= w[1]));
        for m in &out.matching_history {
            prop_assert!(m.is_valid_for(&g, &b));
        }
    }
}
