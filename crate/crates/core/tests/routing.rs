use failout::evaluator::{enumerate_scenarios, evaluate_scenario, FailureScenario};
use failout::netsim::topology_bandwidth;
use failout::nn::{SeededRng, Stream};
use failout::resilinet::{gated_forward, AliveMask, MaskOrigin, Scheme, ALL_SCHEMES};
use failout::topology::{
    build_model, canonical_configs, reachability, DistributedModel, FailureSetting, PartitionPlan,
};
use failout::Dataset;
use ndarray::Array2;
use rand::Rng;

fn health_model() -> DistributedModel<f64> {
    build_model(&PartitionPlan::health(), &mut SeededRng::new(11, Stream::Init)).unwrap()
}

fn inputs(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = SeededRng::new(seed, Stream::Data);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn all_masks(model: &DistributedModel<f64>) -> Vec<AliveMask> {
    let compute: Vec<usize> = model.topology.compute_nodes().collect();
    (0u32..1 << compute.len())
        .map(|code| {
            let failed: Vec<usize> = compute
                .iter()
                .enumerate()
                .filter(|(i, _)| code & (1 << i) != 0)
                .map(|(_, &n)| n)
                .collect();
            AliveMask::with_failed(&model.topology, &failed, MaskOrigin::ScenarioEnum)
        })
        .collect()
}

#[test]
fn absent_output_iff_unreachable_on_every_health_mask() {
    let model = health_model();
    let x = inputs(4, 23, 1);
    let masks = all_masks(&model);
    assert_eq!(masks.len(), 8);
    for mask in &masks {
        for scheme in ALL_SCHEMES {
            let out = gated_forward(&model, mask, scheme, x.view()).unwrap();
            let reach = model.topology.reachable(mask, scheme.uses_skips());
            assert_eq!(out.is_some(), reach, "{scheme} {}", mask.label());
        }
        assert_eq!(
            gated_forward(&model, mask, Scheme::ResiliNet, x.view())
                .unwrap()
                .is_some(),
            reachability(&model, mask)
        );
    }
}

#[test]
fn resilinet_without_failures_matches_vanilla() {
    let model = health_model();
    let x = inputs(8, 23, 2);
    let alive = AliveMask::all_alive(&model.topology);
    let r = gated_forward(&model, &alive, Scheme::ResiliNet, x.view())
        .unwrap()
        .unwrap();
    let v = gated_forward(&model, &alive, Scheme::Vanilla, x.view())
        .unwrap()
        .unwrap();
    let diff = (&r - &v).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    assert!(diff <= 1e-6, "max diff {diff}");
}

#[test]
fn vanilla_single_failures_score_chance_exactly() {
    let model = health_model();
    let x = inputs(30, 23, 3);
    let labels: Vec<usize> = (0..30).map(|i| i % 12).collect();
    let test = Dataset::new(x, labels, 12).unwrap();
    for node in 0..3 {
        let sc = FailureScenario {
            mask: AliveMask::with_failed(&model.topology, &[node], MaskOrigin::ScenarioEnum),
            probability: 1.0,
            label: String::new(),
        };
        assert_eq!(
            evaluate_scenario(&model, &sc, &test, Scheme::Vanilla).unwrap(),
            1.0 / 12.0
        );
    }
}

#[test]
fn resilinet_survives_any_single_health_failure() {
    let model = health_model();
    let x = inputs(2, 23, 4);
    for node in 0..3 {
        let mask = AliveMask::with_failed(&model.topology, &[node], MaskOrigin::ScenarioEnum);
        assert!(gated_forward(&model, &mask, Scheme::ResiliNet, x.view())
            .unwrap()
            .is_some());
    }
    // n1 and n2 both down leaves n3 with neither its primary nor its detour
    let mask = AliveMask::with_failed(&model.topology, &[0, 1], MaskOrigin::ScenarioEnum);
    assert!(gated_forward(&model, &mask, Scheme::ResiliNet, x.view())
        .unwrap()
        .is_none());
}

#[test]
fn select_join_ignores_detours_while_the_primary_is_present() {
    // zeroing the skip weights must not change ResiliNet's all-alive output
    let mut model = health_model();
    let x = inputs(5, 23, 5);
    let alive = AliveMask::all_alive(&model.topology);
    let before = gated_forward(&model, &alive, Scheme::ResiliNet, x.view())
        .unwrap()
        .unwrap();
    for e in model.topology.edges.iter_mut().filter(|e| e.is_skip()) {
        e.weight = 0.0;
    }
    let after = gated_forward(&model, &alive, Scheme::ResiliNet, x.view())
        .unwrap()
        .unwrap();
    assert_eq!(before, after);
    let dfg = gated_forward(&model, &alive, Scheme::Dfg, x.view()).unwrap().unwrap();
    assert_eq!(before, dfg);
}

#[test]
fn canonical_configs_reroute_around_the_failing_node() {
    // (a) n2 fails; (b) n3 fails; (c) n2 fails
    // in (b) the cloud still hears from n2 without the skip
    for (plan, dead, vanilla_reaches) in [
        (PartitionPlan::config_a(), 1, false),
        (PartitionPlan::config_b(), 2, true),
        (PartitionPlan::config_c(), 1, false),
    ] {
        let model: DistributedModel<f64> = build_model(&plan, &mut SeededRng::new(3, Stream::Init)).unwrap();
        let x = inputs(3, plan.input_dim, 6);
        let mask = AliveMask::with_failed(&model.topology, &[dead], MaskOrigin::ScenarioEnum);
        assert!(
            gated_forward(&model, &mask, Scheme::ResiliNet, x.view())
                .unwrap()
                .is_some(),
            "{}",
            plan.name
        );
        let v = gated_forward(&model, &mask, Scheme::Vanilla, x.view()).unwrap();
        assert_eq!(v.is_some(), vanilla_reaches, "{}", plan.name);
    }
}

#[test]
fn health_traffic_matches_edge_payload_sums() {
    let t = PartitionPlan::health().topology().unwrap();
    let alive = AliveMask::all_alive(&t);
    let simple = 23 + 250 + 250 + 250;
    let skips = 23 + 250 + 250;
    assert_eq!(topology_bandwidth(&t, Scheme::ResiliNet, &alive), simple);
    assert_eq!(topology_bandwidth(&t, Scheme::Dfg, &alive), simple + skips);
    let n2 = AliveMask::with_failed(&t, &[1], MaskOrigin::ScenarioEnum);
    assert_eq!(topology_bandwidth(&t, Scheme::ResiliNet, &n2), 23 + 250 + 250);
}

#[test]
fn three_node_chain_dfg_overhead_is_input_plus_width() {
    for (w, d) in [(64, 23), (10, 7), (128, 40)] {
        let plan = PartitionPlan::chain("t", vec![1, 1, 1], w, d, 4, vec![vec![-1, 1], vec![0, 2]]);
        let t = plan.topology().unwrap();
        let alive = AliveMask::all_alive(&t);
        let gap = topology_bandwidth(&t, Scheme::Dfg, &alive) - topology_bandwidth(&t, Scheme::ResiliNet, &alive);
        assert_eq!(gap, d + w);
    }
}

#[test]
fn resilinet_traffic_bounds_hold_on_every_preset() {
    for plan in canonical_configs() {
        let t = plan.topology().unwrap();
        if t.skip_indices().is_empty() {
            continue;
        }
        let alive = AliveMask::all_alive(&t);
        let dfg = topology_bandwidth(&t, Scheme::Dfg, &alive);
        assert!(topology_bandwidth(&t, Scheme::ResiliNet, &alive) < dfg, "{}", plan.name);
        for n in t.compute_nodes() {
            let m = AliveMask::with_failed(&t, &[n], MaskOrigin::ScenarioEnum);
            assert!(
                topology_bandwidth(&t, Scheme::ResiliNet, &m) <= dfg,
                "{} n{}",
                plan.name,
                n + 1
            );
        }
    }
}

#[test]
fn scenario_masks_cover_every_combination_once() {
    let s = FailureSetting::named("hazardous", 4).unwrap();
    let mut codes: Vec<u64> = enumerate_scenarios(&s)
        .unwrap()
        .iter()
        .map(|x| x.mask.failed_code())
        .collect();
    codes.sort();
    assert_eq!(codes, (0..8).collect::<Vec<_>>());
}
