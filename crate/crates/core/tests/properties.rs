use fairharvest::flow::{
    decompose_unit_flow, feasible_flow, feasible_flow_int, CapacitatedFlowProblem, FlowNetwork,
};
use fairharvest::lp::{Cmp, LinearProgram, LpOutcome, Rational, Sense};
use fairharvest::model::{simulate_consumption, window_slacks};
use fairharvest::packing::{build_packing_system, compute_bounds, row_costs, row_costs_naive};
use fairharvest::routing::{enumerate_routings, maxmin_unsplittable_routing, RoutingFamily};
use fairharvest::unsplittable::UnsplittableOptions;
use fairharvest::{descendant_counts, fixtures, Grid, NetworkInstance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

fn instance() -> impl Strategy<Value = NetworkInstance> {
    (1usize..=5, 1usize..=4, any::<u64>()).prop_map(|(n, t, seed)| fixtures::random(n, t, seed))
}

fn fresh(inst: &NetworkInstance) -> (Grid<f64>, Grid<bool>) {
    let prev = Grid::filled(inst.node_count(), inst.horizon(), 0.0);
    let mut active = Grid::filled(inst.node_count(), inst.horizon(), false);
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            active[(i, t)] = true;
        }
    }
    (prev, active)
}

/// Random instance with node capacities and supplies as a flow problem.
fn flow_problem(inst: &NetworkInstance, seed: u64) -> CapacitatedFlowProblem<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CapacitatedFlowProblem {
        nodes: inst.node_count(),
        sink: inst.sink(),
        edges: inst.edges().to_vec(),
        capacity: (0..inst.node_count())
            .map(|i| if i == inst.sink() { None } else { Some(rng.gen_range(0..=inst.sensor_count() as i64)) })
            .collect(),
        supply: (0..inst.node_count()).map(|i| i64::from(i != inst.sink())).collect(),
        cost: None,
    }
}

fn to_f64(p: &CapacitatedFlowProblem<i64>) -> CapacitatedFlowProblem<f64> {
    CapacitatedFlowProblem {
        nodes: p.nodes,
        sink: p.sink,
        edges: p.edges.clone(),
        capacity: p.capacity.iter().map(|c| c.map(|c| c as f64)).collect(),
        supply: p.supply.iter().map(|&s| s as f64).collect(),
        cost: p.cost.clone(),
    }
}

type Arc = (usize, usize, i64, i64);

fn graph() -> impl Strategy<Value = (usize, Vec<Arc>)> {
    (2usize..=6).prop_flat_map(|n| {
        let arcs = proptest::collection::vec((0..n, 0..n, 0i64..=5, 0i64..=4), 0..=12)
            .prop_map(|v| v.into_iter().filter(|a| a.0 != a.1).collect::<Vec<_>>());
        (Just(n), arcs)
    })
}

fn brute_min_cut(n: usize, arcs: &[Arc]) -> i64 {
    (0u32..1 << n)
        .filter(|m| m & 1 != 0 && m & (1 << (n - 1)) == 0)
        .map(|m| arcs.iter().filter(|a| m & (1 << a.0) != 0 && m & (1 << a.1) == 0).map(|a| a.2).sum())
        .min()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn battery_equals_capped_window_minimum(inst in instance(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut used = Grid::filled(inst.node_count(), inst.horizon(), 0.0);
        for i in inst.sensors() {
            for t in 0..inst.horizon() {
                used[(i, t)] = rng.gen_range(0.0..1.5);
            }
        }
        let trace = simulate_consumption(&inst, &used);
        for i in inst.sensors() {
            let w = window_slacks(&inst, &used, i);
            for t in 0..inst.horizon() {
                let lowest = (0..=t).map(|s| w[(s, t)]).fold(f64::INFINITY, f64::min);
                let want = inst.battery_capacity().min(lowest);
                prop_assert!((trace.get(i, t + 1) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn descendants_shrink_with_mask(inst in instance(), seed in any::<u64>()) {
        let paths = fixtures::random_paths(&inst, seed, seed % 2 == 0);
        let (_, full) = fresh(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut part = full.clone();
        for v in part.iter_mut() {
            *v = *v && rng.gen_bool(0.5);
        }
        let big = descendant_counts(&inst, &paths, &full);
        let small = descendant_counts(&inst, &paths, &part);
        for i in 0..inst.node_count() {
            for t in 0..inst.horizon() {
                prop_assert!(small[(i, t)] <= big[(i, t)]);
            }
        }
    }

    #[test]
    fn sink_receives_routed_supply(inst in instance(), seed in any::<u64>()) {
        let p = to_f64(&flow_problem(&inst, seed));
        let sol = feasible_flow(&p, 1e-12);
        prop_assert!((sol.sink_inflow() - sol.value).abs() < 1e-9);
        prop_assert_eq!(sol.feasible, sol.value >= sol.demand - 1e-12);
    }

    #[test]
    fn feasibility_is_monotone_in_capacity(inst in instance(), seed in any::<u64>()) {
        let p = flow_problem(&inst, seed);
        let mut wider = p.clone();
        for c in wider.capacity.iter_mut().flatten() {
            *c += 1;
        }
        if feasible_flow_int(&p).feasible {
            prop_assert!(feasible_flow_int(&wider).feasible);
        }
        prop_assert!(feasible_flow_int(&wider).value >= feasible_flow_int(&p).value);
    }

    #[test]
    fn max_flow_equals_min_cut((n, arcs) in graph()) {
        let mut net = FlowNetwork::<i64>::new(n, 0);
        for &(u, v, c, w) in &arcs {
            net.add_edge(u, v, c, w as f64);
        }
        prop_assert_eq!(net.max_flow(0, n - 1), brute_min_cut(n, &arcs));
    }

    #[test]
    fn min_cost_matches_lp((n, arcs) in graph(), frac in 0.0f64..=1.0) {
        let cut = brute_min_cut(n, &arcs);
        let amount = (frac * cut as f64).floor() as i64;
        let mut net = FlowNetwork::<f64>::new(n, 1e-12);
        for &(u, v, c, w) in &arcs {
            net.add_edge(u, v, c as f64, w as f64);
        }
        prop_assert_eq!(net.min_cost_flow(0, n - 1, amount as f64), amount as f64);
        let mut lp = LinearProgram::<Rational>::new();
        let vars: Vec<usize> = arcs.iter().map(|a| lp.add_var(q(0), Some(q(a.2)))).collect();
        for v in 0..n {
            let row = arcs
                .iter()
                .zip(&vars)
                .filter(|(a, _)| a.0 == v || a.1 == v)
                .map(|(a, &x)| (x, q(if a.0 == v { 1 } else { -1 })))
                .collect();
            let rhs = if v == 0 { amount } else if v == n - 1 { -amount } else { 0 };
            lp.add_constraint(row, Cmp::Eq, q(rhs));
        }
        lp.set_objective(Sense::Min, arcs.iter().zip(&vars).map(|(a, &x)| (x, q(a.3))).collect());
        let (_, opt) = lp.solve().optimal().unwrap();
        prop_assert_eq!(q(net.total_cost().round() as i64), opt);
    }

    #[test]
    fn unit_flow_decomposes_into_paths(inst in instance(), seed in any::<u64>()) {
        let p = flow_problem(&inst, seed);
        let sol = feasible_flow_int(&p);
        prop_assume!(sol.feasible);
        let dec = decompose_unit_flow(&sol, 1.0).unwrap();
        let mut carried = vec![0i64; inst.edge_count()];
        for i in inst.sensors() {
            let path = dec.paths[i].as_ref().unwrap();
            prop_assert_eq!(path[0], i);
            prop_assert_eq!(*path.last().unwrap(), inst.sink());
            for w in path.windows(2) {
                let e = inst.edges().iter().position(|&(a, b)| (a, b) == (w[0], w[1])).unwrap();
                carried[e] += 1;
            }
        }
        prop_assert_eq!(carried, sol.edge_flows());
        for v in inst.sensors() {
            prop_assert!(dec.crossings(v) as i64 <= p.capacity[v].unwrap());
        }
    }

    #[test]
    fn simplex_matches_vertex_enumeration(
        rows in proptest::collection::vec((-3i64..=3, -3i64..=3, 0i64..=6), 1..=4),
        c in (-3i64..=3, -3i64..=3),
        ub in (1i64..=4, 1i64..=4),
    ) {
        let mut lp = LinearProgram::<Rational>::new();
        let x = lp.add_var(q(0), Some(q(ub.0)));
        let y = lp.add_var(q(0), Some(q(ub.1)));
        for &(a, b, r) in &rows {
            lp.add_constraint(vec![(x, q(a)), (y, q(b))], Cmp::Le, q(r));
        }
        lp.set_objective(Sense::Max, vec![(x, q(c.0)), (y, q(c.1))]);
        let LpOutcome::Optimal { objective, .. } = lp.solve() else {
            return Err(TestCaseError::fail("bounded LP with the origin feasible must be optimal"));
        };
        // every constraint as a·x + b·y ≤ r, bounds included
        let mut lines: Vec<(i64, i64, i64)> = rows.clone();
        lines.extend([(1, 0, ub.0), (0, 1, ub.1), (-1, 0, 0), (0, -1, 0)]);
        let mut best: Option<Rational> = None;
        for (k, l1) in lines.iter().enumerate() {
            for l2 in &lines[k + 1..] {
                let det = l1.0 * l2.1 - l1.1 * l2.0;
                if det == 0 {
                    continue;
                }
                let px = Rational::new((l1.2 * l2.1 - l1.1 * l2.2).into(), det.into());
                let py = Rational::new((l1.0 * l2.2 - l1.2 * l2.0).into(), det.into());
                if lines.iter().all(|l| q(l.0) * &px + q(l.1) * &py <= q(l.2)) {
                    let v = q(c.0) * &px + q(c.1) * &py;
                    if best.as_ref().map_or(true, |b| v > *b) {
                        best = Some(v);
                    }
                }
            }
        }
        prop_assert_eq!(Some(objective), best);
    }

    #[test]
    fn incremental_row_costs_match_naive(inst in instance(), seed in any::<u64>(), frac in 0.0f64..1.0) {
        let (prev, active) = fresh(&inst);
        let bounds = compute_bounds(&inst, &prev, &active);
        let sys = build_packing_system(&inst, &bounds, &prev, &active, frac * bounds.lambda_max).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..sys.row_count()).map(|_| rng.gen_range(0..16) as f64).collect();
        let (fast, slow) = (row_costs(&sys, &y), row_costs_naive(&sys, &y));
        for (a, b) in fast.iter().zip(slow.iter()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn width_is_at_most_horizon(inst in instance(), frac in 0.0f64..1.0) {
        let (prev, active) = fresh(&inst);
        let bounds = compute_bounds(&inst, &prev, &active);
        let sys = build_packing_system(&inst, &bounds, &prev, &active, frac * bounds.lambda_max).unwrap();
        prop_assert!(sys.width <= inst.horizon() as f64 * (1.0 + 1e-12));
        for r in 0..sys.row_count() {
            for i in 0..inst.node_count() {
                for t in 0..inst.horizon() {
                    prop_assert!(sys.entry(r, i, t) <= 1);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn routing_matches_best_enumerated_minimum(n in 1usize..=4, t in 1usize..=3, seed in any::<u64>()) {
        let inst = fixtures::random(n, t, seed);
        let delta = 1e-9;
        let found = maxmin_unsplittable_routing(&inst, delta).unwrap();
        let best = enumerate_routings(&inst, RoutingFamily::Unsplittable, UnsplittableOptions::default()).unwrap();
        let scale = inst.energy_scale().max(1.0) / inst.c_st();
        prop_assert!((found.lambda - best.sorted[0]).abs() <= 10.0 * delta * scale,
            "routing {} vs enumeration {}", found.lambda, best.sorted[0]);
    }
}
