//! Deterministic instances: the small motivating networks and seeded random ones.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{EnergyCosts, NetworkInstance, NodeId, RoutingPaths};

pub const FIG2_A: NodeId = 0;
pub const FIG2_B: NodeId = 1;
pub const FIG2_SINK: NodeId = 2;

pub fn costs(c_st: f64, c_rt: f64) -> EnergyCosts {
    EnergyCosts { sense: c_st, tx: 0.0, rx: c_rt }
}

/// One sensor wired straight to the sink.
pub fn single_node(initial: f64, harvest: Vec<f64>, capacity: f64, c_st: f64) -> NetworkInstance {
    let horizon = harvest.len();
    NetworkInstance::new(
        2,
        1,
        vec![(0, 1)],
        horizon,
        capacity,
        vec![initial, 0.0],
        vec![harvest, vec![0.0; horizon]],
        costs(c_st, 1.0),
    )
    .expect("single-node fixture")
}

/// Two sensors: a (1 unit) next to the sink, b (2 units) relaying through a.
pub fn fig2(c_st: f64, c_rt: f64) -> NetworkInstance {
    NetworkInstance::new(
        3,
        FIG2_SINK,
        vec![(FIG2_B, FIG2_A), (FIG2_A, FIG2_SINK)],
        1,
        2.0,
        vec![1.0, 2.0, 0.0],
        vec![vec![0.0]; 3],
        costs(c_st, c_rt),
    )
    .expect("fig2 fixture")
}

pub fn fig2_paths(inst: &NetworkInstance) -> RoutingPaths {
    RoutingPaths::from_parents(inst, &[FIG2_SINK, FIG2_A, FIG2_SINK]).expect("fig2 paths")
}

/// Ids of a_1..a_k in the `fig4(k)` instance.
pub fn fig4_a(k: usize) -> Vec<NodeId> {
    (0..k).collect()
}

pub fn fig4_b(k: usize) -> NodeId {
    k
}

/// Ids of c_1..c_{k-1}.
pub fn fig4_c(k: usize) -> Vec<NodeId> {
    (k + 1..2 * k).collect()
}

pub fn fig4_sink(k: usize) -> NodeId {
    2 * k
}

/// Relays a_1..a_k with one unit of energy each, a well-supplied hub b linked
/// to every a_i, and k-1 well-supplied leaves c_i behind b.
pub fn fig4(k: usize) -> NetworkInstance {
    assert!(k >= 2, "fig4 needs k >= 2");
    let nodes = 2 * k + 1;
    let sink = fig4_sink(k);
    let b = fig4_b(k);
    let mut edges = Vec::new();
    for c in fig4_c(k) {
        edges.push((c, b));
    }
    for a in fig4_a(k) {
        edges.push((b, a));
        edges.push((a, sink));
    }
    let ample = 2.0 * k as f64;
    let mut initial = vec![ample; nodes];
    for a in fig4_a(k) {
        initial[a] = 1.0;
    }
    initial[sink] = 0.0;
    NetworkInstance::new(nodes, sink, edges, 1, ample, initial, vec![vec![0.0]; nodes], costs(1.0, 1.0))
        .expect("fig4 fixture")
}

/// The routing tree in which b (and all c_i behind it) forwards through a_1.
pub fn fig4_tree_paths(k: usize) -> RoutingPaths {
    let inst = fig4(k);
    let mut parent = vec![fig4_sink(k); inst.node_count()];
    parent[fig4_b(k)] = 0;
    for c in fig4_c(k) {
        parent[c] = fig4_b(k);
    }
    RoutingPaths::from_parents(&inst, &parent).expect("fig4 tree")
}

/// Unsplittable routing c_i -> b -> a_i -> s and b -> a_k -> s.
pub fn fig4_unsplittable_paths(k: usize) -> RoutingPaths {
    let inst = fig4(k);
    let (b, s) = (fig4_b(k), fig4_sink(k));
    let mut per = vec![Vec::new(); inst.node_count()];
    for a in fig4_a(k) {
        per[a] = vec![a, s];
    }
    per[b] = vec![b, k - 1, s];
    for (idx, c) in fig4_c(k).into_iter().enumerate() {
        per[c] = vec![c, b, idx, s];
    }
    RoutingPaths::invariable(&inst, per).expect("fig4 unsplittable paths")
}

pub const FIG5_A1: NodeId = 0;
pub const FIG5_A2: NodeId = 1;
pub const FIG5_B: NodeId = 2;

pub fn fig5_sink(k: usize) -> NodeId {
    k + 2
}

/// Two relays with alternating harvest (a_1 in odd slots, a_2 in even ones),
/// empty batteries of capacity 1, and a hub b with k-1 leaves behind it.
/// The horizon is 2k slots.
pub fn fig5(k: usize) -> NetworkInstance {
    assert!(k >= 2, "fig5 needs k >= 2");
    let nodes = k + 3;
    let sink = fig5_sink(k);
    let horizon = 2 * k;
    let mut edges = vec![(FIG5_B, FIG5_A1), (FIG5_B, FIG5_A2), (FIG5_A1, sink), (FIG5_A2, sink)];
    for c in 3..k + 2 {
        edges.push((c, FIG5_B));
    }
    let ample = (k + 1) as f64;
    let mut harvest = vec![vec![ample; horizon]; nodes];
    harvest[FIG5_A1] = (0..horizon).map(|t| if t % 2 == 0 { 1.0 } else { 0.0 }).collect();
    harvest[FIG5_A2] = (0..horizon).map(|t| if t % 2 == 0 { 0.0 } else { 1.0 }).collect();
    harvest[sink] = vec![0.0; horizon];
    let mut initial = vec![1.0; nodes];
    initial[FIG5_A1] = 0.0;
    initial[FIG5_A2] = 0.0;
    initial[sink] = 0.0;
    NetworkInstance::new(nodes, sink, edges, horizon, 1.0, initial, harvest, costs(1.0, 1.0)).expect("fig5 fixture")
}

fn grid(rng: &mut ChaCha8Rng, hi: f64) -> f64 {
    let steps = (hi * 100.0).round() as i64;
    rng.gen_range(0..=steps) as f64 / 100.0
}

/// Seeded random instance with `n` sensors (ids 0..n) and the sink at id n.
/// Energies lie on a 0.01 grid in [0, B] with B = 1; costs are multiples of 1/4.
pub fn random(n: usize, horizon: usize, seed: u64) -> NetworkInstance {
    assert!(n >= 1 && horizon >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sink = n;
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let mut targets: Vec<NodeId> = order[..pos].to_vec();
        targets.push(sink);
        targets.shuffle(&mut rng);
        let fanout = rng.gen_range(1..=2).min(targets.len());
        for &j in &targets[..fanout] {
            edges.push((i, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !edges.contains(&(i, j)) && rng.gen_bool(0.1) {
                edges.push((i, j));
            }
        }
    }
    let capacity = 1.0;
    let mut initial: Vec<f64> = (0..n).map(|_| grid(&mut rng, capacity)).collect();
    initial.push(0.0);
    let mut harvest: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..horizon).map(|_| grid(&mut rng, capacity)).collect())
        .collect();
    harvest.push(vec![0.0; horizon]);
    let quarter = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.gen_range(lo..=hi) as f64 / 4.0;
    let costs = EnergyCosts {
        sense: quarter(&mut rng, 0, 2),
        tx: quarter(&mut rng, 1, 4),
        rx: quarter(&mut rng, 0, 2),
    };
    NetworkInstance::new(n + 1, sink, edges, horizon, capacity, initial, harvest, costs).expect("random fixture")
}

fn random_simple_path(inst: &NetworkInstance, from: NodeId, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
    // Randomized DFS; every sensor reaches the sink so this always succeeds.
    fn dfs(inst: &NetworkInstance, v: NodeId, path: &mut Vec<NodeId>, rng: &mut ChaCha8Rng) -> bool {
        if v == inst.sink() {
            return true;
        }
        let mut next: Vec<NodeId> = inst.out_edges(v).iter().map(|&e| inst.edges()[e].1).collect();
        next.shuffle(rng);
        for w in next {
            if !path.contains(&w) {
                path.push(w);
                if dfs(inst, w, path, rng) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![from];
    assert!(dfs(inst, from, &mut path, rng), "node {from} cannot reach the sink");
    path
}

/// Random simple sink paths per node and slot (shared across slots when
/// `time_invariable`).
pub fn random_paths(inst: &NetworkInstance, seed: u64, time_invariable: bool) -> RoutingPaths {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = vec![vec![Vec::new(); inst.horizon()]; inst.node_count()];
    for i in inst.sensors() {
        if time_invariable {
            let p = random_simple_path(inst, i, &mut rng);
            all[i] = vec![p; inst.horizon()];
        } else {
            for t in 0..inst.horizon() {
                all[i][t] = random_simple_path(inst, i, &mut rng);
            }
        }
    }
    RoutingPaths::variable(inst, all).expect("random paths are valid")
}

/// Diamond: c reaches the sink through a or b.
pub fn diamond(drain_a: f64, drain_b: f64, drain_c: f64) -> NetworkInstance {
    let (a, b, c, s) = (0, 1, 2, 3);
    NetworkInstance::new(
        4,
        s,
        vec![(c, a), (c, b), (a, s), (b, s)],
        1,
        drain_a.max(drain_b).max(drain_c),
        vec![drain_a, drain_b, drain_c, 0.0],
        vec![vec![0.0]; 4],
        costs(1.0, 1.0),
    )
    .expect("diamond fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;

    #[test]
    fn fixtures_are_valid() {
        assert!(validate_instance(&fig2(1.0, 2.0)).is_ok());
        for k in 2..6 {
            assert!(validate_instance(&fig4(k)).is_ok());
            assert!(validate_instance(&fig5(k)).is_ok());
        }
        for seed in 0..50 {
            let inst = random(1 + seed as usize % 6, 1 + seed as usize % 4, seed);
            assert!(validate_instance(&inst).is_ok(), "seed {seed}");
            random_paths(&inst, seed, seed % 2 == 0);
        }
    }

    #[test]
    fn fig4_has_seven_nodes_at_k3() {
        let inst = fig4(3);
        assert_eq!(inst.node_count(), 7);
        for a in fig4_a(3) {
            assert_eq!(inst.initial_battery(a), 1.0);
        }
    }

    #[test]
    fn fig5_alternates() {
        let inst = fig5(2);
        assert_eq!(inst.horizon(), 4);
        let a1: Vec<f64> = (0..4).map(|t| inst.harvest(FIG5_A1, t)).collect();
        let a2: Vec<f64> = (0..4).map(|t| inst.harvest(FIG5_A2, t)).collect();
        assert_eq!(a1, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(a2, vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(inst.initial_battery(FIG5_A1), 0.0);
        assert_eq!(inst.battery_capacity(), 1.0);
    }

    #[test]
    fn random_is_deterministic() {
        assert_eq!(random(4, 3, 7), random(4, 3, 7));
        assert_ne!(random(4, 3, 7), random(4, 3, 8));
    }
}
