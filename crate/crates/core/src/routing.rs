//! Routing search: the max-min unsplittable routing by bisection over
//! floored node capacities, and brute-force enumeration of trees and path
//! sets on tiny instances.

use std::cmp::Ordering;

use crate::error::SolveError;
use crate::fixed::{capacity_counts, drains};
use crate::flow::{decompose_unit_flow, feasible_flow_int, CapacitatedFlowProblem, PathDecomposition};
use crate::model::{NetworkInstance, NodeId, RateMatrix, RoutingPaths};
use crate::unsplittable::{solve_unsplittable_rates, UnsplittableOptions};

#[derive(Debug, Clone)]
pub struct UnsplittableRouting {
    /// Common rate every node sustains on the returned routing.
    pub lambda: f64,
    /// `None` when no positive common rate exists.
    pub paths: Option<RoutingPaths>,
    pub decomposition: Option<PathDecomposition>,
}

fn unit_problem(inst: &NetworkInstance, drains: &[f64], lambda: f64) -> CapacitatedFlowProblem<i64> {
    CapacitatedFlowProblem {
        nodes: inst.node_count(),
        sink: inst.sink(),
        edges: inst.edges().to_vec(),
        capacity: capacity_counts(inst, drains, lambda),
        supply: (0..inst.node_count()).map(|i| i64::from(i != inst.sink())).collect(),
        cost: None,
    }
}

/// Largest λ (to precision δ) for which every node can send λ along a
/// single path while each node forwards at most ⌊(Δb_i − c_st λ)/(c_rt λ)⌋
/// other nodes' paths. Flows are computed in units of λ, so the integral
/// max-flow decomposes into one path per node.
pub fn maxmin_unsplittable_routing(inst: &NetworkInstance, delta: f64) -> Result<UnsplittableRouting, SolveError> {
    let drains = drains(inst);
    let hi = inst.sensors().map(|i| drains[i] / inst.c_st()).fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) || !hi.is_finite() {
        return Ok(UnsplittableRouting { lambda: 0.0, paths: None, decomposition: None });
    }
    let ok = |lambda: f64| lambda <= 0.0 || feasible_flow_int(&unit_problem(inst, &drains, lambda)).feasible;
    let lambda = crate::bisect_max(0.0, hi, delta * hi.max(1.0), ok);
    if lambda <= 0.0 {
        return Ok(UnsplittableRouting { lambda: 0.0, paths: None, decomposition: None });
    }
    let sol = feasible_flow_int(&unit_problem(inst, &drains, lambda));
    let decomposition = decompose_unit_flow(&sol, lambda)?;
    let per_node = (0..inst.node_count())
        .map(|i| decomposition.paths[i].clone().unwrap_or_default())
        .collect();
    let paths = RoutingPaths::invariable(inst, per_node)?;
    Ok(UnsplittableRouting { lambda, paths: Some(paths), decomposition: Some(decomposition) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingFamily {
    /// One parent per node.
    Tree,
    /// One simple sink path per node, chosen independently.
    Unsplittable,
}

const MAX_ENUM_SENSORS: usize = 6;

#[derive(Debug, Clone)]
pub struct EnumerationResult {
    pub paths: RoutingPaths,
    pub rates: RateMatrix,
    pub sorted: Vec<f64>,
    pub candidates: usize,
}

/// Nondecreasing-sorted comparison; values within `tol` count as equal.
pub fn compare_sorted(a: &[f64], b: &[f64], tol: f64) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol * x.abs().max(y.abs()).max(1.0) {
            return x.total_cmp(y);
        }
    }
    a.len().cmp(&b.len())
}

fn simple_paths(inst: &NetworkInstance, from: NodeId) -> Vec<Vec<NodeId>> {
    fn walk(inst: &NetworkInstance, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let v = *path.last().unwrap();
        if v == inst.sink() {
            out.push(path.clone());
            return;
        }
        for &e in inst.out_edges(v) {
            let w = inst.edges()[e].1;
            if !path.contains(&w) {
                path.push(w);
                walk(inst, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(inst, &mut vec![from], &mut out);
    out
}

fn candidates(inst: &NetworkInstance, family: RoutingFamily) -> Vec<RoutingPaths> {
    let sensors: Vec<NodeId> = inst.sensors().collect();
    let choices: Vec<Vec<Vec<NodeId>>> = match family {
        RoutingFamily::Tree => sensors
            .iter()
            .map(|&i| {
                let mut heads: Vec<NodeId> = inst.out_edges(i).iter().map(|&e| inst.edges()[e].1).collect();
                heads.dedup();
                heads.into_iter().map(|h| vec![h]).collect()
            })
            .collect(),
        RoutingFamily::Unsplittable => sensors.iter().map(|&i| simple_paths(inst, i)).collect(),
    };
    let mut out = Vec::new();
    let mut pick = vec![0usize; sensors.len()];
    if choices.iter().any(Vec::is_empty) {
        return out;
    }
    loop {
        let routing = match family {
            RoutingFamily::Tree => {
                let mut parent = vec![inst.sink(); inst.node_count()];
                for (k, &i) in sensors.iter().enumerate() {
                    parent[i] = choices[k][pick[k]][0];
                }
                RoutingPaths::from_parents(inst, &parent).ok()
            }
            RoutingFamily::Unsplittable => {
                let mut per_node = vec![Vec::new(); inst.node_count()];
                for (k, &i) in sensors.iter().enumerate() {
                    per_node[i] = choices[k][pick[k]].clone();
                }
                RoutingPaths::invariable(inst, per_node).ok()
            }
        };
        out.extend(routing);
        let mut k = 0;
        loop {
            if k == pick.len() {
                return out;
            }
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

/// Scores every time-invariable routing of the family by its max-min fair
/// rates and returns the lexicographically best; ties keep the first found.
pub fn enumerate_routings(
    inst: &NetworkInstance,
    family: RoutingFamily,
    opts: UnsplittableOptions,
) -> Result<EnumerationResult, SolveError> {
    if inst.sensor_count() > MAX_ENUM_SENSORS {
        return Err(SolveError::TooLarge(format!(
            "enumeration is limited to {MAX_ENUM_SENSORS} sensors, instance has {}",
            inst.sensor_count()
        )));
    }
    let all = candidates(inst, family);
    let count = all.len();
    let mut best: Option<EnumerationResult> = None;
    for paths in all {
        let sol = solve_unsplittable_rates(inst, &paths, opts)?;
        let sorted = sol.rates.sorted(inst);
        if best.as_ref().map_or(true, |b| compare_sorted(&sorted, &b.sorted, 1e-9) == Ordering::Greater) {
            best = Some(EnumerationResult { paths, rates: sol.rates, sorted, candidates: count });
        }
    }
    best.ok_or_else(|| SolveError::Infeasible("no routing reaches the sink".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn single_node_route() {
        let inst = fixtures::single_node(1.0, vec![0.0], 1.0, 1.0);
        let r = maxmin_unsplittable_routing(&inst, 1e-9).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-9);
        assert_eq!(r.paths.unwrap().path(0, 0), &[0, 1]);
    }

    #[test]
    fn relay_star_is_one_third() {
        // leaves 0, 1 through relay 2 to sink 3
        let inst = NetworkInstance::new(
            4,
            3,
            vec![(0, 2), (1, 2), (2, 3)],
            1,
            10.0,
            vec![10.0, 10.0, 1.0, 0.0],
            vec![vec![0.0]; 4],
            fixtures::costs(1.0, 1.0),
        )
        .unwrap();
        let r = maxmin_unsplittable_routing(&inst, 1e-9).unwrap();
        assert!((r.lambda - 1.0 / 3.0).abs() < 1e-8, "{}", r.lambda);
    }

    #[test]
    fn fig4_routings() {
        let inst = fixtures::fig4(3);
        let r = maxmin_unsplittable_routing(&inst, 1e-9).unwrap();
        assert!((r.lambda - 0.5).abs() < 1e-8);
        let tree = enumerate_routings(&inst, RoutingFamily::Tree, UnsplittableOptions::default()).unwrap();
        let want = [0.25, 0.25, 0.25, 0.25, 1.0, 1.0];
        assert!(tree.sorted.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-9), "{:?}", tree.sorted);
        let paths = enumerate_routings(&inst, RoutingFamily::Unsplittable, UnsplittableOptions::default()).unwrap();
        assert!(paths.sorted.iter().all(|&r| (r - 0.5).abs() < 1e-9), "{:?}", paths.sorted);
    }

    #[test]
    fn too_large() {
        let inst = fixtures::fig4(4);
        assert!(matches!(
            enumerate_routings(&inst, RoutingFamily::Tree, UnsplittableOptions::default()),
            Err(SolveError::TooLarge(_))
        ));
    }
}
