//! Constant rates over a time-invariable fractional routing: each node gets
//! the largest constant per-slot energy budget its harvest sustains, and the
//! water-filling increments are found by feasible-flow bisection.

use crate::bisect_max;
use crate::error::SolveError;
use crate::flow::{decompose_unit_flow, feasible_flow_int, feasible_flow_with, CapacitatedFlowProblem, FlowSolution, PathDecomposition};
use crate::model::{FlowAssignment, NetworkInstance, NodeId, RateMatrix};
use crate::DEFAULT_DELTA;

/// How per-node capacities are written during an iteration. Both give the
/// same numbers; `Uniform` subtracts the common increment from a budget
/// adjusted for each node's accumulated rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityForm {
    /// u_i = (Δb_i − c_st (λ_i^{k−1} + F_i λ)) / c_rt
    PerNode,
    /// u_i = (Δb̃_i − c_st λ) / c_rt with Δb̃_i = Δb_i − c_st λ_i^{k−1} + c_st λ (1 − F_i)
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedOptions {
    pub delta: f64,
    pub capacity_form: CapacityForm,
}

impl Default for FixedOptions {
    fn default() -> Self {
        FixedOptions { delta: DEFAULT_DELTA, capacity_form: CapacityForm::Uniform }
    }
}

fn feasibility_slack(inst: &NetworkInstance) -> f64 {
    1e-12 * inst.energy_scale()
}

/// Largest constant per-slot consumption node `i` sustains without its
/// battery going negative, by bisection on [0, b_{i,1} + e_{i,1}].
pub fn max_constant_drain(inst: &NetworkInstance, i: NodeId) -> f64 {
    let slack = feasibility_slack(inst);
    let ok = |d: f64| {
        let mut b = inst.initial_battery(i);
        for t in 0..inst.horizon() {
            b = inst.battery_capacity().min(b + inst.harvest(i, t) - d);
            if b < -slack {
                return false;
            }
        }
        true
    };
    bisect_max(0.0, inst.initial_battery(i) + inst.harvest(i, 0), 0.0, ok)
}

pub fn drains(inst: &NetworkInstance) -> Vec<f64> {
    (0..inst.node_count())
        .map(|i| if i == inst.sink() { 0.0 } else { max_constant_drain(inst, i) })
        .collect()
}

fn problem_at(
    inst: &NetworkInstance,
    drains: &[f64],
    active: &[bool],
    prev: &[f64],
    lambda: f64,
    form: CapacityForm,
) -> CapacitatedFlowProblem {
    let n = inst.node_count();
    let mut supply = vec![0.0; n];
    let mut capacity = vec![None; n];
    let (c_st, c_rt) = (inst.c_st(), inst.c_rt());
    for i in inst.sensors() {
        let f = if active[i] { 1.0 } else { 0.0 };
        supply[i] = prev[i] + f * lambda;
        let u = match form {
            CapacityForm::PerNode => (drains[i] - c_st * supply[i]) / c_rt,
            CapacityForm::Uniform => {
                let adjusted = drains[i] - c_st * prev[i] + c_st * lambda * (1.0 - f);
                (adjusted - c_st * lambda) / c_rt
            }
        };
        capacity[i] = Some(u.max(0.0));
    }
    CapacitatedFlowProblem { nodes: n, sink: inst.sink(), edges: inst.edges().to_vec(), capacity, supply, cost: None }
}

/// Largest common increment λ^k for the active nodes and a flow routing the
/// resulting supplies within the node budgets.
pub fn maximize_rates_fixed(
    inst: &NetworkInstance,
    drains: &[f64],
    active: &[bool],
    prev: &[f64],
    form: CapacityForm,
) -> (f64, FlowSolution) {
    let c_st = inst.c_st();
    let hi = inst
        .sensors()
        .filter(|&i| active[i])
        .map(|i| (drains[i] - c_st * prev[i]) / c_st)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    // Arcs below `eps` count as saturated. Each iteration may leave up to
    // `tol` of demand unrouted on top of what earlier iterations left, so
    // rounding in a previous λ never makes λ = 0 look infeasible here.
    let eps = feasibility_slack(inst);
    let tol = 10.0 * eps;
    let shortfall = |lam: f64| {
        let p = problem_at(inst, drains, active, prev, lam, form);
        let sol = feasible_flow_with(&p, eps, f64::INFINITY);
        (sol.demand - sol.value).max(0.0)
    };
    let carried = shortfall(0.0);
    let feasible = |lam: f64| {
        let over = inst.sensors().any(|i| active[i] && drains[i] - c_st * (prev[i] + lam) < -tol);
        !over && shortfall(lam) <= carried + tol
    };
    let lambda = if hi.is_finite() { bisect_max(0.0, hi, 0.0, feasible) } else { 0.0 };
    let mut sol = feasible_flow_with(&problem_at(inst, drains, active, prev, lambda, form), eps, f64::INFINITY);
    sol.feasible = sol.demand - sol.value <= carried + tol;
    (lambda, sol)
}

/// Nodes whose rate can still grow: a small raise of λ_i adds supply at i''
/// and shrinks the capacity arc i' -> i'' by c_st/c_rt times as much.
/// With slack on the capacity arc the extra supply only needs a residual
/// path from i'' to the sink. With the arc saturated, flow currently
/// entering i' must also be rerouted to the sink, and when c_st > c_rt the
/// excess reroute has to come back through i''.
pub fn fix_rates_residual(inst: &NetworkInstance, sol: &FlowSolution, active: &[bool], tol: f64) -> Vec<bool> {
    let g = &sol.graph;
    let reach = g.net.reaching_tol(g.sink, Some(g.source), tol);
    let c = inst.c_st() / inst.c_rt();
    let mut still = vec![false; inst.node_count()];
    for i in inst.sensors() {
        if !active[i] {
            continue;
        }
        let arc = g.cap_arc[i].expect("sensor has a capacity arc");
        let (a, b) = (g.inn(i), g.out(i));
        still[i] = if g.net.residual(arc) > tol {
            reach[b]
        } else {
            let flow = g.net.flow(arc);
            flow > tol && reach[a] && (c <= 1.0 || g.net.residual_path_exists(a, b, Some(g.source), tol))
        };
    }
    still
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedIteration {
    pub increment: f64,
    pub fixed: Vec<NodeId>,
    pub forced: bool,
}

#[derive(Debug, Clone)]
pub struct FixedSolution {
    /// Per-node constant rate.
    pub node_rates: Vec<f64>,
    /// The constant rates replicated over all slots.
    pub rates: RateMatrix,
    /// The supporting time-invariable flow, replicated over all slots.
    pub flows: FlowAssignment,
    pub drains: Vec<f64>,
    pub decomposition: Option<PathDecomposition>,
    pub log: Vec<FixedIteration>,
}

impl FixedSolution {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }
}

pub fn solve_fixed_fractional(inst: &NetworkInstance, opts: FixedOptions) -> Result<FixedSolution, SolveError> {
    let n = inst.node_count();
    let drains = drains(inst);
    let mut active: Vec<bool> = (0..n).map(|i| i != inst.sink()).collect();
    let mut rates = vec![0.0; n];
    let mut log = Vec::new();
    let sat_tol = opts.delta * inst.energy_scale() / inst.c_st().min(inst.c_rt());
    let mut last: Option<FlowSolution> = None;
    while active.iter().any(|&a| a) {
        if log.len() >= inst.sensor_count() {
            return Err(SolveError::Internal("water-filling exceeded n iterations".into()));
        }
        let (lambda, sol) = maximize_rates_fixed(inst, &drains, &active, &rates, opts.capacity_form);
        for i in inst.sensors() {
            if active[i] {
                rates[i] += lambda;
            }
        }
        let still = fix_rates_residual(inst, &sol, &active, sat_tol);
        let mut fixed: Vec<NodeId> = inst.sensors().filter(|&i| active[i] && !still[i]).collect();
        let forced = fixed.is_empty();
        if forced {
            // No node reported saturated; fix the one with the least budget slack.
            let i = inst
                .sensors()
                .filter(|&i| active[i])
                .min_by(|&x, &y| {
                    let sx = sol.graph.net.residual(sol.graph.cap_arc[x].unwrap());
                    let sy = sol.graph.net.residual(sol.graph.cap_arc[y].unwrap());
                    sx.total_cmp(&sy)
                })
                .unwrap();
            fixed.push(i);
        }
        for &i in &fixed {
            active[i] = false;
        }
        log.push(FixedIteration { increment: lambda, fixed, forced });
        last = Some(sol);
    }
    let sol = last.ok_or_else(|| SolveError::Internal("instance has no sensors".into()))?;
    let mut matrix = RateMatrix::zeros(inst);
    let mut flows = FlowAssignment::zeros(inst);
    let edge_flows = sol.edge_flows();
    for t in 0..inst.horizon() {
        for i in inst.sensors() {
            matrix.set(i, t, rates[i]);
        }
        for (e, &f) in edge_flows.iter().enumerate() {
            flows.set(e, t, f);
        }
    }
    let decomposition = unsplittable_decomposition(inst, &drains, &rates);
    Ok(FixedSolution { node_rates: rates, rates: matrix, flows, drains, decomposition, log })
}

/// Integer capacity counts ⌊(Δb_i − c_st λ) / (c_rt λ)⌋, with a relative
/// guard against float noise just below an integer.
pub fn capacity_counts(inst: &NetworkInstance, drains: &[f64], lambda: f64) -> Vec<Option<i64>> {
    (0..inst.node_count())
        .map(|i| {
            if i == inst.sink() {
                return None;
            }
            let q = (drains[i] - inst.c_st() * lambda) / (inst.c_rt() * lambda);
            Some(if q < 0.0 { 0 } else { (q * (1.0 + 1e-12) + 1e-12).floor() as i64 })
        })
        .collect()
}

/// Single-path routing for equal rates when the floored budgets admit it.
fn unsplittable_decomposition(inst: &NetworkInstance, drains: &[f64], rates: &[f64]) -> Option<PathDecomposition> {
    let lambda = inst.sensors().map(|i| rates[i]).next()?;
    let scale = lambda.abs().max(1e-300);
    if !(lambda > 0.0) || inst.sensors().any(|i| (rates[i] - lambda).abs() > 1e-9 * scale) {
        return None;
    }
    let problem = CapacitatedFlowProblem {
        nodes: inst.node_count(),
        sink: inst.sink(),
        edges: inst.edges().to_vec(),
        capacity: capacity_counts(inst, drains, lambda),
        supply: (0..inst.node_count()).map(|i| i64::from(i != inst.sink())).collect(),
        cost: None,
    };
    let sol = feasible_flow_int(&problem);
    if !sol.feasible {
        return None;
    }
    decompose_unit_flow(&sol, lambda).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn drain_examples() {
        let a = fixtures::single_node(1.0, vec![0.0, 0.0], 1.0, 1.0);
        assert!((max_constant_drain(&a, 0) - 0.5).abs() < 1e-12);
        let b = fixtures::single_node(0.0, vec![1.0, 0.0], 1.0, 1.0);
        assert!((max_constant_drain(&b, 0) - 0.5).abs() < 1e-12);
        // slot 1 stores only B = 1 of the 2 units, which still covers a drain of 1
        let c = fixtures::single_node(0.0, vec![2.0, 0.0], 1.0, 1.0);
        assert!((max_constant_drain(&c, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_rate() {
        let inst = fixtures::single_node(1.0, vec![0.0], 1.0, 1.0);
        let sol = solve_fixed_fractional(&inst, FixedOptions::default()).unwrap();
        assert!((sol.node_rates[0] - 1.0).abs() < 1e-12);
        let inst = fixtures::single_node(1.0, vec![0.0], 1.0, 2.0);
        let sol = solve_fixed_fractional(&inst, FixedOptions::default()).unwrap();
        assert!((sol.node_rates[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fig2_first_iteration() {
        let inst = fixtures::fig2(1.0, 2.0);
        let d = drains(&inst);
        let active = vec![true, true, false];
        let (lam, sol) = maximize_rates_fixed(&inst, &d, &active, &[0.0; 3], CapacityForm::Uniform);
        assert!((lam - 1.0 / 3.0).abs() < 1e-9, "{lam}");
        let f = sol.edge_flows();
        assert!((f[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((f[1] - 2.0 / 3.0).abs() < 1e-9);
        let still = fix_rates_residual(&inst, &sol, &active, 1e-9);
        assert_eq!(still, vec![false, false, false]);
    }

    #[test]
    fn diamond_splits() {
        let inst = fixtures::diamond(1.0, 1.0, 3.0);
        let d = drains(&inst);
        let active = vec![true, true, true, false];
        let (lam, sol) = maximize_rates_fixed(&inst, &d, &active, &[0.0; 4], CapacityForm::PerNode);
        assert!((lam - 2.0 / 3.0).abs() < 1e-9);
        let f = sol.edge_flows();
        assert!((f[0] - 1.0 / 3.0).abs() < 1e-9 && (f[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!(fix_rates_residual(&inst, &sol, &active, 1e-9).iter().all(|&s| !s));
        let full = solve_fixed_fractional(&inst, FixedOptions::default()).unwrap();
        for i in 0..3 {
            assert!((full.node_rates[i] - 2.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(full.iterations(), 1);
    }

    #[test]
    fn slack_everywhere_keeps_nodes_active() {
        let inst = fixtures::fig2(1.0, 2.0);
        let d = drains(&inst);
        let active = vec![true, true, false];
        let p = problem_at(&inst, &d, &active, &[0.0; 3], 0.0, CapacityForm::PerNode);
        let sol = feasible_flow_with(&p, 1e-12, f64::INFINITY);
        assert_eq!(fix_rates_residual(&inst, &sol, &active, 1e-9), vec![true, true, false]);
    }

    #[test]
    fn fig2_rates() {
        let inst = fixtures::fig2(1.0, 2.0);
        let sol = solve_fixed_fractional(&inst, FixedOptions::default()).unwrap();
        assert!((sol.node_rates[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((sol.node_rates[1] - 1.0 / 3.0).abs() < 1e-9);
    }
}
