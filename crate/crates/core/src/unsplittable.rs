//! Max-min fair rates for a given unsplittable routing by water-filling:
//! raise every active rate by a common amount, then fix the rates that
//! can no longer grow.

use crate::bisect_max;
use crate::error::SolveError;
use crate::model::{
    check_feasible, descendant_counts, BatteryTrace, FlowAssignment, Grid, NetworkInstance, NodeId, RateMatrix,
    RoutingPaths,
};
use crate::DEFAULT_DELTA;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsplittableOptions {
    /// Precision δ; also sets the zero-battery tolerance δ·max(B, max harvest).
    pub delta: f64,
}

impl Default for UnsplittableOptions {
    fn default() -> Self {
        UnsplittableOptions { delta: DEFAULT_DELTA }
    }
}

#[derive(Debug, Clone)]
pub struct WaterfillState {
    pub iteration: usize,
    pub active: Grid<bool>,
    pub rates: RateMatrix,
    pub increments: Vec<f64>,
    /// Δb_{i,t}: energy drawn per slot by the current rates.
    pub drop: Grid<f64>,
    pub battery: BatteryTrace,
    pub descendants: Grid<usize>,
}

impl WaterfillState {
    pub fn new(inst: &NetworkInstance, paths: &RoutingPaths) -> Self {
        let mut active = Grid::filled(inst.node_count(), inst.horizon(), false);
        for i in inst.sensors() {
            for t in 0..inst.horizon() {
                active[(i, t)] = true;
            }
        }
        let drop = Grid::filled(inst.node_count(), inst.horizon(), 0.0);
        let battery = crate::model::simulate_consumption(inst, &drop);
        let descendants = descendant_counts(inst, paths, &active);
        WaterfillState {
            iteration: 0,
            active,
            rates: RateMatrix::zeros(inst),
            increments: Vec::new(),
            drop,
            battery,
            descendants,
        }
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    fn weight(&self, inst: &NetworkInstance, i: NodeId, t: usize) -> f64 {
        inst.c_rt() * self.descendants[(i, t)] as f64 + if self.active[(i, t)] { inst.c_st() } else { 0.0 }
    }

    /// Marks (j, t) fixed and updates descendant counts along its path.
    fn fix(&mut self, inst: &NetworkInstance, paths: &RoutingPaths, j: NodeId, t: usize) -> bool {
        if !self.active[(j, t)] {
            return false;
        }
        self.active[(j, t)] = false;
        for &i in &paths.path(j, t)[1..] {
            if i != inst.sink() {
                self.descendants[(i, t)] -= 1;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub increment: f64,
    pub fixed: Vec<(NodeId, usize)>,
    /// Set when no rule fired and the tightest active rate was fixed to make progress.
    pub forced: bool,
}

#[derive(Debug, Clone)]
pub struct UnsplittableSolution {
    pub rates: RateMatrix,
    pub flows: FlowAssignment,
    pub battery: BatteryTrace,
    pub log: Vec<IterationRecord>,
}

impl UnsplittableSolution {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn anomalies(&self) -> usize {
        self.log.iter().filter(|r| r.forced).count()
    }
}

fn feasibility_slack(inst: &NetworkInstance) -> f64 {
    1e-12 * inst.energy_scale()
}

/// Whether node `i` keeps a nonnegative battery when every active weight
/// is scaled by the increment `lambda` on top of the current drop.
fn node_survives(inst: &NetworkInstance, state: &WaterfillState, i: NodeId, lambda: f64) -> bool {
    let slack = feasibility_slack(inst);
    let mut b = inst.initial_battery(i);
    for t in 0..inst.horizon() {
        let used = state.drop[(i, t)] + lambda * state.weight(inst, i, t);
        b = inst.battery_capacity().min(b + inst.harvest(i, t) - used);
        if b < -slack {
            return false;
        }
    }
    true
}

/// Per-node increment limits λ_i^k (only for nodes with active entries or
/// active descendants), each found by bisection to full float precision.
pub fn node_increments(inst: &NetworkInstance, state: &WaterfillState) -> Vec<Option<f64>> {
    let mut out = vec![None; inst.node_count()];
    for i in inst.sensors() {
        let Some(tau) = (0..inst.horizon()).find(|&t| state.weight(inst, i, t) > 0.0) else {
            continue;
        };
        let avail = (state.battery.get(i, tau) + inst.harvest(i, tau)).max(0.0);
        let hi = avail / state.weight(inst, i, tau);
        out[i] = Some(bisect_max(0.0, hi, 0.0, |lam| node_survives(inst, state, i, lam)));
    }
    out
}

/// Largest common increment λ^k over all active rates.
pub fn maximize_common_rate(inst: &NetworkInstance, state: &WaterfillState) -> f64 {
    node_increments(inst, state).into_iter().flatten().fold(f64::INFINITY, f64::min)
}

fn apply_increment(inst: &NetworkInstance, state: &mut WaterfillState, lambda: f64) {
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            let w = state.weight(inst, i, t);
            state.drop[(i, t)] += lambda * w;
            if state.active[(i, t)] {
                let r = state.rates.get(i, t) + lambda;
                state.rates.set(i, t, r);
            }
        }
    }
    state.battery = crate::model::simulate_consumption(inst, &state.drop);
    state.increments.push(lambda);
    state.iteration += 1;
}

/// Slots of node `i` whose rates and descendants' rates must stop growing
/// because the battery runs empty after slot `t`: slot t itself, then
/// backwards while the battery did not overflow.
fn backward_chain(inst: &NetworkInstance, state: &WaterfillState, i: NodeId, t: usize, tol: f64) -> Vec<usize> {
    let mut slots = vec![t];
    let mut s = t;
    while s > 0 {
        let prev = s - 1;
        let level = state.battery.get(i, prev) + inst.harvest(i, prev) - state.drop[(i, prev)];
        if level > inst.battery_capacity() + tol {
            break;
        }
        slots.push(prev);
        s = prev;
    }
    slots
}

fn fix_chain(inst: &NetworkInstance, paths: &RoutingPaths, state: &mut WaterfillState, i: NodeId, slots: &[usize]) -> Vec<(NodeId, usize)> {
    let mut fixed = Vec::new();
    for &s in slots {
        if state.fix(inst, paths, i, s) {
            fixed.push((i, s));
        }
        for j in inst.sensors() {
            if j != i && paths.path(j, s)[1..].contains(&i) && state.fix(inst, paths, j, s) {
                fixed.push((j, s));
            }
        }
    }
    fixed
}

/// Applies the fixing rules: empty battery after slot t fixes (i, t); the
/// fixing extends backwards over slots where the battery did not overflow;
/// every fixed (i, s) also fixes the slot-s rates of nodes routed through i.
pub fn fix_rates(inst: &NetworkInstance, paths: &RoutingPaths, state: &mut WaterfillState, delta: f64) -> Vec<(NodeId, usize)> {
    let tol = delta * inst.energy_scale();
    let mut chains = Vec::new();
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            if state.battery.get(i, t + 1) <= tol {
                chains.push((i, backward_chain(inst, state, i, t, tol)));
            }
        }
    }
    let mut fixed = Vec::new();
    for (i, slots) in chains {
        fixed.extend(fix_chain(inst, paths, state, i, &slots));
    }
    fixed
}

/// Fallback when no rule fires: treat the lowest post-slot battery level of
/// the node that limited the last increment as empty.
fn force_fix(inst: &NetworkInstance, paths: &RoutingPaths, state: &mut WaterfillState, limiting: NodeId) -> Vec<(NodeId, usize)> {
    let mut best: Option<(f64, NodeId, usize)> = None;
    let candidates: Vec<NodeId> = std::iter::once(limiting).chain(inst.sensors()).collect();
    for i in candidates {
        for t in 0..inst.horizon() {
            let touches = state.active[(i, t)] || state.descendants[(i, t)] > 0;
            let earlier = (0..=t).any(|s| state.active[(i, s)] || state.descendants[(i, s)] > 0);
            if !touches && !earlier {
                continue;
            }
            let b = state.battery.get(i, t + 1);
            if best.map_or(true, |(v, _, _)| b < v) {
                best = Some((b, i, t));
            }
        }
        if best.is_some() {
            break;
        }
    }
    let Some((_, i, t)) = best else { return Vec::new() };
    let slots = backward_chain(inst, state, i, t, f64::INFINITY);
    let mut fixed = fix_chain(inst, paths, state, i, &slots);
    if fixed.is_empty() {
        // nothing on the chain was active: fix any remaining active entry
        if let Some((j, s)) = inst.sensors().flat_map(|j| (0..inst.horizon()).map(move |s| (j, s))).find(|&(j, s)| state.active[(j, s)]) {
            state.fix(inst, paths, j, s);
            fixed.push((j, s));
        }
    }
    fixed
}

pub fn solve_unsplittable_rates(
    inst: &NetworkInstance,
    paths: &RoutingPaths,
    opts: UnsplittableOptions,
) -> Result<UnsplittableSolution, SolveError> {
    if paths.all().len() != inst.node_count() || paths.all().iter().any(|p| p.len() != inst.horizon()) {
        return Err(SolveError::Model(crate::ModelError::Dimension("paths do not match the instance".into())));
    }
    let mut state = WaterfillState::new(inst, paths);
    let mut log = Vec::new();
    let budget = inst.sensor_count() * inst.horizon();
    while state.active_count() > 0 {
        if log.len() >= budget {
            return Err(SolveError::Internal(format!("water-filling exceeded {budget} iterations")));
        }
        let increments = node_increments(inst, &state);
        let (limiting, lambda) = increments
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .fold((usize::MAX, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        apply_increment(inst, &mut state, lambda);
        let mut fixed = fix_rates(inst, paths, &mut state, opts.delta);
        let mut forced = false;
        if fixed.is_empty() {
            forced = true;
            fixed = force_fix(inst, paths, &mut state, limiting);
        }
        log.push(IterationRecord { iteration: state.iteration, increment: lambda, fixed, forced });
    }
    let flows = paths.induced_flows(inst, &state.rates);
    let battery = crate::model::simulate_batteries(inst, &state.rates, &flows)?;
    debug_assert!(check_feasible(inst, &state.rates, &flows, 10.0 * opts.delta * inst.energy_scale())
        .map(|r| r.feasible)
        .unwrap_or(false));
    Ok(UnsplittableSolution { rates: state.rates, flows, battery, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn solve(inst: &NetworkInstance, paths: &RoutingPaths) -> UnsplittableSolution {
        solve_unsplittable_rates(inst, paths, UnsplittableOptions::default()).unwrap()
    }

    #[test]
    fn single_node_first_increment() {
        let inst = fixtures::single_node(1.0, vec![0.0], 1.0, 1.0);
        let paths = RoutingPaths::invariable(&inst, vec![vec![0, 1], vec![]]).unwrap();
        let state = WaterfillState::new(&inst, &paths);
        assert_eq!(maximize_common_rate(&inst, &state), 1.0);
    }

    #[test]
    fn fig2_first_iteration_and_fixing() {
        let inst = fixtures::fig2(1.0, 2.0);
        let paths = fixtures::fig2_paths(&inst);
        let mut state = WaterfillState::new(&inst, &paths);
        let lam = maximize_common_rate(&inst, &state);
        assert!((lam - 1.0 / 3.0).abs() < 1e-12);
        apply_increment(&inst, &mut state, lam);
        let mut fixed = fix_rates(&inst, &paths, &mut state, DEFAULT_DELTA);
        fixed.sort();
        assert_eq!(fixed, vec![(fixtures::FIG2_A, 0), (fixtures::FIG2_B, 0)]);
        assert_eq!(state.active_count(), 0);
    }

    #[test]
    fn fig2_rates() {
        let inst = fixtures::fig2(1.0, 2.0);
        let sol = solve(&inst, &fixtures::fig2_paths(&inst));
        for v in sol.rates.sorted(&inst) {
            assert!((v - 1.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(sol.iterations(), 1);
    }

    #[test]
    fn fig4_tree_and_unsplittable() {
        let inst = fixtures::fig4(3);
        let tree = solve(&inst, &fixtures::fig4_tree_paths(3)).rates.sorted(&inst);
        let expect = [0.25, 0.25, 0.25, 0.25, 1.0, 1.0];
        for (v, e) in tree.iter().zip(expect) {
            assert!((v - e).abs() < 1e-9, "{tree:?}");
        }
        let state = WaterfillState::new(&inst, &fixtures::fig4_unsplittable_paths(3));
        assert!((maximize_common_rate(&inst, &state) - 0.5).abs() < 1e-12);
        let unspl = solve(&inst, &fixtures::fig4_unsplittable_paths(3)).rates.sorted(&inst);
        assert!(unspl.iter().all(|v| (v - 0.5).abs() < 1e-9), "{unspl:?}");
    }

    #[test]
    fn slack_node_stays_active() {
        // a single node with plenty of energy next to a drained one: after the
        // first increment the rich node remains active
        let inst = NetworkInstance::new(
            3,
            2,
            vec![(0, 2), (1, 2)],
            1,
            5.0,
            vec![1.0, 5.0, 0.0],
            vec![vec![0.0]; 3],
            crate::EnergyCosts { sense: 1.0, tx: 0.0, rx: 1.0 },
        )
        .unwrap();
        let paths = RoutingPaths::from_parents(&inst, &[2, 2, 2]).unwrap();
        let mut state = WaterfillState::new(&inst, &paths);
        let lam = maximize_common_rate(&inst, &state);
        apply_increment(&inst, &mut state, lam);
        let fixed = fix_rates(&inst, &paths, &mut state, DEFAULT_DELTA);
        assert_eq!(fixed, vec![(0, 0)]);
        assert!(state.active[(1, 0)]);
    }

    fn one_node_two_slots(e1: f64) -> (NetworkInstance, RoutingPaths) {
        let inst = fixtures::single_node(0.5, vec![e1, 0.0], 1.0, 1.0);
        let paths = RoutingPaths::invariable(&inst, vec![vec![0, 1], vec![]]).unwrap();
        (inst, paths)
    }

    #[test]
    fn backward_chain_spans_both_slots() {
        // no overflow in slot 1: draining after slot 2 fixes both slots
        let (inst, paths) = one_node_two_slots(0.3);
        let mut state = WaterfillState::new(&inst, &paths);
        let lam = maximize_common_rate(&inst, &state);
        assert!((lam - 0.4).abs() < 1e-12);
        apply_increment(&inst, &mut state, lam);
        let mut fixed = fix_rates(&inst, &paths, &mut state, DEFAULT_DELTA);
        fixed.sort();
        assert_eq!(fixed, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn backward_chain_stops_at_overflow() {
        // slot 1 harvest overflows the battery, so only slot 2 is fixed first
        let (inst, paths) = one_node_two_slots(5.0);
        let mut state = WaterfillState::new(&inst, &paths);
        let lam = maximize_common_rate(&inst, &state);
        assert!((lam - 1.0).abs() < 1e-9, "{lam}");
        apply_increment(&inst, &mut state, lam);
        let fixed = fix_rates(&inst, &paths, &mut state, DEFAULT_DELTA);
        assert_eq!(fixed, vec![(0, 1)]);
        let sol = solve(&inst, &paths);
        assert!((sol.rates.get(0, 0) - 4.5).abs() < 1e-9);
        assert!((sol.rates.get(0, 1) - 1.0).abs() < 1e-9);
    }
}
