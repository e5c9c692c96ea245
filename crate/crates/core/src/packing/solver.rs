use crate::error::SolveError;
use crate::lp::{build_system, Cmp, LinearProgram, RateSystem, Sense, Setting};
use crate::model::{simulate_batteries, BatteryTrace, FlowAssignment, Grid, NetworkInstance, RateMatrix};

use super::{build_packing_system, compute_bounds, packing_decision, Decision, PackingPoint};

#[derive(Debug, Clone, Copy)]
pub struct FptasOptions {
    pub epsilon: f64,
    pub delta: f64,
    /// Oracle calls allowed per packing decision; `None` derives a bound
    /// from ε, the width and the row count.
    pub max_decision_iterations: Option<usize>,
}

impl Default for FptasOptions {
    fn default() -> Self {
        Self { epsilon: 0.1, delta: crate::DEFAULT_DELTA, max_decision_iterations: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FptasIteration {
    pub iteration: usize,
    /// Increment accepted by the packing bisection.
    pub accepted: f64,
    /// Increment actually applied (lower when the exact LP had to repair it).
    pub increment: f64,
    pub fixed: usize,
    pub repaired: bool,
    pub forced: bool,
    pub decisions: usize,
    pub oracle_calls: usize,
}

#[derive(Debug, Clone)]
pub struct FptasSolution {
    pub rates: RateMatrix,
    pub flows: FlowAssignment,
    pub battery: BatteryTrace,
    pub log: Vec<FptasIteration>,
}

impl FptasSolution {
    pub fn anomalies(&self) -> Vec<String> {
        let mut out = Vec::new();
        for it in &self.log {
            if it.forced {
                out.push(format!("iteration {}: no rate saturated, fixed the tightest one", it.iteration));
            }
            if it.repaired {
                out.push(format!(
                    "iteration {}: accepted increment {} was infeasible, lowered to {}",
                    it.iteration, it.accepted, it.increment
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchStats {
    pub decisions: usize,
    pub oracle_calls: usize,
}

fn decision_budget(opts: &FptasOptions, rows: usize, width: f64) -> usize {
    if let Some(b) = opts.max_decision_iterations {
        return b;
    }
    let e = opts.epsilon / 8.0;
    let bound = width * (2.0 * rows.max(1) as f64 / e).ln() / (e * e);
    (4.0 * bound).ceil().clamp(10_000.0, 5e7) as usize
}

/// Largest common increment λ^k (up to precision δ) for which the packing
/// decision accepts, with the accepted point.
pub fn maximize_rates_packing(
    inst: &NetworkInstance,
    prev: &Grid<f64>,
    active: &Grid<bool>,
    opts: &FptasOptions,
    stats: &mut SearchStats,
) -> Result<(f64, Option<PackingPoint>), SolveError> {
    let bounds = compute_bounds(inst, prev, active);
    let mut best: Option<(f64, PackingPoint)> = None;
    let mut failure = None;
    let mut decide = |lambda: f64| -> bool {
        if failure.is_some() {
            return false;
        }
        let Ok(sys) = build_packing_system(inst, &bounds, prev, active, lambda) else {
            return false;
        };
        let mut budget = decision_budget(opts, sys.row_count(), sys.width);
        let start = budget;
        stats.decisions += 1;
        let outcome = packing_decision(inst, &sys, opts.epsilon, &mut budget);
        stats.oracle_calls += start - budget;
        match outcome {
            Ok((Decision::Accept { point, .. }, _)) => {
                if best.as_ref().map_or(true, |(b, _)| lambda > *b) {
                    best = Some((lambda, point));
                }
                true
            }
            Ok((Decision::Reject { .. }, _)) => false,
            Err(e) => {
                failure = Some(e);
                false
            }
        }
    };
    if !decide(0.0) {
        return Err(failure.unwrap_or_else(|| SolveError::Internal("already-assigned rates are infeasible".into())));
    }
    let width = opts.delta * bounds.lambda_max.max(1.0);
    let lambda = crate::bisect_max(0.0, bounds.lambda_max, width, &mut decide);
    if let Some(e) = failure {
        return Err(e);
    }
    let point = best.filter(|(b, _)| *b == lambda).map(|(_, p)| p);
    Ok((lambda, point))
}

#[derive(Debug, Clone)]
pub struct FixingResult {
    /// Rates of the sum-maximizing LP solution.
    pub lp_rates: Grid<f64>,
    /// Entries that stay active for the next iteration.
    pub still_active: Grid<bool>,
    /// Increment after repair.
    pub lambda: f64,
    pub repaired: bool,
}

fn time_variable_system(inst: &NetworkInstance) -> RateSystem<f64> {
    build_system::<f64>(inst, Setting::FractionalTimeVar)
}

/// Raises all active rates together as far as the exact region allows,
/// capped at `cap`; fixed rates keep their values.
fn exact_common_increment(
    inst: &NetworkInstance,
    prev: &Grid<f64>,
    active: &Grid<bool>,
    cap: f64,
) -> Result<f64, SolveError> {
    let sys = time_variable_system(inst);
    let mut lp = sys.lp.clone();
    let theta = lp.add_var(0.0, Some(cap));
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            let v = sys.rate_var[(i, t)];
            if active[(i, t)] {
                lp.add_constraint(vec![(v, 1.0), (theta, -1.0)], Cmp::Ge, prev[(i, t)]);
            } else {
                lp.lower[v] = prev[(i, t)];
                lp.upper[v] = Some(prev[(i, t)]);
            }
        }
    }
    lp.set_objective(Sense::Max, vec![(theta, 1.0)]);
    lp.solve()
        .optimal()
        .map(|(_, v)| v.clamp(0.0, cap))
        .ok_or_else(|| SolveError::Internal("assigned rates are infeasible in the exact region".into()))
}

/// Maximizes Σ of active rates with every rate between its current value
/// λ^{k−1} + F λ^k and the top (1+ε)(λ^{k−1} + λ^k) + Δ; active rates
/// ending below the top are fixed. If the accepted increment is not
/// feasible in the exact region (the packing only guarantees Ax ≤ (1+ε)b)
/// it is first lowered to the largest feasible common increment.
pub fn fixing_lp(
    inst: &NetworkInstance,
    prev: &Grid<f64>,
    active: &Grid<bool>,
    lambda: f64,
    eps: f64,
    delta: f64,
) -> Result<FixingResult, SolveError> {
    let sys = time_variable_system(inst);
    let build = |lambda: f64| -> (LinearProgram<f64>, Grid<f64>) {
        let mut lp = sys.lp.clone();
        let mut top = Grid::filled(inst.node_count(), inst.horizon(), 0.0);
        let mut obj = Vec::new();
        for i in inst.sensors() {
            for t in 0..inst.horizon() {
                let v = sys.rate_var[(i, t)];
                if active[(i, t)] {
                    lp.lower[v] = prev[(i, t)] + lambda;
                    top[(i, t)] = (1.0 + eps) * (prev[(i, t)] + lambda) + delta;
                    obj.push((v, 1.0));
                } else {
                    lp.lower[v] = prev[(i, t)];
                    top[(i, t)] = prev[(i, t)];
                }
                lp.upper[v] = Some(top[(i, t)]);
            }
        }
        lp.set_objective(Sense::Max, obj);
        (lp, top)
    };
    let (lp, mut top) = build(lambda);
    let (mut solution, mut lambda, mut repaired) = (lp.solve().optimal(), lambda, false);
    if solution.is_none() {
        lambda = exact_common_increment(inst, prev, active, lambda)?;
        let (lp, t) = build(lambda);
        top = t;
        solution = lp.solve().optimal();
        repaired = true;
    }
    let (x, _) = solution.ok_or_else(|| SolveError::Internal("fixing LP infeasible after repair".into()))?;
    let mut lp_rates = Grid::filled(inst.node_count(), inst.horizon(), 0.0);
    let mut still_active = Grid::filled(inst.node_count(), inst.horizon(), false);
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            let v = x[sys.rate_var[(i, t)]];
            lp_rates[(i, t)] = v;
            still_active[(i, t)] = active[(i, t)] && v >= top[(i, t)] - 0.5 * delta;
        }
    }
    Ok(FixingResult { lp_rates, still_active, lambda, repaired })
}

/// Flows realizing fixed rates in the exact region.
fn realize_flows(inst: &NetworkInstance, rates: &Grid<f64>) -> Result<FlowAssignment, SolveError> {
    let sys = time_variable_system(inst);
    let mut lp = sys.lp.clone();
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            let v = sys.rate_var[(i, t)];
            lp.lower[v] = rates[(i, t)];
            lp.upper[v] = Some(rates[(i, t)]);
        }
    }
    lp.set_objective(Sense::Max, Vec::new());
    let (x, _) = lp.solve().optimal().ok_or_else(|| SolveError::Internal("final rates are infeasible".into()))?;
    let fv = sys.flow_var.expect("fractional system has flow variables");
    let mut flows = FlowAssignment::zeros(inst);
    for e in 0..inst.edge_count() {
        for t in 0..inst.horizon() {
            flows.set(e, t, x[fv[(e, t)]].max(0.0));
        }
    }
    Ok(flows)
}

/// Element-wise ε-approximate max-min fair rates over time-variable
/// fractional routings.
pub fn solve_fractional_fptas(inst: &NetworkInstance, opts: FptasOptions) -> Result<FptasSolution, SolveError> {
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) {
        return Err(SolveError::Internal(format!("ε must lie in (0, 1), got {}", opts.epsilon)));
    }
    let n = inst.node_count();
    let horizon = inst.horizon();
    let mut rates = Grid::filled(n, horizon, 0.0);
    let mut active = Grid::filled(n, horizon, false);
    for i in inst.sensors() {
        for t in 0..horizon {
            active[(i, t)] = true;
        }
    }
    let budget = inst.sensor_count() * horizon;
    let mut log = Vec::new();
    while active.iter().any(|&a| a) {
        if log.len() >= budget {
            return Err(SolveError::Internal(format!("water-filling exceeded {budget} iterations")));
        }
        let mut stats = SearchStats::default();
        let (accepted, _) = maximize_rates_packing(inst, &rates, &active, &opts, &mut stats)?;
        let fix = fixing_lp(inst, &rates, &active, accepted, opts.epsilon, opts.delta)?;
        let mut still = fix.still_active.clone();
        let mut fixed = count_fixed(&active, &still);
        let forced = fixed == 0;
        if forced {
            // Every rate could still grow; fix the one closest to its current value.
            let mut pick = None;
            let mut least = f64::INFINITY;
            for i in inst.sensors() {
                for t in 0..horizon {
                    if active[(i, t)] {
                        let room = fix.lp_rates[(i, t)] - (rates[(i, t)] + fix.lambda);
                        if room < least {
                            least = room;
                            pick = Some((i, t));
                        }
                    }
                }
            }
            let (i, t) = pick.expect("an active entry exists");
            still[(i, t)] = false;
            fixed = 1;
        }
        for i in inst.sensors() {
            for t in 0..horizon {
                if active[(i, t)] {
                    rates[(i, t)] += fix.lambda;
                }
            }
        }
        active = still;
        log.push(FptasIteration {
            iteration: log.len() + 1,
            accepted,
            increment: fix.lambda,
            fixed,
            repaired: fix.repaired,
            forced,
            decisions: stats.decisions,
            oracle_calls: stats.oracle_calls,
        });
    }
    let flows = realize_flows(inst, &rates)?;
    let rates = RateMatrix(rates);
    let battery = simulate_batteries(inst, &rates, &flows)?;
    Ok(FptasSolution { rates, flows, battery, log })
}

fn count_fixed(before: &Grid<bool>, after: &Grid<bool>) -> usize {
    before.iter().zip(after.iter()).filter(|&(&b, &a)| b && !a).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::check_feasible;

    #[test]
    fn single_node_spreads_energy() {
        let inst = fixtures::single_node(1.0, vec![0.0, 0.0], 1.0, 1.0);
        let sol = solve_fractional_fptas(&inst, FptasOptions { epsilon: 0.1, ..Default::default() }).unwrap();
        for t in 0..2 {
            let r = sol.rates.get(0, t);
            assert!(r >= 0.9 * 0.5 - 1e-9 && r <= 0.5 + 1e-9, "{r}");
        }
    }

    #[test]
    fn fig2_within_epsilon() {
        let inst = fixtures::fig2(1.0, 1.0);
        let sol = solve_fractional_fptas(&inst, FptasOptions { epsilon: 0.05, ..Default::default() }).unwrap();
        assert!(sol.rates.min_rate(&inst) >= 0.95 * 0.5 - 1e-9);
        assert!(check_feasible(&inst, &sol.rates, &sol.flows, 1e-6).unwrap().feasible);
    }
}
