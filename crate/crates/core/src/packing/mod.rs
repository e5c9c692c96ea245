//! Time-variable fractional routing: element-wise ε-approximate max-min
//! fair rates. Each water-filling increment is found by bisection over a
//! fractional packing problem solved with exponential-potential dual
//! updates (Plotkin–Shmoys–Tardos), then rates that cannot keep growing
//! are fixed with an LP.

mod improve;
mod solver;

pub use improve::{
    dual_and_costs, improve_packing, min_cost_oracle, packing_decision, row_costs, row_costs_naive, Decision,
    ImproveOutcome, ImproveState, PackingPoint,
};
pub use solver::{fixing_lp, maximize_rates_packing, solve_fractional_fptas, FixingResult, FptasIteration, FptasOptions, FptasSolution};

use crate::model::{Grid, NetworkInstance, NodeId};

/// Battery window s..=t of one node; s = 0 is the prefix window starting
/// from the initial battery, later windows start from a full battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowKey {
    pub node: NodeId,
    pub start: usize,
    pub end: usize,
}

impl RowKey {
    pub fn covers(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Row order: sensors ascending, then start, then end.
pub fn row_keys(inst: &NetworkInstance) -> Vec<RowKey> {
    let horizon = inst.horizon();
    let mut rows = Vec::with_capacity(inst.sensor_count() * horizon * (horizon + 1) / 2);
    for node in inst.sensors() {
        for start in 0..horizon {
            for end in start..horizon {
                rows.push(RowKey { node, start, end });
            }
        }
    }
    rows
}

pub fn rows_per_node(horizon: usize) -> usize {
    horizon * (horizon + 1) / 2
}

/// Energy budgets left by the already-assigned rates λ^{k−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingBounds {
    pub rows: Vec<RowKey>,
    /// start_s + Σ_{τ=s..t} (e_{i,τ} − c_st λ^{k−1}_{i,τ}) per row.
    pub base: Vec<f64>,
    /// Number of active slots Σ_{τ=s..t} F_{i,τ} per row.
    pub active_slots: Vec<usize>,
    /// Largest increment keeping every row budget nonnegative.
    pub lambda_max: f64,
    pub c_st: f64,
    pub c_rt: f64,
}

impl PackingBounds {
    /// Right-hand side of each row at increment λ (flow units).
    pub fn rhs(&self, lambda: f64) -> Vec<f64> {
        self.base
            .iter()
            .zip(&self.active_slots)
            .map(|(&u, &a)| (u - self.c_st * a as f64 * lambda) / self.c_rt)
            .collect()
    }
}

pub fn compute_bounds(inst: &NetworkInstance, prev: &Grid<f64>, active: &Grid<bool>) -> PackingBounds {
    let rows = row_keys(inst);
    let c_st = inst.c_st();
    let mut base = Vec::with_capacity(rows.len());
    let mut active_slots = Vec::with_capacity(rows.len());
    let mut lambda_max = f64::INFINITY;
    for r in &rows {
        let mut u = inst.window_start(r.node, r.start);
        let mut a = 0;
        for t in r.start..=r.end {
            u += inst.harvest(r.node, t) - c_st * prev[(r.node, t)];
            a += usize::from(active[(r.node, t)]);
        }
        if a > 0 {
            lambda_max = lambda_max.min(u / (c_st * a as f64));
        }
        base.push(u);
        active_slots.push(a);
    }
    PackingBounds { rows, base, active_slots, lambda_max: lambda_max.max(0.0), c_st, c_rt: inst.c_rt() }
}

/// Packing constraints Σ_{τ=s..t} f^Σ_{i,τ} ≤ b_row over the per-slot
/// flow polytope P (conservation with supplies injected after the node's
/// inflow budget, inflow caps, nonnegativity).
#[derive(Debug, Clone)]
pub struct PackingSystem {
    pub rows: Vec<RowKey>,
    pub rhs: Vec<f64>,
    /// Rows kept in the packing objective; rows with a (numerically) zero
    /// budget are enforced through zero inflow caps instead.
    pub live: Vec<bool>,
    /// Inflow cap u_{i,t}: the smallest budget among rows covering slot t.
    pub caps: Grid<f64>,
    pub supply: Grid<f64>,
    pub width: f64,
    pub lambda: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeBudget {
    pub row: RowKey,
    pub rhs: f64,
}

pub fn build_packing_system(
    inst: &NetworkInstance,
    bounds: &PackingBounds,
    prev: &Grid<f64>,
    active: &Grid<bool>,
    lambda: f64,
) -> Result<PackingSystem, NegativeBudget> {
    let horizon = inst.horizon();
    let rhs = bounds.rhs(lambda);
    let zero = 1e-12 * inst.energy_scale() / inst.c_rt();
    let mut caps = Grid::filled(inst.node_count(), horizon, 0.0);
    for i in inst.sensors() {
        for t in 0..horizon {
            caps[(i, t)] = f64::INFINITY;
        }
    }
    let mut live = Vec::with_capacity(rhs.len());
    for (r, &b) in bounds.rows.iter().zip(&rhs) {
        if b < -zero {
            return Err(NegativeBudget { row: *r, rhs: b });
        }
        let b = b.max(0.0);
        live.push(b > zero);
        for t in r.start..=r.end {
            let c = &mut caps[(r.node, t)];
            *c = c.min(if b > zero { b } else { 0.0 });
        }
    }
    let mut supply = Grid::filled(inst.node_count(), horizon, 0.0);
    for i in inst.sensors() {
        for t in 0..horizon {
            supply[(i, t)] = prev[(i, t)] + if active[(i, t)] { lambda } else { 0.0 };
        }
    }
    let mut width: f64 = 0.0;
    for (idx, r) in bounds.rows.iter().enumerate() {
        if live[idx] {
            let load: f64 = (r.start..=r.end).map(|t| caps[(r.node, t)]).sum();
            width = width.max(load / rhs[idx]);
        }
    }
    Ok(PackingSystem { rows: bounds.rows.clone(), rhs, live, caps, supply, width: width.max(1.0), lambda, horizon })
}

impl PackingSystem {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Coefficient of f^Σ_{i,t} in a row (always 0 or 1).
    pub fn entry(&self, row: usize, node: NodeId, t: usize) -> u8 {
        let r = self.rows[row];
        u8::from(r.node == node && r.covers(t))
    }

    /// Row activities (A x) from per-slot inflows, via prefix sums.
    pub fn activities(&self, inflow: &Grid<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows.len());
        let mut prefix = vec![0.0; self.horizon + 1];
        let mut node = usize::MAX;
        for r in &self.rows {
            if r.node != node {
                node = r.node;
                for t in 0..self.horizon {
                    prefix[t + 1] = prefix[t] + inflow[(node, t)];
                }
            }
            out.push(prefix[r.end + 1] - prefix[r.start]);
        }
        out
    }

    /// max over live rows of (A x)_r / b_r.
    pub fn load(&self, inflow: &Grid<f64>) -> f64 {
        self.activities(inflow)
            .iter()
            .zip(&self.rhs)
            .zip(&self.live)
            .filter(|(_, &l)| l)
            .map(|((&a, &b), _)| a / b)
            .fold(0.0, f64::max)
    }
}
