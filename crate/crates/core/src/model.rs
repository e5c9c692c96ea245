//! Network instances, rate/flow matrices, battery simulation and feasibility checks.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::ModelError;

pub type NodeId = usize;

/// Dense row-major matrix used for every per-node/per-slot quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Grid { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ModelError::Dimension("ragged rows".into()));
        }
        let n = rows.len();
        Ok(Grid { rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[T]>::to_vec).collect()
    }
}

impl<T> Grid<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.data.iter_mut()
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCosts {
    pub sense: f64,
    pub tx: f64,
    pub rx: f64,
}

impl EnergyCosts {
    /// Energy to sense and transmit one unit of own data.
    pub fn c_st(&self) -> f64 {
        self.sense + self.tx
    }

    /// Energy to receive and forward one unit of relayed data.
    pub fn c_rt(&self) -> f64 {
        self.rx + self.tx
    }
}

/// A sensor network over a finite horizon. Per-node vectors are indexed by
/// node id and include an (ignored) entry for the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    nodes: usize,
    sink: NodeId,
    edges: Vec<(NodeId, NodeId)>,
    horizon: usize,
    battery_capacity: f64,
    initial_battery: Vec<f64>,
    harvest: Grid<f64>,
    costs: EnergyCosts,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl NetworkInstance {
    /// Builds an instance, checking only shapes and id ranges. Semantic
    /// requirements are reported by [`validate_instance`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nodes: usize,
        sink: NodeId,
        edges: Vec<(NodeId, NodeId)>,
        horizon: usize,
        battery_capacity: f64,
        initial_battery: Vec<f64>,
        harvest: Vec<Vec<f64>>,
        costs: EnergyCosts,
    ) -> Result<Self, ModelError> {
        if nodes < 2 {
            return Err(ModelError::Dimension("need at least one node besides the sink".into()));
        }
        if sink >= nodes {
            return Err(ModelError::Dimension(format!("sink {sink} out of range")));
        }
        if horizon == 0 {
            return Err(ModelError::Dimension("horizon must be positive".into()));
        }
        if initial_battery.len() != nodes {
            return Err(ModelError::Dimension(format!(
                "initial_battery has {} entries, expected {nodes}",
                initial_battery.len()
            )));
        }
        if harvest.len() != nodes || harvest.iter().any(|r| r.len() != horizon) {
            return Err(ModelError::Dimension(format!("harvest must be {nodes}x{horizon}")));
        }
        let mut out_edges = vec![Vec::new(); nodes];
        let mut in_edges = vec![Vec::new(); nodes];
        for (e, &(i, j)) in edges.iter().enumerate() {
            if i >= nodes || j >= nodes {
                return Err(ModelError::Dimension(format!("edge ({i},{j}) out of range")));
            }
            out_edges[i].push(e);
            in_edges[j].push(e);
        }
        let harvest = Grid::from_rows(harvest)?;
        Ok(NetworkInstance {
            nodes,
            sink,
            edges,
            horizon,
            battery_capacity,
            initial_battery,
            harvest,
            costs,
            out_edges,
            in_edges,
        })
    }

    /// Total number of vertices, sink included.
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    /// Non-sink node ids in increasing order.
    pub fn sensors(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes).filter(move |&i| i != self.sink)
    }

    pub fn sensor_count(&self) -> usize {
        self.nodes - 1
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges(&self, i: NodeId) -> &[usize] {
        &self.out_edges[i]
    }

    pub fn in_edges(&self, i: NodeId) -> &[usize] {
        &self.in_edges[i]
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.out_edges[i].iter().any(|&e| self.edges[e].1 == j)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn battery_capacity(&self) -> f64 {
        self.battery_capacity
    }

    pub fn initial_battery(&self, i: NodeId) -> f64 {
        self.initial_battery[i]
    }

    pub fn initial_batteries(&self) -> &[f64] {
        &self.initial_battery
    }

    pub fn harvest(&self, i: NodeId, t: usize) -> f64 {
        self.harvest[(i, t)]
    }

    pub fn harvest_grid(&self) -> &Grid<f64> {
        &self.harvest
    }

    pub fn costs(&self) -> EnergyCosts {
        self.costs
    }

    pub fn c_st(&self) -> f64 {
        self.costs.c_st()
    }

    pub fn c_rt(&self) -> f64 {
        self.costs.c_rt()
    }

    /// Magnitude used for relative tolerances: max(B, largest harvest, largest initial level, 1e-300).
    pub fn energy_scale(&self) -> f64 {
        let h = self.harvest.iter().copied().fold(0.0, f64::max);
        let b0 = self.initial_battery.iter().copied().fold(0.0, f64::max);
        self.battery_capacity.max(h).max(b0).max(1e-300)
    }

    /// Energy available at the start of window `[s, ..]`: b_{i,1} for the
    /// first slot, B afterwards (the battery may have been full).
    pub fn window_start(&self, i: NodeId, s: usize) -> f64 {
        if s == 0 {
            self.initial_battery[i]
        } else {
            self.battery_capacity
        }
    }

    /// Nodes that can reach the sink along directed edges.
    pub fn reaches_sink(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes];
        seen[self.sink] = true;
        let mut queue = VecDeque::from([self.sink]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.in_edges[v] {
                let u = self.edges[e].0;
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Unreachable(NodeId),
    NegativeEnergy(String),
    NonFinite(String),
    NonPositiveCst,
    NonPositiveCrt,
    InitialAboveCapacity(NodeId),
    SelfLoop(NodeId),
    EdgeFromSink(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unreachable(i) => write!(f, "node {i} is unreachable: no path to the sink"),
            Violation::NegativeEnergy(what) => write!(f, "negative energy in {what}"),
            Violation::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Violation::NonPositiveCst => write!(f, "c_st must be positive"),
            Violation::NonPositiveCrt => write!(f, "c_rt must be positive"),
            Violation::InitialAboveCapacity(i) => {
                write!(f, "initial battery of node {i} exceeds capacity")
            }
            Violation::SelfLoop(i) => write!(f, "self loop at node {i}"),
            Violation::EdgeFromSink(e) => write!(f, "edge {e} leaves the sink"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_instance(inst: &NetworkInstance) -> ValidationReport {
    let mut v = Vec::new();
    let check = |x: f64, what: String, v: &mut Vec<Violation>| {
        if !x.is_finite() {
            v.push(Violation::NonFinite(what));
        } else if x < 0.0 {
            v.push(Violation::NegativeEnergy(what));
        }
    };
    check(inst.battery_capacity, "battery capacity".into(), &mut v);
    for i in inst.sensors() {
        check(inst.initial_battery[i], format!("initial battery of node {i}"), &mut v);
        for t in 0..inst.horizon {
            check(inst.harvest(i, t), format!("harvest of node {i} slot {t}"), &mut v);
        }
    }
    let c = inst.costs;
    for (x, name) in [(c.sense, "c_s"), (c.tx, "c_tx"), (c.rx, "c_rx")] {
        check(x, name.into(), &mut v);
    }
    if !(c.c_st() > 0.0) {
        v.push(Violation::NonPositiveCst);
    }
    if !(c.c_rt() > 0.0) {
        v.push(Violation::NonPositiveCrt);
    }
    for i in inst.sensors() {
        if inst.initial_battery[i] > inst.battery_capacity {
            v.push(Violation::InitialAboveCapacity(i));
        }
    }
    for (e, &(i, j)) in inst.edges.iter().enumerate() {
        if i == j {
            v.push(Violation::SelfLoop(i));
        }
        if i == inst.sink {
            v.push(Violation::EdgeFromSink(e));
        }
    }
    let reach = inst.reaches_sink();
    for i in inst.sensors() {
        if !reach[i] {
            v.push(Violation::Unreachable(i));
        }
    }
    ValidationReport { violations: v }
}

/// Sensing rates λ_{i,t}; the sink row is kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix(pub Grid<f64>);

impl RateMatrix {
    pub fn zeros(inst: &NetworkInstance) -> Self {
        RateMatrix(Grid::filled(inst.node_count(), inst.horizon(), 0.0))
    }

    pub fn get(&self, i: NodeId, t: usize) -> f64 {
        self.0[(i, t)]
    }

    pub fn set(&mut self, i: NodeId, t: usize, v: f64) {
        self.0[(i, t)] = v;
    }

    /// All sensor rates sorted nondecreasingly.
    pub fn sorted(&self, inst: &NetworkInstance) -> Vec<f64> {
        let mut v: Vec<f64> = inst
            .sensors()
            .flat_map(|i| self.0.row(i).iter().copied())
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_rate(&self, inst: &NetworkInstance) -> f64 {
        self.sorted(inst).first().copied().unwrap_or(0.0)
    }
}

/// Edge flows f_{e,t}.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment(pub Grid<f64>);

impl FlowAssignment {
    pub fn zeros(inst: &NetworkInstance) -> Self {
        FlowAssignment(Grid::filled(inst.edge_count(), inst.horizon(), 0.0))
    }

    pub fn get(&self, e: usize, t: usize) -> f64 {
        self.0[(e, t)]
    }

    pub fn set(&mut self, e: usize, t: usize, v: f64) {
        self.0[(e, t)] = v;
    }

    /// Total inflow f^Σ_{i,t}.
    pub fn inflow(&self, inst: &NetworkInstance, i: NodeId, t: usize) -> f64 {
        inst.in_edges(i).iter().map(|&e| self.0[(e, t)]).sum()
    }

    pub fn outflow(&self, inst: &NetworkInstance, i: NodeId, t: usize) -> f64 {
        inst.out_edges(i).iter().map(|&e| self.0[(e, t)]).sum()
    }
}

/// Battery levels b_{i,t} for t = 1..T+1 (column 0 is the initial level).
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryTrace(pub Grid<f64>);

impl BatteryTrace {
    pub fn get(&self, i: NodeId, t: usize) -> f64 {
        self.0[(i, t)]
    }

    pub fn min_level(&self, inst: &NetworkInstance) -> f64 {
        inst.sensors()
            .flat_map(|i| self.0.row(i).iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_dims(inst: &NetworkInstance, rates: &RateMatrix, flows: &FlowAssignment) -> Result<(), ModelError> {
    if rates.0.rows() != inst.node_count() || rates.0.cols() != inst.horizon() {
        return Err(ModelError::Dimension(format!(
            "rates are {}x{}, expected {}x{}",
            rates.0.rows(),
            rates.0.cols(),
            inst.node_count(),
            inst.horizon()
        )));
    }
    if flows.0.rows() != inst.edge_count() || flows.0.cols() != inst.horizon() {
        return Err(ModelError::Dimension(format!(
            "flows are {}x{}, expected {}x{}",
            flows.0.rows(),
            flows.0.cols(),
            inst.edge_count(),
            inst.horizon()
        )));
    }
    Ok(())
}

/// Per-slot energy spent by each node: c_rt f^Σ + c_st λ.
pub fn consumption(inst: &NetworkInstance, rates: &RateMatrix, flows: &FlowAssignment) -> Grid<f64> {
    let mut g = Grid::filled(inst.node_count(), inst.horizon(), 0.0);
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            g[(i, t)] = inst.c_rt() * flows.inflow(inst, i, t) + inst.c_st() * rates.get(i, t);
        }
    }
    g
}

/// Runs the battery recursion b_{t+1} = min(B, b_t + e_t - consumption_t) for
/// every sensor with an explicit consumption matrix.
pub fn simulate_consumption(inst: &NetworkInstance, used: &Grid<f64>) -> BatteryTrace {
    let t_max = inst.horizon();
    let mut g = Grid::filled(inst.node_count(), t_max + 1, 0.0);
    for i in inst.sensors() {
        let mut b = inst.initial_battery(i);
        g[(i, 0)] = b;
        for t in 0..t_max {
            b = inst.battery_capacity().min(b + inst.harvest(i, t) - used[(i, t)]);
            g[(i, t + 1)] = b;
        }
    }
    BatteryTrace(g)
}

pub fn simulate_batteries(
    inst: &NetworkInstance,
    rates: &RateMatrix,
    flows: &FlowAssignment,
) -> Result<BatteryTrace, ModelError> {
    check_dims(inst, rates, flows)?;
    Ok(simulate_consumption(inst, &consumption(inst, rates, flows)))
}

/// Smallest slack over the linearized battery constraints of node `i`:
/// for every window s..=t, start_s + Σ(e - used) must stay nonnegative.
/// With the cap at B, b_{i,t+1} = min(B, min_s slack(s, t)) holds exactly.
pub fn window_slacks(inst: &NetworkInstance, used: &Grid<f64>, i: NodeId) -> Grid<f64> {
    let t_max = inst.horizon();
    let mut g = Grid::filled(t_max, t_max, f64::INFINITY);
    for s in 0..t_max {
        let mut acc = inst.window_start(i, s);
        for t in s..t_max {
            acc += inst.harvest(i, t) - used[(i, t)];
            g[(s, t)] = acc;
        }
    }
    g
}

/// Largest violation of the linearized battery constraints (0 when none is violated).
pub fn window_violation(inst: &NetworkInstance, used: &Grid<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in inst.sensors() {
        let w = window_slacks(inst, used, i);
        for s in 0..inst.horizon() {
            for t in s..inst.horizon() {
                worst = worst.max(-w[(s, t)]);
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// |f^Σ + λ - outflow| per node and slot.
    pub conservation: Grid<f64>,
    pub battery: BatteryTrace,
    pub max_conservation_residual: f64,
    pub min_battery: f64,
    pub min_rate: f64,
    pub min_flow: f64,
}

pub fn check_feasible(
    inst: &NetworkInstance,
    rates: &RateMatrix,
    flows: &FlowAssignment,
    tol: f64,
) -> Result<FeasibilityReport, ModelError> {
    let battery = simulate_batteries(inst, rates, flows)?;
    let mut conservation = Grid::filled(inst.node_count(), inst.horizon(), 0.0);
    let mut worst: f64 = 0.0;
    let mut min_rate = f64::INFINITY;
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            let r = (flows.inflow(inst, i, t) + rates.get(i, t) - flows.outflow(inst, i, t)).abs();
            conservation[(i, t)] = r;
            worst = worst.max(r);
            min_rate = min_rate.min(rates.get(i, t));
        }
    }
    let min_flow = flows.0.iter().copied().fold(f64::INFINITY, f64::min);
    let min_battery = battery.min_level(inst);
    let feasible = worst <= tol && min_battery >= -tol && min_rate >= -tol && min_flow >= -tol;
    Ok(FeasibilityReport {
        feasible,
        conservation,
        battery,
        max_conservation_residual: worst,
        min_battery,
        min_rate,
        min_flow: if min_flow.is_finite() { min_flow } else { 0.0 },
    })
}

/// Per-node, per-slot sink paths for unsplittable routing.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingPaths {
    time_invariable: bool,
    /// `paths[i][t]`; empty for the sink.
    paths: Vec<Vec<Vec<NodeId>>>,
}

impl RoutingPaths {
    /// One path per node, shared by every slot.
    pub fn invariable(inst: &NetworkInstance, per_node: Vec<Vec<NodeId>>) -> Result<Self, ModelError> {
        if per_node.len() != inst.node_count() {
            return Err(ModelError::Dimension("one path per node required".into()));
        }
        let paths = per_node
            .into_iter()
            .map(|p| vec![p; inst.horizon()])
            .collect();
        let rp = RoutingPaths { time_invariable: true, paths };
        rp.validate(inst)?;
        Ok(rp)
    }

    pub fn variable(inst: &NetworkInstance, paths: Vec<Vec<Vec<NodeId>>>) -> Result<Self, ModelError> {
        if paths.len() != inst.node_count() || paths.iter().any(|p| p.len() != inst.horizon()) {
            return Err(ModelError::Dimension("paths must be given per node per slot".into()));
        }
        let time_invariable = paths.iter().all(|p| p.windows(2).all(|w| w[0] == w[1]));
        let rp = RoutingPaths { time_invariable, paths };
        rp.validate(inst)?;
        Ok(rp)
    }

    /// Builds time-invariable paths from a parent function (routing tree).
    pub fn from_parents(inst: &NetworkInstance, parent: &[NodeId]) -> Result<Self, ModelError> {
        let mut per_node = vec![Vec::new(); inst.node_count()];
        for i in inst.sensors() {
            let mut p = vec![i];
            let mut v = i;
            while v != inst.sink() {
                v = parent[v];
                if p.contains(&v) {
                    return Err(ModelError::InvalidPath(format!("parent cycle through node {v}")));
                }
                p.push(v);
            }
            per_node[i] = p;
        }
        Self::invariable(inst, per_node)
    }

    pub fn is_time_invariable(&self) -> bool {
        self.time_invariable
    }

    pub fn path(&self, i: NodeId, t: usize) -> &[NodeId] {
        &self.paths[i][t]
    }

    pub fn all(&self) -> &[Vec<Vec<NodeId>>] {
        &self.paths
    }

    fn validate(&self, inst: &NetworkInstance) -> Result<(), ModelError> {
        for i in inst.sensors() {
            for t in 0..inst.horizon() {
                let p = &self.paths[i][t];
                let bad = |msg: &str| ModelError::InvalidPath(format!("node {i} slot {t}: {msg}"));
                if p.first() != Some(&i) {
                    return Err(bad("path must start at the node"));
                }
                if p.last() != Some(&inst.sink()) {
                    return Err(bad("path must end at the sink"));
                }
                for w in p.windows(2) {
                    if w[0] >= inst.node_count() || w[1] >= inst.node_count() || !inst.has_edge(w[0], w[1]) {
                        return Err(bad("path uses a missing edge"));
                    }
                }
                let mut seen = p.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != p.len() {
                    return Err(bad("path is not simple"));
                }
            }
        }
        Ok(())
    }

    /// Flows induced by routing each node's rate along its path.
    pub fn induced_flows(&self, inst: &NetworkInstance, rates: &RateMatrix) -> FlowAssignment {
        let mut f = FlowAssignment::zeros(inst);
        let mut edge_of = std::collections::HashMap::new();
        for (e, &(a, b)) in inst.edges().iter().enumerate() {
            edge_of.entry((a, b)).or_insert(e);
        }
        for i in inst.sensors() {
            for t in 0..inst.horizon() {
                for w in self.paths[i][t].windows(2) {
                    let e = edge_of[&(w[0], w[1])];
                    f.0[(e, t)] += rates.get(i, t);
                }
            }
        }
        f
    }
}

/// D_{i,t}: number of active j ≠ i whose slot-t path passes through i.
pub fn descendant_counts(inst: &NetworkInstance, paths: &RoutingPaths, mask: &Grid<bool>) -> Grid<usize> {
    let mut d = Grid::filled(inst.node_count(), inst.horizon(), 0);
    for j in inst.sensors() {
        for t in 0..inst.horizon() {
            if mask[(j, t)] {
                for &i in &paths.path(j, t)[1..] {
                    if i != inst.sink() {
                        d[(i, t)] += 1;
                    }
                }
            }
        }
    }
    d
}
