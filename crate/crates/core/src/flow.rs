//! Node-capacitated flows: node splitting, augmenting-path max-flow,
//! successive-shortest-path min-cost flow, residual reachability and
//! unsplittable path decomposition.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, Neg, Sub};

use crate::error::SolveError;
use crate::model::NodeId;

pub trait FlowNum: Copy + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> {
    const ZERO: Self;
    fn min2(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl FlowNum for f64 {
    const ZERO: f64 = 0.0;
}

impl FlowNum for i64 {
    const ZERO: i64 = 0;
}

/// Residual network with paired arcs: arc `e ^ 1` is the reverse of arc `e`.
#[derive(Debug, Clone)]
pub struct FlowNetwork<C> {
    head: Vec<usize>,
    cap: Vec<C>,
    flow: Vec<C>,
    cost: Vec<f64>,
    adj: Vec<Vec<usize>>,
    eps: C,
}

impl<C: FlowNum> FlowNetwork<C> {
    /// `eps` is the residual threshold: an arc is usable iff its slack exceeds it.
    pub fn new(nodes: usize, eps: C) -> Self {
        FlowNetwork { head: Vec::new(), cap: Vec::new(), flow: Vec::new(), cost: Vec::new(), adj: vec![Vec::new(); nodes], eps }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Number of forward arcs.
    pub fn edge_count(&self) -> usize {
        self.head.len() / 2
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cap: C, cost: f64) -> usize {
        let e = self.head.len();
        self.head.extend([v, u]);
        self.cap.extend([cap, C::ZERO]);
        self.flow.extend([C::ZERO, C::ZERO]);
        self.cost.extend([cost, -cost]);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
        e
    }

    pub fn head(&self, e: usize) -> usize {
        self.head[e]
    }

    pub fn tail(&self, e: usize) -> usize {
        self.head[e ^ 1]
    }

    pub fn capacity(&self, e: usize) -> C {
        self.cap[e]
    }

    pub fn flow(&self, e: usize) -> C {
        self.flow[e]
    }

    pub fn residual(&self, e: usize) -> C {
        self.cap[e] - self.flow[e]
    }

    pub fn arcs(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    fn usable(&self, e: usize) -> bool {
        self.residual(e) > self.eps
    }

    fn push(&mut self, e: usize, amount: C) {
        self.flow[e] = self.flow[e] + amount;
        self.flow[e ^ 1] = self.flow[e ^ 1] - amount;
    }

    fn bfs_path(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut pred = vec![usize::MAX; self.node_count()];
        let mut seen = vec![false; self.node_count()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.head[e];
                if !seen[v] && self.usable(e) {
                    seen[v] = true;
                    pred[v] = e;
                    if v == t {
                        let mut path = Vec::new();
                        let mut x = t;
                        while x != s {
                            path.push(pred[x]);
                            x = self.tail(pred[x]);
                        }
                        path.reverse();
                        return Some(path);
                    }
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Shortest-augmenting-path (Edmonds–Karp) max-flow from `s` to `t`,
    /// added on top of the current flow. Returns the amount added.
    pub fn max_flow(&mut self, s: usize, t: usize) -> C {
        let mut total = C::ZERO;
        while let Some(path) = self.bfs_path(s, t) {
            let mut amount = self.residual(path[0]);
            for &e in &path[1..] {
                amount = C::min2(amount, self.residual(e));
            }
            for &e in &path {
                self.push(e, amount);
            }
            total = total + amount;
        }
        total
    }

    /// Nodes with a residual path to `t`, never passing through `excluded`.
    pub fn reaching(&self, t: usize, excluded: Option<usize>) -> Vec<bool> {
        self.reaching_tol(t, excluded, self.eps)
    }

    /// As [`reaching`](Self::reaching) with arcs usable iff slack exceeds `tol`.
    pub fn reaching_tol(&self, t: usize, excluded: Option<usize>, tol: C) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                // arc e ^ 1 runs head[e] -> v
                let u = self.head[e];
                if !seen[u] && Some(u) != excluded && self.residual(e ^ 1) > tol {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    /// Whether `t` is reachable from `s` along arcs with slack above `tol`, avoiding `excluded`.
    pub fn residual_path_exists(&self, s: usize, t: usize, excluded: Option<usize>, tol: C) -> bool {
        if s == t {
            return true;
        }
        let mut seen = vec![false; self.node_count()];
        seen[s] = true;
        if let Some(b) = excluded {
            seen[b] = true;
        }
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.head[e];
                if !seen[v] && self.residual(e) > tol {
                    if v == t {
                        return true;
                    }
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        false
    }
}

impl FlowNetwork<f64> {
    /// Successive shortest paths with Dijkstra on reduced costs. Pushes up to
    /// `amount` units from `s` to `t`; returns the amount actually pushed.
    /// All arc costs must be nonnegative on entry (zero initial flow).
    pub fn min_cost_flow(&mut self, s: usize, t: usize, amount: f64) -> f64 {
        let n = self.node_count();
        let mut potential = vec![0.0; n];
        let mut sent = 0.0;
        while amount - sent > self.eps {
            let mut dist = vec![f64::INFINITY; n];
            let mut pred = vec![usize::MAX; n];
            let mut done = vec![false; n];
            dist[s] = 0.0;
            loop {
                let mut u = usize::MAX;
                for v in 0..n {
                    if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                for &e in &self.adj[u] {
                    if !self.usable(e) {
                        continue;
                    }
                    let v = self.head[e];
                    let reduced = (self.cost[e] + potential[u] - potential[v]).max(0.0);
                    if dist[u] + reduced < dist[v] {
                        dist[v] = dist[u] + reduced;
                        pred[v] = e;
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            let far = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
            for v in 0..n {
                potential[v] += if dist[v].is_finite() { dist[v] } else { far };
            }
            let mut push = amount - sent;
            let mut v = t;
            while v != s {
                let e = pred[v];
                push = push.min(self.residual(e));
                v = self.tail(e);
            }
            let mut v = t;
            while v != s {
                let e = pred[v];
                self.push(e, push);
                v = self.tail(e);
            }
            sent += push;
        }
        sent
    }

    pub fn total_cost(&self) -> f64 {
        (0..self.head.len()).step_by(2).map(|e| self.cost[e] * self.flow[e]).sum()
    }

    /// Bellman–Ford search for a residual cycle of cost below `-tol`
    /// (the optimality certificate of a min-cost flow is its absence).
    pub fn has_negative_cycle(&self, tol: f64) -> bool {
        let n = self.node_count();
        let mut dist = vec![0.0; n];
        for round in 0..=n {
            let mut changed = false;
            for e in 0..self.head.len() {
                if !self.usable(e) {
                    continue;
                }
                let (u, v) = (self.tail(e), self.head[e]);
                if dist[u] + self.cost[e] < dist[v] - tol {
                    dist[v] = dist[u] + self.cost[e];
                    changed = true;
                }
            }
            if !changed {
                return false;
            }
            if round == n {
                return true;
            }
        }
        false
    }
}

/// Flow problem with node capacities, supplies at nodes and one sink.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitatedFlowProblem<C = f64> {
    pub nodes: usize,
    pub sink: NodeId,
    pub edges: Vec<(NodeId, NodeId)>,
    /// Bound on the flow entering each node; `None` is unbounded.
    pub capacity: Vec<Option<C>>,
    pub supply: Vec<C>,
    /// Cost per unit of flow entering each node.
    pub cost: Option<Vec<f64>>,
}

impl<C: FlowNum> CapacitatedFlowProblem<C> {
    pub fn demand(&self) -> C {
        self.supply
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.sink)
            .fold(C::ZERO, |a, (_, &d)| a + d)
    }
}

/// Edge-capacitated graph produced by splitting every non-sink node i into
/// i' (receives inbound edges) and i'' (emits outbound edges and the
/// node's own supply), joined by the capacity arc i' -> i''.
#[derive(Debug, Clone)]
pub struct SplitGraph<C> {
    pub net: FlowNetwork<C>,
    pub source: usize,
    pub sink: usize,
    pub orig_sink: NodeId,
    rank: Vec<usize>,
    /// Capacity arc per original node (`None` for the sink).
    pub cap_arc: Vec<Option<usize>>,
    /// Super-source arc per original node (`None` for the sink).
    pub supply_arc: Vec<Option<usize>>,
    /// Arc per original edge.
    pub edge_arc: Vec<usize>,
}

impl<C: FlowNum> SplitGraph<C> {
    pub fn inn(&self, v: NodeId) -> usize {
        if v == self.orig_sink {
            self.sink
        } else {
            2 * self.rank[v]
        }
    }

    pub fn out(&self, v: NodeId) -> usize {
        if v == self.orig_sink {
            self.sink
        } else {
            2 * self.rank[v] + 1
        }
    }

    /// Original node of a split node (the super source maps to `None`).
    pub fn original(&self, x: usize) -> Option<NodeId> {
        if x == self.source {
            None
        } else if x == self.sink {
            Some(self.orig_sink)
        } else {
            self.rank.iter().position(|&r| r == x / 2).filter(|&v| v != self.orig_sink)
        }
    }
}

pub fn split_nodes<C: FlowNum>(problem: &CapacitatedFlowProblem<C>, eps: C) -> SplitGraph<C> {
    let n = problem.nodes;
    let s = problem.sink;
    let mut rank = vec![usize::MAX; n];
    let mut next = 0;
    for (v, r) in rank.iter_mut().enumerate() {
        if v != s {
            *r = next;
            next += 1;
        }
    }
    let sink = 2 * next;
    let source = sink + 1;
    // Unbounded capacities become total supply plus one unit of headroom
    // (any bound above the total demand is equivalent).
    let mut unbounded = problem.demand();
    for c in problem.capacity.iter().flatten() {
        if *c > C::ZERO {
            unbounded = unbounded + *c;
        }
    }
    let mut g = SplitGraph {
        net: FlowNetwork::new(source + 1, eps),
        source,
        sink,
        orig_sink: s,
        rank,
        cap_arc: vec![None; n],
        supply_arc: vec![None; n],
        edge_arc: Vec::with_capacity(problem.edges.len()),
    };
    for v in 0..n {
        if v == s {
            continue;
        }
        let cap = problem.capacity[v].unwrap_or(unbounded);
        let cost = problem.cost.as_ref().map_or(0.0, |c| c[v]);
        let (a, b) = (g.inn(v), g.out(v));
        g.cap_arc[v] = Some(g.net.add_edge(a, b, cap, cost));
    }
    for &(i, j) in &problem.edges {
        let (a, b) = (g.out(i), g.inn(j));
        g.edge_arc.push(g.net.add_edge(a, b, unbounded, 0.0));
    }
    for v in 0..n {
        if v == s {
            continue;
        }
        let b = g.out(v);
        g.supply_arc[v] = Some(g.net.add_edge(source, b, problem.supply[v], 0.0));
    }
    g
}

#[derive(Debug, Clone)]
pub struct FlowSolution<C = f64> {
    pub graph: SplitGraph<C>,
    pub value: C,
    pub demand: C,
    pub feasible: bool,
    pub cost: f64,
}

impl<C: FlowNum> FlowSolution<C> {
    /// Flow on each original edge.
    pub fn edge_flows(&self) -> Vec<C> {
        self.graph.edge_arc.iter().map(|&e| self.graph.net.flow(e)).collect()
    }

    /// Flow entering node `v` (its capacity arc).
    pub fn throughput(&self, v: NodeId) -> C {
        self.graph.cap_arc[v].map_or(C::ZERO, |e| self.graph.net.flow(e))
    }

    pub fn sink_inflow(&self) -> C {
        self.graph
            .net
            .arcs(self.graph.sink)
            .iter()
            .filter(|&&e| e % 2 == 1)
            .fold(C::ZERO, |a, &e| a + self.graph.net.flow(e ^ 1))
    }

    /// Original nodes i whose i'' reaches the sink through residual arcs,
    /// never through the super source. The sink is always included.
    pub fn residual_reachable(&self) -> Vec<bool> {
        self.residual_reachable_tol(self.graph.net.eps)
    }

    pub fn residual_reachable_tol(&self, tol: C) -> Vec<bool> {
        let g = &self.graph;
        let reach = g.net.reaching_tol(g.sink, Some(g.source), tol);
        (0..g.cap_arc.len()).map(|v| reach[g.out(v)]).collect()
    }
}

pub fn feasible_flow_with<C: FlowNum>(problem: &CapacitatedFlowProblem<C>, eps: C, tol: C) -> FlowSolution<C> {
    let mut graph = split_nodes(problem, eps);
    let value = graph.net.max_flow(graph.source, graph.sink);
    let demand = problem.demand();
    FlowSolution { graph, value, demand, feasible: !(value < demand - tol), cost: 0.0 }
}

/// Max-flow from a super source feeding every i'' with its supply.
/// Feasible iff the flow value reaches the total supply within `tol`.
pub fn feasible_flow(problem: &CapacitatedFlowProblem<f64>, tol: f64) -> FlowSolution<f64> {
    feasible_flow_with(problem, tol, tol)
}

/// Integer variant; exact.
pub fn feasible_flow_int(problem: &CapacitatedFlowProblem<i64>) -> FlowSolution<i64> {
    feasible_flow_with(problem, 0, 0)
}

/// Routes every supply to the sink at minimum total node cost, or reports
/// infeasibility through the `feasible` flag.
pub fn min_cost_flow(problem: &CapacitatedFlowProblem<f64>, tol: f64) -> FlowSolution<f64> {
    let mut graph = split_nodes(problem, tol);
    let demand = problem.demand();
    let value = graph.net.min_cost_flow(graph.source, graph.sink, demand);
    let cost = graph.net.total_cost();
    FlowSolution { graph, value, demand, feasible: value >= demand - tol, cost }
}

/// One sink path per supplied node, each carrying the common supply λ.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDecomposition {
    pub lambda: f64,
    /// `paths[i]` runs from i to the sink; `None` when i has no supply.
    pub paths: Vec<Option<Vec<NodeId>>>,
}

impl PathDecomposition {
    /// Number of paths entering `v` from another node.
    pub fn crossings(&self, v: NodeId) -> usize {
        self.paths
            .iter()
            .flatten()
            .filter(|p| p[1..].contains(&v))
            .count()
    }
}

fn decompose_units<C: FlowNum>(graph: &SplitGraph<C>, mut units: Vec<i64>, lambda: f64) -> Result<PathDecomposition, SolveError> {
    let net = &graph.net;
    let arcs = units.len();
    // cancel cycles among arcs with positive flow
    loop {
        let n = net.node_count();
        let mut state = vec![0u8; n];
        let mut stack_arc: Vec<usize> = Vec::new();
        let mut cycle: Option<Vec<usize>> = None;
        fn dfs<C: FlowNum>(
            net: &FlowNetwork<C>,
            units: &[i64],
            u: usize,
            state: &mut [u8],
            stack: &mut Vec<usize>,
            cycle: &mut Option<Vec<usize>>,
        ) {
            state[u] = 1;
            for &e in net.arcs(u) {
                if cycle.is_some() {
                    return;
                }
                if e % 2 == 1 || units[e / 2] <= 0 {
                    continue;
                }
                let v = net.head(e);
                stack.push(e);
                if state[v] == 1 {
                    let start = stack.iter().position(|&a| net.tail(a) == v).unwrap();
                    *cycle = Some(stack[start..].to_vec());
                    return;
                }
                if state[v] == 0 {
                    dfs(net, units, v, state, stack, cycle);
                }
                if cycle.is_some() {
                    return;
                }
                stack.pop();
            }
            state[u] = 2;
        }
        for u in 0..n {
            if state[u] == 0 && cycle.is_none() {
                dfs(net, &units, u, &mut state, &mut stack_arc, &mut cycle);
                stack_arc.clear();
            }
        }
        match cycle {
            Some(c) => {
                let m = c.iter().map(|&e| units[e / 2]).min().unwrap();
                for e in c {
                    units[e / 2] -= m;
                }
            }
            None => break,
        }
    }
    let mut paths = vec![None; graph.cap_arc.len()];
    for v in 0..graph.cap_arc.len() {
        let Some(sa) = graph.supply_arc[v] else { continue };
        match units[sa / 2] {
            0 => continue,
            1 => {}
            k => return Err(SolveError::NotIntegral(format!("node {v} ships {k} units, expected 1"))),
        }
        units[sa / 2] = 0;
        let mut x = graph.out(v);
        let mut path = vec![v];
        let mut steps = 0;
        while x != graph.sink {
            let e = net
                .arcs(x)
                .iter()
                .copied()
                .find(|&e| e % 2 == 0 && units[e / 2] > 0)
                .ok_or_else(|| SolveError::NotIntegral(format!("flow from node {v} stops before the sink")))?;
            units[e / 2] -= 1;
            x = net.head(e);
            if let Some(w) = graph.original(x) {
                if *path.last().unwrap() != w {
                    path.push(w);
                }
            }
            steps += 1;
            if steps > arcs {
                return Err(SolveError::Internal("path walk did not terminate".into()));
            }
        }
        paths[v] = Some(path);
    }
    Ok(PathDecomposition { lambda, paths })
}

/// Splits a flow with common supply λ into one path per supplied node.
/// Every arc flow must be an integral multiple of λ.
pub fn decompose_unsplittable(sol: &FlowSolution<f64>, lambda: f64) -> Result<PathDecomposition, SolveError> {
    if !(lambda > 0.0) {
        return Err(SolveError::NotIntegral("common supply must be positive".into()));
    }
    let net = &sol.graph.net;
    let mut units = Vec::with_capacity(net.edge_count());
    for a in 0..net.edge_count() {
        let q = net.flow(2 * a) / lambda;
        let r = q.round();
        if (q - r).abs() > 1e-9 * q.abs().max(1.0) {
            return Err(SolveError::NotIntegral(format!("arc {a} carries {q} multiples of the supply")));
        }
        units.push(r as i64);
    }
    decompose_units(&sol.graph, units, lambda)
}

/// Decomposes an integer flow whose supplies are single units.
pub fn decompose_unit_flow(sol: &FlowSolution<i64>, lambda: f64) -> Result<PathDecomposition, SolveError> {
    let net = &sol.graph.net;
    let units = (0..net.edge_count()).map(|a| net.flow(2 * a)).collect();
    decompose_units(&sol.graph, units, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(nodes: usize, sink: usize, edges: Vec<(usize, usize)>, cap: Vec<Option<f64>>, supply: Vec<f64>) -> CapacitatedFlowProblem {
        CapacitatedFlowProblem { nodes, sink, edges, capacity: cap, supply, cost: None }
    }

    #[test]
    fn split_single_node() {
        let p = problem(2, 1, vec![(0, 1)], vec![Some(5.0), None], vec![0.0, 0.0]);
        let g = split_nodes(&p, 1e-12);
        // i', i'', sink and the super source
        assert_eq!(g.net.node_count(), 4);
        let cap = g.cap_arc[0].unwrap();
        assert_eq!(g.net.capacity(cap), 5.0);
        assert_eq!((g.net.tail(cap), g.net.head(cap)), (g.inn(0), g.out(0)));
        assert!(g.cap_arc[1].is_none());
    }

    #[test]
    fn zero_capacity_node_still_ships_own_supply() {
        let p = problem(2, 1, vec![(0, 1)], vec![Some(0.0), None], vec![2.0, 0.0]);
        let sol = feasible_flow(&p, 1e-12);
        assert!(sol.feasible);
        assert_eq!(sol.value, 2.0);
        assert_eq!(sol.throughput(0), 0.0);
    }

    #[test]
    fn split_chain_has_three_internal_arcs() {
        let p = problem(4, 3, vec![(2, 1), (1, 0), (0, 3)], vec![Some(1.0); 4], vec![0.0; 4]);
        let g = split_nodes(&p, 0.0);
        assert_eq!(g.net.node_count(), 8);
        assert_eq!(g.cap_arc.iter().flatten().count(), 3);
    }

    #[test]
    fn zero_supply_is_feasible() {
        let p = problem(3, 2, vec![(1, 0), (0, 2)], vec![Some(1.0), None, None], vec![0.0; 3]);
        let sol = feasible_flow(&p, 1e-12);
        assert!(sol.feasible);
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn fig2_feasible_flow() {
        // a = 0, b = 1, sink = 2; b -> a -> s
        let third = 1.0 / 3.0;
        let p = problem(3, 2, vec![(1, 0), (0, 2)], vec![Some(third), None, None], vec![third, third, 0.0]);
        let sol = feasible_flow(&p, 1e-12);
        assert!(sol.feasible);
        assert!((sol.sink_inflow() - 2.0 / 3.0).abs() < 1e-15);
        let mut q = p.clone();
        q.supply[1] += 0.1;
        assert!(!feasible_flow(&q, 1e-12).feasible);
    }

    #[test]
    fn residual_reachability_on_bottleneck_chain() {
        // c -> b -> a -> s with a's capacity saturated by b's and c's supply
        let p = problem(4, 3, vec![(2, 1), (1, 0), (0, 3)], vec![Some(2.0), None, None, None], vec![0.0, 1.0, 1.0, 0.0]);
        let sol = feasible_flow(&p, 1e-12);
        assert!(sol.feasible);
        let r = sol.residual_reachable();
        assert_eq!(r, vec![true, false, false, true]);
        let zero = problem(4, 3, vec![(2, 1), (1, 0), (0, 3)], vec![Some(2.0), None, None, None], vec![0.0; 4]);
        assert!(feasible_flow(&zero, 1e-12).residual_reachable().iter().all(|&x| x));
    }

    fn two_routes(cheap_cap: f64) -> CapacitatedFlowProblem {
        // x -> {p, q} -> s, costs p = 1, q = 5
        let (x, pn, qn, s) = (0, 1, 2, 3);
        CapacitatedFlowProblem {
            nodes: 4,
            sink: s,
            edges: vec![(x, pn), (x, qn), (pn, s), (qn, s)],
            capacity: vec![None, Some(cheap_cap), None, None],
            supply: vec![1.0, 0.0, 0.0, 0.0],
            cost: Some(vec![0.0, 1.0, 5.0, 0.0]),
        }
    }

    #[test]
    fn cheaper_route_wins() {
        let sol = min_cost_flow(&two_routes(10.0), 1e-12);
        assert!(sol.feasible);
        assert_eq!(sol.cost, 1.0);
        assert!(!sol.graph.net.has_negative_cycle(1e-12));
    }

    #[test]
    fn capped_cheap_route_splits() {
        let sol = min_cost_flow(&two_routes(0.5), 1e-12);
        assert!(sol.feasible);
        assert!((sol.cost - 3.0).abs() < 1e-12);
        assert!((sol.throughput(1) - 0.5).abs() < 1e-12);
        // brute force over the split fraction
        let best = (0..=1000)
            .map(|k| k as f64 / 1000.0 * 0.5)
            .map(|x| x * 1.0 + (1.0 - x) * 5.0)
            .fold(f64::INFINITY, f64::min);
        assert!((sol.cost - best).abs() < 1e-12);
    }

    #[test]
    fn zero_supply_costs_nothing() {
        let mut p = two_routes(1.0);
        p.supply[0] = 0.0;
        let sol = min_cost_flow(&p, 1e-12);
        assert!(sol.feasible);
        assert_eq!(sol.cost, 0.0);
    }

    #[test]
    fn single_path_decomposition() {
        let p = problem(2, 1, vec![(0, 1)], vec![Some(0.0), None], vec![0.5, 0.0]);
        let sol = feasible_flow(&p, 1e-12);
        let d = decompose_unsplittable(&sol, 0.5).unwrap();
        assert_eq!(d.paths[0], Some(vec![0, 1]));
    }

    #[test]
    fn disjoint_decomposition() {
        // x -> p -> s, y -> q -> s, plus cross edges; p and q can take one unit each
        let (x, y, pn, qn, s) = (0, 1, 2, 3, 4);
        let p = CapacitatedFlowProblem {
            nodes: 5,
            sink: s,
            edges: vec![(x, pn), (x, qn), (y, pn), (y, qn), (pn, s), (qn, s)],
            capacity: vec![Some(0), Some(0), Some(1), Some(1), None],
            supply: vec![1, 1, 0, 0, 0],
            cost: None,
        };
        let sol = feasible_flow_int(&p);
        assert!(sol.feasible);
        let d = decompose_unit_flow(&sol, 0.25).unwrap();
        let (px, py) = (d.paths[x].clone().unwrap(), d.paths[y].clone().unwrap());
        assert_ne!(px[1], py[1]);
        assert_eq!(d.crossings(pn), 1);
        assert_eq!(d.crossings(qn), 1);
    }

    #[test]
    fn non_integral_flow_rejected() {
        let p = problem(2, 1, vec![(0, 1)], vec![None, None], vec![0.3, 0.0]);
        let sol = feasible_flow(&p, 1e-12);
        assert!(matches!(decompose_unsplittable(&sol, 0.5), Err(SolveError::NotIntegral(_))));
    }
}
