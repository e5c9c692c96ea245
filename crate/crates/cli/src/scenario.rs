//! JSON scenario format and the instance generators.

use std::path::Path;

use fairharvest::{fixtures, validate_instance, EnergyCosts, NetworkInstance, RoutingPaths};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub nodes: usize,
    pub sink: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "B")]
    pub battery_capacity: f64,
    pub initial_battery: Vec<f64>,
    /// One row per node (sink included), one entry per slot.
    pub harvest: Vec<Vec<f64>>,
    pub c_s: f64,
    pub c_tx: f64,
    pub c_rx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<PathSet>,
}

/// Sink paths per node per slot. A time-invariable set may list a single
/// path per node; the sink's entry may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSet {
    pub time_invariable: bool,
    pub paths: Vec<Vec<Vec<usize>>>,
}

fn shape(field: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{field}: {msg}"))
}

impl Scenario {
    pub fn from_instance(inst: &NetworkInstance, paths: Option<&RoutingPaths>) -> Self {
        let costs = inst.costs();
        Scenario {
            nodes: inst.node_count(),
            sink: inst.sink(),
            edges: inst.edges().iter().map(|&(i, j)| [i, j]).collect(),
            horizon: inst.horizon(),
            battery_capacity: inst.battery_capacity(),
            initial_battery: inst.initial_batteries().to_vec(),
            harvest: inst.harvest_grid().to_rows(),
            c_s: costs.sense,
            c_tx: costs.tx,
            c_rx: costs.rx,
            paths: paths.map(PathSet::from_paths),
        }
    }

    /// Builds the instance, naming the offending field on shape errors.
    pub fn instance(&self) -> Result<NetworkInstance, Failure> {
        if self.sink >= self.nodes {
            return Err(shape("sink", format!("{} is not a node id below {}", self.sink, self.nodes)));
        }
        if self.initial_battery.len() != self.nodes {
            return Err(shape(
                "initial_battery",
                format!("has {} entries, expected {}", self.initial_battery.len(), self.nodes),
            ));
        }
        if self.harvest.len() != self.nodes {
            return Err(shape("harvest", format!("has {} rows, expected {}", self.harvest.len(), self.nodes)));
        }
        if let Some((i, row)) = self.harvest.iter().enumerate().find(|(_, r)| r.len() != self.horizon) {
            return Err(shape("harvest", format!("row {i} has {} slots, expected T = {}", row.len(), self.horizon)));
        }
        if let Some((e, edge)) = self.edges.iter().enumerate().find(|(_, e)| e.iter().any(|&v| v >= self.nodes)) {
            return Err(shape(&format!("edges[{e}]"), format!("{edge:?} names a node outside 0..{}", self.nodes)));
        }
        let costs = EnergyCosts { sense: self.c_s, tx: self.c_tx, rx: self.c_rx };
        let edges = self.edges.iter().map(|e| (e[0], e[1])).collect();
        NetworkInstance::new(
            self.nodes,
            self.sink,
            edges,
            self.horizon,
            self.battery_capacity,
            self.initial_battery.clone(),
            self.harvest.clone(),
            costs,
        )
        .map_err(|e| Failure::Input(e.to_string()))
    }
}

impl PathSet {
    pub fn from_paths(paths: &RoutingPaths) -> Self {
        PathSet { time_invariable: paths.is_time_invariable(), paths: paths.all().to_vec() }
    }

    pub fn routing(&self, inst: &NetworkInstance) -> Result<RoutingPaths, Failure> {
        if self.paths.len() != inst.node_count() {
            return Err(shape("paths", format!("has {} nodes, expected {}", self.paths.len(), inst.node_count())));
        }
        let mut all = Vec::with_capacity(inst.node_count());
        for (i, slots) in self.paths.iter().enumerate() {
            let full = match slots.len() {
                _ if i == inst.sink() => vec![Vec::new(); inst.horizon()],
                1 if self.time_invariable => vec![slots[0].clone(); inst.horizon()],
                n if n == inst.horizon() => slots.clone(),
                n => return Err(shape(&format!("paths[{i}]"), format!("has {n} slots, expected T = {}", inst.horizon()))),
            };
            all.push(full);
        }
        let routing = RoutingPaths::variable(inst, all).map_err(|e| shape("paths", e))?;
        if self.time_invariable && !routing.is_time_invariable() {
            return Err(shape("paths", "marked time_invariable but slots differ"));
        }
        Ok(routing)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Input(format!("scenario: {e}")))
}

/// Reads, shapes and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<(Scenario, NetworkInstance), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let scenario = parse_scenario(&text).map_err(|f| match f {
        Failure::Input(msg) => Failure::Input(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let inst = scenario.instance()?;
    let report = validate_instance(&inst);
    if !report.is_ok() {
        let list: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(Failure::Input(format!("invalid instance: {}", list.join("; "))));
    }
    Ok((scenario, inst))
}

pub fn load_paths(path: &Path, inst: &NetworkInstance) -> Result<RoutingPaths, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let set: PathSet =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    set.routing(inst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstanceKind {
    Fig2 { c_st: f64, c_rt: f64 },
    Fig4 { k: usize },
    Fig5 { k: usize },
    Random { sensors: usize, horizon: usize, seed: u64 },
}

/// Deterministic scenario for a generator kind. Fig. 2 carries its
/// relay paths so it can be fed straight to the given-paths solver.
pub fn generate_instance(kind: InstanceKind) -> Result<Scenario, Failure> {
    let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Failure::Input(msg.to_string())) };
    Ok(match kind {
        InstanceKind::Fig2 { c_st, c_rt } => {
            need(c_st > 0.0 && c_rt > 0.0, "fig2 costs must be positive")?;
            let inst = fixtures::fig2(c_st, c_rt);
            Scenario::from_instance(&inst, Some(&fixtures::fig2_paths(&inst)))
        }
        InstanceKind::Fig4 { k } => {
            need(k >= 2, "fig4 needs k >= 2")?;
            Scenario::from_instance(&fixtures::fig4(k), None)
        }
        InstanceKind::Fig5 { k } => {
            need(k >= 2, "fig5 needs k >= 2")?;
            Scenario::from_instance(&fixtures::fig5(k), None)
        }
        InstanceKind::Random { sensors, horizon, seed } => {
            need(sensors >= 1 && horizon >= 1, "random needs at least one sensor and one slot")?;
            Scenario::from_instance(&fixtures::random(sensors, horizon, seed), None)
        }
    })
}
