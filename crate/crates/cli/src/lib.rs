//! Scenario files, solver dispatch and report files for the `fairharvest` binary.

pub mod scenario;

use std::path::{Path, PathBuf};
use std::time::Instant;

use fairharvest::fixed::{solve_fixed_fractional, FixedOptions};
use fairharvest::lp::{lexmax_reference, LexmaxResult, Setting};
use fairharvest::packing::{solve_fractional_fptas, FptasOptions};
use fairharvest::routing::{enumerate_routings, maxmin_unsplittable_routing, RoutingFamily};
use fairharvest::unsplittable::{solve_unsplittable_rates, UnsplittableOptions};
use fairharvest::{FlowAssignment, NetworkInstance, RateMatrix, RoutingPaths, SolveError};
use serde::Serialize;

use scenario::{load_paths, load_scenario, PathSet, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NoSolution(String),
    #[error("{0}")]
    Nonconvergence(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::NoSolution(_) => 2,
            Failure::Input(_) => 3,
            Failure::Nonconvergence(_) => 4,
            Failure::Other(_) => 1,
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Model(_) | SolveError::TooLarge(_) => Failure::Input(e.to_string()),
            SolveError::Infeasible(_) => Failure::NoSolution(e.to_string()),
            SolveError::Nonconvergence(_) => Failure::Nonconvergence(e.to_string()),
            SolveError::NotIntegral(_) | SolveError::Internal(_) => Failure::Other(e.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexmaxSetting {
    TimeVariable,
    Constant,
    GivenPaths,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    UnsplittableRates { paths: Option<PathBuf> },
    FixedFractional,
    FractionalFptas { epsilon: f64 },
    FindUnsplittable,
    Lexmax { setting: LexmaxSetting, paths: Option<PathBuf> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::UnsplittableRates { .. } => "unsplittable-rates",
            Command::FixedFractional => "fixed-fractional",
            Command::FractionalFptas { .. } => "fractional-fptas",
            Command::FindUnsplittable => "find-unsplittable",
            Command::Lexmax { .. } => "lexmax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub delta: f64,
    /// Cross-check against the exact reference when the instance is small enough.
    pub oracle: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { delta: fairharvest::DEFAULT_DELTA, oracle: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub reference: String,
    /// Sorted reference rates, or the reference's best minimum rate.
    pub sorted_rates: Vec<f64>,
    /// Largest shortfall of the solver below what it guarantees relative
    /// to the reference (0 when the guarantee holds exactly).
    pub max_shortfall: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub min_rate: f64,
    pub sorted_rates: Vec<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routing_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_sorted_rates: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub anomalies: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_skipped: Option<String>,
}

/// Everything a command produces; flows are absent for the exact reference.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub instance: NetworkInstance,
    pub summary: Summary,
    pub rates: RateMatrix,
    pub flows: Option<FlowAssignment>,
    pub routing: Option<RoutingPaths>,
}

fn given_paths(path: &Option<PathBuf>, scenario: &Scenario, inst: &NetworkInstance) -> Result<RoutingPaths, Failure> {
    match (path, &scenario.paths) {
        (Some(p), _) => load_paths(p, inst),
        (None, Some(set)) => set.routing(inst),
        (None, None) => Err(Failure::Input("no routing paths: pass --paths or add \"paths\" to the scenario".into())),
    }
}

/// Compares sorted rates with the reference: element-wise within `tol`
/// when `factor` is 1, or v ≥ factor·v_ref − tol for approximations.
fn compare(reference: String, got: &[f64], want: Vec<f64>, factor: f64, tol: f64) -> OracleCheck {
    let max_shortfall = got
        .iter()
        .zip(&want)
        .map(|(v, o)| if factor == 1.0 { (v - o).abs() } else { factor * o - v })
        .fold(0.0, f64::max);
    OracleCheck { reference, sorted_rates: want, max_shortfall, within_tolerance: max_shortfall <= tol }
}

fn reference_check(
    inst: &NetworkInstance,
    setting: Setting<'_>,
    name: &str,
    got: &[f64],
    factor: f64,
) -> Result<OracleCheck, String> {
    match lexmax_reference(inst, setting) {
        Ok(r) => Ok(compare(format!("lexmax {name}"), got, r.rates.sorted(inst), factor, 1e-6)),
        Err(e) => Err(e.to_string()),
    }
}

fn summary(command: &Command, inst: &NetworkInstance, rates: &RateMatrix, iterations: usize) -> Summary {
    let sorted = rates.sorted(inst);
    Summary {
        command: command.name().to_string(),
        min_rate: sorted.first().copied().unwrap_or(0.0),
        sorted_rates: sorted,
        iterations,
        wall_time_s: 0.0,
        routing_lambda: None,
        exact_sorted_rates: None,
        anomalies: Vec::new(),
        oracle: None,
        oracle_skipped: None,
    }
}

pub fn run(command: &Command, scenario_path: &Path, opts: RunOptions) -> Result<Outcome, Failure> {
    let (scenario, inst) = load_scenario(scenario_path)?;
    let start = Instant::now();
    let unsplittable = UnsplittableOptions { delta: opts.delta };
    let mut oracle: Option<Result<OracleCheck, String>> = None;
    let mut out = match command {
        Command::UnsplittableRates { paths } => {
            let paths = given_paths(paths, &scenario, &inst)?;
            let sol = solve_unsplittable_rates(&inst, &paths, unsplittable)?;
            let mut s = summary(command, &inst, &sol.rates, sol.iterations());
            if sol.anomalies() > 0 {
                s.anomalies.push(format!("{} iterations fixed a rate without a saturation rule", sol.anomalies()));
            }
            if opts.oracle {
                let got = sol.rates.sorted(&inst);
                oracle = Some(reference_check(&inst, Setting::GivenPaths(&paths), "given-paths", &got, 1.0));
            }
            Outcome { instance: inst.clone(), summary: s, rates: sol.rates, flows: Some(sol.flows), routing: None }
        }
        Command::FixedFractional => {
            let sol = solve_fixed_fractional(&inst, FixedOptions { delta: opts.delta, ..Default::default() })?;
            let s = summary(command, &inst, &sol.rates, sol.iterations());
            if opts.oracle {
                let got = sol.rates.sorted(&inst);
                oracle = Some(reference_check(&inst, Setting::FractionalConstant, "constant", &got, 1.0));
            }
            Outcome { instance: inst.clone(), summary: s, rates: sol.rates, flows: Some(sol.flows), routing: None }
        }
        Command::FractionalFptas { epsilon } => {
            if !(*epsilon > 0.0 && *epsilon < 1.0) {
                return Err(Failure::Input(format!("--epsilon must lie in (0, 1), got {epsilon}")));
            }
            let fopts = FptasOptions { epsilon: *epsilon, delta: opts.delta, ..Default::default() };
            let sol = solve_fractional_fptas(&inst, fopts)?;
            let mut s = summary(command, &inst, &sol.rates, sol.log.len());
            s.anomalies = sol.anomalies();
            if opts.oracle {
                let got = sol.rates.sorted(&inst);
                oracle =
                    Some(reference_check(&inst, Setting::FractionalTimeVar, "time-variable", &got, 1.0 - epsilon));
            }
            Outcome { instance: inst.clone(), summary: s, rates: sol.rates, flows: Some(sol.flows), routing: None }
        }
        Command::FindUnsplittable => {
            let found = maxmin_unsplittable_routing(&inst, opts.delta)?;
            let Some(paths) = found.paths else {
                return Err(Failure::NoSolution("no unsplittable routing sustains a positive common rate".into()));
            };
            let sol = solve_unsplittable_rates(&inst, &paths, unsplittable)?;
            let mut s = summary(command, &inst, &sol.rates, sol.iterations());
            s.routing_lambda = Some(found.lambda);
            if opts.oracle {
                oracle = Some(match enumerate_routings(&inst, RoutingFamily::Unsplittable, unsplittable) {
                    Ok(best) => {
                        let tol = 10.0 * opts.delta * inst.energy_scale().max(1.0) / inst.c_st();
                        Ok(compare("best enumerated routing".into(), &[found.lambda], vec![best.sorted[0]], 1.0, tol))
                    }
                    Err(e) => Err(e.to_string()),
                });
            }
            Outcome { instance: inst.clone(), summary: s, rates: sol.rates, flows: Some(sol.flows), routing: Some(paths) }
        }
        Command::Lexmax { setting, paths } => {
            let given;
            let set = match setting {
                LexmaxSetting::TimeVariable => Setting::FractionalTimeVar,
                LexmaxSetting::Constant => Setting::FractionalConstant,
                LexmaxSetting::GivenPaths => {
                    given = given_paths(paths, &scenario, &inst)?;
                    Setting::GivenPaths(&given)
                }
            };
            let r: LexmaxResult = lexmax_reference(&inst, set)?;
            let mut s = summary(command, &inst, &r.rates, r.rounds);
            s.exact_sorted_rates = Some(r.sorted_exact(&inst).iter().map(ToString::to_string).collect());
            Outcome { instance: inst.clone(), summary: s, rates: r.rates, flows: None, routing: None }
        }
    };
    match oracle {
        Some(Ok(check)) => out.summary.oracle = Some(check),
        Some(Err(reason)) => out.summary.oracle_skipped = Some(reason),
        None => {}
    }
    out.summary.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

#[derive(Serialize)]
struct RateRow {
    node: usize,
    slot: usize,
    rate: f64,
}

#[derive(Serialize)]
struct FlowRow {
    edge: usize,
    slot: usize,
    flow: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Failure {
    Failure::Other(anyhow::anyhow!("writing {}: {e}", path.display()))
}

/// Writes rates.csv, flows.csv (when available), summary.json and, for a
/// found routing, routing.json into `dir`.
pub fn write_reports(dir: &Path, out: &Outcome) -> Result<(), Failure> {
    use anyhow::Context;
    let inst = &out.instance;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("rates.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    for node in inst.sensors() {
        for slot in 0..inst.horizon() {
            w.serialize(RateRow { node, slot, rate: out.rates.get(node, slot) }).map_err(|e| csv_error(&path, e))?;
        }
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    if let Some(flows) = &out.flows {
        let path = dir.join("flows.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        for edge in 0..inst.edge_count() {
            for slot in 0..inst.horizon() {
                w.serialize(FlowRow { edge, slot, flow: flows.get(edge, slot) }).map_err(|e| csv_error(&path, e))?;
            }
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
    }
    write_json(&dir.join("summary.json"), &out.summary)?;
    if let Some(routing) = &out.routing {
        write_json(&dir.join("routing.json"), &PathSet::from_paths(routing))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    use anyhow::Context;
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_errors_map_to_exit_codes() {
        let code = |e: SolveError| Failure::from(e).exit_code();
        assert_eq!(code(SolveError::Infeasible(String::new())), 2);
        assert_eq!(code(SolveError::TooLarge(String::new())), 3);
        assert_eq!(code(SolveError::Nonconvergence(String::new())), 4);
        assert_eq!(code(SolveError::Internal(String::new())), 1);
    }
}
