use crate::error::SolveError;
use crate::flow::{min_cost_flow, CapacitatedFlowProblem};
use crate::model::{Grid, NetworkInstance};

use super::PackingSystem;

/// A point of P: per-slot edge flows and the inflow f^Σ they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingPoint {
    /// edges × T.
    pub flows: Grid<f64>,
    /// nodes × T.
    pub inflow: Grid<f64>,
}

/// Minimizes Σ c_{i,t} f^Σ_{i,t} over P, one min-cost flow per slot.
/// Returns `None` when P is empty.
pub fn min_cost_oracle(inst: &NetworkInstance, sys: &PackingSystem, costs: &Grid<f64>) -> Option<(PackingPoint, f64)> {
    let n = inst.node_count();
    let horizon = inst.horizon();
    let tol = 1e-12 * inst.energy_scale().max(1.0);
    let mut flows = Grid::filled(inst.edge_count(), horizon, 0.0);
    let mut inflow = Grid::filled(n, horizon, 0.0);
    let mut total = 0.0;
    for t in 0..horizon {
        let problem = CapacitatedFlowProblem {
            nodes: n,
            sink: inst.sink(),
            edges: inst.edges().to_vec(),
            capacity: (0..n).map(|i| (i != inst.sink()).then(|| sys.caps[(i, t)])).collect(),
            supply: (0..n).map(|i| sys.supply[(i, t)]).collect(),
            cost: Some((0..n).map(|i| costs[(i, t)]).collect()),
        };
        let sol = min_cost_flow(&problem, tol);
        if !sol.feasible {
            return None;
        }
        for (e, f) in sol.edge_flows().into_iter().enumerate() {
            flows[(e, t)] = f;
        }
        for i in inst.sensors() {
            let f = sol.throughput(i);
            inflow[(i, t)] = f;
            total += costs[(i, t)] * f;
        }
    }
    Some((PackingPoint { flows, inflow }, total))
}

/// Dual weights y_r = exp(α (Ax)_r / b_r) / b_r on live rows, normalized
/// by the largest exponent (all weights share the factor, so ratios and
/// the oracle's argmin are unaffected), and the induced slot costs Aᵀy.
pub fn dual_and_costs(sys: &PackingSystem, activity: &[f64], alpha: f64) -> (Vec<f64>, Grid<f64>) {
    let shift = exponent_shift(sys, activity, alpha);
    let y: Vec<f64> = (0..sys.row_count())
        .map(|r| if sys.live[r] { (alpha * activity[r] / sys.rhs[r] - shift).exp() / sys.rhs[r] } else { 0.0 })
        .collect();
    let costs = row_costs(sys, &y);
    (y, costs)
}

fn exponent_shift(sys: &PackingSystem, activity: &[f64], alpha: f64) -> f64 {
    (0..sys.row_count())
        .filter(|&r| sys.live[r])
        .map(|r| alpha * activity[r] / sys.rhs[r])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

/// c_{i,t} = Σ over rows (s, t') of node i with s ≤ t ≤ t' of y_r, in
/// O(T²) per node via suffix sums over each start block.
pub fn row_costs(sys: &PackingSystem, y: &[f64]) -> Grid<f64> {
    let horizon = sys.horizon;
    let mut costs = Grid::filled(sys.caps.rows(), horizon, 0.0);
    let mut r = 0;
    while r < sys.rows.len() {
        let row = sys.rows[r];
        // Block of rows sharing (node, start) has ends start..horizon.
        let len = horizon - row.start;
        let mut suffix = 0.0;
        for k in (0..len).rev() {
            suffix += y[r + k];
            costs[(row.node, row.start + k)] += suffix;
        }
        r += len;
    }
    costs
}

/// Reference O(p·T) evaluation of [`row_costs`].
pub fn row_costs_naive(sys: &PackingSystem, y: &[f64]) -> Grid<f64> {
    let mut costs = Grid::filled(sys.caps.rows(), sys.horizon, 0.0);
    for (row, &w) in sys.rows.iter().zip(y) {
        for t in 0..sys.horizon {
            if row.covers(t) {
                costs[(row.node, t)] += w;
            }
        }
    }
    costs
}

/// Current point x of P, kept as a convex combination of oracle vertices
/// so that weight can be moved between vertices (pairwise steps).
#[derive(Debug, Clone)]
pub struct ImproveState {
    pub x: PackingPoint,
    pub activity: Vec<f64>,
    pub beta: f64,
    pub iterations: usize,
    atoms: Vec<(PackingPoint, Vec<f64>)>,
    weights: Vec<f64>,
}

impl ImproveState {
    pub fn new(sys: &PackingSystem, x: PackingPoint) -> Self {
        let activity = sys.activities(&x.inflow);
        let beta = load_of(sys, &activity);
        let atoms = vec![(x.clone(), activity.clone())];
        Self { x, activity, beta, iterations: 0, atoms, weights: vec![1.0] }
    }

    /// Moves weight σ from atom `from` (or from every atom, proportionally,
    /// when `from` is `None`) to the vertex `to`.
    fn shift(&mut self, sys: &PackingSystem, to: PackingPoint, to_activity: Vec<f64>, from: Option<usize>, sigma: f64) {
        let k = match self.atoms.iter().position(|(_, a)| *a == to_activity) {
            Some(k) => k,
            None => {
                self.atoms.push((to, to_activity));
                self.weights.push(0.0);
                self.atoms.len() - 1
            }
        };
        match from {
            Some(v) => {
                self.weights[v] -= sigma;
                self.weights[k] += sigma;
            }
            None => {
                for w in &mut self.weights {
                    *w *= 1.0 - sigma;
                }
                self.weights[k] += sigma;
            }
        }
        let mut keep = 0;
        for idx in 0..self.atoms.len() {
            if self.weights[idx] > 1e-14 {
                self.atoms.swap(keep, idx);
                self.weights.swap(keep, idx);
                keep += 1;
            }
        }
        self.atoms.truncate(keep);
        self.weights.truncate(keep);
        let total: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= total;
        }
        for v in self.x.flows.iter_mut().chain(self.x.inflow.iter_mut()) {
            *v = 0.0;
        }
        self.activity.iter_mut().for_each(|a| *a = 0.0);
        for ((p, a), &w) in self.atoms.iter().zip(&self.weights) {
            for (dst, src) in self.x.flows.iter_mut().zip(p.flows.iter()) {
                *dst += w * src;
            }
            for (dst, src) in self.x.inflow.iter_mut().zip(p.inflow.iter()) {
                *dst += w * src;
            }
            for (dst, src) in self.activity.iter_mut().zip(a) {
                *dst += w * src;
            }
        }
        self.beta = load_of(sys, &self.activity);
    }
}

fn load_of(sys: &PackingSystem, activity: &[f64]) -> f64 {
    (0..sys.row_count()).filter(|&r| sys.live[r]).map(|r| activity[r] / sys.rhs[r]).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImproveOutcome {
    /// β(x) fell to the target.
    Reached,
    /// β(x) fell below half its value at entry.
    Halved,
    /// The duality-gap stopping rule holds at the current ε'. `lower` is
    /// the certified lower bound C(y)/yᵀb on the optimal β.
    Converged { lower: f64 },
    /// C(y) > yᵀb: no point of P satisfies Ax ≤ b.
    Infeasible { lower: f64 },
}

/// Potential-reduction steps on x until one of the outcomes holds.
/// `budget` counts down oracle calls shared across calls.
///
/// Each step compares the classic move toward the oracle vertex with a
/// pairwise move that takes weight from the currently worst vertex of the
/// combination, and keeps whichever lowers the potential more.
pub fn improve_packing(
    inst: &NetworkInstance,
    sys: &PackingSystem,
    state: &mut ImproveState,
    eps: f64,
    target: f64,
    budget: &mut usize,
) -> Result<ImproveOutcome, SolveError> {
    let live = sys.live.iter().filter(|&&l| l).count();
    if live == 0 || state.beta <= target {
        return Ok(ImproveOutcome::Reached);
    }
    let beta0 = state.beta;
    let alpha = 4.0 * (2.0 * live as f64 / eps).ln() / (beta0 * eps);
    let sigma_fixed = eps / (4.0 * alpha * sys.width);
    loop {
        if state.beta <= target {
            return Ok(ImproveOutcome::Reached);
        }
        if state.beta <= 0.5 * beta0 {
            return Ok(ImproveOutcome::Halved);
        }
        if *budget == 0 {
            return Err(SolveError::Nonconvergence(format!(
                "packing did not converge at λ = {} (β = {})",
                sys.lambda, state.beta
            )));
        }
        *budget -= 1;
        state.iterations += 1;
        let (y, costs) = dual_and_costs(sys, &state.activity, alpha);
        let (xt, c_y) = min_cost_oracle(inst, sys, &costs)
            .ok_or_else(|| SolveError::Internal("flow polytope became empty".into()))?;
        let dot = |a: &[f64]| -> f64 { y.iter().zip(a).map(|(p, q)| p * q).sum() };
        let yax = dot(&state.activity);
        let yb = dot(&sys.rhs);
        let lower = c_y / yb;
        if lower > 1.0 + 1e-9 {
            return Ok(ImproveOutcome::Infeasible { lower });
        }
        if yax - c_y <= eps * (yax + state.beta * yb) {
            return Ok(ImproveOutcome::Converged { lower });
        }
        let at = sys.activities(&xt.inflow);
        let toward: Vec<f64> = at.iter().zip(&state.activity).map(|(s, x)| s - x).collect();
        let (s_fw, phi_fw) = line_search(sys, &state.activity, &toward, 1.0, alpha, sigma_fixed);
        let away = (0..state.atoms.len())
            .max_by(|&p, &q| dot(&state.atoms[p].1).total_cmp(&dot(&state.atoms[q].1)))
            .expect("at least one atom");
        let pair: Vec<f64> = at.iter().zip(&state.atoms[away].1).map(|(s, v)| s - v).collect();
        let (s_pw, phi_pw) = line_search(sys, &state.activity, &pair, state.weights[away], alpha, 0.0);
        if phi_pw < phi_fw {
            state.shift(sys, xt, at, Some(away), s_pw);
        } else {
            state.shift(sys, xt, at, None, s_fw);
        }
    }
}

/// Step along `dir` (in activity space) in [0, max] minimizing the
/// potential Σ exp(α (Ax)_r / b_r), which is convex along the segment.
/// Golden-section search is compared with `fallback` so the decrease is
/// never smaller than at that step. Returns the step and its potential.
fn line_search(sys: &PackingSystem, a: &[f64], dir: &[f64], max: f64, alpha: f64, fallback: f64) -> (f64, f64) {
    let shift = exponent_shift(sys, a, alpha);
    let phi = |sigma: f64| -> f64 {
        (0..sys.row_count())
            .filter(|&r| sys.live[r])
            .map(|r| (alpha * (a[r] + sigma * dir[r]) / sys.rhs[r] - shift).exp())
            .sum()
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, max);
    let mut m1 = hi - g * (hi - lo);
    let mut m2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (phi(m1), phi(m2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - g * (hi - lo);
            f1 = phi(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + g * (hi - lo);
            f2 = phi(m2);
        }
    }
    let mut best = (0.5 * (lo + hi), phi(0.5 * (lo + hi)));
    for cand in [fallback.min(max), max] {
        let v = phi(cand);
        if v < best.1 {
            best = (cand, v);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub enum Decision {
    /// A point with Ax ≤ (1 + ε) b.
    Accept { point: PackingPoint, beta: f64 },
    /// No point with Ax ≤ b (certified when `lower` > 1).
    Reject { lower: f64 },
}

/// Decides, for the system's λ, between an ε-approximately feasible point
/// and infeasibility. ε' is halved from ε/2 down to ε/8, at which point the
/// stopping rule always separates the two answers.
pub fn packing_decision(
    inst: &NetworkInstance,
    sys: &PackingSystem,
    eps: f64,
    budget: &mut usize,
) -> Result<(Decision, usize), SolveError> {
    let zero = Grid::filled(sys.caps.rows(), sys.horizon, 0.0);
    let Some((x0, _)) = min_cost_oracle(inst, sys, &zero) else {
        return Ok((Decision::Reject { lower: f64::INFINITY }, 0));
    };
    let mut state = ImproveState::new(sys, x0);
    let target = 1.0 + eps;
    let floor = eps / 8.0;
    let mut eps_prime = eps / 2.0;
    loop {
        match improve_packing(inst, sys, &mut state, eps_prime, target, budget)? {
            ImproveOutcome::Reached => {
                let beta = state.beta;
                return Ok((Decision::Accept { point: state.x, beta }, state.iterations));
            }
            ImproveOutcome::Halved => {}
            ImproveOutcome::Infeasible { lower } => return Ok((Decision::Reject { lower }, state.iterations)),
            ImproveOutcome::Converged { lower } => {
                if eps_prime > floor {
                    eps_prime *= 0.5;
                } else {
                    return Ok((Decision::Reject { lower }, state.iterations));
                }
            }
        }
    }
}
