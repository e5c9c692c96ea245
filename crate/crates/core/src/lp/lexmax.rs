use crate::error::SolveError;
use crate::model::{Grid, NetworkInstance, RateMatrix, RoutingPaths};

use super::{Cmp, LinearProgram, Rational, Scalar, Sense};

/// Which feasible region the reference solver optimizes over.
#[derive(Debug, Clone, Copy)]
pub enum Setting<'a> {
    /// Rates per node and slot, routed along the given unsplittable paths.
    GivenPaths(&'a RoutingPaths),
    /// Rates and fractional flows per node and slot.
    FractionalTimeVar,
    /// One rate per node and one fractional flow per edge, identical in all slots.
    FractionalConstant,
}

/// Linear description of a feasible region with the battery recursion
/// replaced by its window constraints.
#[derive(Debug, Clone)]
pub struct RateSystem<S> {
    pub lp: LinearProgram<S>,
    /// LP variable of λ_{i,t}; `usize::MAX` in the sink row.
    pub rate_var: Grid<usize>,
    /// LP variable of f_{e,t} for fractional settings.
    pub flow_var: Option<Grid<usize>>,
    /// Distinct rate variables, in node-major order.
    pub rate_vars: Vec<usize>,
}

/// Largest constant per-slot drain node `i` sustains: the minimum over
/// windows s..=t of (start_s + Σ e) / (t - s + 1).
pub fn exact_constant_drain<S: Scalar>(inst: &NetworkInstance, i: usize) -> S {
    let mut best: Option<S> = None;
    for s in 0..inst.horizon() {
        let mut acc = S::from_f64(inst.window_start(i, s));
        for t in s..inst.horizon() {
            acc = acc.add(&S::from_f64(inst.harvest(i, t)));
            let v = acc.div(&S::from_f64((t - s + 1) as f64));
            if best.as_ref().map_or(true, |b| v.lt(b)) {
                best = Some(v);
            }
        }
    }
    best.unwrap_or_else(S::zero)
}

pub fn build_system<S: Scalar>(inst: &NetworkInstance, setting: Setting<'_>) -> RateSystem<S> {
    let n = inst.node_count();
    let horizon = inst.horizon();
    let c_st = S::from_f64(inst.c_st());
    let c_rt = S::from_f64(inst.c_rt());
    let mut lp = LinearProgram::<S>::new();
    let mut rate_var = Grid::filled(n, horizon, usize::MAX);
    let mut rate_vars = Vec::new();
    for i in inst.sensors() {
        match setting {
            Setting::FractionalConstant => {
                let v = lp.add_var(S::zero(), None);
                rate_vars.push(v);
                for t in 0..horizon {
                    rate_var[(i, t)] = v;
                }
            }
            _ => {
                for t in 0..horizon {
                    let v = lp.add_var(S::zero(), None);
                    rate_vars.push(v);
                    rate_var[(i, t)] = v;
                }
            }
        }
    }
    let flow_var = match setting {
        Setting::GivenPaths(_) => None,
        Setting::FractionalTimeVar | Setting::FractionalConstant => {
            let constant = matches!(setting, Setting::FractionalConstant);
            let mut g = Grid::filled(inst.edge_count(), horizon, usize::MAX);
            for e in 0..inst.edge_count() {
                let shared = constant.then(|| lp.add_var(S::zero(), None));
                for t in 0..horizon {
                    g[(e, t)] = shared.unwrap_or_else(|| lp.add_var(S::zero(), None));
                }
            }
            Some(g)
        }
    };

    // Linear expression of f^Σ_{i,t} in the LP variables.
    let inflow = |i: usize, t: usize| -> Vec<(usize, S)> {
        match (&setting, &flow_var) {
            (Setting::GivenPaths(paths), _) => inst
                .sensors()
                .filter(|&j| j != i && paths.path(j, t)[1..].contains(&i))
                .map(|j| (rate_var[(j, t)], S::one()))
                .collect(),
            (_, Some(fv)) => inst.in_edges(i).iter().map(|&e| (fv[(e, t)], S::one())).collect(),
            _ => unreachable!(),
        }
    };

    if let Some(fv) = &flow_var {
        let slots = if matches!(setting, Setting::FractionalConstant) { 1 } else { horizon };
        for i in inst.sensors() {
            for t in 0..slots {
                let mut row = inflow(i, t);
                row.push((rate_var[(i, t)], S::one()));
                for &e in inst.out_edges(i) {
                    row.push((fv[(e, t)], S::one().neg()));
                }
                lp.add_constraint(row, Cmp::Eq, S::zero());
            }
        }
    }

    for i in inst.sensors() {
        if let Setting::FractionalConstant = setting {
            let mut row: Vec<(usize, S)> = inflow(i, 0).into_iter().map(|(v, a)| (v, a.mul(&c_rt))).collect();
            row.push((rate_var[(i, 0)], c_st.clone()));
            lp.add_constraint(row, Cmp::Le, exact_constant_drain(inst, i));
            continue;
        }
        let per_slot: Vec<Vec<(usize, S)>> = (0..horizon)
            .map(|t| {
                let mut row: Vec<(usize, S)> = inflow(i, t).into_iter().map(|(v, a)| (v, a.mul(&c_rt))).collect();
                row.push((rate_var[(i, t)], c_st.clone()));
                row
            })
            .collect();
        for s in 0..horizon {
            let mut row = Vec::new();
            let mut rhs = S::from_f64(inst.window_start(i, s));
            for t in s..horizon {
                row.extend(per_slot[t].iter().cloned());
                rhs = rhs.add(&S::from_f64(inst.harvest(i, t)));
                lp.add_constraint(row.clone(), Cmp::Le, rhs.clone());
            }
        }
    }
    RateSystem { lp, rate_var, flow_var, rate_vars }
}

const MAX_RATE_VARS: usize = 40;

#[derive(Debug, Clone)]
pub struct LexmaxResult {
    /// Exact optimum per node and slot (zero for the sink).
    pub exact: Grid<Rational>,
    pub rates: RateMatrix,
    /// Number of LPs solved.
    pub lp_solves: usize,
    /// Water-filling rounds.
    pub rounds: usize,
}

impl LexmaxResult {
    /// Exact rates of all sensors sorted nondecreasingly.
    pub fn sorted_exact(&self, inst: &NetworkInstance) -> Vec<Rational> {
        let mut v: Vec<Rational> = inst.sensors().flat_map(|i| self.exact.row(i).to_vec()).collect();
        v.sort();
        v
    }
}

fn expand(inst: &NetworkInstance, sys: &RateSystem<Rational>, x: &[Rational]) -> (Grid<Rational>, RateMatrix) {
    let mut exact = Grid::filled(inst.node_count(), inst.horizon(), <Rational as Scalar>::zero());
    let mut rates = RateMatrix::zeros(inst);
    for i in inst.sensors() {
        for t in 0..inst.horizon() {
            let v = x[sys.rate_var[(i, t)]].clone();
            rates.set(i, t, v.to_f64());
            exact[(i, t)] = v;
        }
    }
    (exact, rates)
}

fn guard(inst: &NetworkInstance, sys: &RateSystem<Rational>) -> Result<(), SolveError> {
    if sys.rate_vars.len() > MAX_RATE_VARS {
        return Err(SolveError::TooLarge(format!(
            "{} rate variables (limit {MAX_RATE_VARS}) for {} nodes over {} slots",
            sys.rate_vars.len(),
            inst.sensor_count(),
            inst.horizon()
        )));
    }
    Ok(())
}

/// Exact lexicographically maximum (max-min fair) rates by iterated LPs:
/// raise all active rates by a common amount, then test each active rate
/// for whether it can exceed that level while all others keep theirs.
pub fn lexmax_reference(inst: &NetworkInstance, setting: Setting<'_>) -> Result<LexmaxResult, SolveError> {
    let sys = build_system::<Rational>(inst, setting);
    guard(inst, &sys)?;
    let zero = <Rational as Scalar>::zero;
    let one = <Rational as Scalar>::one;
    let k = sys.rate_vars.len();
    let mut value: Vec<Option<Rational>> = vec![None; k];
    let mut lp_solves = 0;
    let mut rounds = 0;
    let mut last_x = vec![zero(); sys.lp.var_count()];
    while value.iter().any(Option::is_none) {
        rounds += 1;
        let mut lp = sys.lp.clone();
        let theta = lp.add_var(zero(), None);
        for (idx, &v) in sys.rate_vars.iter().enumerate() {
            match &value[idx] {
                Some(val) => lp.lower[v] = val.clone(),
                None => lp.add_constraint(vec![(v, one()), (theta, one().neg())], Cmp::Ge, zero()),
            }
        }
        lp.set_objective(Sense::Max, vec![(theta, one())]);
        lp_solves += 1;
        let (x, level) = lp
            .solve()
            .optimal()
            .ok_or_else(|| SolveError::Internal("common-level LP has no optimum".into()))?;
        last_x = x[..sys.lp.var_count()].to_vec();

        let active: Vec<usize> = (0..k).filter(|&idx| value[idx].is_none()).collect();
        let mut unsaturated = vec![false; k];
        for &a in &active {
            if unsaturated[a] {
                continue;
            }
            let mut lp = sys.lp.clone();
            for (idx, &v) in sys.rate_vars.iter().enumerate() {
                lp.lower[v] = value[idx].clone().unwrap_or_else(|| level.clone());
            }
            lp.set_objective(Sense::Max, vec![(sys.rate_vars[a], one())]);
            lp_solves += 1;
            let (x, best) = lp
                .solve()
                .optimal()
                .ok_or_else(|| SolveError::Internal("saturation LP has no optimum".into()))?;
            if best > level {
                for &b in &active {
                    if x[sys.rate_vars[b]] > level {
                        unsaturated[b] = true;
                    }
                }
            }
        }
        for &a in &active {
            if !unsaturated[a] {
                value[a] = Some(level.clone());
            }
        }
    }
    // Only rate values are reported; flow entries of `last_x` are not needed.
    for (idx, &v) in sys.rate_vars.iter().enumerate() {
        last_x[v] = value[idx].clone().unwrap();
    }
    let (exact, rates) = expand(inst, &sys, &last_x);
    Ok(LexmaxResult { exact, rates, lp_solves, rounds })
}

/// Rates maximizing total throughput Σ λ over the setting's region.
pub fn max_throughput(inst: &NetworkInstance, setting: Setting<'_>) -> Result<(Grid<Rational>, Rational), SolveError> {
    let mut sys = build_system::<Rational>(inst, setting);
    guard(inst, &sys)?;
    let obj = sys.rate_vars.iter().map(|&v| (v, <Rational as Scalar>::one())).collect();
    sys.lp.set_objective(Sense::Max, obj);
    let (x, total) = sys
        .lp
        .solve()
        .optimal()
        .ok_or_else(|| SolveError::Internal("throughput LP has no optimum".into()))?;
    Ok((expand(inst, &sys, &x).0, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn fig2_given_paths_is_one_third() {
        let inst = fixtures::fig2(1.0, 2.0);
        let paths = fixtures::fig2_paths(&inst);
        let r = lexmax_reference(&inst, Setting::GivenPaths(&paths)).unwrap();
        assert_eq!(r.sorted_exact(&inst), vec![q(1, 3), q(1, 3)]);
    }

    #[test]
    fn single_node_spreads_over_slots() {
        let inst = fixtures::single_node(1.0, vec![0.0, 0.0], 1.0, 1.0);
        let r = lexmax_reference(&inst, Setting::FractionalTimeVar).unwrap();
        assert_eq!(r.sorted_exact(&inst), vec![q(1, 2), q(1, 2)]);
    }

    #[test]
    fn fig4_unsplittable_is_half() {
        let paths = fixtures::fig4_unsplittable_paths(3);
        let inst = fixtures::fig4(3);
        let r = lexmax_reference(&inst, Setting::GivenPaths(&paths)).unwrap();
        assert!(r.sorted_exact(&inst).iter().all(|v| *v == q(1, 2)));
    }

    #[test]
    fn constant_drain_closed_form() {
        let inst = fixtures::single_node(0.0, vec![2.0, 0.0], 1.0, 1.0);
        assert_eq!(exact_constant_drain::<Rational>(&inst, 0), q(1, 1));
    }

    #[test]
    fn deterministic() {
        let inst = fixtures::random(3, 2, 11);
        let a = lexmax_reference(&inst, Setting::FractionalTimeVar).unwrap();
        let b = lexmax_reference(&inst, Setting::FractionalTimeVar).unwrap();
        assert_eq!(a.exact, b.exact);
    }

    #[test]
    fn too_large_rejected() {
        let inst = fixtures::random(6, 8, 1);
        assert!(matches!(lexmax_reference(&inst, Setting::FractionalTimeVar), Err(SolveError::TooLarge(_))));
    }
}
