//! Two-phase dense-tableau simplex with Bland's rule, generic over exact
//! rationals and floating point, plus the reference lexicographic maximizer.

mod lexmax;
mod scalar;

pub use lexmax::{build_system, exact_constant_drain, lexmax_reference, max_throughput, LexmaxResult, RateSystem, Setting};
pub use scalar::{rat_from_f64, rat_to_f64, Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<S> {
    pub coeffs: Vec<(usize, S)>,
    pub cmp: Cmp,
    pub rhs: S,
}

/// Variables carry a finite lower bound and an optional upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<S> {
    pub lower: Vec<S>,
    pub upper: Vec<Option<S>>,
    pub constraints: Vec<Constraint<S>>,
    pub objective: Vec<(usize, S)>,
    pub sense: Sense,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<S> {
    Optimal { x: Vec<S>, objective: S },
    Infeasible,
    Unbounded,
}

impl<S> LpOutcome<S> {
    pub fn optimal(self) -> Option<(Vec<S>, S)> {
        match self {
            LpOutcome::Optimal { x, objective } => Some((x, objective)),
            _ => None,
        }
    }
}

impl<S: Scalar> Default for LinearProgram<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new() -> Self {
        LinearProgram { lower: Vec::new(), upper: Vec::new(), constraints: Vec::new(), objective: Vec::new(), sense: Sense::Max }
    }

    /// Adds a variable with bounds `lower ≤ x ≤ upper`.
    pub fn add_var(&mut self, lower: S, upper: Option<S>) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.lower.len() - 1
    }

    pub fn var_count(&self) -> usize {
        self.lower.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, S)>, cmp: Cmp, rhs: S) {
        self.constraints.push(Constraint { coeffs, cmp, rhs });
    }

    pub fn set_objective(&mut self, sense: Sense, coeffs: Vec<(usize, S)>) {
        self.sense = sense;
        self.objective = coeffs;
    }

    pub fn objective_at(&self, x: &[S]) -> S {
        let mut v = S::zero();
        for (j, c) in &self.objective {
            v = v.add(&c.mul(&x[*j]));
        }
        v
    }

    /// Largest constraint or bound violation of `x` (zero when feasible).
    pub fn violation(&self, x: &[S]) -> S {
        let mut worst = S::zero();
        let mut see = |v: S| {
            if v.gt(&worst) {
                worst = v;
            }
        };
        for (j, l) in self.lower.iter().enumerate() {
            see(l.sub(&x[j]));
            if let Some(u) = &self.upper[j] {
                see(x[j].sub(u));
            }
        }
        for c in &self.constraints {
            let mut lhs = S::zero();
            for (j, a) in &c.coeffs {
                lhs = lhs.add(&a.mul(&x[*j]));
            }
            let d = lhs.sub(&c.rhs);
            match c.cmp {
                Cmp::Le => see(d),
                Cmp::Ge => see(d.neg()),
                Cmp::Eq => {
                    see(d.clone());
                    see(d.neg());
                }
            }
        }
        worst
    }

    pub fn solve(&self) -> LpOutcome<S> {
        simplex_solve(self)
    }
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    obj: Vec<S>,
    basis: Vec<usize>,
    width: usize,
}

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            for k in 0..=w {
                if !self.rows[r][k].is_zero() {
                    self.rows[r][k] = self.rows[r][k].div(&p);
                }
            }
        }
        let support: Vec<usize> = (0..=w).filter(|&k| !self.rows[r][k].is_zero()).collect();
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &k in &support {
                row[k] = row[k].sub(&f.mul(&prow[k]));
            }
            row[c] = S::zero();
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &k in &support {
                self.obj[k] = self.obj[k].sub(&f.mul(&prow[k]));
            }
            self.obj[c] = S::zero();
        }
        self.basis[r] = c;
    }

    /// Maximizes the objective row over columns allowed by `allowed`.
    /// Returns false when unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        let w = self.width;
        loop {
            let Some(c) = (0..w).find(|&j| allowed(j) && self.obj[j].is_pos()) else {
                return true;
            };
            let mut best: Option<(usize, S)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[c].is_pos() {
                    continue;
                }
                let ratio = row[w].div(&row[c]);
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bv)) => {
                        if ratio.lt(&bv) || (!bv.lt(&ratio) && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, bv))
                        }
                    }
                };
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves `lp` by the two-phase simplex method with Bland's anti-cycling rule.
pub fn simplex_solve<S: Scalar>(lp: &LinearProgram<S>) -> LpOutcome<S> {
    let n = lp.var_count();
    // Shift x = lower + y with y ≥ 0; upper bounds become rows.
    let mut rows: Vec<(Vec<(usize, S)>, Cmp, S)> = Vec::new();
    for c in &lp.constraints {
        let mut rhs = c.rhs.clone();
        for (j, a) in &c.coeffs {
            rhs = rhs.sub(&a.mul(&lp.lower[*j]));
        }
        rows.push((c.coeffs.clone(), c.cmp, rhs));
    }
    for j in 0..n {
        if let Some(u) = &lp.upper[j] {
            rows.push((vec![(j, S::one())], Cmp::Le, u.sub(&lp.lower[j])));
        }
    }
    let m = rows.len();
    let mut slack_cols = 0;
    let mut art_cols = 0;
    for r in rows.iter_mut() {
        if r.2.is_neg() {
            for (_, a) in r.0.iter_mut() {
                *a = a.neg();
            }
            r.2 = r.2.neg();
            r.1 = match r.1 {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
        match r.1 {
            Cmp::Le => slack_cols += 1,
            Cmp::Ge => {
                slack_cols += 1;
                art_cols += 1;
            }
            Cmp::Eq => art_cols += 1,
        }
    }
    let art_start = n + slack_cols;
    let width = art_start + art_cols;
    let mut tab = Tableau { rows: Vec::with_capacity(m), obj: vec![S::zero(); width + 1], basis: Vec::with_capacity(m), width };
    let (mut next_slack, mut next_art) = (n, art_start);
    for (coeffs, cmp, rhs) in rows {
        let mut row = vec![S::zero(); width + 1];
        for (j, a) in coeffs {
            row[j] = row[j].add(&a);
        }
        row[width] = rhs;
        match cmp {
            Cmp::Le => {
                row[next_slack] = S::one();
                tab.basis.push(next_slack);
                next_slack += 1;
            }
            Cmp::Ge => {
                row[next_slack] = S::one().neg();
                next_slack += 1;
                row[next_art] = S::one();
                tab.basis.push(next_art);
                next_art += 1;
            }
            Cmp::Eq => {
                row[next_art] = S::one();
                tab.basis.push(next_art);
                next_art += 1;
            }
        }
        tab.rows.push(row);
    }

    // Phase 1: maximize -Σ artificials.
    if art_cols > 0 {
        for (r, row) in tab.rows.iter().enumerate() {
            if tab.basis[r] >= art_start {
                for k in 0..=width {
                    if k < art_start || k == width {
                        tab.obj[k] = tab.obj[k].add(&row[k]);
                    }
                }
            }
        }
        tab.optimize(&|j| j < art_start);
        if tab.obj[width].is_pos() {
            return LpOutcome::Infeasible;
        }
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&j| !tab.rows[r][j].is_zero()) {
                    tab.pivot(r, c);
                } else {
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    // Phase 2.
    let mut cost = vec![S::zero(); width];
    for (j, c) in &lp.objective {
        let c = if lp.sense == Sense::Max { c.clone() } else { c.neg() };
        cost[*j] = cost[*j].add(&c);
    }
    tab.obj = vec![S::zero(); width + 1];
    for j in 0..art_start {
        tab.obj[j] = cost[j].clone();
    }
    for (r, row) in tab.rows.iter().enumerate() {
        let cb = &cost[tab.basis[r]];
        if cb.is_zero() {
            continue;
        }
        for k in 0..=width {
            if k < art_start || k == width {
                if !row[k].is_zero() {
                    tab.obj[k] = tab.obj[k].sub(&cb.mul(&row[k]));
                }
            }
        }
    }
    if !tab.optimize(&|j| j < art_start) {
        return LpOutcome::Unbounded;
    }
    let mut x = lp.lower.clone();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = x[b].add(&tab.rows[r][width]);
        }
    }
    let objective = lp.objective_at(&x);
    LpOutcome::Optimal { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::<Rational>::new();
        let x = lp.add_var(Rational::zero(), None);
        lp.add_constraint(vec![(x, Rational::one())], Cmp::Le, Rational::one());
        lp.set_objective(Sense::Max, vec![(x, Rational::one())]);
        let (v, obj) = lp.solve().optimal().unwrap();
        assert_eq!(v[x], Rational::one());
        assert_eq!(obj, Rational::one());
    }

    #[test]
    fn fig2_throughput_budget() {
        let mut lp = LinearProgram::<Rational>::new();
        let x = lp.add_var(Rational::zero(), None);
        let y = lp.add_var(Rational::zero(), None);
        lp.add_constraint(vec![(x, r(1, 1)), (y, r(2, 1))], Cmp::Le, r(1, 1));
        lp.add_constraint(vec![(x, r(1, 1))], Cmp::Le, r(2, 1));
        lp.set_objective(Sense::Max, vec![(x, r(1, 1)), (y, r(1, 1))]);
        let (v, obj) = lp.solve().optimal().unwrap();
        assert_eq!(v, vec![r(1, 1), r(0, 1)]);
        assert_eq!(obj, r(1, 1));
    }

    #[test]
    fn infeasible_pair() {
        let mut lp = LinearProgram::<Rational>::new();
        let x = lp.add_var(Rational::zero(), None);
        lp.add_constraint(vec![(x, r(1, 1))], Cmp::Le, r(0, 1));
        lp.add_constraint(vec![(x, r(1, 1))], Cmp::Ge, r(1, 1));
        lp.set_objective(Sense::Max, vec![(x, r(1, 1))]);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::<f64>::new();
        let x = lp.add_var(0.0, None);
        let y = lp.add_var(0.0, None);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Cmp::Le, 1.0);
        lp.set_objective(Sense::Max, vec![(x, 1.0)]);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn bounds_and_equalities() {
        // min x + y s.t. x + y = 3, 1 ≤ x ≤ 2, y ≥ 0.5 → 3
        let mut lp = LinearProgram::<Rational>::new();
        let x = lp.add_var(r(1, 1), Some(r(2, 1)));
        let y = lp.add_var(r(1, 2), None);
        lp.add_constraint(vec![(x, r(1, 1)), (y, r(1, 1))], Cmp::Eq, r(3, 1));
        lp.set_objective(Sense::Min, vec![(x, r(1, 1)), (y, r(2, 1))]);
        let (v, obj) = lp.solve().optimal().unwrap();
        assert_eq!(v, vec![r(2, 1), r(1, 1)]);
        assert_eq!(obj, r(4, 1));
        assert!(lp.violation(&v).is_zero());
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::<Rational>::new();
        let x = lp.add_var(Rational::zero(), None);
        let y = lp.add_var(Rational::zero(), None);
        lp.add_constraint(vec![(x, r(1, 1)), (y, r(1, 1))], Cmp::Eq, r(1, 1));
        lp.add_constraint(vec![(x, r(2, 1)), (y, r(2, 1))], Cmp::Eq, r(2, 1));
        lp.set_objective(Sense::Max, vec![(x, r(1, 1))]);
        let (v, _) = lp.solve().optimal().unwrap();
        assert_eq!(v, vec![r(1, 1), r(0, 1)]);
    }
}
