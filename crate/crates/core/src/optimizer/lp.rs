//! Dense two-phase primal simplex for small and medium LPs.
//!
//! Minimises `c·x` over `x >= 0` subject to `<=`, `>=` and `=` rows. Pricing
//! is Dantzig (most negative reduced cost) until a run of degenerate pivots
//! is seen, after which the solve switches permanently to Bland's rule
//! (smallest-index entering and leaving variables), which cannot cycle.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("non-finite coefficient in row {0}")]
    NonFinite(usize),
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const DEGENERATE_SWITCH: usize = 25;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` x (`cols` + 1); last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    bland: bool,
    degenerate_run: usize,
    iterations: usize,
    max_iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Pivoted,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.a[r * self.width() + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize, cost: &mut [f64]) {
        let w = self.width();
        let p = self.a[pr * w + pc];
        for v in &mut self.a[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.a[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.a[r * w + pc];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.a[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.a[r * w + pc] = 0.0;
        }
        let f = cost[pc];
        if f != 0.0 {
            for (v, pv) in cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// One pricing + ratio-test step against the reduced-cost row `cost`
    /// (length `cols + 1`, last entry is minus the objective value).
    fn step(&mut self, cost: &mut [f64], allowed: &[bool]) -> Result<Step, LpError> {
        if self.iterations >= self.max_iterations {
            return Err(LpError::IterationLimit(self.max_iterations));
        }
        let entering = if self.bland {
            (0..self.cols).find(|&c| allowed[c] && cost[c] < -COST_TOL)
        } else {
            (0..self.cols)
                .filter(|&c| allowed[c] && cost[c] < -COST_TOL)
                .min_by(|&i, &j| cost[i].total_cmp(&cost[j]).then(i.cmp(&j)))
        };
        let Some(pc) = entering else {
            return Ok(Step::Optimal);
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let coef = self.at(r, pc);
            if coef > PIVOT_TOL {
                let ratio = self.rhs(r).max(0.0) / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                        if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, ratio)) = leave else {
            return Ok(Step::Unbounded);
        };
        if ratio <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_SWITCH {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        self.pivot(pr, pc, cost);
        self.iterations += 1;
        Ok(Step::Pivoted)
    }

    fn run(&mut self, cost: &mut [f64], allowed: &[bool]) -> Result<bool, LpError> {
        loop {
            match self.step(cost, allowed)? {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Pivoted => {}
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    solve_with(lp, false)
}

/// Solves with Bland's rule from the first pivot.
pub fn solve_bland(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    solve_with(lp, true)
}

fn solve_with(lp: &LinearProgram, bland: bool) -> Result<LpOutcome, LpError> {
    let n = lp.n_vars();
    let m = lp.constraints.len();
    for (i, c) in lp.constraints.iter().enumerate() {
        if !c.rhs.is_finite() || c.coeffs.iter().any(|(_, v)| !v.is_finite()) {
            return Err(LpError::NonFinite(i));
        }
    }
    if m == 0 {
        if lp.objective.iter().any(|&c| c < -COST_TOL) {
            return Ok(LpOutcome::Unbounded);
        }
        return Ok(LpOutcome::Optimal {
            x: vec![0.0; n],
            objective: 0.0,
        });
    }

    // Column layout: structural | slack/surplus (one per inequality) | artificial.
    let mut slack_of = vec![None; m];
    let mut art_of = vec![None; m];
    let mut next = n;
    let mut flipped = vec![false; m];
    let mut relations = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut rel = c.relation;
        if c.rhs < 0.0 {
            flipped[i] = true;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        relations.push(rel);
        if rel != Relation::Eq {
            slack_of[i] = Some(next);
            next += 1;
        }
    }
    for (i, rel) in relations.iter().enumerate() {
        if *rel != Relation::Le {
            art_of[i] = Some(next);
            next += 1;
        }
    }
    let cols = next;
    let w = cols + 1;
    let mut a = vec![0.0; m * w];
    let mut basis = vec![0; m];
    for (i, c) in lp.constraints.iter().enumerate() {
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        for &(j, v) in &c.coeffs {
            a[i * w + j] += sign * v;
        }
        a[i * w + cols] = sign * c.rhs;
        if let Some(s) = slack_of[i] {
            a[i * w + s] = if relations[i] == Relation::Le {
                1.0
            } else {
                -1.0
            };
        }
        basis[i] = art_of[i].or(slack_of[i]).expect("row has a basic column");
        if let Some(art) = art_of[i] {
            a[i * w + art] = 1.0;
        }
    }

    let mut t = Tableau {
        rows: m,
        cols,
        a,
        basis,
        bland,
        degenerate_run: 0,
        iterations: 0,
        max_iterations: 50 * (m + cols) + 1000,
    };
    let is_art: Vec<bool> = (0..cols)
        .map(|c| c >= cols - art_of.iter().flatten().count())
        .collect();

    // Phase 1: minimise the sum of artificials.
    if art_of.iter().any(Option::is_some) {
        let mut cost = vec![0.0; w];
        for c in 0..cols {
            if is_art[c] {
                cost[c] = 1.0;
            }
        }
        for r in 0..m {
            if is_art[t.basis[r]] {
                for c in 0..w {
                    cost[c] -= t.a[r * w + c];
                }
            }
        }
        let all = vec![true; cols];
        t.run(&mut cost, &all)?;
        let infeasibility = -cost[cols];
        let scale = 1.0
            + lp.constraints
                .iter()
                .map(|c| c.rhs.abs())
                .fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive artificials out of the basis where possible.
        let mut r = 0;
        while r < t.rows {
            if is_art[t.basis[r]] {
                let replacement = (0..cols).find(|&c| !is_art[c] && t.at(r, c).abs() > PIVOT_TOL);
                match replacement {
                    Some(c) => {
                        let mut dummy = vec![0.0; w];
                        t.pivot(r, c, &mut dummy);
                    }
                    None => {
                        // redundant row
                        t.a.drain(r * w..(r + 1) * w);
                        t.basis.remove(r);
                        t.rows -= 1;
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // Phase 2.
    let allowed: Vec<bool> = (0..cols).map(|c| !is_art[c]).collect();
    let mut cost = vec![0.0; w];
    cost[..n].copy_from_slice(&lp.objective);
    for r in 0..t.rows {
        let b = t.basis[r];
        let f = cost[b];
        if f != 0.0 {
            for c in 0..w {
                cost[c] -= f * t.a[r * w + c];
            }
        }
    }
    t.degenerate_run = 0;
    if !t.run(&mut cost, &allowed)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; n];
    for r in 0..t.rows {
        let b = t.basis[r];
        if b < n {
            x[b] = t.rhs(r).max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, objective })
}
