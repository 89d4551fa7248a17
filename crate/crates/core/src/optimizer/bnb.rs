use super::greedy::{covers, unserved_demand};
use super::plan::build_plan;
use super::relaxation::{solve_lp_relaxation, Fixings, RelaxationOutcome, RelaxedSolution};
use super::{DeploymentPlan, DeploymentProblem, OptimizeError, SolveReport, SolverStatus};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

const INTEGRAL_TOL: f64 = 1e-7;

struct Node {
    bound: f64,
    seq: u64,
    fixings: Fixings,
    solution: RelaxedSolution,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: the smallest bound, then the oldest node, pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    cost: f64,
    open: Vec<bool>,
    assignment: Option<Vec<usize>>,
}

struct Search<'a> {
    problem: &'a DeploymentProblem,
    lp_solves: usize,
    seq: u64,
}

impl Search<'_> {
    fn relax(&mut self, fixings: Fixings) -> Result<Option<Node>, OptimizeError> {
        self.lp_solves += 1;
        Ok(match solve_lp_relaxation(self.problem, &fixings)? {
            RelaxationOutcome::Feasible(solution) => {
                self.seq += 1;
                Some(Node {
                    bound: solution.objective,
                    seq: self.seq,
                    fixings,
                    solution,
                })
            }
            RelaxationOutcome::Infeasible => None,
        })
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

fn is_closed(gap_tol: f64, incumbent: f64, bound: f64) -> bool {
    incumbent - bound <= gap_tol * incumbent.abs().max(1e-12)
}

/// Branching variable: the most fractional site, ties to the lowest site id;
/// under single association, then the most fractional link.
enum Branch {
    Site(usize),
    Link(usize),
}

fn pick_branch(problem: &DeploymentProblem, sol: &RelaxedSolution) -> Option<Branch> {
    let mut best: Option<(f64, usize)> = None;
    for (j, &y) in sol.y.iter().enumerate() {
        let f = fractionality(y);
        if f <= INTEGRAL_TOL {
            continue;
        }
        let better = match best {
            None => true,
            Some((bf, bj)) => {
                f > bf + 1e-12
                    || (f - bf).abs() <= 1e-12 && problem.sites[j].id < problem.sites[bj].id
            }
        };
        if better {
            best = Some((f, j));
        }
    }
    if let Some((_, j)) = best {
        return Some(Branch::Site(j));
    }
    if !problem.single_association {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    for (l, &x) in sol.x.iter().enumerate() {
        let f = fractionality(x);
        if f > INTEGRAL_TOL && best.is_none_or(|(bf, _)| f > bf + 1e-12) {
            best = Some((f, l));
        }
    }
    best.map(|(_, l)| Branch::Link(l))
}

/// Rounding heuristic: open every site with `y >= 0.5`, then repeatedly open
/// the site that most reduces unserved demand (ties to the cheaper, then the
/// lower id) until the opened set serves everyone, then close redundant
/// sites from the most expensive down.
fn round_and_repair(
    problem: &DeploymentProblem,
    sol: &RelaxedSolution,
) -> Result<Option<Incumbent>, OptimizeError> {
    let m = problem.sites.len();
    let mut open: Vec<bool> = sol.y.iter().map(|&y| y >= 0.5).collect();
    let mut witness = covers(problem, &open)?;
    while witness.is_none() {
        let u = unserved_demand(problem, &open)?;
        let mut best: Option<(f64, usize)> = None;
        for j in 0..m {
            if open[j] || problem.site_links[j].is_empty() {
                continue;
            }
            open[j] = true;
            let reduction = u - unserved_demand(problem, &open)?;
            open[j] = false;
            let better = match best {
                None => true,
                Some((r, k)) => {
                    let (cj, ck) = (problem.sites[j].cost_units, problem.sites[k].cost_units);
                    reduction > r + 1e-9
                        || (reduction - r).abs() <= 1e-9
                            && (cj < ck || cj == ck && problem.sites[j].id < problem.sites[k].id)
                }
            };
            if better {
                best = Some((reduction, j));
            }
        }
        match best {
            Some((_, j)) => open[j] = true,
            None => return Ok(None),
        }
        witness = covers(problem, &open)?;
    }

    let mut order: Vec<usize> = (0..m).filter(|&j| open[j]).collect();
    order.sort_by(|&a, &b| {
        problem.sites[b]
            .cost_units
            .total_cmp(&problem.sites[a].cost_units)
            .then(problem.sites[b].id.cmp(&problem.sites[a].id))
    });
    for j in order {
        open[j] = false;
        match covers(problem, &open)? {
            Some(w) => witness = Some(w),
            None => open[j] = true,
        }
    }
    let cost = problem.cost_of(&open);
    if !problem.within_budget(cost) {
        return Ok(None);
    }
    Ok(witness.map(|assignment| Incumbent {
        cost,
        open,
        assignment,
    }))
}

fn integral_incumbent(problem: &DeploymentProblem, sol: &RelaxedSolution) -> Incumbent {
    let open: Vec<bool> = sol.y.iter().map(|&y| y > 0.5).collect();
    let assignment = problem.single_association.then(|| {
        problem
            .node_links
            .iter()
            .map(|ls| {
                *ls.iter()
                    .max_by(|&&a, &&b| sol.x[a].total_cmp(&sol.x[b]).then(b.cmp(&a)))
                    .expect("covered node has links")
            })
            .collect()
    });
    Incumbent {
        cost: problem.cost_of(&open),
        open,
        assignment,
    }
}

/// Best-first branch-and-bound over the site binaries (and link binaries
/// under single association). Stops when the relative gap drops to `tol` or
/// the time limit passes.
pub fn branch_and_bound_solve(
    problem: &DeploymentProblem,
    tol: f64,
    time_limit_s: f64,
) -> Result<(DeploymentPlan, SolveReport), OptimizeError> {
    let start = Instant::now();
    let mut search = Search {
        problem,
        lp_solves: 0,
        seq: 0,
    };
    let finish = |plan: DeploymentPlan,
                  lp_bound: f64,
                  inc: Option<f64>,
                  lp_solves: usize,
                  timed_out: bool| {
        let gap = inc.map(|c| {
            if c.abs() < 1e-12 {
                0.0
            } else {
                ((c - lp_bound) / c).max(0.0)
            }
        });
        let report = SolveReport {
            lp_bound: lp_bound.is_finite().then_some(lp_bound),
            incumbent_cost: inc,
            gap,
            nodes_explored: lp_solves,
            wall_time_s: start.elapsed().as_secs_f64(),
            timed_out,
        };
        let mut plan = plan;
        plan.report = Some(report);
        (plan, report)
    };

    let Some(root) = search.relax(Fixings::free(problem))? else {
        let status = infeasibility_status(problem)?;
        return Ok(finish(
            DeploymentPlan::empty(status),
            f64::INFINITY,
            None,
            search.lp_solves,
            false,
        ));
    };
    let root_bound = root.bound;
    let mut incumbent = round_and_repair(problem, &root.solution)?;
    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut global_bound = root_bound;
    let mut timed_out = false;
    let mut closed = false;

    while let Some(node) = heap.pop() {
        global_bound = global_bound.max(node.bound);
        if let Some(inc) = &incumbent {
            if is_closed(tol, inc.cost, node.bound) {
                global_bound = node.bound.min(inc.cost);
                closed = true;
                break;
            }
        }
        if start.elapsed().as_secs_f64() > time_limit_s {
            global_bound = node.bound;
            timed_out = true;
            break;
        }
        let branch = match pick_branch(problem, &node.solution) {
            None => {
                let cand = integral_incumbent(problem, &node.solution);
                if problem.within_budget(cand.cost)
                    && incumbent
                        .as_ref()
                        .is_none_or(|inc| cand.cost < inc.cost - 1e-9)
                {
                    incumbent = Some(cand);
                }
                continue;
            }
            Some(b) => b,
        };
        for value in [false, true] {
            let mut f = node.fixings.clone();
            match branch {
                Branch::Site(j) => f.sites[j] = Some(value),
                Branch::Link(l) => f.links[l] = Some(value),
            }
            if let Some(child) = search.relax(f)? {
                if incumbent
                    .as_ref()
                    .is_none_or(|inc| !is_closed(tol, inc.cost, child.bound))
                {
                    heap.push(child);
                }
            }
        }
    }
    if !closed && !timed_out {
        // search exhausted: the incumbent is proven optimal
        if let Some(inc) = &incumbent {
            global_bound = inc.cost;
        }
    }

    match incumbent {
        Some(inc) => {
            let status = if timed_out && !is_closed(tol, inc.cost, global_bound) {
                SolverStatus::Feasible
            } else {
                SolverStatus::Optimal
            };
            let plan = build_plan(problem, &inc.open, inc.assignment.as_deref(), status)?;
            Ok(finish(
                plan,
                global_bound,
                Some(inc.cost),
                search.lp_solves,
                timed_out,
            ))
        }
        None => {
            let status = if timed_out {
                SolverStatus::Infeasible
            } else {
                infeasibility_status(problem)?
            };
            Ok(finish(
                DeploymentPlan::empty(status),
                global_bound,
                None,
                search.lp_solves,
                timed_out,
            ))
        }
    }
}

fn infeasibility_status(problem: &DeploymentProblem) -> Result<SolverStatus, OptimizeError> {
    if problem.budget_units.is_none() {
        return Ok(SolverStatus::Infeasible);
    }
    let relaxed = DeploymentProblem {
        budget_units: None,
        ..problem.clone()
    };
    let (plan, _) = branch_and_bound_solve(&relaxed, 1e-6, f64::INFINITY)?;
    Ok(if plan.status.is_some_and(SolverStatus::has_plan) {
        SolverStatus::BudgetInfeasible
    } else {
        SolverStatus::Infeasible
    })
}
