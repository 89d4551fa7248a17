use super::lp::{self, LinearProgram, LpOutcome, Relation};
use super::plan::build_plan;
use super::relaxation::{solve_relaxation, Fixings, Objective, RelaxationOutcome};
use super::{DeploymentPlan, DeploymentProblem, OptimizeError, SolverStatus};

/// Total normalised unserved demand when only `open` sites may serve: each
/// node contributes the fraction of its requirement left uncovered by the
/// best bandwidth allocation, so the value lies in `[0, nodes]`.
pub(crate) fn unserved_demand(
    problem: &DeploymentProblem,
    open: &[bool],
) -> Result<f64, OptimizeError> {
    let single = problem.single_association;
    let mut link_var = vec![None; problem.links.len()];
    let mut n_vars = 0;
    for (l, link) in problem.links.iter().enumerate() {
        if open[link.site] {
            link_var[l] = Some(n_vars);
            n_vars += 1;
        }
    }
    let mut constant = 0.0;
    let mut slack_var = vec![None; problem.nodes.len()];
    for (i, ls) in problem.node_links.iter().enumerate() {
        if ls.iter().any(|&l| link_var[l].is_some()) {
            slack_var[i] = Some(n_vars);
            n_vars += 1;
        } else {
            constant += 1.0;
        }
    }
    if n_vars == 0 {
        return Ok(constant);
    }
    let mut prog = LinearProgram::new(n_vars);
    for (i, ls) in problem.node_links.iter().enumerate() {
        let Some(u) = slack_var[i] else { continue };
        prog.objective[u] = 1.0;
        let r = if single {
            1.0
        } else {
            problem.demand_fraction(i)
        };
        let mut coeffs: Vec<(usize, f64)> = ls
            .iter()
            .filter_map(|&l| {
                link_var[l].map(|v| (v, if single { 1.0 } else { problem.links[l].se }))
            })
            .collect();
        coeffs.push((u, r));
        prog.add(coeffs, Relation::Ge, r);
        prog.add(vec![(u, 1.0)], Relation::Le, 1.0);
    }
    for (j, ls) in problem.site_links.iter().enumerate() {
        if !open[j] || ls.is_empty() {
            continue;
        }
        let coeffs = ls
            .iter()
            .filter_map(|&l| {
                link_var[l].map(|v| {
                    (
                        v,
                        if single {
                            problem.assignment_share(l)
                        } else {
                            1.0
                        },
                    )
                })
            })
            .collect();
        prog.add(coeffs, Relation::Le, 1.0);
    }
    match lp::solve(&prog)? {
        LpOutcome::Optimal { objective, .. } => Ok(constant + objective.max(0.0)),
        _ => Err(OptimizeError::InvalidProblem(
            "unserved-demand LP failed".into(),
        )),
    }
}

/// First-fit-decreasing single-association assignment onto `open` sites:
/// nodes by decreasing smallest share, each to its best-se site with room.
/// Returns one link index per node.
pub(crate) fn ffd_assignment(problem: &DeploymentProblem, open: &[bool]) -> Option<Vec<usize>> {
    let n = problem.nodes.len();
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(n);
    for (i, ls) in problem.node_links.iter().enumerate() {
        let min_share = ls
            .iter()
            .filter(|&&l| open[problem.links[l].site])
            .map(|&l| problem.assignment_share(l))
            .fold(f64::INFINITY, f64::min);
        if !min_share.is_finite() {
            return None;
        }
        order.push((i, min_share));
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut used = vec![0.0; problem.sites.len()];
    let mut assign = vec![usize::MAX; n];
    for (i, _) in order {
        let mut cands: Vec<usize> = problem.node_links[i]
            .iter()
            .copied()
            .filter(|&l| open[problem.links[l].site])
            .collect();
        cands.sort_by(|&a, &b| {
            problem.links[b]
                .se
                .total_cmp(&problem.links[a].se)
                .then(problem.links[a].site.cmp(&problem.links[b].site))
        });
        let l = cands
            .into_iter()
            .find(|&l| used[problem.links[l].site] + problem.assignment_share(l) <= 1.0 + 1e-12)?;
        used[problem.links[l].site] += problem.assignment_share(l);
        assign[i] = l;
    }
    Some(assign)
}

/// Whether `open` can serve every node, with a witness assignment under
/// single association.
pub(crate) fn covers(
    problem: &DeploymentProblem,
    open: &[bool],
) -> Result<Option<Option<Vec<usize>>>, OptimizeError> {
    if problem.single_association {
        return Ok(ffd_assignment(problem, open).map(Some));
    }
    let split = DeploymentProblem {
        budget_units: None,
        ..problem.clone()
    };
    let fixed = Fixings::sites_fixed(problem, open);
    Ok(match solve_relaxation(&split, &fixed, Objective::Cost)? {
        RelaxationOutcome::Feasible(_) => Some(None),
        RelaxationOutcome::Infeasible => None,
    })
}

/// Opens sites one at a time, each time the one with the lowest cost per unit
/// of newly servable demand (ties to the lowest site id), until every node is
/// covered.
pub fn greedy_plan(problem: &DeploymentProblem) -> Result<DeploymentPlan, OptimizeError> {
    let m = problem.sites.len();
    let mut open = vec![false; m];
    let assignment = loop {
        if let Some(witness) = covers(problem, &open)? {
            break witness;
        }
        let u = unserved_demand(problem, &open)?;
        let mut best: Option<(f64, usize)> = None;
        for j in 0..m {
            if open[j] || problem.site_links[j].is_empty() {
                continue;
            }
            open[j] = true;
            let reduction = u - unserved_demand(problem, &open)?;
            open[j] = false;
            if reduction <= 1e-9 {
                continue;
            }
            let ratio = problem.sites[j].cost_units / reduction;
            let better = match best {
                None => true,
                Some((r, k)) => {
                    ratio < r * (1.0 - 1e-12)
                        || ratio <= r * (1.0 + 1e-12) && problem.sites[j].id < problem.sites[k].id
                }
            };
            if better {
                best = Some((ratio, j));
            }
        }
        let pick = match best {
            Some((_, j)) => j,
            // fractional cover exists but first-fit packing failed: add capacity
            None if problem.single_association && u <= 1e-9 => {
                match (0..m)
                    .filter(|&j| !open[j] && !problem.site_links[j].is_empty())
                    .min_by(|&a, &b| {
                        problem.sites[a]
                            .cost_units
                            .total_cmp(&problem.sites[b].cost_units)
                            .then(problem.sites[a].id.cmp(&problem.sites[b].id))
                    }) {
                    Some(j) => j,
                    None => return Ok(DeploymentPlan::empty(SolverStatus::Infeasible)),
                }
            }
            None => return Ok(DeploymentPlan::empty(SolverStatus::Infeasible)),
        };
        open[pick] = true;
    };
    if !problem.within_budget(problem.cost_of(&open)) {
        return Ok(DeploymentPlan::empty(SolverStatus::BudgetInfeasible));
    }
    build_plan(
        problem,
        &open,
        assignment.as_deref(),
        SolverStatus::Feasible,
    )
}
