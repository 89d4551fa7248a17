use super::lp::{self, LinearProgram, LpOutcome, Relation};
use super::{DeploymentProblem, OptimizeError};

/// Partial assignment of the binaries: `Some(true)` fixes to 1, `Some(false)`
/// to 0, `None` leaves the variable relaxed to [0, 1]. `links` is only
/// consulted under single association.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fixings {
    pub sites: Vec<Option<bool>>,
    pub links: Vec<Option<bool>>,
}

impl Fixings {
    pub fn free(problem: &DeploymentProblem) -> Self {
        Self {
            sites: vec![None; problem.sites.len()],
            links: vec![None; problem.links.len()],
        }
    }

    /// Every site fixed: open where `open[j]`, closed elsewhere.
    pub fn sites_fixed(problem: &DeploymentProblem, open: &[bool]) -> Self {
        Self {
            sites: open.iter().map(|&o| Some(o)).collect(),
            links: vec![None; problem.links.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    /// Cost of the relaxed solution, including sites fixed open.
    pub objective: f64,
    /// Per site, in [0, 1].
    pub y: Vec<f64>,
    /// Per problem link: bandwidth fraction of B (split) or assignment
    /// fraction (single association).
    pub x: Vec<f64>,
    /// Per problem link, Hz.
    pub bandwidth_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationOutcome {
    Feasible(RelaxedSolution),
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    /// Site cost; the LP relaxation proper.
    Cost,
    /// Total allocated bandwidth; used to pick the allocation once sites are fixed.
    Bandwidth,
}

/// LP relaxation of the deployment MILP under `fixed`. The objective is a
/// lower bound on every integer completion of the fixing.
pub fn solve_lp_relaxation(
    problem: &DeploymentProblem,
    fixed: &Fixings,
) -> Result<RelaxationOutcome, OptimizeError> {
    solve_relaxation(problem, fixed, Objective::Cost)
}

pub(crate) fn solve_relaxation(
    problem: &DeploymentProblem,
    fixed: &Fixings,
    objective: Objective,
) -> Result<RelaxationOutcome, OptimizeError> {
    let n_sites = problem.sites.len();
    let n_links = problem.links.len();
    if fixed.sites.len() != n_sites || fixed.links.len() != n_links {
        return Err(OptimizeError::InvalidProblem(
            "fixing dimensions do not match the problem".into(),
        ));
    }
    let single = problem.single_association;

    let mut usable = vec![true; n_links];
    for (l, link) in problem.links.iter().enumerate() {
        if fixed.sites[link.site] == Some(false) || single && fixed.links[l] == Some(false) {
            usable[l] = false;
        }
    }
    if single {
        for node_links in &problem.node_links {
            let forced: Vec<usize> = node_links
                .iter()
                .copied()
                .filter(|&l| fixed.links[l] == Some(true))
                .collect();
            match forced.len() {
                0 => {}
                1 => {
                    if !usable[forced[0]] {
                        return Ok(RelaxationOutcome::Infeasible);
                    }
                    for &l in node_links {
                        usable[l] = l == forced[0];
                    }
                }
                _ => return Ok(RelaxationOutcome::Infeasible),
            }
        }
    }
    if problem
        .node_links
        .iter()
        .any(|ls| !ls.iter().any(|&l| usable[l]))
    {
        return Ok(RelaxationOutcome::Infeasible);
    }

    // variable layout: usable links, then free sites that have usable links
    let mut link_var = vec![None; n_links];
    let mut n_vars = 0;
    for l in 0..n_links {
        if usable[l] {
            link_var[l] = Some(n_vars);
            n_vars += 1;
        }
    }
    let mut site_var = vec![None; n_sites];
    for j in 0..n_sites {
        if fixed.sites[j].is_none() && problem.site_links[j].iter().any(|&l| usable[l]) {
            site_var[j] = Some(n_vars);
            n_vars += 1;
        }
    }

    let cost_scale = problem
        .sites
        .iter()
        .map(|s| s.cost_units)
        .fold(0.0, f64::max)
        .max(1e-12);
    let fixed_cost: f64 = (0..n_sites)
        .filter(|&j| fixed.sites[j] == Some(true))
        .map(|j| problem.sites[j].cost_units)
        .sum();
    let link_weight = |l: usize| {
        if single {
            problem.assignment_share(l)
        } else {
            1.0
        }
    };

    let mut prog = LinearProgram::new(n_vars);
    match objective {
        Objective::Cost => {
            for j in 0..n_sites {
                if let Some(v) = site_var[j] {
                    prog.objective[v] = problem.sites[j].cost_units / cost_scale;
                }
            }
        }
        Objective::Bandwidth => {
            for l in 0..n_links {
                if let Some(v) = link_var[l] {
                    prog.objective[v] = link_weight(l);
                }
            }
        }
    }

    for (i, node_links) in problem.node_links.iter().enumerate() {
        let coeffs: Vec<(usize, f64)> = node_links
            .iter()
            .filter_map(|&l| {
                link_var[l].map(|v| (v, if single { 1.0 } else { problem.links[l].se }))
            })
            .collect();
        if single {
            prog.add(coeffs, Relation::Eq, 1.0);
        } else {
            prog.add(coeffs, Relation::Ge, problem.demand_fraction(i));
        }
    }
    for j in 0..n_sites {
        if fixed.sites[j] == Some(false) {
            continue;
        }
        let mut coeffs: Vec<(usize, f64)> = problem.site_links[j]
            .iter()
            .filter_map(|&l| link_var[l].map(|v| (v, link_weight(l))))
            .collect();
        if coeffs.is_empty() {
            continue;
        }
        match site_var[j] {
            Some(y) => {
                coeffs.push((y, -1.0));
                prog.add(coeffs, Relation::Le, 0.0);
                prog.add(vec![(y, 1.0)], Relation::Le, 1.0);
            }
            None => prog.add(coeffs, Relation::Le, 1.0),
        }
    }
    if let Some(budget) = problem.budget_units {
        let remaining = budget - fixed_cost;
        if remaining < -1e-9 * budget.abs().max(1.0) {
            return Ok(RelaxationOutcome::Infeasible);
        }
        let coeffs: Vec<(usize, f64)> = (0..n_sites)
            .filter_map(|j| site_var[j].map(|v| (v, problem.sites[j].cost_units / cost_scale)))
            .collect();
        if !coeffs.is_empty() {
            prog.add(coeffs, Relation::Le, remaining.max(0.0) / cost_scale);
        }
    }

    let x_all = match lp::solve(&prog)? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => return Ok(RelaxationOutcome::Infeasible),
        LpOutcome::Unbounded => {
            return Err(OptimizeError::InvalidProblem(
                "relaxation reported unbounded".into(),
            ));
        }
    };

    let y: Vec<f64> = (0..n_sites)
        .map(|j| match (fixed.sites[j], site_var[j]) {
            (Some(true), _) => 1.0,
            (Some(false), _) => 0.0,
            (None, Some(v)) => x_all[v].clamp(0.0, 1.0),
            (None, None) => 0.0,
        })
        .collect();
    let x: Vec<f64> = (0..n_links)
        .map(|l| link_var[l].map_or(0.0, |v| x_all[v]))
        .collect();
    let bandwidth_hz = (0..n_links)
        .map(|l| x[l] * link_weight(l) * problem.bandwidth_hz)
        .collect();
    let objective = fixed_cost
        + (0..n_sites)
            .filter(|&j| fixed.sites[j].is_none())
            .map(|j| problem.sites[j].cost_units * y[j])
            .sum::<f64>();
    Ok(RelaxationOutcome::Feasible(RelaxedSolution {
        objective,
        y,
        x,
        bandwidth_hz,
    }))
}
