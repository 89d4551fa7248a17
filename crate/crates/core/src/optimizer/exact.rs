use super::greedy::covers;
use super::plan::build_plan;
use super::{DeploymentPlan, DeploymentProblem, OptimizeError, SolverStatus};
use std::cmp::Ordering;

pub const MAX_EXACT_SITES: usize = 20;
const MAX_ASSIGNMENTS: f64 = 5e6;

/// Exhaustive oracle: walks all site subsets in order of cost (ties to the
/// lexicographically smallest id set) and returns the first that can serve
/// every node.
pub fn enumerate_exact(problem: &DeploymentProblem) -> Result<DeploymentPlan, OptimizeError> {
    let m = problem.sites.len();
    if m > MAX_EXACT_SITES {
        return Err(OptimizeError::TooManySites {
            sites: m,
            limit: MAX_EXACT_SITES,
        });
    }
    if problem.single_association {
        let combos: f64 = problem
            .node_links
            .iter()
            .map(|ls| ls.len() as f64)
            .product();
        if combos > MAX_ASSIGNMENTS {
            return Err(OptimizeError::TooManyAssignments(combos));
        }
    }
    if problem.nodes.is_empty() {
        return build_plan(problem, &vec![false; m], Some(&[]), SolverStatus::Optimal);
    }

    // rank[j] = position of site j when sites are sorted by id
    let mut by_id: Vec<usize> = (0..m).collect();
    by_id.sort_by_key(|&j| problem.sites[j].id);
    let mut rank = vec![0; m];
    for (r, &j) in by_id.iter().enumerate() {
        rank[j] = r;
    }
    let node_masks: Vec<u32> = problem
        .node_links
        .iter()
        .map(|ls| {
            ls.iter()
                .fold(0u32, |acc, &l| acc | 1 << rank[problem.links[l].site])
        })
        .collect();
    let cost_of_mask = |mask: u32| -> f64 {
        (0..m)
            .filter(|r| mask >> r & 1 == 1)
            .map(|r| problem.sites[by_id[r]].cost_units)
            .sum()
    };

    let mut subsets: Vec<(f64, u32)> = (0u32..1 << m)
        .map(|mask| (cost_of_mask(mask), mask))
        .collect();
    subsets.sort_by(|a, b| cmp_cost(a.0, b.0).then_with(|| lex_cmp(a.1, b.1)));

    for &(cost, mask) in &subsets {
        if !problem.within_budget(cost) || node_masks.iter().any(|&nm| nm & mask == 0) {
            continue;
        }
        let open = open_from_mask(mask, &by_id, m);
        if let Some(witness) = exact_cover(problem, &open)? {
            return build_plan(problem, &open, witness.as_deref(), SolverStatus::Optimal);
        }
    }
    let all = vec![true; m];
    let status = if problem.budget_units.is_some() && exact_cover(problem, &all)?.is_some() {
        SolverStatus::BudgetInfeasible
    } else {
        SolverStatus::Infeasible
    };
    Ok(DeploymentPlan::empty(status))
}

fn open_from_mask(mask: u32, by_id: &[usize], m: usize) -> Vec<bool> {
    let mut open = vec![false; m];
    for (r, &j) in by_id.iter().enumerate() {
        open[j] = mask >> r & 1 == 1;
    }
    open
}

fn cmp_cost(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Lexicographic order of the sorted rank sets encoded by two masks.
fn lex_cmp(a: u32, b: u32) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    let k = (a ^ b).trailing_zeros();
    let (with, without) = if a >> k & 1 == 1 { (a, b) } else { (b, a) };
    let higher = !((1u64 << (k + 1)) - 1) as u32;
    // the set lacking k is smaller only when it has nothing left after k
    let with_first = without & higher != 0;
    match (with == a, with_first) {
        (true, true) | (false, false) => Ordering::Less,
        _ => Ordering::Greater,
    }
}

/// Exact feasibility of an opened set: the bandwidth LP for split service,
/// a depth-first search over assignments under single association.
fn exact_cover(
    problem: &DeploymentProblem,
    open: &[bool],
) -> Result<Option<Option<Vec<usize>>>, OptimizeError> {
    if !problem.single_association {
        return covers(problem, open);
    }
    let mut used = vec![0.0; problem.sites.len()];
    let mut assign = Vec::with_capacity(problem.nodes.len());
    Ok(dfs(problem, open, 0, &mut used, &mut assign).then_some(Some(assign)))
}

fn dfs(
    problem: &DeploymentProblem,
    open: &[bool],
    i: usize,
    used: &mut [f64],
    assign: &mut Vec<usize>,
) -> bool {
    if i == problem.nodes.len() {
        return true;
    }
    for &l in &problem.node_links[i] {
        let j = problem.links[l].site;
        let share = problem.assignment_share(l);
        if !open[j] || used[j] + share > 1.0 + 1e-12 {
            continue;
        }
        used[j] += share;
        assign.push(l);
        if dfs(problem, open, i + 1, used, assign) {
            return true;
        }
        assign.pop();
        used[j] -= share;
    }
    false
}
