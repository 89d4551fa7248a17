use super::relaxation::{solve_relaxation, Fixings, Objective, RelaxationOutcome};
use super::{DeploymentProblem, OptimizeError};
use crate::geodata::{CandidateSite, SiteKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    Feasible,
    Infeasible,
    BudgetInfeasible,
}

impl SolverStatus {
    pub fn has_plan(self) -> bool {
        matches!(self, SolverStatus::Optimal | SolverStatus::Feasible)
    }
}

/// An opened site as written to plan files. External plans may carry only
/// `kind`, `lat` and `lon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSite {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    pub kind: SiteKind,
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default)]
    pub from_existing_tower: bool,
}

impl From<&CandidateSite> for PlanSite {
    fn from(s: &CandidateSite) -> Self {
        Self {
            id: Some(s.id),
            kind: s.kind,
            lat: s.point.lat,
            lon: s.point.lon,
            alt_m: Some(s.point.alt_m),
            cost: Some(s.cost_units),
            from_existing_tower: s.from_existing_tower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub node_id: usize,
    pub site_id: usize,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub lp_bound: Option<f64>,
    pub incumbent_cost: Option<f64>,
    pub gap: Option<f64>,
    pub nodes_explored: usize,
    pub wall_time_s: f64,
    #[serde(default)]
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    #[serde(default)]
    pub status: Option<SolverStatus>,
    pub opened_sites: Vec<PlanSite>,
    #[serde(default)]
    pub allocations: Vec<Allocation>,
    #[serde(default)]
    pub total_cost_units: f64,
    #[serde(default)]
    pub claimed_rates_bps: BTreeMap<usize, f64>,
    #[serde(default)]
    pub average_claimed_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SolveReport>,
}

impl DeploymentPlan {
    pub fn empty(status: SolverStatus) -> Self {
        Self {
            status: Some(status),
            opened_sites: Vec::new(),
            allocations: Vec::new(),
            total_cost_units: 0.0,
            claimed_rates_bps: BTreeMap::new(),
            average_claimed_rate_bps: None,
            report: None,
        }
    }

    pub fn opened_ids(&self) -> Vec<usize> {
        self.opened_sites.iter().filter_map(|s| s.id).collect()
    }

    pub fn count_kind(&self, kind: SiteKind) -> usize {
        self.opened_sites.iter().filter(|s| s.kind == kind).count()
    }
}

/// Per-node rates from explicit allocations plus the residual rule: whatever
/// bandwidth a site leaves unallocated is split equally among the nodes it
/// serves, each converting its share at its own spectral efficiency.
///
/// `allocations` holds `(node_id, site_key, bandwidth_hz, se)`.
pub fn residual_rates(
    bandwidth_hz: f64,
    allocations: &[(usize, usize, f64, f64)],
) -> BTreeMap<usize, f64> {
    let mut used: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for &(_, site, b, _) in allocations {
        let e = used.entry(site).or_insert((0.0, 0));
        e.0 += b;
        e.1 += 1;
    }
    let mut rates = BTreeMap::new();
    for &(node, site, b, se) in allocations {
        let (total, served) = used[&site];
        let share = (bandwidth_hz - total).max(0.0) / served as f64;
        *rates.entry(node).or_insert(0.0) += (b + share) * se;
    }
    rates
}

/// Turns an opened-site set into a plan. Without `assignment` the bandwidth is
/// re-solved as an LP minimising total allocated bandwidth; with it (single
/// association) each node takes `R / se` on its assigned link.
pub(crate) fn build_plan(
    problem: &DeploymentProblem,
    open: &[bool],
    assignment: Option<&[usize]>,
    status: SolverStatus,
) -> Result<DeploymentPlan, OptimizeError> {
    let b = problem.bandwidth_hz;
    let mut bw = vec![0.0; problem.links.len()];
    match assignment {
        Some(assign) => {
            for &l in assign {
                bw[l] =
                    problem.nodes[problem.links[l].node].required_rate_bps / problem.links[l].se;
            }
        }
        None => {
            let fixings = Fixings {
                sites: open.iter().map(|&o| Some(o)).collect(),
                links: vec![None; problem.links.len()],
            };
            let split = DeploymentProblem {
                single_association: false,
                budget_units: None,
                ..problem.clone()
            };
            match solve_relaxation(&split, &fixings, Objective::Bandwidth)? {
                RelaxationOutcome::Feasible(sol) => bw = sol.bandwidth_hz,
                RelaxationOutcome::Infeasible => {
                    return Err(OptimizeError::InvalidProblem(
                        "opened sites cannot serve the demand".into(),
                    ));
                }
            }
            // lift tiny LP round-off shortfalls to the exact requirement
            for (i, ls) in problem.node_links.iter().enumerate() {
                let got: f64 = ls.iter().map(|&l| bw[l] * problem.links[l].se).sum();
                let need = problem.nodes[i].required_rate_bps;
                if got < need && got > 0.0 {
                    let f = need / got;
                    for &l in ls {
                        bw[l] *= f;
                    }
                }
            }
        }
    }

    let mut allocations = Vec::new();
    let mut tuples = Vec::new();
    for (l, link) in problem.links.iter().enumerate() {
        if open[link.site] && bw[l] > 1e-12 * b {
            let node_id = problem.nodes[link.node].id;
            let site_id = problem.sites[link.site].id;
            allocations.push(Allocation {
                node_id,
                site_id,
                bandwidth_hz: bw[l],
            });
            tuples.push((node_id, site_id, bw[l], link.se));
        }
    }
    let mut claimed: BTreeMap<usize, f64> = problem.nodes.iter().map(|n| (n.id, 0.0)).collect();
    for (node, r) in residual_rates(b, &tuples) {
        claimed.insert(node, r);
    }
    let average =
        (!claimed.is_empty()).then(|| claimed.values().sum::<f64>() / claimed.len() as f64);
    Ok(DeploymentPlan {
        status: Some(status),
        opened_sites: problem
            .sites
            .iter()
            .zip(open)
            .filter(|(_, o)| **o)
            .map(|(s, _)| PlanSite::from(s))
            .collect(),
        allocations,
        total_cost_units: problem.cost_of(open),
        claimed_rates_bps: claimed,
        average_claimed_rate_bps: average,
        report: None,
    })
}
