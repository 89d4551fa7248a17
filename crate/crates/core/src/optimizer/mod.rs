//! Cost-minimal site selection.
//!
//! The deployment problem is a MILP: binary `y_j` opens candidate site `j`
//! at cost `c_j`, continuous `b_ij >= 0` is the bandwidth site `j` gives to
//! node `i` over a feasible link with spectral efficiency `se_ij`.
//!
//! ```text
//! minimise    sum_j c_j y_j
//! subject to  sum_j se_ij b_ij >= R_i          for every node i
//!             sum_i b_ij       <= B y_j        for every site j
//!             sum_j c_j y_j    <= budget       (optional)
//! ```
//!
//! With single association enabled each node is served by exactly one site
//! and `b_ij = R_i / se_ij * x_ij` with binary `x_ij`.
//!
//! [`branch_and_bound_solve`] is the production solver. [`enumerate_exact`]
//! and [`greedy_plan`] are an exhaustive oracle and a baseline.

mod bnb;
mod exact;
mod greedy;
pub mod lp;
mod plan;
mod relaxation;

pub use bnb::branch_and_bound_solve;
pub use exact::{enumerate_exact, MAX_EXACT_SITES};
pub use greedy::greedy_plan;
pub use plan::{residual_rates, Allocation, DeploymentPlan, PlanSite, SolveReport, SolverStatus};
pub use relaxation::{solve_lp_relaxation, Fixings, RelaxationOutcome, RelaxedSolution};

use crate::geodata::{CandidateSite, DemandNode};
use crate::propagation::LinkRecord;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    #[error("nodes without any feasible link: {0:?}")]
    UncoverableNodes(Vec<usize>),
    #[error("budget {budget} is below the cheapest candidate cost {cheapest}")]
    BudgetBelowCheapestSite { budget: f64, cheapest: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("exhaustive search refuses {sites} sites (limit {limit})")]
    TooManySites { sites: usize, limit: usize },
    #[error("exhaustive assignment search too large ({0} combinations)")]
    TooManyAssignments(f64),
    #[error("LP solver failure: {0}")]
    Numerical(#[from] lp::LpError),
}

impl OptimizeError {
    pub fn status(&self) -> SolverStatus {
        match self {
            OptimizeError::BudgetBelowCheapestSite { .. } => SolverStatus::BudgetInfeasible,
            _ => SolverStatus::Infeasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Relative optimality gap at which branch-and-bound stops.
    pub gap: f64,
    pub time_limit_s: f64,
    pub budget_units: Option<f64>,
    pub single_association: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            time_limit_s: 300.0,
            budget_units: None,
            single_association: false,
        }
    }
}

/// One usable link, with node and site referenced by position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemLink {
    pub node: usize,
    pub site: usize,
    pub se: f64,
}

#[derive(Debug, Clone)]
pub struct DeploymentProblem {
    pub nodes: Vec<DemandNode>,
    pub sites: Vec<CandidateSite>,
    /// Feasible links only, node-major in input order.
    pub links: Vec<ProblemLink>,
    pub bandwidth_hz: f64,
    pub budget_units: Option<f64>,
    pub single_association: bool,
    pub(crate) node_links: Vec<Vec<usize>>,
    pub(crate) site_links: Vec<Vec<usize>>,
}

impl DeploymentProblem {
    pub fn n_binaries(&self) -> usize {
        self.sites.len()
            + if self.single_association {
                self.links.len()
            } else {
                0
            }
    }

    pub fn n_continuous(&self) -> usize {
        if self.single_association {
            0
        } else {
            self.links.len()
        }
    }

    /// Required rate of node `i` as a fraction of one site's bandwidth times
    /// spectral efficiency, i.e. `R_i / B`.
    pub(crate) fn demand_fraction(&self, node: usize) -> f64 {
        self.nodes[node].required_rate_bps / self.bandwidth_hz
    }

    /// Share of a full site's bandwidth link `l` needs under single association.
    pub(crate) fn assignment_share(&self, l: usize) -> f64 {
        let link = &self.links[l];
        self.demand_fraction(link.node) / link.se
    }

    pub(crate) fn cost_of(&self, open: &[bool]) -> f64 {
        open.iter()
            .zip(&self.sites)
            .filter(|(o, _)| **o)
            .fold(0.0, |acc, (_, s)| acc + s.cost_units)
    }

    pub(crate) fn within_budget(&self, cost: f64) -> bool {
        self.budget_units
            .is_none_or(|b| cost <= b * (1.0 + 1e-9) + 1e-9)
    }
}

/// Builds the site-selection problem from a link matrix.
pub fn formulate(
    nodes: &[DemandNode],
    sites: &[CandidateSite],
    links: &[LinkRecord],
    bandwidth_hz: f64,
    cfg: &OptimizerConfig,
) -> Result<DeploymentProblem, OptimizeError> {
    if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
        return Err(OptimizeError::InvalidProblem(format!(
            "bandwidth {bandwidth_hz} must be > 0"
        )));
    }
    if let Some(n) = nodes
        .iter()
        .find(|n| !(n.required_rate_bps > 0.0 && n.required_rate_bps.is_finite()))
    {
        return Err(OptimizeError::InvalidProblem(format!(
            "node {} has non-positive required rate {}",
            n.id, n.required_rate_bps
        )));
    }
    if let Some(s) = sites
        .iter()
        .find(|s| !(s.cost_units >= 0.0 && s.cost_units.is_finite()))
    {
        return Err(OptimizeError::InvalidProblem(format!(
            "site {} has invalid cost {}",
            s.id, s.cost_units
        )));
    }
    let node_pos: HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let site_pos: HashMap<usize, usize> =
        sites.iter().enumerate().map(|(j, s)| (s.id, j)).collect();
    if node_pos.len() != nodes.len() || site_pos.len() != sites.len() {
        return Err(OptimizeError::InvalidProblem(
            "duplicate node or site ids".into(),
        ));
    }

    let mut problem_links = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for l in links {
        let (Some(&node), Some(&site)) = (node_pos.get(&l.node_id), site_pos.get(&l.site_id))
        else {
            return Err(OptimizeError::InvalidProblem(format!(
                "link references unknown node {} or site {}",
                l.node_id, l.site_id
            )));
        };
        if !seen.insert((node, site)) {
            return Err(OptimizeError::InvalidProblem(format!(
                "duplicate link node {} -> site {}",
                l.node_id, l.site_id
            )));
        }
        if !l.feasible || !(l.spectral_efficiency_bps_hz > 0.0) {
            continue;
        }
        let se = l.spectral_efficiency_bps_hz;
        // a single-association link that needs more than one site's bandwidth is unusable
        if cfg.single_association && nodes[node].required_rate_bps / (bandwidth_hz * se) > 1.0 {
            continue;
        }
        problem_links.push(ProblemLink { node, site, se });
    }
    problem_links.sort_by_key(|l| (l.node, l.site));

    let mut node_links = vec![Vec::new(); nodes.len()];
    let mut site_links = vec![Vec::new(); sites.len()];
    for (k, l) in problem_links.iter().enumerate() {
        node_links[l.node].push(k);
        site_links[l.site].push(k);
    }
    let uncovered: Vec<usize> = node_links
        .iter()
        .enumerate()
        .filter(|(_, ls)| ls.is_empty())
        .map(|(i, _)| nodes[i].id)
        .collect();
    if !uncovered.is_empty() {
        return Err(OptimizeError::UncoverableNodes(uncovered));
    }
    if let Some(budget) = cfg.budget_units {
        if !nodes.is_empty() {
            let cheapest = sites
                .iter()
                .map(|s| s.cost_units)
                .fold(f64::INFINITY, f64::min);
            if budget < cheapest {
                return Err(OptimizeError::BudgetBelowCheapestSite { budget, cheapest });
            }
        }
    }
    Ok(DeploymentProblem {
        nodes: nodes.to_vec(),
        sites: sites.to_vec(),
        links: problem_links,
        bandwidth_hz,
        budget_units: cfg.budget_units,
        single_association: cfg.single_association,
        node_links,
        site_links,
    })
}
