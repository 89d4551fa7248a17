//! The planning stages as file-to-file steps over a workspace directory.
//! The CLI subcommands and the agent tools both call these.

use crate::geodata::{
    extract_demand_nodes, generate_candidate_sites, load_grid, load_towers, CandidateSite,
    DemandNode, GeoError, GeoGrid, SiteKind,
};
use crate::optimizer::{
    branch_and_bound_solve, formulate, DeploymentPlan, OptimizeError, SolverStatus,
};
use crate::propagation::{
    build_link_matrix, links_from_csv, links_to_csv, LinkRecord, PropagationError,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::verifier::{
    compare_plans, comparison_csv, parse_plan, plan_geojson, verify_plan, ComparisonRow,
    VerificationReport, VerifyError,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEMAND_FILE: &str = "demand.json";
pub const CANDIDATES_FILE: &str = "candidates.json";
pub const LINKS_FILE: &str = "links.csv";
pub const PLAN_FILE: &str = "plan.json";
pub const VERIFY_FILE: &str = "verify.json";
pub const GEOJSON_FILE: &str = "verify.geojson";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("missing {path}: {hint}")]
    MissingArtifact { path: PathBuf, hint: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// Directory holding one run's artifacts.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dir: PathBuf,
}

impl Workspace {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| PipelineError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Self { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, PipelineError> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|source| PipelineError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, PipelineError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serialises");
        text.push('\n');
        self.write(name, &text)
    }

    fn read(&self, name: &str, hint: &'static str) -> Result<String, PipelineError> {
        let path = self.path(name);
        if !path.exists() {
            return Err(PipelineError::MissingArtifact { path, hint });
        }
        std::fs::read_to_string(&path).map_err(|source| PipelineError::Io { path, source })
    }

    fn read_json<T: for<'de> Deserialize<'de>>(
        &self,
        name: &str,
        hint: &'static str,
    ) -> Result<T, PipelineError> {
        let text = self.read(name, hint)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Format {
            path: self.path(name),
            msg: e.to_string(),
        })
    }
}

const DEMAND_HINT: &str = "run the demand stage first";
const LINKS_HINT: &str = "run the links stage first";
const PLAN_HINT: &str = "run the optimize stage first or pass a plan file";

pub fn load_terrain(scenario: &Scenario) -> Result<GeoGrid, PipelineError> {
    Ok(load_grid(&scenario.terrain_path)?)
}

/// Demand nodes straight from the scenario's population raster.
pub fn scenario_nodes(scenario: &Scenario) -> Result<Vec<DemandNode>, PipelineError> {
    let pop = load_grid(&scenario.population_path)?;
    Ok(extract_demand_nodes(
        &pop,
        &scenario.region,
        &scenario.demand_config(),
    )?)
}

pub fn scenario_sites(
    scenario: &Scenario,
    terrain: &GeoGrid,
) -> Result<Vec<CandidateSite>, PipelineError> {
    let towers = match &scenario.towers_path {
        Some(p) => load_towers(p, &scenario.region)?,
        None => Vec::new(),
    };
    Ok(generate_candidate_sites(
        &scenario.region,
        terrain,
        &towers,
        &scenario.site_config(),
    )?)
}

/// Re-applies the scenario's rate floor and unit costs to stored artifacts,
/// so later stages follow parameter changes without regenerating geometry.
fn refresh(scenario: &Scenario, nodes: &mut [DemandNode], sites: &mut [CandidateSite]) {
    let demand = scenario.demand_config();
    for n in nodes {
        n.required_rate_bps = demand.required_rate_bps(n.users);
    }
    let site_cfg = scenario.site_config();
    for s in sites {
        s.cost_units = site_cfg.unit_cost(s.kind, s.from_existing_tower);
        s.tx_power_dbm = site_cfg.tx_power_dbm;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSummary {
    pub demand_nodes: usize,
    pub total_users: u64,
    pub candidate_sites: usize,
    pub tbs_sites: usize,
    pub hap_sites: usize,
    pub tower_sites: usize,
}

/// Writes `demand.json` and `candidates.json`.
pub fn run_demand(scenario: &Scenario, ws: &Workspace) -> Result<DemandSummary, PipelineError> {
    let terrain = load_terrain(scenario)?;
    let nodes = scenario_nodes(scenario)?;
    let sites = scenario_sites(scenario, &terrain)?;
    ws.write_json(DEMAND_FILE, &nodes)?;
    ws.write_json(CANDIDATES_FILE, &sites)?;
    Ok(DemandSummary {
        demand_nodes: nodes.len(),
        total_users: nodes.iter().map(|n| n.users).sum(),
        candidate_sites: sites.len(),
        tbs_sites: sites.iter().filter(|s| s.kind == SiteKind::Tbs).count(),
        hap_sites: sites.iter().filter(|s| s.kind == SiteKind::Hap).count(),
        tower_sites: sites.iter().filter(|s| s.from_existing_tower).count(),
    })
}

fn load_inputs(
    scenario: &Scenario,
    ws: &Workspace,
) -> Result<(Vec<DemandNode>, Vec<CandidateSite>), PipelineError> {
    let mut nodes: Vec<DemandNode> = ws.read_json(DEMAND_FILE, DEMAND_HINT)?;
    let mut sites: Vec<CandidateSite> = ws.read_json(CANDIDATES_FILE, DEMAND_HINT)?;
    refresh(scenario, &mut nodes, &mut sites);
    Ok((nodes, sites))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinksSummary {
    pub rows: usize,
    pub feasible_links: usize,
    pub nodes: usize,
    pub sites: usize,
    /// Nodes with no feasible link at all.
    pub uncoverable_nodes: Vec<usize>,
}

/// Writes `links.csv`.
pub fn run_links(scenario: &Scenario, ws: &Workspace) -> Result<LinksSummary, PipelineError> {
    let (nodes, sites) = load_inputs(scenario, ws)?;
    let terrain = load_terrain(scenario)?;
    let links = build_link_matrix(&nodes, &sites, &terrain, &scenario.radio_config())?;
    ws.write(LINKS_FILE, &links_to_csv(&links))?;
    let uncoverable_nodes = nodes
        .iter()
        .filter(|n| !links.iter().any(|l| l.node_id == n.id && l.feasible))
        .map(|n| n.id)
        .collect();
    Ok(LinksSummary {
        rows: links.len(),
        feasible_links: links.iter().filter(|l| l.feasible).count(),
        nodes: nodes.len(),
        sites: sites.len(),
        uncoverable_nodes,
    })
}

pub fn read_links(ws: &Workspace) -> Result<Vec<LinkRecord>, PipelineError> {
    let text = ws.read(LINKS_FILE, LINKS_HINT)?;
    Ok(links_from_csv(&text)?)
}

/// Formulates and solves the deployment problem, writing `plan.json`. An
/// infeasible problem still yields a plan file carrying the status.
pub fn run_optimize(scenario: &Scenario, ws: &Workspace) -> Result<DeploymentPlan, PipelineError> {
    let (nodes, sites) = load_inputs(scenario, ws)?;
    let links = read_links(ws)?;
    let cfg = scenario.optimizer_config();
    let plan = match formulate(&nodes, &sites, &links, scenario.bandwidth_hz, &cfg) {
        Ok(problem) => branch_and_bound_solve(&problem, cfg.gap, cfg.time_limit_s)?.0,
        Err(
            e
            @ (OptimizeError::UncoverableNodes(_) | OptimizeError::BudgetBelowCheapestSite { .. }),
        ) => {
            log::warn!("{e}");
            DeploymentPlan::empty(e.status())
        }
        Err(e) => return Err(e.into()),
    };
    ws.write_json(PLAN_FILE, &plan)?;
    Ok(plan)
}

pub fn read_plan(path: &Path) -> Result<DeploymentPlan, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact {
            path: path.to_path_buf(),
            hint: PLAN_HINT,
        });
    }
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_plan(&text)?)
}

/// Verifies a plan against the scenario, writing `verify.json` and
/// `verify.geojson`. Demand nodes are re-extracted from the scenario rather
/// than read from the workspace.
pub fn run_verify(
    scenario: &Scenario,
    ws: &Workspace,
    plan_path: &Path,
) -> Result<VerificationReport, PipelineError> {
    let plan = read_plan(plan_path)?;
    let report = verify_scenario_plan(scenario, &plan)?;
    let nodes = scenario_nodes(scenario)?;
    ws.write_json(VERIFY_FILE, &report)?;
    ws.write_json(
        GEOJSON_FILE,
        &plan_geojson(&plan, &report, &nodes, &scenario.site_config()),
    )?;
    Ok(report)
}

pub fn verify_scenario_plan(
    scenario: &Scenario,
    plan: &DeploymentPlan,
) -> Result<VerificationReport, PipelineError> {
    let terrain = load_terrain(scenario)?;
    let nodes = scenario_nodes(scenario)?;
    Ok(verify_plan(
        plan,
        &nodes,
        &terrain,
        &scenario.radio_config(),
        &scenario.site_config(),
    )?)
}

/// Verifies each plan file and writes `comparison.csv`. Rows are labelled by
/// file stem.
pub fn run_compare(
    scenario: &Scenario,
    ws: &Workspace,
    plans: &[PathBuf],
) -> Result<Vec<ComparisonRow>, PipelineError> {
    let mut entries = Vec::with_capacity(plans.len());
    for p in plans {
        let plan = read_plan(p)?;
        let report = verify_scenario_plan(scenario, &plan)?;
        let label = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        entries.push((label, report, plan.average_claimed_rate_bps));
    }
    let rows = compare_plans(&entries);
    ws.write(COMPARISON_FILE, &comparison_csv(&rows))?;
    Ok(rows)
}

/// Whether a solved plan should count as success.
pub fn plan_succeeded(plan: &DeploymentPlan) -> bool {
    plan.status.is_some_and(SolverStatus::has_plan)
}
