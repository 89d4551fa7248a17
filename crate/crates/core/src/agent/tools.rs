use super::schema::{check_tool_schema, validate};
use crate::geodata::{Region, SiteKind};
use crate::pipeline::{
    self, PipelineError, Workspace, CANDIDATES_FILE, DEMAND_FILE, LINKS_FILE, PLAN_FILE,
    VERIFY_FILE,
};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Component, Path};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("tool `{0}` is already registered")]
    Duplicate(String),
    #[error("tool `{name}` has an unsupported schema: {msg}")]
    InvalidSchema { name: String, msg: String },
    #[error("missing link matrix: call network_analysis first")]
    MissingLinkMatrix,
    #[error("missing demand nodes: call geographic_data_collection first")]
    MissingDemand,
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Mutable state the planning tools share across one agent run.
pub struct ToolContext {
    pub scenario: Scenario,
    pub workspace: Workspace,
}

pub trait Tool: Send + Sync {
    fn spec(&self) -> ToolSpec;
    fn call(&self, args: &Value, ctx: &mut ToolContext) -> Result<Value, ToolError>;
}

#[derive(Default)]
pub struct ToolRegistry {
    tools: Vec<(ToolSpec, Box<dyn Tool>)>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Box<dyn Tool>) -> Result<(), ToolError> {
        let spec = tool.spec();
        if self.tools.iter().any(|(s, _)| s.name == spec.name) {
            return Err(ToolError::Duplicate(spec.name));
        }
        check_tool_schema(&spec.parameters).map_err(|msg| ToolError::InvalidSchema {
            name: spec.name.clone(),
            msg,
        })?;
        self.tools.push((spec, tool));
        Ok(())
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.tools.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|(s, _)| s.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Runs a call and always returns an observation. Unknown tools, schema
    /// violations and tool failures become `{"error": ...}` objects; the flag
    /// tells whether the tool itself ran and succeeded.
    pub fn execute(&self, name: &str, args: &Value, ctx: &mut ToolContext) -> (Value, bool) {
        let Some((spec, tool)) = self.tools.iter().find(|(s, _)| s.name == name) else {
            return (
                json!({"error": format!("unknown tool `{name}`"), "available_tools": self.names()}),
                false,
            );
        };
        if let Err(details) = validate(&spec.parameters, args) {
            return (
                json!({"error": format!("invalid arguments for `{name}`"), "details": details}),
                false,
            );
        }
        match tool.call(args, ctx) {
            Ok(v) => (v, true),
            Err(e) => (json!({"error": e.to_string()}), false),
        }
    }
}

/// Registers the four planning tools.
pub fn register_planning_tools(registry: &mut ToolRegistry) -> Result<(), ToolError> {
    registry.register(Box::new(GeographicDataCollection))?;
    registry.register(Box::new(NetworkAnalysis))?;
    registry.register(Box::new(NetworkOptimization))?;
    registry.register(Box::new(VerifyPlan))?;
    Ok(())
}

fn num(args: &Value, key: &str) -> Option<f64> {
    args.get(key).and_then(Value::as_f64)
}

fn remove_stale(ws: &Workspace, names: &[&str]) {
    for n in names {
        let _ = std::fs::remove_file(ws.path(n));
    }
}

struct GeographicDataCollection;

impl Tool for GeographicDataCollection {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "geographic_data_collection".into(),
            description: "Extract demand nodes from the population raster and generate candidate TBS and HAP \
                          sites (including existing towers) inside a latitude/longitude box."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "lat_min": {"type": "number", "description": "Southern boundary, degrees"},
                    "lat_max": {"type": "number", "description": "Northern boundary, degrees"},
                    "lon_min": {"type": "number", "description": "Western boundary, degrees"},
                    "lon_max": {"type": "number", "description": "Eastern boundary, degrees"},
                    "aggregation_factor": {"type": "integer", "minimum": 1,
                        "description": "Raster cells per side aggregated into one demand node"},
                    "min_users": {"type": "number", "minimum": 0,
                        "description": "Blocks with fewer users are dropped"}
                },
                "required": ["lat_min", "lat_max", "lon_min", "lon_max"],
                "additionalProperties": false
            }),
        }
    }

    fn call(&self, args: &Value, ctx: &mut ToolContext) -> Result<Value, ToolError> {
        let region = Region::new(
            num(args, "lat_min").unwrap_or_default(),
            num(args, "lat_max").unwrap_or_default(),
            num(args, "lon_min").unwrap_or_default(),
            num(args, "lon_max").unwrap_or_default(),
        )
        .map_err(|e| ToolError::BadArgument(e.to_string()))?;
        ctx.scenario.region = region;
        if let Some(k) = args.get("aggregation_factor").and_then(Value::as_u64) {
            ctx.scenario.demand.aggregation_factor = k as usize;
        }
        if let Some(m) = num(args, "min_users") {
            ctx.scenario.demand.min_users = m;
        }
        remove_stale(&ctx.workspace, &[LINKS_FILE, PLAN_FILE, VERIFY_FILE]);
        let s = pipeline::run_demand(&ctx.scenario, &ctx.workspace)?;
        Ok(json!({
            "status": "ok",
            "demand_nodes": s.demand_nodes,
            "total_users": s.total_users,
            "candidate_sites": s.candidate_sites,
            "tbs_candidates": s.tbs_sites,
            "hap_candidates": s.hap_sites,
            "existing_towers": s.tower_sites,
            "files": {"demand": DEMAND_FILE, "candidates": CANDIDATES_FILE}
        }))
    }
}

struct NetworkAnalysis;

impl Tool for NetworkAnalysis {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "network_analysis".into(),
            description: "Compute terrain-aware path loss, SNR and spectral efficiency for every demand node and \
                          candidate site."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "frequency_hz": {"type": "number", "exclusiveMinimum": 0, "description": "Carrier frequency, Hz"},
                    "bandwidth_hz": {"type": "number", "exclusiveMinimum": 0, "description": "Channel bandwidth per site, Hz"},
                    "tx_power_w": {"type": "number", "exclusiveMinimum": 0, "description": "Transmit power per site, W"}
                },
                "required": ["frequency_hz", "bandwidth_hz", "tx_power_w"],
                "additionalProperties": false
            }),
        }
    }

    fn call(&self, args: &Value, ctx: &mut ToolContext) -> Result<Value, ToolError> {
        if !ctx.workspace.path(DEMAND_FILE).exists() {
            return Err(ToolError::MissingDemand);
        }
        let sc = &mut ctx.scenario;
        sc.frequency_hz = num(args, "frequency_hz").unwrap_or(sc.frequency_hz);
        sc.bandwidth_hz = num(args, "bandwidth_hz").unwrap_or(sc.bandwidth_hz);
        sc.tx_power_w = num(args, "tx_power_w").unwrap_or(sc.tx_power_w);
        sc.radio_config()
            .validate()
            .map_err(|e| ToolError::BadArgument(e.to_string()))?;
        remove_stale(&ctx.workspace, &[PLAN_FILE, VERIFY_FILE]);
        let s = pipeline::run_links(&ctx.scenario, &ctx.workspace)?;
        Ok(json!({
            "status": "ok",
            "links": s.rows,
            "feasible_links": s.feasible_links,
            "demand_nodes": s.nodes,
            "candidate_sites": s.sites,
            "uncoverable_nodes": s.uncoverable_nodes,
            "file": LINKS_FILE
        }))
    }
}

struct NetworkOptimization;

impl Tool for NetworkOptimization {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "network_optimization".into(),
            description: "Select the cheapest set of candidate sites and allocate their bandwidth so every demand \
                          node gets at least the minimum rate."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "cost_hap": {"type": "number", "minimum": 0, "description": "Cost of one HAP, units"},
                    "cost_tbs": {"type": "number", "minimum": 0, "description": "Cost of one TBS, units"},
                    "min_rate_bps": {"type": "number", "exclusiveMinimum": 0, "description": "Minimum rate per demand node, bit/s"},
                    "budget_units": {"type": "number", "minimum": 0, "description": "Optional total budget, units"}
                },
                "required": ["cost_hap", "cost_tbs", "min_rate_bps"],
                "additionalProperties": false
            }),
        }
    }

    fn call(&self, args: &Value, ctx: &mut ToolContext) -> Result<Value, ToolError> {
        if !ctx.workspace.path(LINKS_FILE).exists() {
            return Err(ToolError::MissingLinkMatrix);
        }
        let sc = &mut ctx.scenario;
        sc.cost_hap = num(args, "cost_hap").unwrap_or(sc.cost_hap);
        sc.cost_tbs = num(args, "cost_tbs").unwrap_or(sc.cost_tbs);
        sc.min_rate_bps = num(args, "min_rate_bps").unwrap_or(sc.min_rate_bps);
        sc.budget_units = num(args, "budget_units");
        let plan = pipeline::run_optimize(&ctx.scenario, &ctx.workspace)?;
        let min_rate = plan.claimed_rates_bps.values().copied().reduce(f64::min);
        let report = plan.report;
        Ok(json!({
            "status": plan.status,
            "opened_sites": plan.opened_sites.len(),
            "hap": plan.count_kind(SiteKind::Hap),
            "tbs": plan.count_kind(SiteKind::Tbs),
            "total_cost_units": plan.total_cost_units,
            "average_claimed_rate_bps": plan.average_claimed_rate_bps,
            "min_claimed_rate_bps": min_rate,
            "lp_bound": report.and_then(|r| r.lp_bound),
            "gap": report.and_then(|r| r.gap),
            "nodes_explored": report.map(|r| r.nodes_explored),
            "file": PLAN_FILE
        }))
    }
}

struct VerifyPlan;

impl Tool for VerifyPlan {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "verify_plan".into(),
            description: "Recompute the achieved per-node rates, coverage, cost and efficiency of a plan file in \
                          the workspace from the link physics."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "plan_file": {"type": "string", "description": "Plan file name in the workspace (default plan.json)"}
                },
                "additionalProperties": false
            }),
        }
    }

    fn call(&self, args: &Value, ctx: &mut ToolContext) -> Result<Value, ToolError> {
        let name = args
            .get("plan_file")
            .and_then(Value::as_str)
            .unwrap_or(PLAN_FILE);
        let rel = Path::new(name);
        if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(ToolError::BadArgument(format!(
                "plan_file must be a name inside the workspace, got {name:?}"
            )));
        }
        let report =
            pipeline::run_verify(&ctx.scenario, &ctx.workspace, &ctx.workspace.path(name))?;
        Ok(json!({
            "status": "ok",
            "average_verified_rate_bps": report.average_verified_rate_bps,
            "coverage_fraction": report.coverage_fraction,
            "total_cost_units": report.total_cost_units,
            "efficiency_bps_per_unit": report.efficiency_bps_per_unit,
            "violations": report.violations.len(),
            "hap": report.n_hap,
            "tbs": report.n_tbs,
            "file": VERIFY_FILE
        }))
    }
}
