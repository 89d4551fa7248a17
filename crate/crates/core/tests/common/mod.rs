#![allow(dead_code)]

pub mod stub;

use netplan_core::agent::{ScriptedBackend, ScriptedCall, ScriptedReply};
use netplan_core::geodata::{CandidateSite, DemandNode, GeoGrid, GeoPoint, SiteKind};
use netplan_core::optimizer::{formulate, DeploymentProblem, OptimizeError, OptimizerConfig};
use netplan_core::propagation::{build_link_matrix, LinkRecord, RadioConfig};
use netplan_core::synth::{write_synthetic_scenario, SynthConfig};
use netplan_core::{DeploymentPlan, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::HashMap;

pub const BANDWIDTH: f64 = 10e6;

pub fn node(id: usize, rate: f64) -> DemandNode {
    DemandNode {
        id,
        point: GeoPoint {
            lat: 0.0,
            lon: 0.0,
            alt_m: 0.0,
        },
        users: 1,
        required_rate_bps: rate,
    }
}

pub fn site(id: usize, cost: f64) -> CandidateSite {
    CandidateSite {
        id,
        point: GeoPoint {
            lat: 0.0,
            lon: 0.0,
            alt_m: 30.0,
        },
        kind: if cost >= 1200.0 {
            SiteKind::Hap
        } else {
            SiteKind::Tbs
        },
        cost_units: cost,
        tx_power_dbm: 43.0,
        from_existing_tower: false,
    }
}

pub fn link(node_id: usize, site_id: usize, se: f64) -> LinkRecord {
    LinkRecord {
        node_id,
        site_id,
        distance_m: 1000.0,
        path_loss_db: 100.0,
        snr_db: 10.0,
        spectral_efficiency_bps_hz: se,
        feasible: se > 0.0,
    }
}

/// Dense instance: `se[i][j]` is the efficiency of node i on site j, 0 for
/// no link.
#[derive(Debug, Clone)]
pub struct Dense {
    pub rates: Vec<f64>,
    pub costs: Vec<f64>,
    pub se: Vec<Vec<f64>>,
}

impl Dense {
    pub fn parts(&self) -> (Vec<DemandNode>, Vec<CandidateSite>, Vec<LinkRecord>) {
        let nodes = self
            .rates
            .iter()
            .enumerate()
            .map(|(i, &r)| node(i, r))
            .collect();
        let sites = self
            .costs
            .iter()
            .enumerate()
            .map(|(j, &c)| site(j, c))
            .collect();
        let links = self
            .se
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| link(i, j, v)))
            .collect();
        (nodes, sites, links)
    }

    pub fn problem(&self, cfg: &OptimizerConfig) -> Result<DeploymentProblem, OptimizeError> {
        let (n, s, l) = self.parts();
        formulate(&n, &s, &l, BANDWIDTH, cfg)
    }
}

/// Random geometry on flat ground: nodes and TBS/HAP candidates scattered
/// over a 0.3 degree square, link matrix from the propagation model.
pub fn geometric_instance(
    seed: u64,
    max_sites: usize,
    max_nodes: usize,
) -> (Vec<DemandNode>, Vec<CandidateSite>, Vec<LinkRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terrain = flat_terrain();
    let n_sites = rng.random_range(2..=max_sites);
    let n_nodes = rng.random_range(1..=max_nodes);
    let pt = |rng: &mut ChaCha8Rng| {
        (
            rng.random_range(21.05..21.35),
            rng.random_range(43.55..43.85),
        )
    };
    let nodes: Vec<DemandNode> = (0..n_nodes)
        .map(|i| {
            let (lat, lon) = pt(&mut rng);
            DemandNode {
                id: i,
                point: GeoPoint {
                    lat,
                    lon,
                    alt_m: 0.0,
                },
                users: 1,
                required_rate_bps: rng.random_range(1e6..2e7),
            }
        })
        .collect();
    let sites: Vec<CandidateSite> = (0..n_sites)
        .map(|j| {
            let (lat, lon) = pt(&mut rng);
            let hap = rng.random_bool(0.2);
            CandidateSite {
                id: j,
                point: GeoPoint {
                    lat,
                    lon,
                    alt_m: if hap { 20_000.0 } else { 130.0 },
                },
                kind: if hap { SiteKind::Hap } else { SiteKind::Tbs },
                cost_units: if hap {
                    1200.0
                } else {
                    [400.0, 600.0, 600.0, 900.0][rng.random_range(0..4)]
                },
                tx_power_dbm: 43.0,
                from_existing_tower: false,
            }
        })
        .collect();
    let links = build_link_matrix(&nodes, &sites, &terrain, &RadioConfig::default()).unwrap();
    (nodes, sites, links)
}

pub fn flat_terrain() -> GeoGrid {
    GeoGrid::from_fn(50, 50, 43.5, 21.0, 0.01, |_, _| 100.0)
}

/// Checks a plan against the problem's linear constraints, computed from
/// scratch: per-node rate, per-site bandwidth, allocations only on open
/// sites. Returns the first violation.
pub fn check_feasible(
    problem: &DeploymentProblem,
    plan: &DeploymentPlan,
    tol: f64,
) -> Result<(), String> {
    let se: HashMap<(usize, usize), f64> = problem
        .links
        .iter()
        .map(|l| ((problem.nodes[l.node].id, problem.sites[l.site].id), l.se))
        .collect();
    let open: Vec<usize> = plan.opened_ids();
    let mut rate: HashMap<usize, f64> = HashMap::new();
    let mut used: HashMap<usize, f64> = HashMap::new();
    for a in &plan.allocations {
        if !open.contains(&a.site_id) {
            return Err(format!("allocation on closed site {}", a.site_id));
        }
        let s = se.get(&(a.node_id, a.site_id)).ok_or(format!(
            "allocation on missing link {}->{}",
            a.node_id, a.site_id
        ))?;
        if a.bandwidth_hz < 0.0 {
            return Err(format!("negative bandwidth {}", a.bandwidth_hz));
        }
        *rate.entry(a.node_id).or_default() += s * a.bandwidth_hz;
        *used.entry(a.site_id).or_default() += a.bandwidth_hz;
    }
    for n in &problem.nodes {
        let r = rate.get(&n.id).copied().unwrap_or(0.0);
        if r < n.required_rate_bps * (1.0 - tol) {
            return Err(format!(
                "node {} allocated {r} < {}",
                n.id, n.required_rate_bps
            ));
        }
        let claimed = plan.claimed_rates_bps.get(&n.id).copied().unwrap_or(0.0);
        if claimed < n.required_rate_bps * (1.0 - tol) {
            return Err(format!(
                "node {} claimed {claimed} < {}",
                n.id, n.required_rate_bps
            ));
        }
    }
    for (s, b) in used {
        if b > problem.bandwidth_hz * (1.0 + tol) {
            return Err(format!("site {s} uses {b} > {}", problem.bandwidth_hz));
        }
    }
    let cost: f64 = problem
        .sites
        .iter()
        .filter(|s| open.contains(&s.id))
        .map(|s| s.cost_units)
        .sum();
    if (cost - plan.total_cost_units).abs() > 1e-9 * cost.max(1.0) {
        return Err(format!(
            "cost {} does not match opened sites {cost}",
            plan.total_cost_units
        ));
    }
    Ok(())
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Plan JSON with solver timing removed, for byte comparisons.
pub fn timeless_json(plan: &DeploymentPlan) -> String {
    let mut p = plan.clone();
    if let Some(r) = p.report.as_mut() {
        r.wall_time_s = 0.0;
    }
    serde_json::to_string(&p).unwrap()
}

/// A synthetic scenario written into a fresh temporary directory.
pub fn synthetic(cfg: &SynthConfig) -> (tempfile::TempDir, Scenario) {
    let dir = tempfile::tempdir().unwrap();
    let s = write_synthetic_scenario(&dir.path().join("scenario"), cfg).unwrap();
    (dir, Scenario::load(&s.scenario_path).unwrap())
}

pub fn call(name: &str, arguments: Value) -> ScriptedReply {
    ScriptedReply {
        content: Some(format!("Next I call {name}.")),
        tool_calls: Some(vec![ScriptedCall {
            name: name.into(),
            arguments,
        }]),
    }
}

pub fn answer(text: &str) -> ScriptedReply {
    ScriptedReply {
        content: Some(text.into()),
        tool_calls: None,
    }
}

/// geographic_data_collection, network_analysis, network_optimization, final
/// answer, with the scenario's own parameters.
pub fn canonical_script(s: &Scenario) -> Vec<ScriptedReply> {
    let r = s.region;
    vec![
        call(
            "geographic_data_collection",
            json!({"lat_min": r.lat_min, "lat_max": r.lat_max, "lon_min": r.lon_min, "lon_max": r.lon_max}),
        ),
        call(
            "network_analysis",
            json!({"frequency_hz": s.frequency_hz, "bandwidth_hz": s.bandwidth_hz, "tx_power_w": s.tx_power_w}),
        ),
        call(
            "network_optimization",
            json!({"cost_hap": s.cost_hap, "cost_tbs": s.cost_tbs, "min_rate_bps": s.min_rate_bps}),
        ),
        answer("The deployment plan is complete."),
    ]
}

/// Chat-completions response body carrying scripted reply `index`, with the
/// same call ids the scripted backend would assign.
pub fn chat_response(index: usize, reply: &ScriptedReply) -> String {
    let message = ScriptedBackend::reply_message(index, reply).to_wire();
    let finish = if message.tool_calls.is_some() {
        "tool_calls"
    } else {
        "stop"
    };
    json!({
        "id": format!("chatcmpl-{index}"),
        "object": "chat.completion",
        "choices": [{"index": 0, "message": message, "finish_reason": finish}]
    })
    .to_string()
}
