//! Independent recomputation of achieved rates for any deployment plan.
//!
//! Link physics is re-evaluated from the terrain and the radio config; the
//! rates and costs a plan claims are never read. Plans with allocations use
//! the optimizer's residual rule, plans without them (typically authored
//! elsewhere) attach every node to its best-se opened site and split each
//! site's bandwidth equally among its attached nodes.

use crate::geodata::{CandidateSite, DemandNode, GeoGrid, GeoPoint, SiteConfig, SiteKind};
use crate::optimizer::{residual_rates, DeploymentPlan};
use crate::propagation::{evaluate_link, PropagationError, RadioConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("opened site {index} at ({lat}, {lon}) is outside terrain coverage")]
    SiteOutOfCoverage { index: usize, lat: f64, lon: f64 },
    #[error("allocation references site {0}, which the plan does not open")]
    UnknownSite(usize),
    #[error("allocation references unknown node {0}")]
    UnknownNode(usize),
    #[error("plan lists site id {0} more than once")]
    DuplicateSiteId(usize),
    #[error("plan parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attachment {
    Allocations,
    BestServer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node_id: usize,
    pub shortfall_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub attachment: Attachment,
    pub per_node_rate_bps: BTreeMap<usize, f64>,
    pub average_verified_rate_bps: f64,
    pub coverage_fraction: f64,
    pub total_cost_units: f64,
    pub efficiency_bps_per_unit: f64,
    pub n_hap: usize,
    pub n_tbs: usize,
    pub violations: Vec<Violation>,
}

/// Parses a plan file, rejecting unknown site kinds.
pub fn parse_plan(text: &str) -> Result<DeploymentPlan, VerifyError> {
    serde_json::from_str(text).map_err(|e| VerifyError::Parse(e.to_string()))
}

/// Rebuilds the candidate sites a plan opens. Missing altitudes default to
/// terrain plus mast for a TBS and the configured altitude for a HAP; costs
/// always come from `site_cfg`.
pub fn plan_sites(
    plan: &DeploymentPlan,
    terrain: &GeoGrid,
    site_cfg: &SiteConfig,
) -> Result<Vec<CandidateSite>, VerifyError> {
    let mut seen = HashMap::new();
    plan.opened_sites
        .iter()
        .enumerate()
        .map(|(index, s)| {
            if !terrain.covers(s.lat, s.lon) {
                return Err(VerifyError::SiteOutOfCoverage {
                    index,
                    lat: s.lat,
                    lon: s.lon,
                });
            }
            let id = s.id.unwrap_or(index);
            if seen.insert(id, index).is_some() {
                return Err(VerifyError::DuplicateSiteId(id));
            }
            let alt_m = match (s.alt_m, s.kind) {
                (Some(a), _) => a,
                (None, SiteKind::Hap) => site_cfg.hap_altitude_m,
                (None, SiteKind::Tbs) => {
                    terrain
                        .bilinear(s.lat, s.lon)
                        .map_err(PropagationError::from)?
                        + site_cfg.tbs_mast_m
                }
            };
            Ok(CandidateSite {
                id,
                point: GeoPoint {
                    lat: s.lat,
                    lon: s.lon,
                    alt_m,
                },
                kind: s.kind,
                cost_units: site_cfg.unit_cost(s.kind, s.from_existing_tower),
                tx_power_dbm: site_cfg.tx_power_dbm,
                from_existing_tower: s.from_existing_tower,
            })
        })
        .collect()
}

/// Verified rates, coverage, cost and efficiency of `plan`.
pub fn verify_plan(
    plan: &DeploymentPlan,
    nodes: &[DemandNode],
    terrain: &GeoGrid,
    radio: &RadioConfig,
    site_cfg: &SiteConfig,
) -> Result<VerificationReport, VerifyError> {
    radio.validate()?;
    let sites = plan_sites(plan, terrain, site_cfg)?;
    let b = radio.bandwidth_hz;

    // se[i][j] for every node and opened site, 0 where infeasible
    let se: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|n| {
            sites
                .iter()
                .map(|s| evaluate_link(n, s, terrain, radio).map(|l| l.spectral_efficiency_bps_hz))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut rates: BTreeMap<usize, f64> = nodes.iter().map(|n| (n.id, 0.0)).collect();
    let attachment = if plan.allocations.is_empty() {
        let mut attached: Vec<Option<usize>> = Vec::with_capacity(nodes.len());
        let mut load = vec![0usize; sites.len()];
        for row in &se {
            let mut best: Option<usize> = None;
            for (j, &v) in row.iter().enumerate() {
                if v > 0.0 && best.is_none_or(|k| v > row[k]) {
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                load[j] += 1;
            }
            attached.push(best);
        }
        for (i, a) in attached.iter().enumerate() {
            if let Some(j) = *a {
                rates.insert(nodes[i].id, b / load[j] as f64 * se[i][j]);
            }
        }
        Attachment::BestServer
    } else {
        let node_pos: HashMap<usize, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let site_pos: HashMap<usize, usize> =
            sites.iter().enumerate().map(|(j, s)| (s.id, j)).collect();
        let mut tuples = Vec::with_capacity(plan.allocations.len());
        for a in &plan.allocations {
            let &i = node_pos
                .get(&a.node_id)
                .ok_or(VerifyError::UnknownNode(a.node_id))?;
            let &j = site_pos
                .get(&a.site_id)
                .ok_or(VerifyError::UnknownSite(a.site_id))?;
            tuples.push((a.node_id, a.site_id, a.bandwidth_hz.max(0.0), se[i][j]));
        }
        for (node, r) in residual_rates(b, &tuples) {
            rates.insert(node, r);
        }
        Attachment::Allocations
    };

    let violations: Vec<Violation> = nodes
        .iter()
        .filter_map(|n| {
            let r = rates[&n.id];
            (r < n.required_rate_bps * (1.0 - 1e-9)).then_some(Violation {
                node_id: n.id,
                shortfall_bps: n.required_rate_bps - r,
            })
        })
        .collect();
    let n = nodes.len();
    let average = if n == 0 {
        0.0
    } else {
        rates.values().sum::<f64>() / n as f64
    };
    let coverage_fraction = if n == 0 {
        0.0
    } else {
        (n - violations.len()) as f64 / n as f64
    };
    let total_cost_units: f64 = sites.iter().fold(0.0, |acc, s| acc + s.cost_units);
    Ok(VerificationReport {
        attachment,
        per_node_rate_bps: rates,
        average_verified_rate_bps: average,
        coverage_fraction,
        total_cost_units,
        efficiency_bps_per_unit: if total_cost_units > 0.0 {
            average / total_cost_units
        } else {
            0.0
        },
        n_hap: sites.iter().filter(|s| s.kind == SiteKind::Hap).count(),
        n_tbs: sites.iter().filter(|s| s.kind == SiteKind::Tbs).count(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub n_hap: usize,
    pub n_tbs: usize,
    pub claimed_rate_bps: Option<f64>,
    pub total_cost_units: f64,
    pub verified_rate_bps: f64,
    pub efficiency_bps_per_unit: f64,
}

/// One row per plan, most efficient first. Equal efficiencies keep input order.
pub fn compare_plans(entries: &[(String, VerificationReport, Option<f64>)]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = entries
        .iter()
        .map(|(label, r, claimed)| ComparisonRow {
            label: label.clone(),
            n_hap: r.n_hap,
            n_tbs: r.n_tbs,
            claimed_rate_bps: *claimed,
            total_cost_units: r.total_cost_units,
            verified_rate_bps: r.average_verified_rate_bps,
            efficiency_bps_per_unit: r.efficiency_bps_per_unit,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.efficiency_bps_per_unit
            .total_cmp(&a.efficiency_bps_per_unit)
    });
    rows
}

pub const COMPARISON_CSV_HEADER: &str =
    "label,n_hap,n_tbs,claimed_rate_bps,total_cost_units,verified_rate_bps,efficiency_bps_per_unit";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COMPARISON_CSV_HEADER.split(','))
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.n_hap.to_string(),
            r.n_tbs.to_string(),
            r.claimed_rate_bps
                .map(|v| v.to_string())
                .unwrap_or_default(),
            r.total_cost_units.to_string(),
            r.verified_rate_bps.to_string(),
            r.efficiency_bps_per_unit.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Fixed-width text rendering of a comparison, rates in Mbps.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "{:<width$}  {:>4}  {:>4}  {:>12}  {:>10}  {:>13}  {:>14}\n",
        "label", "HAP", "TBS", "claimed Mbps", "cost", "verified Mbps", "bps/unit"
    );
    for r in rows {
        let claimed = r
            .claimed_rate_bps
            .map_or("-".to_string(), |v| format!("{:.2}", v / 1e6));
        let _ = writeln!(
            out,
            "{:<width$}  {:>4}  {:>4}  {:>12}  {:>10.0}  {:>13.2}  {:>14.1}",
            r.label,
            r.n_hap,
            r.n_tbs,
            claimed,
            r.total_cost_units,
            r.verified_rate_bps / 1e6,
            r.efficiency_bps_per_unit
        );
    }
    out
}

/// GeoJSON FeatureCollection with opened sites and demand nodes as points.
pub fn plan_geojson(
    plan: &DeploymentPlan,
    report: &VerificationReport,
    nodes: &[DemandNode],
    site_cfg: &SiteConfig,
) -> Value {
    let mut features = Vec::new();
    for (index, s) in plan.opened_sites.iter().enumerate() {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
            "properties": {
                "feature": "site",
                "id": s.id.unwrap_or(index),
                "kind": s.kind,
                "cost": site_cfg.unit_cost(s.kind, s.from_existing_tower),
            }
        }));
    }
    for n in nodes {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [n.point.lon, n.point.lat]},
            "properties": {
                "feature": "node",
                "id": n.id,
                "users": n.users,
                "required_rate_bps": n.required_rate_bps,
                "verified_rate_bps": report.per_node_rate_bps.get(&n.id).copied().unwrap_or(0.0),
            }
        }));
    }
    json!({"type": "FeatureCollection", "features": features})
}
