use super::{DemandNode, GeoError, GeoGrid, GeoPoint, Region};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandConfig {
    /// Side length, in cells, of the square blocks that become one node.
    pub aggregation_factor: usize,
    /// A block becomes a node only when its population exceeds this.
    pub min_users: f64,
    pub per_user_rate_bps: f64,
    /// Node requirement is `per_user_rate_bps * users^rate_exponent`; 0 makes
    /// the rate a per-node floor.
    pub rate_exponent: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            aggregation_factor: 1,
            min_users: 1.0,
            per_user_rate_bps: 2e6,
            rate_exponent: 0.0,
        }
    }
}

impl DemandConfig {
    pub fn required_rate_bps(&self, users: u64) -> f64 {
        self.per_user_rate_bps * (users as f64).powf(self.rate_exponent)
    }
}

/// Aggregates in-region population cells into demand nodes.
///
/// Blocks are `aggregation_factor` cells square, anchored at the north-west
/// in-region cell, and visited row-major. A block whose population exceeds
/// `min_users` yields a node at its population-weighted centroid. Node
/// altitudes are left at 0; the link analysis samples terrain itself.
pub fn extract_demand_nodes(
    pop: &GeoGrid,
    region: &Region,
    cfg: &DemandConfig,
) -> Result<Vec<DemandNode>, GeoError> {
    region.validate()?;
    if cfg.aggregation_factor == 0 {
        return Err(GeoError::InvalidArgument(
            "aggregation_factor must be >= 1".into(),
        ));
    }
    if !(cfg.min_users >= 0.0) {
        return Err(GeoError::InvalidArgument("min_users must be >= 0".into()));
    }
    if !(cfg.per_user_rate_bps > 0.0) {
        return Err(GeoError::InvalidArgument(
            "per_user_rate_bps must be > 0".into(),
        ));
    }
    let (rows, cols) = pop
        .cells_within(region)
        .ok_or(GeoError::NoOverlap(*region))?;
    let k = cfg.aggregation_factor;

    let mut nodes = Vec::new();
    for br in (rows.start..rows.end).step_by(k) {
        for bc in (cols.start..cols.end).step_by(k) {
            let mut mass = 0.0;
            let mut lat_acc = 0.0;
            let mut lon_acc = 0.0;
            for r in br..(br + k).min(rows.end) {
                for c in bc..(bc + k).min(cols.end) {
                    let Some(v) = pop.value(r, c) else { continue };
                    if v <= 0.0 {
                        continue;
                    }
                    let (lat, lon) = pop.cell_center(r, c);
                    mass += v;
                    lat_acc += v * lat;
                    lon_acc += v * lon;
                }
            }
            if mass <= 0.0 || mass <= cfg.min_users {
                continue;
            }
            let users = (mass.round() as u64).max(1);
            nodes.push(DemandNode {
                id: nodes.len(),
                point: GeoPoint {
                    lat: lat_acc / mass,
                    lon: lon_acc / mass,
                    alt_m: 0.0,
                },
                users,
                required_rate_bps: cfg.required_rate_bps(users),
            });
        }
    }
    Ok(nodes)
}
