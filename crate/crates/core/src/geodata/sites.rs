use super::{CandidateSite, GeoError, GeoGrid, GeoPoint, Region, SiteKind, TowerRecord};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiteConfig {
    pub tbs_spacing_deg: f64,
    pub hap_spacing_deg: f64,
    pub tbs_mast_m: f64,
    pub hap_altitude_m: f64,
    pub cost_tbs: f64,
    pub cost_hap: f64,
    /// Applied to `cost_tbs` for candidates on existing towers.
    pub tower_cost_multiplier: f64,
    pub tx_power_dbm: f64,
}

impl Default for SiteConfig {
    fn default() -> Self {
        Self {
            tbs_spacing_deg: 0.05,
            hap_spacing_deg: 0.25,
            tbs_mast_m: 30.0,
            hap_altitude_m: 20_000.0,
            cost_tbs: 600.0,
            cost_hap: 1200.0,
            tower_cost_multiplier: 1.0,
            tx_power_dbm: crate::propagation::watts_to_dbm(20.0).unwrap_or(43.0),
        }
    }
}

impl SiteConfig {
    pub fn validate(&self) -> Result<(), GeoError> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(GeoError::InvalidArgument(format!(
                    "{name} must be > 0, got {v}"
                )))
            }
        };
        positive(self.tbs_spacing_deg, "tbs_spacing_deg")?;
        positive(self.hap_spacing_deg, "hap_spacing_deg")?;
        for (v, name) in [
            (self.tbs_mast_m, "tbs_mast_m"),
            (self.cost_tbs, "cost_tbs"),
            (self.cost_hap, "cost_hap"),
            (self.tower_cost_multiplier, "tower_cost_multiplier"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(GeoError::InvalidArgument(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if !(self.hap_altitude_m >= 1000.0) {
            return Err(GeoError::InvalidArgument(format!(
                "hap_altitude_m must be >= 1000, got {}",
                self.hap_altitude_m
            )));
        }
        Ok(())
    }

    /// Unit cost for a site of `kind`.
    pub fn unit_cost(&self, kind: SiteKind, from_existing_tower: bool) -> f64 {
        match kind {
            SiteKind::Hap => self.cost_hap,
            SiteKind::Tbs if from_existing_tower => self.cost_tbs * self.tower_cost_multiplier,
            SiteKind::Tbs => self.cost_tbs,
        }
    }
}

/// Centers of a uniform lattice over one axis: `floor(extent / spacing)`
/// points (at least one), centered within the extent.
fn axis_positions(min: f64, max: f64, spacing: f64) -> Vec<f64> {
    let extent = max - min;
    let n = ((extent / spacing + 1e-9).floor() as usize).max(1);
    let used = n as f64 * spacing;
    let offset = (extent - used) / 2.0;
    (0..n)
        .map(|k| min + offset + (k as f64 + 0.5) * spacing)
        .map(|v| v.clamp(min, max))
        .collect()
}

fn lattice(region: &Region, spacing: f64) -> Vec<(f64, f64)> {
    let lats = axis_positions(region.lat_min, region.lat_max, spacing);
    let lons = axis_positions(region.lon_min, region.lon_max, spacing);
    // north to south, west to east
    lats.iter()
        .rev()
        .flat_map(|&lat| lons.iter().map(move |&lon| (lat, lon)))
        .collect()
}

/// Candidate sites: one TBS per tower, then a TBS lattice, then a HAP
/// lattice, with dense ids in that order.
pub fn generate_candidate_sites(
    region: &Region,
    terrain: &GeoGrid,
    towers: &[TowerRecord],
    cfg: &SiteConfig,
) -> Result<Vec<CandidateSite>, GeoError> {
    region.validate()?;
    cfg.validate()?;
    let mut sites = Vec::new();
    let mut push = |point: GeoPoint, kind: SiteKind, from_existing_tower: bool| {
        let id = sites.len();
        sites.push(CandidateSite {
            id,
            point,
            kind,
            cost_units: cfg.unit_cost(kind, from_existing_tower),
            tx_power_dbm: cfg.tx_power_dbm,
            from_existing_tower,
        });
    };
    for t in towers {
        let ground = terrain
            .bilinear(t.point.lat, t.point.lon)
            .map_err(|_| GeoError::OutOfCoverage(t.point))?;
        push(t.point.with_alt(ground + t.height_m), SiteKind::Tbs, true);
    }
    for (lat, lon) in lattice(region, cfg.tbs_spacing_deg) {
        let ground = terrain.bilinear(lat, lon)?;
        push(
            GeoPoint {
                lat,
                lon,
                alt_m: ground + cfg.tbs_mast_m,
            },
            SiteKind::Tbs,
            false,
        );
    }
    for (lat, lon) in lattice(region, cfg.hap_spacing_deg) {
        if !terrain.covers(lat, lon) {
            return Err(GeoError::OutOfCoverage(GeoPoint {
                lat,
                lon,
                alt_m: 0.0,
            }));
        }
        push(
            GeoPoint {
                lat,
                lon,
                alt_m: cfg.hap_altitude_m,
            },
            SiteKind::Hap,
            false,
        );
    }
    Ok(sites)
}
