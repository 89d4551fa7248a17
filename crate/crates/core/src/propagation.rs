//! Link budgets: free-space loss, single knife-edge terrain diffraction,
//! thermal noise and Shannon spectral efficiency.
//!
//! Links are noise-limited; there is no inter-cell interference term.

use crate::geodata::{
    sample_terrain_profile, slant_distance_m, CandidateSite, DemandNode, GeoError, GeoGrid,
    GeoPoint, ProfileSample, SiteKind, EARTH_RADIUS_M,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
/// Effective Earth radius factor for standard refraction.
pub const K_FACTOR: f64 = 4.0 / 3.0;
/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
/// Below this Fresnel-Kirchhoff parameter the knife-edge loss is zero.
pub const KNIFE_EDGE_THRESHOLD: f64 = -0.78;

#[derive(Debug, thiserror::Error)]
pub enum PropagationError {
    #[error("transmit power must be > 0 W, got {0}")]
    NonPositivePower(f64),
    #[error("invalid radio config: {0}")]
    InvalidConfig(String),
    #[error("profile distances not strictly increasing at sample {index}")]
    NonMonotonicProfile { index: usize },
    #[error("link node {node_id} -> site {site_id}: {source}")]
    Link {
        node_id: usize,
        site_id: usize,
        #[source]
        source: Box<PropagationError>,
    },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("link csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub noise_figure_db: f64,
    pub atmos_margin_db_hap: f64,
    pub atmos_margin_db_tbs: f64,
    pub min_snr_db: f64,
    pub profile_step_m: f64,
    /// Handset antenna height above ground.
    pub rx_height_m: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 5e9,
            bandwidth_hz: 10e6,
            tx_power_dbm: 10.0 * 20_000f64.log10(),
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
            noise_figure_db: 7.0,
            atmos_margin_db_hap: 1.0,
            atmos_margin_db_tbs: 0.0,
            min_snr_db: -5.0,
            profile_step_m: 90.0,
            rx_height_m: 1.5,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let bad = |m: String| Err(PropagationError::InvalidConfig(m));
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return bad(format!(
                "frequency_hz must be > 0, got {}",
                self.frequency_hz
            ));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad(format!(
                "bandwidth_hz must be > 0, got {}",
                self.bandwidth_hz
            ));
        }
        if !(self.atmos_margin_db_hap >= 0.0 && self.atmos_margin_db_tbs >= 0.0) {
            return bad("atmospheric margins must be >= 0".into());
        }
        if !(self.profile_step_m > 0.0) {
            return bad(format!(
                "profile_step_m must be > 0, got {}",
                self.profile_step_m
            ));
        }
        if !(self.rx_height_m >= 0.0) {
            return bad(format!(
                "rx_height_m must be >= 0, got {}",
                self.rx_height_m
            ));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_M_S / self.frequency_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub node_id: usize,
    pub site_id: usize,
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub snr_db: f64,
    #[serde(rename = "se_bps_hz")]
    pub spectral_efficiency_bps_hz: f64,
    pub feasible: bool,
}

pub fn watts_to_dbm(p_w: f64) -> Result<f64, PropagationError> {
    if !(p_w > 0.0) {
        return Err(PropagationError::NonPositivePower(p_w));
    }
    Ok(10.0 * (p_w * 1000.0).log10())
}

/// Free-space loss with distance clamped to at least 1 m.
pub fn free_space_path_loss_db(distance_m: f64, frequency_hz: f64) -> f64 {
    let d_km = distance_m.max(1.0) / 1000.0;
    let f_ghz = frequency_hz / 1e9;
    20.0 * d_km.log10() + 20.0 * f_ghz.log10() + 92.45
}

/// Single knife-edge approximation J(v).
pub fn knife_edge_loss_db(v: f64) -> f64 {
    if v <= KNIFE_EDGE_THRESHOLD || v.is_nan() {
        return 0.0;
    }
    let t = v - 0.1;
    6.9 + 20.0 * ((t * t + 1.0).sqrt() + t).log10()
}

/// Largest Fresnel-Kirchhoff parameter over the interior profile samples,
/// with terrain raised by the 4/3-Earth bulge. `-inf` when there are no
/// interior samples.
pub fn dominant_edge_parameter(
    profile: &[ProfileSample],
    tx_alt_m: f64,
    rx_alt_m: f64,
    frequency_hz: f64,
) -> Result<f64, PropagationError> {
    if let Some(i) = profile
        .windows(2)
        .position(|w| !(w[1].distance_m > w[0].distance_m))
    {
        return Err(PropagationError::NonMonotonicProfile { index: i + 1 });
    }
    if profile.len() < 3 {
        return Ok(f64::NEG_INFINITY);
    }
    let start = profile[0].distance_m;
    let end = profile[profile.len() - 1].distance_m;
    let d = end - start;
    let lambda = SPEED_OF_LIGHT_M_S / frequency_hz;
    let effective_radius = K_FACTOR * EARTH_RADIUS_M;
    let v = profile[1..profile.len() - 1]
        .iter()
        .map(|s| {
            let d1 = s.distance_m - start;
            let d2 = end - s.distance_m;
            let los = tx_alt_m + (rx_alt_m - tx_alt_m) * d1 / d;
            let bulge = d1 * d2 / (2.0 * effective_radius);
            let h = s.elevation_m + bulge - los;
            h * (2.0 * d / (lambda * d1 * d2)).sqrt()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(v)
}

pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Shannon spectral efficiency log2(1 + SNR), SNR given in dB.
pub fn spectral_efficiency(snr_db: f64) -> f64 {
    (1.0 + 10f64.powf(snr_db / 10.0)).log2()
}

fn canonical_order<'a>(a: &'a GeoPoint, b: &'a GeoPoint) -> (&'a GeoPoint, &'a GeoPoint) {
    let key = |p: &GeoPoint| [p.lat, p.lon, p.alt_m];
    let ord = key(a)
        .iter()
        .zip(key(b).iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal);
    if ord == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

/// Loss between two antennas given by absolute position. Endpoints are put in
/// a canonical order first, so the result is exactly reciprocal.
pub fn antenna_path_loss_db(
    terrain: &GeoGrid,
    a: &GeoPoint,
    b: &GeoPoint,
    kind: SiteKind,
    cfg: &RadioConfig,
) -> Result<f64, PropagationError> {
    for p in [a, b] {
        if !terrain.covers(p.lat, p.lon) {
            return Err(GeoError::OutOfCoverage(*p).into());
        }
    }
    let (a, b) = canonical_order(a, b);
    let fspl = free_space_path_loss_db(slant_distance_m(a, b), cfg.frequency_hz);
    Ok(match kind {
        SiteKind::Hap => fspl + cfg.atmos_margin_db_hap,
        SiteKind::Tbs => {
            let profile = sample_terrain_profile(terrain, a, b, cfg.profile_step_m)?;
            let v = dominant_edge_parameter(&profile, a.alt_m, b.alt_m, cfg.frequency_hz)?;
            fspl + knife_edge_loss_db(v) + cfg.atmos_margin_db_tbs
        }
    })
}

/// Receive antenna position for a demand node: terrain plus handset height.
pub fn node_antenna(
    node: &DemandNode,
    terrain: &GeoGrid,
    cfg: &RadioConfig,
) -> Result<GeoPoint, PropagationError> {
    let ground = terrain
        .bilinear(node.point.lat, node.point.lon)
        .map_err(|_| GeoError::OutOfCoverage(node.point))?;
    Ok(node.point.with_alt(ground + cfg.rx_height_m))
}

pub fn path_loss_db(
    node: &DemandNode,
    site: &CandidateSite,
    terrain: &GeoGrid,
    cfg: &RadioConfig,
) -> Result<f64, PropagationError> {
    let rx = node_antenna(node, terrain, cfg)?;
    antenna_path_loss_db(terrain, &site.point, &rx, site.kind, cfg)
}

/// Link record for one node/site pair.
pub fn evaluate_link(
    node: &DemandNode,
    site: &CandidateSite,
    terrain: &GeoGrid,
    cfg: &RadioConfig,
) -> Result<LinkRecord, PropagationError> {
    let wrap = |e: PropagationError| PropagationError::Link {
        node_id: node.id,
        site_id: site.id,
        source: Box::new(e),
    };
    let rx = node_antenna(node, terrain, cfg).map_err(wrap)?;
    let path_loss =
        antenna_path_loss_db(terrain, &site.point, &rx, site.kind, cfg).map_err(wrap)?;
    let noise = noise_power_dbm(cfg.bandwidth_hz, cfg.noise_figure_db);
    let snr_db = site.tx_power_dbm + cfg.tx_gain_dbi + cfg.rx_gain_dbi - path_loss - noise;
    let feasible = snr_db >= cfg.min_snr_db;
    Ok(LinkRecord {
        node_id: node.id,
        site_id: site.id,
        distance_m: slant_distance_m(&site.point, &rx),
        path_loss_db: path_loss,
        snr_db,
        spectral_efficiency_bps_hz: if feasible {
            spectral_efficiency(snr_db)
        } else {
            0.0
        },
        feasible,
    })
}

/// All node/site pairs, node-major. Evaluated in parallel; the output order
/// and values are the same as a sequential pass.
pub fn build_link_matrix(
    nodes: &[DemandNode],
    sites: &[CandidateSite],
    terrain: &GeoGrid,
    cfg: &RadioConfig,
) -> Result<Vec<LinkRecord>, PropagationError> {
    cfg.validate()?;
    if nodes.is_empty() || sites.is_empty() {
        return Err(PropagationError::InvalidConfig(format!(
            "link matrix needs nodes and sites (got {} nodes, {} sites)",
            nodes.len(),
            sites.len()
        )));
    }
    (0..nodes.len() * sites.len())
        .into_par_iter()
        .map(|k| {
            evaluate_link(
                &nodes[k / sites.len()],
                &sites[k % sites.len()],
                terrain,
                cfg,
            )
        })
        .collect()
}

pub const LINK_CSV_HEADER: &str =
    "node_id,site_id,distance_m,path_loss_db,snr_db,se_bps_hz,feasible";

/// Link matrix as CSV. Floats use shortest round-trip formatting so the file
/// reloads to identical values.
pub fn links_to_csv(links: &[LinkRecord]) -> String {
    let mut out = String::with_capacity(64 * (links.len() + 1));
    out.push_str(LINK_CSV_HEADER);
    out.push('\n');
    for l in links {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            l.node_id,
            l.site_id,
            l.distance_m,
            l.path_loss_db,
            l.snr_db,
            l.spectral_efficiency_bps_hz,
            l.feasible
        ));
    }
    out
}

pub fn links_from_csv(text: &str) -> Result<Vec<LinkRecord>, PropagationError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| PropagationError::Csv(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != LINK_CSV_HEADER {
        return Err(PropagationError::Csv(format!(
            "expected header {LINK_CSV_HEADER:?}"
        )));
    }
    reader
        .deserialize::<LinkRecord>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| PropagationError::Csv(format!("row {}: {e}", i + 2))))
        .collect()
}
