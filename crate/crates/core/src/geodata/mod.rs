//! Geographic inputs: rasters, towers, demand nodes and candidate sites.
//!
//! Everything here is read from local files (ASCII grids for population and
//! terrain, CSV for towers) and converted into the point sets the link
//! analysis and the site-selection problem operate on.

mod demand;
mod distance;
mod grid;
mod profile;
mod sites;
mod towers;

pub use demand::{extract_demand_nodes, DemandConfig};
pub use distance::{haversine_distance_m, slant_distance_m, EARTH_RADIUS_M};
pub use grid::{load_grid, parse_grid, write_grid, GeoGrid};
pub use profile::{sample_terrain_profile, ProfileSample};
pub use sites::{generate_candidate_sites, SiteConfig};
pub use towers::{load_towers, parse_towers, TowerRecord};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum GeoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: value count mismatch: expected {expected} values, found {found}")]
    ValueCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-numeric token {token:?}")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: non-finite value {value}")]
    NonFinite { line: usize, value: f64 },
    #[error("row {row}: {msg}")]
    TowerRow { row: usize, msg: String },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("raster does not overlap region {0}")]
    NoOverlap(Region),
    #[error("point {0} is outside terrain coverage")]
    OutOfCoverage(GeoPoint),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A location in WGS84 degrees with an absolute altitude in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub alt_m: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, alt_m: f64) -> Result<Self, GeoError> {
        let p = Self { lat, lon, alt_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(GeoError::InvalidPoint(format!(
                "latitude {} outside [-90, 90]",
                self.lat
            )));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeoError::InvalidPoint(format!(
                "longitude {} outside [-180, 180]",
                self.lon
            )));
        }
        if !self.alt_m.is_finite() {
            return Err(GeoError::InvalidPoint(format!(
                "altitude {} is not finite",
                self.alt_m
            )));
        }
        Ok(())
    }

    pub fn with_alt(self, alt_m: f64) -> Self {
        Self { alt_m, ..self }
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.1} m)", self.lat, self.lon, self.alt_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Region {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self, GeoError> {
        let r = Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(GeoError::InvalidRegion(format!(
                "{self} has non-finite bounds"
            )));
        }
        if self.lat_min >= self.lat_max {
            return Err(GeoError::InvalidRegion(format!(
                "lat_min must be < lat_max in {self}"
            )));
        }
        if self.lon_min >= self.lon_max {
            return Err(GeoError::InvalidRegion(format!(
                "lon_min must be < lon_max in {self}"
            )));
        }
        if self.lat_min < -90.0
            || self.lat_max > 90.0
            || self.lon_min < -180.0
            || self.lon_max > 180.0
        {
            return Err(GeoError::InvalidRegion(format!(
                "{self} exceeds WGS84 bounds"
            )));
        }
        Ok(())
    }

    /// Inclusive containment test.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    pub fn lat_extent(&self) -> f64 {
        self.lat_max - self.lat_min
    }

    pub fn lon_extent(&self) -> f64 {
        self.lon_max - self.lon_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.lat_min + self.lat_max),
            0.5 * (self.lon_min + self.lon_max),
        )
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[lat {}..{}, lon {}..{}]",
            self.lat_min, self.lat_max, self.lon_min, self.lon_max
        )
    }
}

impl std::str::FromStr for Region {
    type Err = GeoError;

    /// Parses `lat_min,lat_max,lon_min,lon_max`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GeoError::InvalidRegion(format!("{s:?}: {e}")))?;
        match parts[..] {
            [a, b, c, d] => Region::new(a, b, c, d),
            _ => Err(GeoError::InvalidRegion(format!(
                "{s:?}: expected lat_min,lat_max,lon_min,lon_max"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandNode {
    pub id: usize,
    pub point: GeoPoint,
    pub users: u64,
    pub required_rate_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteKind {
    #[serde(rename = "TBS", alias = "tbs")]
    Tbs,
    #[serde(rename = "HAP", alias = "hap")]
    Hap,
}

impl fmt::Display for SiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SiteKind::Tbs => "TBS",
            SiteKind::Hap => "HAP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSite {
    pub id: usize,
    /// For TBS, `alt_m` is terrain plus mast/tower height; for HAP it is the
    /// platform altitude.
    pub point: GeoPoint,
    pub kind: SiteKind,
    pub cost_units: f64,
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub from_existing_tower: bool,
}
