//! Synthetic scenarios: population, terrain and tower files plus a scenario
//! JSON, generated deterministically from a seed.

use crate::geodata::{haversine_distance_m, write_grid, GeoGrid, GeoPoint, Region};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relief {
    /// Gentle rolling plain.
    Flat,
    /// Every town sits in a basin enclosed by a ring ridge; nobody lives
    /// outside the basins.
    Mountainous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Town {
    pub lat: f64,
    pub lon: f64,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub relief: Relief,
    pub ncols: usize,
    pub nrows: usize,
    pub cellsize: f64,
    pub lat0: f64,
    pub lon0: f64,
    /// Random towns are drawn when empty.
    pub towns: Vec<Town>,
    pub n_towns: usize,
    /// Town spread, metres (Gaussian sigma).
    pub town_sigma_m: f64,
    pub ridge_radius_m: f64,
    pub ridge_width_m: f64,
    pub ridge_height_m: f64,
    pub aggregation_factor: usize,
    pub tbs_spacing_deg: f64,
    pub hap_spacing_deg: f64,
    /// Put an existing tower at every town centre.
    pub towers_at_towns: bool,
}

impl SynthConfig {
    /// 50 x 50 cells of 0.01 degrees over 21.0-21.5 N, 43.5-44.0 E with a
    /// few random towns on gentle terrain. Yields 9 TBS, 1 HAP and one tower
    /// per town as candidates.
    pub fn flat(seed: u64) -> Self {
        Self {
            seed,
            relief: Relief::Flat,
            ncols: 50,
            nrows: 50,
            cellsize: 0.01,
            lat0: 21.0,
            lon0: 43.5,
            towns: Vec::new(),
            n_towns: 3,
            town_sigma_m: 2500.0,
            ridge_radius_m: 5000.0,
            ridge_width_m: 1500.0,
            ridge_height_m: 0.0,
            aggregation_factor: 5,
            tbs_spacing_deg: 0.16,
            hap_spacing_deg: 0.5,
            towers_at_towns: true,
        }
    }

    /// Four towns in ridge-ringed basins at the edge midpoints of the region,
    /// away from a uniform 2 x 2 placement grid.
    pub fn mountainous() -> Self {
        let town = |lat, lon| Town {
            lat,
            lon,
            population: 4000.0,
        };
        Self {
            relief: Relief::Mountainous,
            towns: vec![
                town(21.07, 43.75),
                town(21.25, 43.57),
                town(21.43, 43.75),
                town(21.25, 43.93),
            ],
            ridge_height_m: 1200.0,
            town_sigma_m: 2000.0,
            aggregation_factor: 3,
            ..Self::flat(7)
        }
    }

    pub fn region(&self) -> Region {
        Region {
            lat_min: self.lat0,
            lat_max: self.lat0 + self.nrows as f64 * self.cellsize,
            lon_min: self.lon0,
            lon_max: self.lon0 + self.ncols as f64 * self.cellsize,
        }
    }
}

/// Paths of a generated scenario.
#[derive(Debug, Clone)]
pub struct SynthScenario {
    pub scenario_path: PathBuf,
    pub towns: Vec<Town>,
}

fn draw_towns(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Town> {
    let r = cfg.region();
    let margin = 0.06;
    let mut towns: Vec<Town> = Vec::new();
    let mut attempts = 0;
    while towns.len() < cfg.n_towns && attempts < 10_000 {
        attempts += 1;
        let lat = rng.random_range(r.lat_min + margin..r.lat_max - margin);
        let lon = rng.random_range(r.lon_min + margin..r.lon_max - margin);
        if towns
            .iter()
            .all(|t| (t.lat - lat).hypot(t.lon - lon) > 0.12)
        {
            towns.push(Town {
                lat,
                lon,
                population: rng.random_range(1500.0..6000.0),
            });
        }
    }
    towns
}

fn ground_m(p: &GeoPoint) -> GeoPoint {
    GeoPoint { alt_m: 0.0, ..*p }
}

/// Writes `population.asc`, `terrain.asc`, `towers.csv` and `scenario.json`
/// into `dir`.
pub fn write_synthetic_scenario(dir: &Path, cfg: &SynthConfig) -> std::io::Result<SynthScenario> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let towns = if cfg.towns.is_empty() {
        draw_towns(cfg, &mut rng)
    } else {
        cfg.towns.clone()
    };
    let phase: (f64, f64) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    let centers: Vec<GeoPoint> = towns
        .iter()
        .map(|t| GeoPoint {
            lat: t.lat,
            lon: t.lon,
            alt_m: 0.0,
        })
        .collect();

    let terrain = GeoGrid::from_fn(
        cfg.ncols,
        cfg.nrows,
        cfg.lon0,
        cfg.lat0,
        cfg.cellsize,
        |lat, lon| {
            let p = GeoPoint {
                lat,
                lon,
                alt_m: 0.0,
            };
            let mut h =
                600.0 + 15.0 * (lat * 40.0 + phase.0).sin() + 15.0 * (lon * 35.0 + phase.1).cos();
            if cfg.relief == Relief::Mountainous {
                for c in &centers {
                    let r = haversine_distance_m(&ground_m(&p), c);
                    h += cfg.ridge_height_m
                        * (-((r - cfg.ridge_radius_m) / cfg.ridge_width_m).powi(2)).exp();
                }
            }
            h
        },
    );

    // cell populations: Gaussian towns, deterministic per-cell jitter
    let mut jitter = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let cell_area_sigma = |sigma: f64| 2.0 * std::f64::consts::PI * sigma * sigma;
    let cell_m = cfg.cellsize * 111_000.0;
    let mut pop = GeoGrid::from_fn(
        cfg.ncols,
        cfg.nrows,
        cfg.lon0,
        cfg.lat0,
        cfg.cellsize,
        |lat, lon| {
            let p = GeoPoint {
                lat,
                lon,
                alt_m: 0.0,
            };
            towns
                .iter()
                .zip(&centers)
                .map(|(t, c)| {
                    let r = haversine_distance_m(&p, c);
                    if cfg.relief == Relief::Mountainous
                        && r > cfg.ridge_radius_m - cfg.ridge_width_m
                    {
                        return 0.0;
                    }
                    t.population * cell_m * cell_m / cell_area_sigma(cfg.town_sigma_m)
                        * (-(r * r) / (2.0 * cfg.town_sigma_m * cfg.town_sigma_m)).exp()
                })
                .sum()
        },
    );
    for v in &mut pop.values {
        let x = *v * jitter.random_range(0.85..1.15);
        *v = if x < 0.5 {
            0.0
        } else {
            (x * 100.0).round() / 100.0
        };
    }

    std::fs::write(dir.join("terrain.asc"), write_grid(&terrain))?;
    std::fs::write(dir.join("population.asc"), write_grid(&pop))?;
    let mut towers = String::from("id,lat,lon,height_m\n");
    if cfg.towers_at_towns {
        for (k, t) in towns.iter().enumerate() {
            towers.push_str(&format!("T{k},{},{},40\n", t.lat, t.lon));
        }
    }
    std::fs::write(dir.join("towers.csv"), towers)?;

    let region = cfg.region();
    let scenario = json!({
        "region": region,
        "frequency_hz": 5e9,
        "bandwidth_hz": 10e6,
        "tx_power_w": 20.0,
        "cost_hap": 1200.0,
        "cost_tbs": 600.0,
        "min_rate_bps": 2e6,
        "population_path": "population.asc",
        "terrain_path": "terrain.asc",
        "towers_path": "towers.csv",
        "sites": {
            "tbs_spacing_deg": cfg.tbs_spacing_deg,
            "hap_spacing_deg": cfg.hap_spacing_deg,
        },
        "demand": {
            "aggregation_factor": cfg.aggregation_factor,
            "min_users": 1.0,
        },
        "optimizer": {"gap": 1e-6, "time_limit_s": 120.0},
    });
    let scenario_path = dir.join("scenario.json");
    std::fs::write(
        &scenario_path,
        serde_json::to_string_pretty(&scenario).expect("json") + "\n",
    )?;
    Ok(SynthScenario {
        scenario_path,
        towns,
    })
}
