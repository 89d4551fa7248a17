use super::distance::{haversine_distance_m, intermediate_point};
use super::{GeoError, GeoGrid, GeoPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub distance_m: f64,
    pub elevation_m: f64,
}

/// Terrain elevations along the great circle from `a` to `b`.
///
/// The path is split into `ceil(d / step_m)` equal segments so consecutive
/// samples are at most `step_m` apart; both endpoints are included.
pub fn sample_terrain_profile(
    terrain: &GeoGrid,
    a: &GeoPoint,
    b: &GeoPoint,
    step_m: f64,
) -> Result<Vec<ProfileSample>, GeoError> {
    if !(step_m > 0.0 && step_m.is_finite()) {
        return Err(GeoError::InvalidArgument(format!(
            "step_m must be > 0, got {step_m}"
        )));
    }
    for p in [a, b] {
        if !terrain.covers(p.lat, p.lon) {
            return Err(GeoError::OutOfCoverage(*p));
        }
    }
    let total = haversine_distance_m(a, b);
    if total == 0.0 {
        return Ok(vec![ProfileSample {
            distance_m: 0.0,
            elevation_m: terrain.bilinear(a.lat, a.lon)?,
        }]);
    }
    let segments = (total / step_m).ceil().max(1.0) as usize;
    (0..=segments)
        .map(|k| {
            let (lat, lon) = match k {
                0 => (a.lat, a.lon),
                k if k == segments => (b.lat, b.lon),
                _ => intermediate_point(a, b, k as f64 / segments as f64),
            };
            let elevation_m = terrain.bilinear(lat, lon).map_err(|_| {
                GeoError::OutOfCoverage(GeoPoint {
                    lat,
                    lon,
                    alt_m: 0.0,
                })
            })?;
            Ok(ProfileSample {
                distance_m: total * k as f64 / segments as f64,
                elevation_m,
            })
        })
        .collect()
}
