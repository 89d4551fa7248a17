use super::GeoPoint;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle ground distance (haversine) in meters. Altitudes are ignored.
pub fn haversine_distance_m(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// 3D distance combining the ground distance with the altitude difference.
pub fn slant_distance_m(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let ground = haversine_distance_m(a, b);
    let dz = b.alt_m - a.alt_m;
    (ground * ground + dz * dz).sqrt()
}

/// Point at fraction `t` along the great circle from `a` to `b`, altitude 0.
pub(crate) fn intermediate_point(a: &GeoPoint, b: &GeoPoint, t: f64) -> (f64, f64) {
    let delta = haversine_distance_m(a, b) / EARTH_RADIUS_M;
    if delta < 1e-12 {
        return (a.lat, a.lon);
    }
    let (lat1, lon1) = (a.lat.to_radians(), a.lon.to_radians());
    let (lat2, lon2) = (b.lat.to_radians(), b.lon.to_radians());
    let sa = ((1.0 - t) * delta).sin() / delta.sin();
    let sb = (t * delta).sin() / delta.sin();
    let x = sa * lat1.cos() * lon1.cos() + sb * lat2.cos() * lon2.cos();
    let y = sa * lat1.cos() * lon1.sin() + sb * lat2.cos() * lon2.sin();
    let z = sa * lat1.sin() + sb * lat2.sin();
    (
        z.atan2((x * x + y * y).sqrt()).to_degrees(),
        y.atan2(x).to_degrees(),
    )
}
