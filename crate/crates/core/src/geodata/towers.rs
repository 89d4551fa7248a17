use super::{GeoError, GeoPoint, Region};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerRecord {
    pub id: String,
    pub point: GeoPoint,
    pub height_m: f64,
}

#[derive(Deserialize)]
struct TowerRow {
    id: String,
    lat: f64,
    lon: f64,
    height_m: f64,
}

pub fn load_towers(path: impl AsRef<Path>, region: &Region) -> Result<Vec<TowerRecord>, GeoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GeoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_towers(&text, region)
}

/// Parses tower CSV (`id,lat,lon,height_m`) keeping the towers inside
/// `region` in input order. Row numbers in errors count the header as row 1.
pub fn parse_towers(text: &str, region: &Region) -> Result<Vec<TowerRecord>, GeoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| GeoError::TowerRow {
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    let expected = ["id", "lat", "lon", "height_m"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(GeoError::TowerRow {
            row: 1,
            msg: format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                headers
            ),
        });
    }
    let mut towers = Vec::new();
    for (i, rec) in reader.deserialize::<TowerRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| GeoError::TowerRow {
            row,
            msg: e.to_string(),
        })?;
        let point = GeoPoint::new(rec.lat, rec.lon, 0.0).map_err(|e| GeoError::TowerRow {
            row,
            msg: e.to_string(),
        })?;
        if !(rec.height_m >= 0.0 && rec.height_m.is_finite()) {
            return Err(GeoError::TowerRow {
                row,
                msg: format!("height_m must be >= 0, got {}", rec.height_m),
            });
        }
        if region.contains(point.lat, point.lon) {
            towers.push(TowerRecord {
                id: rec.id,
                point,
                height_m: rec.height_m,
            });
        }
    }
    Ok(towers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> Region {
        Region::new(21.0, 21.5, 43.5, 44.0).unwrap()
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_towers("id,lat,lon,height_m\n", &region())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn filters_outside_and_keeps_order() {
        let csv = "id,lat,lon,height_m\nb,21.1,43.6,30\nout,22.0,43.6,25\na,21.4,43.9,45.5\n";
        let t = parse_towers(csv, &region()).unwrap();
        let ids: Vec<&str> = t.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(t[1].height_m, 45.5);
    }

    #[test]
    fn invalid_latitude_names_row() {
        let csv = "id,lat,lon,height_m\nok,21.1,43.6,30\nbad,91,43.6,30\n";
        let err = parse_towers(csv, &region()).unwrap_err();
        assert!(matches!(err, GeoError::TowerRow { row: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_row() {
        let csv = "id,lat,lon,height_m\nx,abc,43.6,30\n";
        assert!(matches!(
            parse_towers(csv, &region()),
            Err(GeoError::TowerRow { row: 2, .. })
        ));
        let csv = "id,lat,lon,height_m\nx,21.1,43.6\n";
        assert!(matches!(
            parse_towers(csv, &region()),
            Err(GeoError::TowerRow { row: 2, .. })
        ));
    }

    #[test]
    fn wrong_header() {
        assert!(parse_towers("name,lat,lon\n", &region()).is_err());
    }
}
