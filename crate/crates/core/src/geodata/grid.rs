use super::{GeoError, GeoPoint, Region};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// A uniform lat/lon raster. Row 0 is the northernmost row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

const HEADER_KEYS: [&str; 6] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "cellsize",
    "nodata_value",
];

impl GeoGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, GeoError> {
        if ncols == 0 || nrows == 0 {
            return Err(GeoError::InvalidArgument(
                "grid dimensions must be positive".into(),
            ));
        }
        if !(cellsize > 0.0 && cellsize.is_finite()) {
            return Err(GeoError::InvalidArgument(format!(
                "cellsize {cellsize} must be > 0"
            )));
        }
        if values.len() != ncols * nrows {
            return Err(GeoError::ValueCount {
                line: 0,
                expected: ncols * nrows,
                found: values.len(),
            });
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite() && **v != nodata) {
            return Err(GeoError::NonFinite { line: 0, value: v });
        }
        Ok(Self {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata,
            values,
        })
    }

    /// Builds a grid by evaluating `f(lat, lon)` at every cell center.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(ncols * nrows);
        for row in 0..nrows {
            let lat = yllcorner + (nrows as f64 - row as f64 - 0.5) * cellsize;
            for col in 0..ncols {
                let lon = xllcorner + (col as f64 + 0.5) * cellsize;
                values.push(f(lat, lon));
            }
        }
        Self {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata: -9999.0,
            values,
        }
    }

    pub fn lat_max(&self) -> f64 {
        self.yllcorner + self.nrows as f64 * self.cellsize
    }

    pub fn lon_max(&self) -> f64 {
        self.xllcorner + self.ncols as f64 * self.cellsize
    }

    pub fn extent(&self) -> Region {
        Region {
            lat_min: self.yllcorner,
            lat_max: self.lat_max(),
            lon_min: self.xllcorner,
            lon_max: self.lon_max(),
        }
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.index(row, col);
        self.values[i] = value;
    }

    pub fn is_nodata(&self, value: f64) -> bool {
        value == self.nodata || !value.is_finite()
    }

    /// Cell value with nodata mapped to `None`.
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.get(row, col);
        (!self.is_nodata(v)).then_some(v)
    }

    /// (lat, lon) of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.yllcorner + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize,
            self.xllcorner + (col as f64 + 0.5) * self.cellsize,
        )
    }

    /// Whether (lat, lon) lies inside the raster's outer cell edges.
    pub fn covers(&self, lat: f64, lon: f64) -> bool {
        let eps = self.cellsize * 1e-9;
        lat >= self.yllcorner - eps
            && lat <= self.lat_max() + eps
            && lon >= self.xllcorner - eps
            && lon <= self.lon_max() + eps
    }

    /// Bilinear interpolation between cell centers; positions between the
    /// outermost centers and the raster edge clamp to the edge cells. Nodata
    /// cells count as 0.
    pub fn bilinear(&self, lat: f64, lon: f64) -> Result<f64, GeoError> {
        if !self.covers(lat, lon) {
            return Err(GeoError::OutOfCoverage(GeoPoint {
                lat,
                lon,
                alt_m: 0.0,
            }));
        }
        // Fractional indices measured from the center of cell (row 0, col 0).
        let fx = ((lon - self.xllcorner) / self.cellsize - 0.5).clamp(0.0, (self.ncols - 1) as f64);
        let fy = ((self.lat_max() - lat) / self.cellsize - 0.5).clamp(0.0, (self.nrows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.ncols - 1);
        let r0 = (fy.floor() as usize).min(self.nrows - 1);
        let c1 = (c0 + 1).min(self.ncols - 1);
        let r1 = (r0 + 1).min(self.nrows - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let z = |r, c| self.value(r, c).unwrap_or(0.0);
        let top = z(r0, c0) * (1.0 - tx) + z(r0, c1) * tx;
        let bottom = z(r1, c0) * (1.0 - tx) + z(r1, c1) * tx;
        Ok(top * (1.0 - ty) + bottom * ty)
    }

    /// Row/column range of cells whose centers fall inside `region`, or
    /// `None` when no center does.
    pub fn cells_within(
        &self,
        region: &Region,
    ) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let rows: Vec<usize> = (0..self.nrows)
            .filter(|&r| {
                let (lat, _) = self.cell_center(r, 0);
                lat >= region.lat_min && lat <= region.lat_max
            })
            .collect();
        let cols: Vec<usize> = (0..self.ncols)
            .filter(|&c| {
                let (_, lon) = self.cell_center(0, c);
                lon >= region.lon_min && lon <= region.lon_max
            })
            .collect();
        match (rows.first(), rows.last(), cols.first(), cols.last()) {
            (Some(&r0), Some(&r1), Some(&c0), Some(&c1)) => Some((r0..r1 + 1, c0..c1 + 1)),
            _ => None,
        }
    }
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<GeoGrid, GeoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GeoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_grid(&text)
}

pub fn parse_grid(text: &str) -> Result<GeoGrid, GeoError> {
    let mut header: [Option<f64>; 6] = [None; 6];
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let mut last_line = 0;
    for _ in 0..HEADER_KEYS.len() {
        let (idx, line) = lines.next().ok_or(GeoError::Header {
            line: last_line + 1,
            msg: "unexpected end of file in header".into(),
        })?;
        last_line = idx + 1;
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_lowercase();
        let slot = HEADER_KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or(GeoError::Header {
                line: last_line,
                msg: format!("unknown key {key:?}"),
            })?;
        if header[slot].is_some() {
            return Err(GeoError::Header {
                line: last_line,
                msg: format!("duplicate key {key:?}"),
            });
        }
        let raw = parts.next().ok_or(GeoError::Header {
            line: last_line,
            msg: format!("missing value for {key:?}"),
        })?;
        let value: f64 = raw.parse().map_err(|_| GeoError::Header {
            line: last_line,
            msg: format!("non-numeric value {raw:?} for {key:?}"),
        })?;
        if parts.next().is_some() {
            return Err(GeoError::Header {
                line: last_line,
                msg: format!("trailing tokens after {key:?}"),
            });
        }
        header[slot] = Some(value);
    }
    let [Some(ncols), Some(nrows), Some(xll), Some(yll), Some(cellsize), Some(nodata)] = header
    else {
        return Err(GeoError::Header {
            line: last_line,
            msg: "header must define ncols, nrows, xllcorner, yllcorner, cellsize, nodata_value"
                .into(),
        });
    };
    let dim = |v: f64, key: &str| -> Result<usize, GeoError> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(GeoError::Header {
                line: last_line,
                msg: format!("{key} must be a positive integer, got {v}"),
            })
        }
    };
    let ncols = dim(ncols, "ncols")?;
    let nrows = dim(nrows, "nrows")?;
    if !(cellsize > 0.0 && cellsize.is_finite()) {
        return Err(GeoError::Header {
            line: last_line,
            msg: format!("cellsize must be > 0, got {cellsize}"),
        });
    }

    let mut values = Vec::with_capacity(ncols * nrows);
    let mut rows_read = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if rows_read == nrows {
            return Err(GeoError::ValueCount {
                line: line_no,
                expected: nrows * ncols,
                found: nrows * ncols + line.split_whitespace().count(),
            });
        }
        let before = values.len();
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| GeoError::NonNumeric {
                line: line_no,
                token: token.to_string(),
            })?;
            if !v.is_finite() && v != nodata {
                return Err(GeoError::NonFinite {
                    line: line_no,
                    value: v,
                });
            }
            values.push(v);
        }
        let found = values.len() - before;
        if found != ncols {
            return Err(GeoError::ValueCount {
                line: line_no,
                expected: ncols,
                found,
            });
        }
        rows_read += 1;
    }
    if rows_read != nrows {
        return Err(GeoError::ValueCount {
            line: last_line + rows_read + 1,
            expected: nrows * ncols,
            found: values.len(),
        });
    }
    Ok(GeoGrid {
        ncols,
        nrows,
        xllcorner: xll,
        yllcorner: yll,
        cellsize,
        nodata,
        values,
    })
}

/// Serializes a grid in the same ASCII layout `parse_grid` reads. Values use
/// the shortest representation that parses back to the identical `f64`.
pub fn write_grid(grid: &GeoGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NCOLS {}", grid.ncols);
    let _ = writeln!(out, "NROWS {}", grid.nrows);
    let _ = writeln!(out, "XLLCORNER {}", grid.xllcorner);
    let _ = writeln!(out, "YLLCORNER {}", grid.yllcorner);
    let _ = writeln!(out, "CELLSIZE {}", grid.cellsize);
    let _ = writeln!(out, "NODATA_VALUE {}", grid.nodata);
    for row in grid.values.chunks(grid.ncols) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}
