//! File emitters: ESRI ASCII grids, SVG heatmaps, GeoJSON boundaries and
//! the JSON run report.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use geojson::{Feature, FeatureCollection, Geometry, JsonObject, JsonValue, Value};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, RegionMap, Ring};
use crate::grid::{Grid, GridGeometry};
use crate::scalar::Scalar;

/// Formats `v` with `digits` significant digits in the style of C's `%g`.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

const NODATA: f64 = -9999.0;

/// Writes `raster` as an ESRI ASCII grid; rows are emitted from the top
/// (largest y) down. Cells must be square.
pub fn write_ascii_grid<T: Scalar, W: Write>(raster: &Grid<T>, out: W) -> Result<()> {
    let g = &raster.geom;
    let (dx, dy) = (g.dx.as_f64(), g.dy.as_f64());
    if (dx - dy).abs() > 1e-9 * dx.abs().max(dy.abs()) {
        return Err(Error::InvalidOption(format!("ASCII grids need square cells, got {dx} × {dy}")));
    }
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "ncols {}", g.nx)?;
    writeln!(w, "nrows {}", g.ny)?;
    writeln!(w, "xllcorner {}", g.origin.x.as_f64())?;
    writeln!(w, "yllcorner {}", g.origin.y.as_f64())?;
    writeln!(w, "cellsize {}", dx)?;
    writeln!(w, "NODATA_value -9999")?;
    let mut line = String::new();
    for j in (0..g.ny).rev() {
        line.clear();
        for i in 0..g.nx {
            if i > 0 {
                line.push(' ');
            }
            let v = raster.get(i, j).as_f64();
            line.push_str(&if v.is_finite() { format_significant(v, 9) } else { "-9999".into() });
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an ESRI ASCII grid; NODATA cells become NaN.
pub fn read_ascii_grid<R: Read>(input: R) -> Result<Grid<f64>> {
    let bad = |m: String| Error::AsciiGrid(m);
    let mut lines = BufReader::new(input).lines();
    let mut header = std::collections::HashMap::new();
    for _ in 0..6 {
        let line = lines.next().ok_or_else(|| bad("truncated header".into()))??;
        let (k, v) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad(format!("bad header line {line:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| bad(format!("bad header value {line:?}")))?;
        header.insert(k.to_ascii_lowercase(), v);
    }
    let get = |k: &str| header.get(k).copied().ok_or_else(|| bad(format!("missing {k}")));
    let (nx, ny) = (get("ncols")? as usize, get("nrows")? as usize);
    let cell = get("cellsize")?;
    let nodata = header.get("nodata_value").copied().unwrap_or(NODATA);
    let geom = GridGeometry::new(nx, ny, Point::new(get("xllcorner")?, get("yllcorner")?), cell, cell);
    let mut grid = Grid::filled(geom, 0.0);
    let mut row = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= ny {
            return Err(bad("too many rows".into()));
        }
        let j = ny - 1 - row;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != nx {
            return Err(bad(format!("row {row} has {} values, expected {nx}", values.len())));
        }
        for (i, s) in values.into_iter().enumerate() {
            let v: f64 = s.parse().map_err(|_| bad(format!("bad value {s:?}")))?;
            grid.set(i, j, if v == nodata { f64::NAN } else { v });
        }
        row += 1;
    }
    if row != ny {
        return Err(bad(format!("expected {ny} rows, found {row}")));
    }
    Ok(grid)
}

/// Grey ramp: 0 (and below) is black, `max` is white.
fn grey(v: f64, max: f64) -> String {
    let level = if max > 0.0 && v > 0.0 {
        (255.0 * (v / max)).round().clamp(0.0, 255.0) as u8
    } else {
        0
    };
    format!("#{level:02x}{level:02x}{level:02x}")
}

/// Heatmap of `raster` (one unit-sized rect per cell) with the boundaries of
/// `map` overlaid. `map` must be in the raster's coordinates.
pub fn write_svg_heatmap<T: Scalar, W: Write>(raster: &Grid<T>, map: &RegionMap<T>, out: W) -> Result<()> {
    let g = &raster.geom;
    let max = raster.data.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let mut w = std::io::BufWriter::new(out);
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{nx}" height="{ny}" viewBox="0 0 {nx} {ny}" shape-rendering="crispEdges">"#,
        nx = g.nx,
        ny = g.ny
    )?;
    writeln!(w, "<g stroke=\"none\">")?;
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            writeln!(
                w,
                r#"<rect x="{i}" y="{}" width="1" height="1" fill="{}"/>"#,
                g.ny - 1 - j,
                grey(raster.get(i, j).as_f64(), max)
            )?;
        }
    }
    writeln!(w, "</g>")?;
    writeln!(w, r##"<g fill="none" stroke="#e4003a" stroke-width="0.5">"##)?;
    let to_px = |p: &Point<T>| {
        let x = (p.x - g.origin.x) / g.dx;
        let y = T::from_count(g.ny) - (p.y - g.origin.y) / g.dy;
        (x.as_f64(), y.as_f64())
    };
    for region in &map.regions {
        let mut d = String::new();
        for ring in region.rings() {
            for (k, p) in ring.vertices.iter().enumerate() {
                let (x, y) = to_px(p);
                let _ = write!(d, "{}{x:.3} {y:.3} ", if k == 0 { "M" } else { "L" });
            }
            d.push_str("Z ");
        }
        writeln!(w, r#"<path data-id="{}" d="{}"/>"#, xml_escape(&region.id), d.trim_end())?;
    }
    writeln!(w, "</g>")?;
    writeln!(w, "</svg>")?;
    w.flush()?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn ring_positions<T: Scalar>(ring: &Ring<T>) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = ring.vertices.iter().map(|p| vec![p.x.as_f64(), p.y.as_f64()]).collect();
    if let Some(first) = pts.first().cloned() {
        pts.push(first);
    }
    pts
}

/// Serialises regions as a GeoJSON FeatureCollection with `id`,
/// `population` and `area` properties.
pub fn regions_to_geojson<T: Scalar>(map: &RegionMap<T>) -> String {
    let features = map
        .regions
        .iter()
        .map(|r| {
            let polys: Vec<Vec<Vec<Vec<f64>>>> = r
                .polygons
                .iter()
                .map(|p| p.rings().map(ring_positions).collect())
                .collect();
            let value = if polys.len() == 1 {
                Value::Polygon(polys.into_iter().next().expect("one polygon"))
            } else {
                Value::MultiPolygon(polys)
            };
            let mut props = JsonObject::new();
            props.insert("id".into(), JsonValue::from(r.id.clone()));
            props.insert("population".into(), JsonValue::from(r.population.as_f64()));
            props.insert("area".into(), JsonValue::from(r.area.as_f64()));
            Feature {
                bbox: None,
                geometry: Some(Geometry::new(value)),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    }
    .to_string()
}

/// Per-region line of a [`RunReport`]. Areas are in input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub id: String,
    pub population: f64,
    pub target_area: f64,
    pub achieved_area: f64,
    pub area_error: f64,
    pub pycno_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoughnessReport {
    pub plateau: Option<f64>,
    pub flow: Option<f64>,
    pub tobler: Option<f64>,
    pub hybrid: Option<f64>,
}

/// Diagnostics of one CLI run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub regions: Vec<RegionReport>,
    pub iterations: usize,
    pub sigma_log: Vec<f64>,
    pub area_error_log: Vec<f64>,
    pub max_area_error: Option<f64>,
    pub wall_time_seconds: f64,
    pub converged: bool,
    pub method: Option<String>,
    pub roughness: RoughnessReport,
    pub zero_population_ids: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(3.0, 9), "3");
        assert_eq!(format_significant(0.1, 9), "0.1");
        assert_eq!(format_significant(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_significant(123456789.4, 9), "123456789");
        assert_eq!(format_significant(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(format_significant(-2.5e-7, 9), "-2.5e-07");
        assert_eq!(format_significant(0.0, 9), "0");
    }

    #[test]
    fn ascii_grid_layout() {
        let geom = GridGeometry::new(2, 2, Point::new(0.0, 0.0), 0.5, 0.5);
        let g = Grid::from_vec(geom, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_ascii_grid(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.5\nNODATA_value -9999\n3 4\n1 2\n"
        );
        assert!(!text.lines().skip(6).any(|l| l.contains("-9999")));
        assert_eq!(read_ascii_grid(text.as_bytes()).unwrap(), g);
    }

    #[test]
    fn ascii_grid_rejects_rectangular_cells() {
        let g = Grid::filled(GridGeometry::new(2, 2, Point::new(0.0, 0.0), 0.5, 0.25), 1.0);
        assert!(write_ascii_grid(&g, Vec::new()).is_err());
    }

    #[test]
    fn svg_ramp_endpoints() {
        assert_eq!(grey(0.0, 5.0), "#000000");
        assert_eq!(grey(5.0, 5.0), "#ffffff");
        assert_eq!(grey(-1.0, 5.0), "#000000");
    }
}
