//! Output files: arcs and masks, boundary point lists, GeoJSON contours,
//! objective traces and distance matrices.

use std::fmt::Write as _;
use std::path::Path;

use dirhdr_core::hdr::{GridRegion, Polyline, Region};
use dirhdr_core::sphere::wrap_angle;
use dirhdr_core::{Dim, UnitVector};
use serde_json::{json, Value};

use crate::CliError;

pub const CIRCLE_BOUNDARY_HEADER: &str = "theta_rad";
pub const SPHERE_BOUNDARY_HEADER: &str = "lon_deg,lat_deg";

pub fn arcs_csv(region: &Region) -> String {
    let mut s = String::from("start_rad,end_rad,length_rad\n");
    if let Some(arcs) = region.as_arcs() {
        if arcs.is_full() {
            let _ = writeln!(s, "0,{},{}", std::f64::consts::TAU, std::f64::consts::TAU);
        }
        for a in arcs.arcs() {
            let _ = writeln!(s, "{},{},{}", a.start, wrap_angle(a.end()), a.len);
        }
    }
    s
}

pub fn mask_csv(region: &GridRegion) -> String {
    let mut s = String::from("lon_deg,lat_deg,inside,density\n");
    for ((p, inside), v) in region.grid().points().iter().zip(region.mask()).zip(region.values()) {
        let (lon, lat) = p.lonlat().expect("sphere grid");
        // interior values skipped by the pruned evaluation are left blank
        let v = if v.is_nan() { String::new() } else { v.to_string() };
        let _ = writeln!(s, "{lon},{lat},{},{v}", u8::from(*inside));
    }
    s
}

pub fn boundary_csv(dim: Dim, points: &[UnitVector]) -> String {
    let mut s = String::from(match dim {
        Dim::Circle => CIRCLE_BOUNDARY_HEADER,
        Dim::Sphere => SPHERE_BOUNDARY_HEADER,
    });
    s.push('\n');
    for p in points {
        match dim {
            Dim::Circle => {
                let _ = writeln!(s, "{}", p.angle().expect("circle point"));
            }
            Dim::Sphere => {
                let (lon, lat) = p.lonlat().expect("sphere point");
                let _ = writeln!(s, "{lon},{lat}");
            }
        }
    }
    s
}

/// Reads a boundary file written by [`boundary_csv`]; the header decides
/// the dimension.
pub fn read_boundary(path: &Path) -> Result<(Dim, Vec<UnitVector>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let dim = match lines.next() {
        Some(CIRCLE_BOUNDARY_HEADER) => Dim::Circle,
        Some(SPHERE_BOUNDARY_HEADER) => Dim::Sphere,
        other => return Err(bad(format!("unrecognized boundary header {other:?}"))),
    };
    let mut points = Vec::new();
    for (i, l) in lines.enumerate() {
        let v: Vec<f64> = l
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        let p = match (dim, v.as_slice()) {
            (Dim::Circle, [t]) => dirhdr_core::sphere::angle_to_unit(*t),
            (Dim::Sphere, [lon, lat]) => dirhdr_core::sphere::lonlat_to_unit(*lon, *lat),
            _ => return Err(bad(format!("row {}: wrong field count", i + 2))),
        }
        .map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        points.push(p);
    }
    if points.is_empty() {
        return Err(bad("boundary file has no points".into()));
    }
    Ok((dim, points))
}

fn ring_coordinates(line: &Polyline) -> Vec<Value> {
    let mut coords: Vec<Value> = line
        .points
        .iter()
        .map(|p| {
            let (lon, lat) = p.lonlat().expect("sphere point");
            json!([lon, lat])
        })
        .collect();
    if line.closed {
        if let Some(first) = coords.first().cloned() {
            coords.push(first);
        }
    }
    coords
}

/// Contours as a GeoJSON FeatureCollection of LineStrings; closed
/// contours repeat their first vertex.
pub fn contours_geojson(lines: &[Polyline], tau: f64, level: f64) -> String {
    let features: Vec<Value> = lines
        .iter()
        .map(|l| {
            json!({
                "type": "Feature",
                "properties": { "tau": tau, "level": level, "closed": l.closed },
                "geometry": { "type": "LineString", "coordinates": ring_coordinates(l) },
            })
        })
        .collect();
    let fc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_string_pretty(&fc).expect("json values serialize")
}

pub fn trace_csv(trace: &[(f64, f64)]) -> String {
    let mut s = String::from("h,objective\n");
    for (h, v) in trace {
        let _ = writeln!(s, "{h},{v}");
    }
    s
}

pub fn matrix_csv(names: &[String], m: &[Vec<f64>]) -> String {
    let mut s = String::from("file");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (n, row) in names.iter().zip(m) {
        s.push_str(n);
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
