//! Reading directional data from delimited text files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dirhdr_core::sphere::{angle_to_unit, lonlat_to_unit, wrap_angle};
use dirhdr_core::{Dim, UnitVector};

use crate::CliError;

/// Accepted norm range for `xyz` rows before renormalization.
pub const XYZ_NORM_RANGE: (f64, f64) = (0.99, 1.01);
/// Ingest fails when more than this fraction of data rows is rejected.
pub const MAX_REJECTED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputFormat {
    AnglesRad,
    AnglesDeg,
    LonlatDeg,
    Xyz,
}

impl InputFormat {
    pub fn dim(self) -> Dim {
        match self {
            InputFormat::AnglesRad | InputFormat::AnglesDeg => Dim::Circle,
            InputFormat::LonlatDeg | InputFormat::Xyz => Dim::Sphere,
        }
    }

    fn fields(self) -> usize {
        match self {
            InputFormat::AnglesRad | InputFormat::AnglesDeg => 1,
            InputFormat::LonlatDeg => 2,
            InputFormat::Xyz => 3,
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            InputFormat::AnglesRad => "theta_rad",
            InputFormat::AnglesDeg => "theta_deg",
            InputFormat::LonlatDeg => "lon_deg,lat_deg",
            InputFormat::Xyz => "x,y,z",
        }
    }

    fn parse_row(self, v: &[f64]) -> Result<UnitVector, String> {
        match self {
            InputFormat::AnglesRad => angle_to_unit(v[0]).map_err(|e| e.to_string()),
            InputFormat::AnglesDeg => angle_to_unit(v[0].to_radians()).map_err(|e| e.to_string()),
            InputFormat::LonlatDeg => lonlat_to_unit(v[0], v[1]).map_err(|e| e.to_string()),
            InputFormat::Xyz => {
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if !(XYZ_NORM_RANGE.0..=XYZ_NORM_RANGE.1).contains(&norm) {
                    return Err(format!("norm {norm:.4} outside [{}, {}]", XYZ_NORM_RANGE.0, XYZ_NORM_RANGE.1));
                }
                UnitVector::from_slice(&[v[0] / norm, v[1] / norm, v[2] / norm]).map_err(|e| e.to_string())
            }
        }
    }

    /// One output row in this format: angles in [0, 2π) or [0, 360),
    /// longitudes in [−180, 180).
    pub fn format_point(self, x: &UnitVector) -> String {
        let c = x.coords();
        match self {
            InputFormat::AnglesRad => format!("{}", point_angle(x)),
            InputFormat::AnglesDeg => format!("{}", point_angle(x).to_degrees().rem_euclid(360.0)),
            InputFormat::LonlatDeg => {
                let (lon, lat) = x.lonlat().expect("sphere point");
                format!("{lon},{lat}")
            }
            InputFormat::Xyz => format!("{},{},{}", c[0], c[1], c[2]),
        }
    }
}

fn point_angle(x: &UnitVector) -> f64 {
    wrap_angle(x.angle().expect("circle point"))
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::AnglesRad => "angles-rad",
            InputFormat::AnglesDeg => "angles-deg",
            InputFormat::LonlatDeg => "lonlat-deg",
            InputFormat::Xyz => "xyz",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceInfo {
    pub path: PathBuf,
    pub format: InputFormat,
    pub header: bool,
    /// Data rows seen (header, blank and comment lines excluded).
    pub rows: usize,
    pub skipped: Vec<RowIssue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: Dim,
    pub points: Vec<UnitVector>,
    pub source: SourceInfo,
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split([',', ';', '\t', ' ']).filter(|f| !f.is_empty()).collect()
}

fn numeric(fields: &[&str]) -> Option<Vec<f64>> {
    fields.iter().map(|f| f64::from_str(f).ok()).collect()
}

/// Parses text in `format`. A first data row with any non-numeric field is
/// taken as a header. Lines starting with `#` are comments.
pub fn parse_text(text: &str, format: InputFormat, path: &Path) -> Result<Dataset, CliError> {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let mut rows = 0;
    let mut header = false;
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let values = numeric(&fields);
        if first {
            first = false;
            if values.is_none() {
                header = true;
                continue;
            }
        }
        rows += 1;
        let issue = |reason: String| RowIssue { line: i + 1, reason };
        let Some(values) = values else {
            skipped.push(issue(format!("non-numeric field in `{line}`")));
            continue;
        };
        if values.len() != format.fields() {
            skipped.push(issue(format!("expected {} field(s), found {}", format.fields(), values.len())));
            continue;
        }
        if values.iter().any(|v| !v.is_finite()) {
            skipped.push(issue("non-finite value".into()));
            continue;
        }
        match format.parse_row(&values) {
            Ok(p) => points.push(p),
            Err(reason) => skipped.push(issue(reason)),
        }
    }
    if rows == 0 {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    }
    if skipped.len() as f64 > MAX_REJECTED_FRACTION * rows as f64 {
        return Err(CliError::Validation(format!(
            "{}: {} of {rows} rows rejected (first: line {}: {})",
            path.display(),
            skipped.len(),
            skipped[0].line,
            skipped[0].reason
        )));
    }
    Ok(Dataset {
        dim: format.dim(),
        points,
        source: SourceInfo { path: path.to_path_buf(), format, header, rows, skipped },
    })
}

pub fn ingest(path: &Path, format: InputFormat) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_text(&text, format, path)
}

/// Points in `format`, with a header row, ready to be ingested again.
pub fn export_points(points: &[UnitVector], format: InputFormat) -> String {
    let mut s = String::from(format.header());
    s.push('\n');
    for p in points {
        s.push_str(&format.format_point(p));
        s.push('\n');
    }
    s
}
