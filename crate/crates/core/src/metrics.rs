//! Chord-metric distances between finite point sets.

use crate::error::{Error, Result};
use crate::hdr::{extract_boundary, BoundarySet, Region};
use crate::sphere::{check_same_dim, chord_sq, UnitVector};

/// Largest possible chord distance, used as the error of degenerate regions.
pub const DEGENERATE_PENALTY: f64 = 2.0;

fn check_pair(a: &[UnitVector], b: &[UnitVector]) -> Result<()> {
    let (fa, fb) = match (a.first(), b.first()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::EmptySet),
    };
    check_same_dim(fa.dim(), fb.dim())?;
    for p in a.iter().chain(b) {
        check_same_dim(fa.dim(), p.dim())?;
    }
    Ok(())
}

/// sup over `a` of the distance to the nearest point of `b`, squared.
/// Rows stop scanning once they fall below the running maximum.
fn directed_sq(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let mut worst: f64 = 0.0;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d = chord_sq(p, q);
            if d < best {
                best = d;
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    worst
}

fn coords(s: &[UnitVector]) -> Vec<[f64; 3]> {
    s.iter().map(|p| p.xyz()).collect()
}

/// Hausdorff distance under the chord metric.
pub fn hausdorff(a: &[UnitVector], b: &[UnitVector]) -> Result<f64> {
    check_pair(a, b)?;
    let (ca, cb) = (coords(a), coords(b));
    let d2 = directed_sq(&ca, &cb).max(directed_sq(&cb, &ca));
    Ok(d2.sqrt().min(2.0))
}

/// Smallest chord distance between a point of `a` and a point of `b`.
pub fn min_set_distance(a: &[UnitVector], b: &[UnitVector]) -> Result<f64> {
    check_pair(a, b)?;
    let (ca, cb) = (coords(a), coords(b));
    let mut best = f64::INFINITY;
    for p in &ca {
        for q in &cb {
            best = best.min(chord_sq(p, q));
        }
    }
    Ok(best.sqrt().min(2.0))
}

pub fn boundary_hausdorff(a: &BoundarySet, b: &BoundarySet) -> Result<f64> {
    hausdorff(a.points(), b.points())
}

/// Hausdorff distance between the boundaries of two regions.
/// `DegenerateRegion` when either region is empty or full.
pub fn hdr_error(truth: &Region, est: &Region) -> Result<f64> {
    let tb = extract_boundary(truth).map_err(degenerate)?;
    hdr_error_to(&tb, est)
}

/// As [`hdr_error`] with the truth boundary already extracted.
pub fn hdr_error_to(truth_boundary: &BoundarySet, est: &Region) -> Result<f64> {
    let eb = extract_boundary(est).map_err(degenerate)?;
    boundary_hausdorff(truth_boundary, &eb)
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::EmptyBoundary => Error::DegenerateRegion,
        other => other,
    }
}

/// Error with the degenerate case mapped to the penalty; the flag marks it.
pub fn error_or_penalty(r: Result<f64>) -> Result<(f64, bool)> {
    match r {
        Ok(v) => Ok((v, false)),
        Err(Error::DegenerateRegion) => Ok((DEGENERATE_PENALTY, true)),
        Err(e) => Err(e),
    }
}
