use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Log-spaced scan followed by golden-section refinement in log h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSearch {
    pub lo: f64,
    pub hi: f64,
    pub grid_points: usize,
    /// Stop refining once the bracket is this narrow in log h.
    pub log_tol: f64,
}

pub const MIN_GRID_POINTS: usize = 8;

impl ScalarSearch {
    pub fn new(lo: f64, hi: f64, grid_points: usize) -> Result<Self> {
        let s = Self { lo, hi, grid_points, log_tol: 1e-6 };
        s.validate()?;
        Ok(s)
    }

    pub fn with_tolerance(mut self, log_tol: f64) -> Self {
        self.log_tol = log_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.lo < self.hi) {
            return Err(Error::InvalidArgument(format!(
                "search interval must satisfy 0 < lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.grid_points < MIN_GRID_POINTS {
            return Err(Error::InvalidArgument(format!(
                "search grid needs at least {MIN_GRID_POINTS} points, got {}",
                self.grid_points
            )));
        }
        if !(self.log_tol > 0.0) {
            return Err(Error::InvalidArgument("refinement tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn candidates(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let m = self.grid_points - 1;
        (0..=m)
            .map(|k| match k {
                0 => self.lo,
                k if k == m => self.hi,
                k => (a + (b - a) * k as f64 / m as f64).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SelectionWarning {
    /// The minimizer sits on an edge of the search interval.
    BoundaryHit { edge: Edge, h: f64 },
    /// Candidates whose objective was infinite or NaN.
    DiscardedCandidates { count: usize },
    /// h₁ reference region was empty or full; every candidate got the penalty.
    DegenerateReference,
    /// Some h₁ bootstrap regions were degenerate and received the penalty.
    PenalizedReplicates { count: usize },
}

impl fmt::Display for SelectionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionWarning::BoundaryHit { edge, h } => {
                let side = match edge {
                    Edge::Lower => "lower",
                    Edge::Upper => "upper",
                };
                write!(f, "selected bandwidth {h:.6} is on the {side} edge of the search interval")
            }
            SelectionWarning::DiscardedCandidates { count } => {
                write!(f, "{count} candidate bandwidth(s) had a non-finite objective and were discarded")
            }
            SelectionWarning::DegenerateReference => {
                write!(f, "pilot HDR is empty or full; all candidates were penalized equally")
            }
            SelectionWarning::PenalizedReplicates { count } => {
                write!(f, "{count} bootstrap region(s) had no boundary and were scored with the maximum distance 2")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// Every evaluated (h, objective), sorted by h.
    pub trace: Vec<(f64, f64)>,
    pub warnings: Vec<SelectionWarning>,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn clean(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `objective` over [lo, hi]. Non-finite values are discarded;
/// ties go to the smallest candidate; a minimizer on a grid edge is
/// returned as is with a boundary warning.
pub fn minimize_scalar<F>(objective: F, search: &ScalarSearch) -> Result<Minimum>
where
    F: Fn(f64) -> f64 + Sync,
{
    search.validate()?;
    let cands = search.candidates();
    let vals: Vec<f64> = cands.par_iter().map(|&h| clean(objective(h))).collect();
    let mut trace: Vec<(f64, f64)> = cands.iter().copied().zip(vals.iter().copied()).collect();
    let mut warnings = Vec::new();

    let discarded = vals.iter().filter(|v| !v.is_finite()).count();
    if discarded == vals.len() {
        return Err(Error::AllInfinite);
    }
    if discarded > 0 {
        warnings.push(SelectionWarning::DiscardedCandidates { count: discarded });
    }
    let mut best = 0;
    for k in 0..vals.len() {
        if vals[k] < vals[best] || !vals[best].is_finite() {
            best = k;
        }
    }
    let last = cands.len() - 1;
    if best == 0 || best == last {
        let edge = if best == 0 { Edge::Lower } else { Edge::Upper };
        warnings.push(SelectionWarning::BoundaryHit { edge, h: cands[best] });
        trace.retain(|p| p.1.is_finite());
        return Ok(Minimum { x: cands[best], value: vals[best], trace, warnings });
    }

    // golden section on log h inside the neighbouring grid points
    let f = |u: f64| clean(objective(u.exp()));
    let (mut a, mut b) = (cands[best - 1].ln(), cands[best + 1].ln());
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    trace.push((c.exp(), fc));
    trace.push((d.exp(), fd));
    while b - a > search.log_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            trace.push((c.exp(), fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            trace.push((d.exp(), fd));
        }
    }
    let (mut x, mut value) = if fc <= fd { (c.exp(), fc) } else { (d.exp(), fd) };
    if !(value < vals[best]) {
        x = cands[best];
        value = vals[best];
    }
    trace.retain(|p| p.1.is_finite());
    trace.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(Minimum { x, value, trace, warnings })
}
