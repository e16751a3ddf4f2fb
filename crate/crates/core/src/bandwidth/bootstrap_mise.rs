//! Smoothed-bootstrap MISE on the circle without resampling.
//!
//! For a resample of size n drawn from a density g and re-estimated with a
//! von Mises kernel K_h,
//!
//!   E f*(x)   = (K_h ⊛ g)(x)
//!   Var f*(x) = (1/n) [(K_h² ⊛ g)(x) − (K_h ⊛ g)(x)²]
//!
//! so MISE*(h) = ∫ (K_h ⊛ g − g)² + ∫ Var f*. Taking g to be the true
//! density gives the exact MISE of the estimator, which the tests use.
//! Convolutions are periodic sums on an equispaced grid; the kernel taps
//! are truncated once they drop below 1e-17 of the peak.

use std::f64::consts::{PI, TAU};

use super::optimize::{minimize_scalar, Minimum, ScalarSearch};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::kde::KdeEstimate;
use crate::sphere::{Dim, UnitVector};
use crate::vmf::log_normalizer;

pub const MIN_CONV_GRID: usize = 512;
pub const MAX_CONV_GRID: usize = 16_384;

/// Grid size resolving features of width `scale`: at least 16 nodes per
/// scale unit, rounded up to a power of two.
pub fn conv_grid_size(scale: f64) -> usize {
    let want = (32.0 * PI / scale).ceil();
    if !want.is_finite() || want >= MAX_CONV_GRID as f64 {
        return MAX_CONV_GRID;
    }
    (want as usize).next_power_of_two().clamp(MIN_CONV_GRID, MAX_CONV_GRID)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiseTerms {
    pub integrated_sq_bias: f64,
    pub integrated_variance: f64,
}

impl MiseTerms {
    pub fn total(&self) -> f64 {
        self.integrated_sq_bias + self.integrated_variance
    }
}

/// Taps K(dΔ)^p Δ for d = 0, 1, ... until negligible (at most N/2).
fn taps(kappa: f64, power: f64, n: usize) -> Vec<f64> {
    let step = TAU / n as f64;
    let log_peak = power * (log_normalizer(Dim::Circle, kappa) + kappa);
    let peak = log_peak.exp() * step;
    let mut out = Vec::new();
    for d in 0..=n / 2 {
        let rel = (power * kappa * ((d as f64 * step).cos() - 1.0)).exp();
        if d > 0 && rel < 1e-17 {
            break;
        }
        out.push(peak * rel);
    }
    out
}

fn convolve(f: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let mut s = taps[0] * f[i];
            for (d, &t) in taps.iter().enumerate().skip(1) {
                // the offset N/2 is its own mirror image
                if 2 * d == n {
                    s += t * f[(i + d) % n];
                } else {
                    s += t * (f[(i + d) % n] + f[(i + n - d) % n]);
                }
            }
            s
        })
        .collect()
}

/// MISE terms for estimating a density with values `g` on an N-point
/// circle grid (node k at angle 2πk/N) from n observations at bandwidth h.
pub fn mise_terms_on_grid(g: &[f64], h: f64, n: usize) -> MiseTerms {
    let len = g.len();
    let step = TAU / len as f64;
    let kappa = 1.0 / (h * h);
    let kg = convolve(g, &taps(kappa, 1.0, len));
    let k2g = convolve(g, &taps(kappa, 2.0, len));
    let mut bias = 0.0;
    let mut var = 0.0;
    for i in 0..len {
        bias += (kg[i] - g[i]).powi(2);
        var += k2g[i] - kg[i] * kg[i];
    }
    MiseTerms { integrated_sq_bias: bias * step, integrated_variance: var * step / n as f64 }
}

fn circle_values(density: &dyn Density, len: usize) -> Vec<f64> {
    let step = TAU / len as f64;
    let pts: Vec<UnitVector> = (0..len)
        .map(|k| {
            let (s, c) = (k as f64 * step).sin_cos();
            UnitVector::from_raw([c, s, 0.0], Dim::Circle)
        })
        .collect();
    density.eval_many(&pts)
}

/// Exact MISE of the circular KDE with n observations from `truth`;
/// `truth_scale` is the narrowest feature width of the truth.
pub fn exact_mise(truth: &dyn Density, truth_scale: f64, h: f64, n: usize) -> Result<MiseTerms> {
    if truth.dim() != Dim::Circle {
        return Err(Error::UnsupportedDimension { selector: "exact MISE", dim: truth.dim() });
    }
    let len = conv_grid_size(h.min(truth_scale));
    Ok(mise_terms_on_grid(&circle_values(truth, len), h, n))
}

/// Bootstrap MISE objective around a pilot estimate. Pilot values are
/// computed once on the finest grid any candidate needs; coarser grids are
/// strided views of it.
pub struct BootstrapMise {
    fine: Vec<f64>,
    pilot_h: f64,
    n: usize,
}

impl BootstrapMise {
    pub fn new(pilot: &KdeEstimate, smallest_h: f64) -> Result<Self> {
        if pilot.dim() != Dim::Circle {
            return Err(Error::UnsupportedDimension { selector: "h6", dim: pilot.dim() });
        }
        let len = conv_grid_size(smallest_h.min(pilot.h()));
        Ok(Self { fine: circle_values(pilot, len), pilot_h: pilot.h(), n: pilot.n() })
    }

    pub fn terms(&self, h: f64) -> MiseTerms {
        let len = conv_grid_size(h.min(self.pilot_h)).min(self.fine.len());
        let stride = self.fine.len() / len;
        let g: Vec<f64> = self.fine.iter().step_by(stride).copied().collect();
        mise_terms_on_grid(&g, h, self.n)
    }

    pub fn objective(&self, h: f64) -> f64 {
        if !(h.is_finite() && h > 0.0) {
            return f64::INFINITY;
        }
        self.terms(h).total()
    }

    /// ∫(1/2π − g)², the h → ∞ limit.
    pub fn oversmoothed_limit(&self) -> f64 {
        let u = 1.0 / TAU;
        self.fine.iter().map(|v| (v - u).powi(2)).sum::<f64>() * TAU / self.fine.len() as f64
    }
}

pub fn h6_bootstrap_mise(sample: &[UnitVector], pilot_h: f64, search: &ScalarSearch) -> Result<Minimum> {
    let pilot = KdeEstimate::new(sample.to_vec(), pilot_h)?;
    let b = BootstrapMise::new(&pilot, search.lo)?;
    minimize_scalar(|h| b.objective(h), search)
}
