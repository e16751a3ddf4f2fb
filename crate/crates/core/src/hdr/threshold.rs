use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::kde::KdeEstimate;
use crate::rng::stream;
use crate::sphere::EvalGrid;

/// How the density values entering the threshold order statistic are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ThresholdMode {
    /// f_n at the observed sample points.
    #[default]
    SampleValues,
    /// f_n at `n_draws` fresh smoothed-bootstrap draws from f_n.
    PseudoSample { n_draws: usize, seed: u64 },
}

impl ThresholdMode {
    /// Pseudo-sample mode with N = max(10n, 10⁴).
    pub fn pseudo_default(n: usize, seed: u64) -> Self {
        ThresholdMode::PseudoSample { n_draws: (10 * n).max(10_000), seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSource {
    SampleValues,
    PseudoSample(usize),
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub tau: f64,
    pub value: f64,
    pub source: ThresholdSource,
}

pub fn validate_tau(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")));
    }
    Ok(tau)
}

/// Order-statistic index j = ⌊τm⌋ clamped to [1, m] (1-based).
pub fn order_index(tau: f64, m: usize) -> usize {
    ((tau * m as f64).floor() as usize).clamp(1, m)
}

/// The j-th smallest of `values`, j = ⌊τm⌋. Regions {f ≥ value} then hold
/// at least a 1 − τ fraction of the points.
pub fn threshold_from_values(values: &[f64], tau: f64) -> Result<f64> {
    validate_tau(tau)?;
    if values.is_empty() {
        return Err(Error::EmptySet);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("density values"));
    }
    let j = order_index(tau, values.len());
    let mut v = values.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(j - 1, f64::total_cmp);
    Ok(*kth)
}

pub fn estimate_threshold(est: &KdeEstimate, tau: f64, mode: ThresholdMode) -> Result<ThresholdEstimate> {
    validate_tau(tau)?;
    if est.n() < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: est.n() });
    }
    let (values, source) = match mode {
        ThresholdMode::SampleValues => (est.values_at_sample(), ThresholdSource::SampleValues),
        ThresholdMode::PseudoSample { n_draws, seed } => {
            if n_draws == 0 {
                return Err(Error::InvalidArgument("pseudo-sample size must be positive".into()));
            }
            let draws = est.sample_smoothed(n_draws, &mut stream(seed, &[0x7468_7265]));
            (est.eval_many(&draws), ThresholdSource::PseudoSample(n_draws))
        }
    };
    Ok(ThresholdEstimate { tau, value: threshold_from_values(&values, tau)?, source })
}

/// Largest level whose super-level set carries probability ≥ 1 − τ, by
/// sorting grid values in decreasing order and accumulating quadrature mass
/// (normalized by the total mass on the grid).
pub fn quadrature_threshold(values: &[f64], grid: &EvalGrid, tau: f64) -> Result<ThresholdEstimate> {
    validate_tau(tau)?;
    if values.len() != grid.len() {
        return Err(Error::InvalidArgument("one density value per grid node required".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density values"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let w = grid.weights();
    let total: f64 = order.iter().map(|&k| w[k] * values[k]).sum();
    let target = (1.0 - tau) * total;
    let mut acc = 0.0;
    let mut level = values[order[order.len() - 1]];
    for &k in &order {
        acc += w[k] * values[k];
        if acc >= target {
            level = values[k];
            break;
        }
    }
    Ok(ThresholdEstimate { tau, value: level, source: ThresholdSource::Quadrature })
}

/// Truth threshold f_τ for any density, from grid quadrature.
pub fn density_threshold(density: &dyn Density, grid: &EvalGrid, tau: f64) -> Result<ThresholdEstimate> {
    let values = density.eval_grid(grid)?;
    quadrature_threshold(&values, grid, tau)
}
