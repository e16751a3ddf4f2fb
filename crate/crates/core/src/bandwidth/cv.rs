//! Cross-validation selectors. Both objectives are written as quantities to
//! minimize: LSCV(h) = ∫f_n² − (2/n) Σ f_n^{−i}(Xᵢ) and the negated
//! leave-one-out log-likelihood.

use super::optimize::{minimize_scalar, Minimum, ScalarSearch};
use crate::error::{Error, Result};
use crate::kde::KdeEstimate;
use crate::sphere::UnitVector;

fn base(sample: &[UnitVector]) -> Result<KdeEstimate> {
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: sample.len() });
    }
    KdeEstimate::new(sample.to_vec(), 1.0)
}

pub fn lscv_objective(est: &KdeEstimate, h: f64) -> f64 {
    let Ok(e) = est.with_bandwidth(h) else {
        return f64::INFINITY;
    };
    let Ok(loo) = e.loo_log_values() else {
        return f64::INFINITY;
    };
    let mean_loo = loo.iter().map(|l| l.exp()).sum::<f64>() / e.n() as f64;
    e.integral_of_square() - 2.0 * mean_loo
}

/// −Σ log f_n^{−i}(Xᵢ); +∞ when any term underflows to −∞.
pub fn lcv_objective(est: &KdeEstimate, h: f64) -> f64 {
    let Ok(e) = est.with_bandwidth(h) else {
        return f64::INFINITY;
    };
    let Ok(loo) = e.loo_log_values() else {
        return f64::INFINITY;
    };
    let s: f64 = loo.iter().sum();
    if s.is_finite() {
        -s
    } else {
        f64::INFINITY
    }
}

pub fn h4_lscv(sample: &[UnitVector], search: &ScalarSearch) -> Result<Minimum> {
    let est = base(sample)?;
    minimize_scalar(|h| lscv_objective(&est, h), search)
}

pub fn h5_lcv(sample: &[UnitVector], search: &ScalarSearch) -> Result<Minimum> {
    let est = base(sample)?;
    minimize_scalar(|h| lcv_objective(&est, h), search)
}
