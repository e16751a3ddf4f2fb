//! EM for finite von Mises mixtures on the circle, AIC model choice, and
//! the AMISE-based selector h₃ built on the fitted mixture.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use super::optimize::{minimize_scalar, Minimum, ScalarSearch};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::special::{bessel_ratio, log_bessel_i};
use crate::sphere::{angle_to_unit, Dim, UnitVector};
use crate::vmf::{MixtureModel, VonMisesFisher};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { k_min: 1, k_max: 5, restarts: 5, tol: 1e-8, max_iter: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    pub model: MixtureModel,
    pub k: usize,
    pub log_likelihood: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Component {
    mu: f64,
    kappa: f64,
    weight: f64,
}

/// Concentrations are kept inside this range during EM so a component
/// collapsing onto one observation cannot drive the likelihood to infinity.
const KAPPA_RANGE: (f64, f64) = (1e-8, 1e5);

fn log_vm(theta: f64, c: &Component, log_norm: f64) -> f64 {
    log_norm + c.kappa * (theta - c.mu).cos()
}

fn log_norm(kappa: f64) -> f64 {
    -(TAU.ln()) - log_bessel_i(0.0, kappa).expect("kappa in range")
}

/// A₁⁻¹ by the Best–Fisher starting value and safeguarded Newton steps.
fn inverse_a1(r: f64) -> f64 {
    let (lo, hi) = KAPPA_RANGE;
    if r <= 0.0 {
        return lo;
    }
    if r >= 1.0 - 1e-12 {
        return hi;
    }
    let mut k = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    };
    k = k.clamp(lo, hi);
    for _ in 0..8 {
        let a = bessel_ratio(1, k).expect("kappa in range");
        let d = 1.0 - a / k - a * a;
        if d <= 0.0 {
            break;
        }
        let next = (k - (a - r) / d).clamp(0.5 * k, 2.0 * k).clamp(lo, hi);
        if (next - k).abs() <= 1e-12 * k {
            k = next;
            break;
        }
        k = next;
    }
    k
}

/// k-means++ style seeds on angles using squared chord distance.
fn seed_centres<R: Rng>(theta: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centres = vec![theta[rng.random_range(0..theta.len())]];
    while centres.len() < k {
        let d2: Vec<f64> = theta
            .iter()
            .map(|&t| centres.iter().map(|&c| 2.0 - 2.0 * (t - c).cos()).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            centres.push(theta[rng.random_range(0..theta.len())]);
            continue;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = theta.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            acc += d;
            if u < acc {
                pick = i;
                break;
            }
        }
        centres.push(theta[pick]);
    }
    centres
}

fn m_step(theta: &[f64], resp: &[Vec<f64>]) -> Option<Vec<Component>> {
    let n = theta.len() as f64;
    resp.iter()
        .map(|r| {
            let w: f64 = r.iter().sum();
            if w < 1e-8 * n {
                return None;
            }
            let (mut s, mut c) = (0.0, 0.0);
            for (ri, t) in r.iter().zip(theta) {
                s += ri * t.sin();
                c += ri * t.cos();
            }
            let rbar = (s * s + c * c).sqrt() / w;
            Some(Component { mu: s.atan2(c), kappa: inverse_a1(rbar), weight: w / n })
        })
        .collect()
}

/// E-step; returns the log-likelihood and fills responsibilities.
fn e_step(theta: &[f64], comps: &[Component], resp: &mut [Vec<f64>]) -> f64 {
    let norms: Vec<f64> = comps.iter().map(|c| log_norm(c.kappa) + c.weight.ln()).collect();
    let mut ll = 0.0;
    let mut buf = vec![0.0; comps.len()];
    for (i, &t) in theta.iter().enumerate() {
        for (j, c) in comps.iter().enumerate() {
            buf[j] = log_vm(t, c, norms[j]);
        }
        let m = buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = buf.iter().map(|b| (b - m).exp()).sum();
        let lse = m + s.ln();
        ll += lse;
        for j in 0..comps.len() {
            resp[j][i] = (buf[j] - lse).exp();
        }
    }
    ll
}

/// One EM run from seeded centres; `None` when a component dies or the
/// iteration limit is reached without convergence.
fn run_em(theta: &[f64], k: usize, cfg: &EmConfig, restart: usize) -> Option<(Vec<Component>, f64)> {
    let mut rng = stream(cfg.seed, &[k as u64, restart as u64]);
    let centres = seed_centres(theta, k, &mut rng);
    let mut resp = vec![vec![0.0; theta.len()]; k];
    for (i, &t) in theta.iter().enumerate() {
        let j = (0..k)
            .min_by(|&a, &b| (1.0 - (t - centres[a]).cos()).total_cmp(&(1.0 - (t - centres[b]).cos())))
            .unwrap_or(0);
        resp[j][i] = 1.0;
    }
    let mut comps = m_step(theta, &resp)?;
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..cfg.max_iter {
        let ll = e_step(theta, &comps, &mut resp);
        if !ll.is_finite() {
            return None;
        }
        if (ll - prev).abs() < cfg.tol {
            return Some((comps, ll));
        }
        prev = ll;
        comps = m_step(theta, &resp)?;
    }
    None
}

fn to_model(comps: &[Component]) -> Result<MixtureModel> {
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    let vms = comps.iter().map(|c| VonMisesFisher::new(angle_to_unit(c.mu)?, c.kappa)).collect::<Result<Vec<_>>>()?;
    MixtureModel::new(vms, comps.iter().map(|c| c.weight / total).collect())
}

/// Best-AIC von Mises mixture over k ∈ [k_min, k_max].
pub fn em_fit_vm_mixture(sample: &[UnitVector], cfg: &EmConfig) -> Result<MixtureFit> {
    let first = sample.first().ok_or(Error::EmptySet)?;
    if first.dim() != Dim::Circle {
        return Err(Error::UnsupportedDimension { selector: "EM mixture fit", dim: first.dim() });
    }
    if cfg.k_min == 0 || cfg.k_min > cfg.k_max || cfg.restarts == 0 {
        return Err(Error::InvalidArgument("EM needs 1 <= k_min <= k_max and at least one restart".into()));
    }
    if sample.len() < 10 * cfg.k_max {
        return Err(Error::SampleTooSmall { needed: 10 * cfg.k_max, got: sample.len() });
    }
    let theta: Vec<f64> = sample.iter().map(|x| x.angle()).collect::<Result<_>>()?;
    let mut best: Option<MixtureFit> = None;
    let mut last_failure = None;
    for k in cfg.k_min..=cfg.k_max {
        let runs: Vec<(Vec<Component>, f64)> = (0..cfg.restarts).filter_map(|r| run_em(&theta, k, cfg, r)).collect();
        let Some((comps, ll)) = runs.into_iter().reduce(|a, b| if b.1 > a.1 { b } else { a }) else {
            last_failure = Some(Error::EmFailed { k });
            continue;
        };
        let aic = -2.0 * ll + 2.0 * (3 * k - 1) as f64;
        if best.as_ref().map_or(true, |b| aic < b.aic) {
            best = Some(MixtureFit { model: to_model(&comps)?, k, log_likelihood: ll, aic });
        }
    }
    best.ok_or_else(|| last_failure.unwrap_or(Error::EmFailed { k: cfg.k_max }))
}

pub const CURVATURE_GRID: usize = 1 << 14;

/// ∫ f″(θ)² dθ by central second differences on a periodic grid.
pub fn curvature_functional(density: &dyn Density, grid_points: usize) -> Result<f64> {
    if density.dim() != Dim::Circle {
        return Err(Error::UnsupportedDimension { selector: "curvature functional", dim: density.dim() });
    }
    let n = grid_points;
    let d = TAU / n as f64;
    let f: Vec<f64> = (0..n)
        .map(|k| {
            let (s, c) = (k as f64 * d).sin_cos();
            density.eval(&UnitVector::from_raw([c, s, 0.0], Dim::Circle))
        })
        .collect();
    let mut acc = 0.0;
    for k in 0..n {
        let f2 = (f[(k + 1) % n] - 2.0 * f[k] + f[(k + n - 1) % n]) / (d * d);
        acc += f2 * f2;
    }
    Ok(acc * d)
}

/// AMISE(h) = (1/16)[1 − I₂(κ)/I₀(κ)]² R(f″) + I₀(2κ) / (2nπ I₀(κ)²), κ = 1/h².
pub fn amise(h: f64, curvature: f64, n: usize) -> f64 {
    let kappa = 1.0 / (h * h);
    let (Ok(l0), Ok(l2), Ok(l02)) =
        (log_bessel_i(0.0, kappa), log_bessel_i(2.0, kappa), log_bessel_i(0.0, 2.0 * kappa))
    else {
        return f64::INFINITY;
    };
    let bias = 1.0 - (l2 - l0).exp();
    bias * bias * curvature / 16.0 + (l02 - 2.0 * l0).exp() / (2.0 * n as f64 * PI)
}

#[derive(Debug, Clone)]
pub struct H3Result {
    pub fit: MixtureFit,
    pub curvature: f64,
    pub minimum: Minimum,
}

pub fn h3_oliveira(sample: &[UnitVector], em: &EmConfig, search: &ScalarSearch) -> Result<H3Result> {
    let fit = em_fit_vm_mixture(sample, em)?;
    let curvature = curvature_functional(&fit.model, CURVATURE_GRID)?;
    let n = sample.len();
    let minimum = minimize_scalar(|h| amise(h, curvature, n), search)?;
    Ok(H3Result { fit, curvature, minimum })
}
