//! The von Mises–Fisher kernel density estimator
//! f_n(x) = (1/n) Σ C_q(κ) exp(κ xᵀXᵢ), κ = 1/h².
//!
//! Kernels are summed in the factored form exp(log C + κ) · Σ exp(κ(xᵀXᵢ − 1)),
//! so every summand lies in (0, 1] and κ up to 10⁶ cannot overflow. When the
//! whole sum underflows the evaluation falls back to log-sum-exp.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::density::{Density, DirectionalSampler};
use crate::error::{Error, Result};
use crate::fastexp::{exp_neg, kernel_sum, kernel_sum_range};
use crate::sphere::{check_same_dim, Dim, EvalGrid, UnitVector};
use crate::vmf::{log_normalizer, VmfSampler};

/// Sums below this are recomputed in log space.
const SUM_FLOOR: f64 = 1e-280;

#[derive(Debug)]
struct SampleData {
    dim: Dim,
    points: Vec<UnitVector>,
    cols: [Vec<f64>; 3],
}

/// A sample together with a bandwidth. Cloning and re-bandwidthing share
/// the sample storage.
#[derive(Debug, Clone)]
pub struct KdeEstimate {
    data: Arc<SampleData>,
    h: f64,
    kappa: f64,
    log_scale: f64,
}

pub fn validate_bandwidth(h: f64) -> Result<f64> {
    if !h.is_finite() {
        return Err(Error::NonFinite("bandwidth"));
    }
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {h}")));
    }
    Ok(h)
}

impl KdeEstimate {
    pub fn new(sample: Vec<UnitVector>, h: f64) -> Result<Self> {
        let dim = sample.first().ok_or(Error::EmptySet)?.dim();
        for x in &sample {
            check_same_dim(dim, x.dim())?;
        }
        let mut cols =
            [Vec::with_capacity(sample.len()), Vec::with_capacity(sample.len()), Vec::with_capacity(sample.len())];
        for x in &sample {
            let v = x.xyz();
            for k in 0..3 {
                cols[k].push(v[k]);
            }
        }
        let data = Arc::new(SampleData { dim, points: sample, cols });
        Self::from_data(data, h)
    }

    fn from_data(data: Arc<SampleData>, h: f64) -> Result<Self> {
        let h = validate_bandwidth(h)?;
        let kappa = 1.0 / (h * h);
        let log_scale = log_normalizer(data.dim, kappa) + kappa;
        Ok(Self { data, h, kappa, log_scale })
    }

    /// Same sample, different bandwidth.
    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        Self::from_data(Arc::clone(&self.data), h)
    }

    pub fn dim(&self) -> Dim {
        self.data.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n(&self) -> usize {
        self.data.points.len()
    }

    pub fn sample(&self) -> &[UnitVector] {
        &self.data.points
    }

    /// log f_n(x), finite for every x.
    pub fn log_eval(&self, x: &UnitVector) -> f64 {
        let s = kernel_sum(x.xyz(), &self.data.cols, self.kappa);
        self.finish_log(x, s, None)
    }

    /// Turns a kernel sum into log density, recomputing in log space when
    /// the sum underflowed. `skip` excludes one sample index.
    fn finish_log(&self, x: &UnitVector, sum: f64, skip: Option<usize>) -> f64 {
        let n_eff = (self.n() - usize::from(skip.is_some())) as f64;
        if sum > SUM_FLOOR {
            return self.log_scale + sum.ln() - n_eff.ln();
        }
        let v = x.xyz();
        let c = &self.data.cols;
        let arg = |j: usize| self.kappa * (v[0] * c[0][j] + v[1] * c[1][j] + v[2] * c[2][j] - 1.0);
        let keep = |j: &usize| Some(*j) != skip;
        let m = (0..self.n()).filter(keep).map(arg).fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = (0..self.n()).filter(keep).map(|j| (arg(j) - m).exp()).sum();
        self.log_scale + m + s.ln() - n_eff.ln()
    }

    /// Bounds on log f_n over a spherical cap with centre `c` and angular
    /// radius ρ (given as cos ρ, sin ρ): every kernel term is bounded using
    /// the nearest and farthest possible angle to its sample point.
    #[allow(clippy::needless_range_loop)] // one index walks three coordinate columns
    pub(crate) fn log_bounds_on_cap(&self, c: [f64; 3], cos_r: f64, sin_r: f64) -> (f64, f64) {
        let cols = &self.data.cols;
        let k = self.kappa;
        let (mut upper, mut lower) = (0.0, 0.0);
        for j in 0..self.n() {
            let ca = (c[0] * cols[0][j] + c[1] * cols[1][j] + c[2] * cols[2][j]).clamp(-1.0, 1.0);
            let sa = (1.0 - ca * ca).sqrt();
            let near = if ca >= cos_r { 1.0 } else { ca * cos_r + sa * sin_r };
            let far = if ca >= -cos_r { ca * cos_r - sa * sin_r } else { -1.0 };
            upper += exp_neg(k * (near - 1.0));
            lower += exp_neg(k * (far - 1.0));
        }
        let ln_n = (self.n() as f64).ln();
        // an underflowed lower sum just means "no useful lower bound"
        let lo = if lower > 0.0 { self.log_scale + lower.ln() - ln_n } else { f64::NEG_INFINITY };
        let up = if upper > SUM_FLOOR {
            self.log_scale + upper.ln() - ln_n
        } else {
            // every summand is at most e^{-κ(1 - near)}; bound the sum by n times the largest
            let best = (0..self.n())
                .map(|j| {
                    let ca = (c[0] * cols[0][j] + c[1] * cols[1][j] + c[2] * cols[2][j]).clamp(-1.0, 1.0);
                    let sa = (1.0 - ca * ca).sqrt();
                    if ca >= cos_r {
                        1.0
                    } else {
                        ca * cos_r + sa * sin_r
                    }
                })
                .fold(-1.0f64, f64::max);
            self.log_scale + k * (best - 1.0)
        };
        (up, lo)
    }

    /// Leave-one-out log density log f_n^{−i}(Xᵢ).
    pub fn loo_log_eval(&self, i: usize) -> Result<f64> {
        let n = self.n();
        if n < 2 {
            return Err(Error::SampleTooSmall { needed: 2, got: n });
        }
        if i >= n {
            return Err(Error::InvalidArgument(format!("sample index {i} out of range for n = {n}")));
        }
        Ok(self.loo_log_unchecked(i))
    }

    fn loo_log_unchecked(&self, i: usize) -> f64 {
        let x = &self.data.points[i];
        let v = x.xyz();
        let c = &self.data.cols;
        let s = kernel_sum_range(v, c, self.kappa, 0, i) + kernel_sum_range(v, c, self.kappa, i + 1, self.n());
        self.finish_log(x, s, Some(i))
    }

    /// f_n^{−i}(Xᵢ): the estimator without Xᵢ evaluated at Xᵢ.
    pub fn loo_eval(&self, i: usize) -> Result<f64> {
        Ok(self.loo_log_eval(i)?.exp())
    }

    /// log f_n^{−i}(Xᵢ) for every i.
    pub fn loo_log_values(&self) -> Result<Vec<f64>> {
        if self.n() < 2 {
            return Err(Error::SampleTooSmall { needed: 2, got: self.n() });
        }
        Ok((0..self.n()).into_par_iter().map(|i| self.loo_log_unchecked(i)).collect())
    }

    /// f_n(Xᵢ) for every sample point (self term included).
    pub fn values_at_sample(&self) -> Vec<f64> {
        self.eval_many(&self.data.points)
    }

    /// ∫ f_n² in closed form: (1/n²) Σᵢⱼ C(κ)² / C(κ‖Xᵢ + Xⱼ‖).
    ///
    /// Exact, so it inherits the rotation invariance of the estimator.
    pub fn integral_of_square(&self) -> f64 {
        let n = self.n();
        let kappa = self.kappa;
        let dim = self.dim();
        let two_log_c = 2.0 * log_normalizer(dim, kappa);
        let cols = &self.data.cols;
        // log(C² / C(κr)) = 2 log C − log C(κr); the largest term is the
        // diagonal r = 2, factor it out to keep the sum in range.
        let log_term = |r: f64| two_log_c - log_normalizer(dim, kappa * r);
        let top = log_term(2.0);
        let off: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in (i + 1)..n {
                    let d = cols[0][i] * cols[0][j] + cols[1][i] * cols[1][j] + cols[2][i] * cols[2][j];
                    let r = (2.0 + 2.0 * d).max(0.0).sqrt().min(2.0);
                    s += (log_term(r) - top).exp();
                }
                s
            })
            .sum();
        let total = n as f64 + 2.0 * off;
        (top + total.ln() - 2.0 * (n as f64).ln()).exp()
    }

    /// Smoothed bootstrap: pick Xᵢ uniformly, then draw from vMF(Xᵢ, κ).
    pub fn sample_smoothed<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<UnitVector> {
        let s = VmfSampler::new(self.dim(), self.kappa);
        let n = self.n();
        (0..m)
            .map(|_| {
                let i = rng.random_range(0..n);
                s.draw(&self.data.points[i], rng)
            })
            .collect()
    }
}

impl Density for KdeEstimate {
    fn dim(&self) -> Dim {
        self.data.dim
    }

    fn eval(&self, x: &UnitVector) -> f64 {
        self.log_eval(x).exp().max(f64::MIN_POSITIVE)
    }
}

impl DirectionalSampler for KdeEstimate {
    fn dim(&self) -> Dim {
        self.data.dim
    }

    fn sample_with(&self, n: usize, rng: &mut dyn RngCore) -> Vec<UnitVector> {
        self.sample_smoothed(n, rng)
    }
}

pub fn kde_eval(est: &KdeEstimate, x: &UnitVector) -> Result<f64> {
    est.density_at(x)
}

pub fn kde_eval_grid(est: &KdeEstimate, grid: &EvalGrid) -> Result<Vec<f64>> {
    est.eval_grid(grid)
}

pub fn kde_loo_eval(est: &KdeEstimate, i: usize) -> Result<f64> {
    est.loo_eval(i)
}

/// Single kernel value K(x; y, κ) = C_q(κ) e^{κ xᵀy}, computed stably.
pub fn vmf_kernel(dim: Dim, kappa: f64, dot: f64) -> f64 {
    (log_normalizer(dim, kappa) + kappa).exp() * exp_neg(kappa * (dot - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sphere::{angle_to_unit, lonlat_to_unit, make_grid, Rotation};
    use crate::vmf::{load_benchmark, VonMisesFisher};
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn s1_sample(n: usize, seed: u64) -> Vec<UnitVector> {
        load_benchmark("S1").unwrap().sample(n, &mut stream(seed, &[]))
    }

    /// Naive oracle straight from the definition, in plain f64 arithmetic.
    fn naive(sample: &[UnitVector], h: f64, x: &UnitVector) -> f64 {
        let kappa = 1.0 / (h * h);
        let c = log_normalizer(x.dim(), kappa).exp();
        sample.iter().map(|y| c * (kappa * x.dot(y)).exp()).sum::<f64>() / sample.len() as f64
    }

    #[test]
    fn matches_naive_definition() {
        let xs = s1_sample(300, 1);
        let est = KdeEstimate::new(xs.clone(), 0.3).unwrap();
        for x in s1_sample(20, 2) {
            assert_relative_eq!(est.eval(&x), naive(&xs, 0.3, &x), max_relative = 1e-13);
        }
        let circ: Vec<_> = (0..50).map(|k| angle_to_unit(k as f64 * 0.37).unwrap()).collect();
        let est = KdeEstimate::new(circ.clone(), 0.5).unwrap();
        let x = angle_to_unit(1.0).unwrap();
        assert_relative_eq!(est.eval(&x), naive(&circ, 0.5, &x), max_relative = 1e-13);
    }

    #[test]
    fn single_point_is_mode_value() {
        let x = lonlat_to_unit(20.0, 30.0).unwrap();
        let est = KdeEstimate::new(vec![x], 0.2).unwrap();
        let vmf = VonMisesFisher::new(x, 25.0).unwrap();
        assert_relative_eq!(est.eval(&x), vmf.eval(&x), max_relative = 1e-13);
    }

    #[test]
    fn oversmoothed_is_uniform() {
        let est = KdeEstimate::new(s1_sample(100, 3), 1e3).unwrap();
        let x = lonlat_to_unit(0.0, -80.0).unwrap();
        assert!((est.eval(&x) - 1.0 / (4.0 * PI)).abs() < 1e-6);
        let c = KdeEstimate::new(vec![angle_to_unit(0.0).unwrap()], 1e3).unwrap();
        assert!((c.eval(&angle_to_unit(3.0).unwrap()) - 1.0 / TAU).abs() < 1e-6);
    }

    #[test]
    fn antipodal_pair_symmetry() {
        let a = angle_to_unit(0.0).unwrap();
        let b = angle_to_unit(PI).unwrap();
        let x = angle_to_unit(PI / 2.0).unwrap();
        let ka = KdeEstimate::new(vec![a], 0.4).unwrap().eval(&x);
        let kb = KdeEstimate::new(vec![b], 0.4).unwrap().eval(&x);
        assert_relative_eq!(ka, kb, max_relative = 1e-14);
        let both = KdeEstimate::new(vec![a, b], 0.4).unwrap().eval(&x);
        assert_relative_eq!(both, ka, max_relative = 1e-14);
    }

    #[test]
    fn huge_concentration_stays_finite() {
        let xs = s1_sample(50, 4);
        for h in [1e-3, 2e-3, 1e-2, 1.0, 1e3] {
            let est = KdeEstimate::new(xs.clone(), h).unwrap();
            for x in s1_sample(10, 5).iter().chain(&xs[..3]) {
                let v = est.eval(x);
                assert!(v.is_finite() && v > 0.0, "h {h}: {v}");
                assert!(est.log_eval(x).is_finite());
            }
        }
        // far from every point: log-space fallback still gives the exact log
        let est = KdeEstimate::new(vec![angle_to_unit(0.0).unwrap()], 0.01).unwrap();
        let x = angle_to_unit(PI).unwrap();
        let expected = log_normalizer(Dim::Circle, 1e4) - 1e4;
        assert_relative_eq!(est.log_eval(&x), expected, max_relative = 1e-12);
    }

    #[test]
    fn loo_definitions() {
        let a = angle_to_unit(0.2).unwrap();
        let b = angle_to_unit(1.4).unwrap();
        let est = KdeEstimate::new(vec![a, b], 0.5).unwrap();
        let kernel = VonMisesFisher::new(b, 4.0).unwrap().eval(&a);
        assert_relative_eq!(est.loo_eval(0).unwrap(), kernel, max_relative = 1e-13);

        let xs = s1_sample(40, 6);
        let est = KdeEstimate::new(xs.clone(), 0.25).unwrap();
        for i in [0, 17, 39] {
            let mut rest = xs.clone();
            rest.remove(i);
            let rebuilt = KdeEstimate::new(rest, 0.25).unwrap().eval(&xs[i]);
            assert_relative_eq!(est.loo_eval(i).unwrap(), rebuilt, max_relative = 1e-14);
        }
        let same = vec![a; 7];
        let est = KdeEstimate::new(same, 0.3).unwrap();
        let mode = VonMisesFisher::new(a, 1.0 / 0.09).unwrap().eval(&a);
        assert_relative_eq!(est.loo_eval(3).unwrap(), mode, max_relative = 1e-13);

        assert!(KdeEstimate::new(vec![a], 0.3).unwrap().loo_eval(0).is_err());
        assert!(est.loo_eval(7).is_err());
    }

    #[test]
    fn loo_values_match_pointwise() {
        let xs = s1_sample(60, 7);
        let est = KdeEstimate::new(xs, 0.2).unwrap();
        let all = est.loo_log_values().unwrap();
        for i in [0, 30, 59] {
            assert_eq!(all[i], est.loo_log_eval(i).unwrap());
        }
    }

    #[test]
    fn grid_normalization_and_refinement() {
        let est = KdeEstimate::new(s1_sample(200, 8), 0.3).unwrap();
        let g = make_grid(Dim::Sphere, 512).unwrap();
        let v = est.eval_grid(&g).unwrap();
        assert!((g.integrate(&v) - 1.0).abs() < 1e-4);
        for (k, x) in g.points().iter().enumerate().step_by(997) {
            assert_eq!(v[k], est.eval(x));
        }
        let sq = |res: usize| {
            let g = make_grid(Dim::Sphere, res).unwrap();
            let v: Vec<f64> = est.eval_grid(&g).unwrap().iter().map(|f| f * f).collect();
            g.integrate(&v)
        };
        let (a, b) = (sq(256), sq(512));
        assert!(((a - b) / b).abs() < 1e-4, "{a} {b}");
        assert!(est.eval_grid(&make_grid(Dim::Circle, 16).unwrap()).is_err());
    }

    #[test]
    fn closed_form_square_integral() {
        for (dim, res, h) in [(Dim::Sphere, 512, 0.3), (Dim::Circle, 4096, 0.1), (Dim::Circle, 4096, 2.0)] {
            let xs = match dim {
                Dim::Sphere => s1_sample(80, 9),
                Dim::Circle => {
                    VonMisesFisher::new(angle_to_unit(1.0).unwrap(), 3.0).unwrap().sample(80, &mut stream(9, &[]))
                }
            };
            let est = KdeEstimate::new(xs, h).unwrap();
            let g = make_grid(dim, res).unwrap();
            let v: Vec<f64> = est.eval_grid(&g).unwrap().iter().map(|f| f * f).collect();
            assert_relative_eq!(est.integral_of_square(), g.integrate(&v), max_relative = 1e-6);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let xs = s1_sample(200, 10);
        let rot = Rotation::about_axis([0.3, -0.5, 0.8], 1.1);
        let est = KdeEstimate::new(xs.clone(), 0.25).unwrap();
        let rest = KdeEstimate::new(xs.iter().map(|x| rot.apply(x)).collect(), 0.25).unwrap();
        for x in s1_sample(20, 11) {
            assert_relative_eq!(est.eval(&x), rest.eval(&rot.apply(&x)), max_relative = 1e-12);
        }
    }

    #[test]
    fn monotone_smoothing() {
        let xs = s1_sample(150, 12);
        let g = make_grid(Dim::Sphere, 128).unwrap();
        let u = 1.0 / (4.0 * PI);
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let h = 0.05 * 1.5f64.powi(k);
            let v = KdeEstimate::new(xs.clone(), h).unwrap().eval_grid(&g).unwrap();
            let dev: Vec<f64> = v.iter().map(|f| (f - u).powi(2)).collect();
            let cur = g.integrate(&dev);
            assert!(cur <= prev * (1.0 + 1e-12), "h {h}: {cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn smoothed_bootstrap_spread() {
        let x = lonlat_to_unit(0.0, 90.0).unwrap();
        let est = KdeEstimate::new(vec![x], 0.1).unwrap();
        let draws = est.sample_smoothed(20_000, &mut stream(13, &[]));
        let mean_dot = draws.iter().map(|d| d.dot(&x)).sum::<f64>() / draws.len() as f64;
        let expected = 1.0 / 100.0f64.tanh() - 0.01;
        assert!((mean_dot - expected).abs() < 2e-3);
    }
}
