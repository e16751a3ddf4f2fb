//! von Mises–Fisher densities, finite mixtures, exact samplers, and the
//! spherical benchmark catalog S1–S9.

use std::f64::consts::{PI, TAU};

use rand::{Rng, RngCore};
use serde::Deserialize;

use crate::density::{Density, DirectionalSampler};
use crate::error::{Error, Result};
use crate::special::log_bessel_i;
use crate::sphere::{angle_to_unit, check_same_dim, lonlat_to_unit, Dim, Rotation, UnitVector};

/// log C_q(κ) with C_q(κ) = κ^{(q−1)/2} / ((2π)^{(q+1)/2} I_{(q−1)/2}(κ)).
/// κ = 0 gives the uniform density 1/|S^q|.
pub fn log_normalizer(dim: Dim, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return -dim.surface_measure().ln();
    }
    let q = dim.q() as f64;
    let p = 0.5 * (q - 1.0);
    let lb = log_bessel_i(p, kappa).expect("kappa validated as finite and non-negative");
    p * kappa.ln() - 0.5 * (q + 1.0) * TAU.ln() - lb
}

#[derive(Debug, Clone, PartialEq)]
pub struct VonMisesFisher {
    mu: UnitVector,
    kappa: f64,
    log_norm: f64,
}

impl VonMisesFisher {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::NonFinite("kappa"));
        }
        if kappa < 0.0 {
            return Err(Error::InvalidArgument(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(Self { mu, kappa, log_norm: log_normalizer(mu.dim(), kappa) })
    }

    pub fn mu(&self) -> &UnitVector {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> Dim {
        self.mu.dim()
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn log_density(&self, x: &UnitVector) -> Result<f64> {
        check_same_dim(self.dim(), x.dim())?;
        Ok(self.log_norm + self.kappa * x.dot(&self.mu))
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<UnitVector> {
        let s = VmfSampler::new(self.dim(), self.kappa);
        (0..n).map(|_| s.draw(&self.mu, rng)).collect()
    }
}

pub fn vmf_log_density(model: &VonMisesFisher, x: &UnitVector) -> Result<f64> {
    model.log_density(x)
}

impl Density for VonMisesFisher {
    fn dim(&self) -> Dim {
        self.mu.dim()
    }

    fn eval(&self, x: &UnitVector) -> f64 {
        (self.log_norm + self.kappa * x.dot(&self.mu)).exp()
    }
}

impl DirectionalSampler for VonMisesFisher {
    fn dim(&self) -> Dim {
        self.mu.dim()
    }

    fn sample_with(&self, n: usize, rng: &mut dyn RngCore) -> Vec<UnitVector> {
        self.sample(n, rng)
    }
}

/// Exact vMF draws for a fixed concentration and arbitrary mean directions.
///
/// Circle: Best–Fisher wrapped-Cauchy envelope for κ ≥ 0.1, uniform
/// proposal with acceptance e^{κ(cos θ − 1)} below that. Sphere: inverse-CDF
/// for the cosine to the mean plus a uniform tangent angle.
#[derive(Debug, Clone, Copy)]
pub struct VmfSampler {
    dim: Dim,
    kappa: f64,
    r: f64,
}

const BEST_FISHER_MIN_KAPPA: f64 = 0.1;

impl VmfSampler {
    pub fn new(dim: Dim, kappa: f64) -> Self {
        let r = if dim == Dim::Circle && kappa >= BEST_FISHER_MIN_KAPPA {
            let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
            let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
            (1.0 + rho * rho) / (2.0 * rho)
        } else {
            0.0
        };
        Self { dim, kappa, r }
    }

    /// Signed angular offset from the mean on the circle.
    fn circle_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let kappa = self.kappa;
        if kappa == 0.0 {
            return rng.random::<f64>() * TAU - PI;
        }
        if kappa < BEST_FISHER_MIN_KAPPA {
            loop {
                let t = rng.random::<f64>() * TAU - PI;
                let u: f64 = rng.random();
                if u < (kappa * (t.cos() - 1.0)).exp() {
                    return t;
                }
            }
        }
        let r = self.r;
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = 1.0 - rng.random::<f64>();
            let u3: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = ((1.0 + r * z) / (r + z)).clamp(-1.0, 1.0);
            let c = kappa * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let a = f.acos();
                return if u3 < 0.5 { -a } else { a };
            }
        }
    }

    /// Cosine to the mean on the sphere.
    fn sphere_cosine<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = 1.0 - rng.random::<f64>(); // (0, 1]
        if self.kappa == 0.0 {
            return 2.0 * v - 1.0;
        }
        let w = 1.0 + (1.0 + (1.0 - v) * (-2.0 * self.kappa).exp_m1()).ln() / self.kappa;
        w.clamp(-1.0, 1.0)
    }

    pub fn draw<R: Rng + ?Sized>(&self, mu: &UnitVector, rng: &mut R) -> UnitVector {
        match self.dim {
            Dim::Circle => {
                let m = mu.xyz();
                let t = m[1].atan2(m[0]) + self.circle_offset(rng);
                let (s, c) = t.sin_cos();
                UnitVector::from_raw([c, s, 0.0], Dim::Circle)
            }
            Dim::Sphere => {
                let w = self.sphere_cosine(rng);
                let phi = rng.random::<f64>() * TAU;
                let rad = (1.0 - w * w).max(0.0).sqrt();
                let local = [rad * phi.cos(), rad * phi.sin(), w];
                UnitVector::normalized(Rotation::pole_to(mu).apply_raw(local), Dim::Sphere)
            }
        }
    }
}

pub fn sample_vmf<R: Rng + ?Sized>(model: &VonMisesFisher, n: usize, rng: &mut R) -> Vec<UnitVector> {
    model.sample(n, rng)
}

/// Finite vMF mixture with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    components: Vec<VonMisesFisher>,
    weights: Vec<f64>,
}

/// Weight sums further than this from 1 are rejected.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

impl MixtureModel {
    pub fn new(components: Vec<VonMisesFisher>, weights: Vec<f64>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::InvalidArgument("mixture needs a component".into()))?;
        if components.len() != weights.len() {
            return Err(Error::InvalidArgument("one weight per component required".into()));
        }
        let dim = first.dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, expected 1")));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Self { components, weights })
    }

    pub fn single(component: VonMisesFisher) -> Self {
        Self { components: vec![component], weights: vec![1.0] }
    }

    pub fn components(&self) -> &[VonMisesFisher] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> Dim {
        self.components[0].dim()
    }

    pub fn density(&self, x: &UnitVector) -> Result<f64> {
        check_same_dim(self.dim(), x.dim())?;
        Ok(self.eval(x))
    }

    /// Index of a component drawn with probability equal to its weight.
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return j;
            }
        }
        self.weights.len() - 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<UnitVector> {
        let samplers: Vec<VmfSampler> = self.components.iter().map(|c| VmfSampler::new(c.dim(), c.kappa())).collect();
        (0..n)
            .map(|_| {
                let j = self.pick(rng);
                samplers[j].draw(self.components[j].mu(), rng)
            })
            .collect()
    }
}

pub fn mixture_density(model: &MixtureModel, x: &UnitVector) -> Result<f64> {
    model.density(x)
}

pub fn sample_mixture<R: Rng + ?Sized>(model: &MixtureModel, n: usize, rng: &mut R) -> Vec<UnitVector> {
    model.sample(n, rng)
}

impl Density for MixtureModel {
    fn dim(&self) -> Dim {
        MixtureModel::dim(self)
    }

    fn eval(&self, x: &UnitVector) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (c.log_normalizer() + c.kappa() * x.dot(c.mu())).exp())
            .sum()
    }
}

impl DirectionalSampler for MixtureModel {
    fn dim(&self) -> Dim {
        MixtureModel::dim(self)
    }

    fn sample_with(&self, n: usize, rng: &mut dyn RngCore) -> Vec<UnitVector> {
        self.sample(n, rng)
    }
}

pub const BENCHMARK_NAMES: [&str; 9] = ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9"];

/// Spherical benchmark mixtures S1–S9.
pub fn load_benchmark(name: &str) -> Result<MixtureModel> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let north = [0.0, 0.0, 1.0];
    let south = [0.0, 0.0, -1.0];
    let tilted = [0.0, h, h];
    let ey = [0.0, 1.0, 0.0];
    let ex = [1.0, 0.0, 0.0];
    let spec: Vec<([f64; 3], f64, f64)> = match name.to_ascii_uppercase().as_str() {
        "S1" => vec![(north, 10.0, 1.0)],
        "S2" => vec![(north, 1.0, 0.5), (south, 1.0, 0.5)],
        "S3" => vec![(north, 10.0, 0.5), (south, 1.0, 0.5)],
        "S4" => vec![(north, 10.0, 0.5), (tilted, 10.0, 0.5)],
        "S5" => vec![(north, 10.0, 0.4), (tilted, 10.0, 0.6)],
        "S6" => vec![(north, 10.0, 0.2), (tilted, 5.0, 0.8)],
        "S7" => vec![(north, 5.0, 1.0 / 3.0), (ey, 5.0, 1.0 / 3.0), (ex, 5.0, 1.0 / 3.0)],
        "S8" => vec![(north, 5.0, 2.0 / 3.0), (ey, 5.0, 1.0 / 6.0), (ex, 5.0, 1.0 / 6.0)],
        "S9" => vec![(north, 10.0, 1.0 / 3.0), (tilted, 10.0, 1.0 / 3.0), (ey, 10.0, 1.0 / 3.0)],
        _ => return Err(Error::UnknownModel(name.to_string())),
    };
    let mut comps = Vec::with_capacity(spec.len());
    let mut weights = Vec::with_capacity(spec.len());
    for (mu, kappa, w) in spec {
        comps.push(VonMisesFisher::new(UnitVector::from_slice(&mu)?, kappa)?);
        weights.push(w);
    }
    MixtureModel::new(comps, weights)
}

/// One component of a mixture config file. Exactly one mean field is set.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentSpec {
    /// circle mean in radians
    angle: Option<f64>,
    angle_deg: Option<f64>,
    /// sphere mean as [lon, lat] degrees
    lonlat: Option<[f64; 2]>,
    /// raw ambient coordinates (normalized on load)
    mean: Option<Vec<f64>>,
    kappa: f64,
    weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureFile {
    dim: Option<Dim>,
    component: Vec<ComponentSpec>,
}

fn component_mean(c: &ComponentSpec) -> Result<UnitVector> {
    let set = [c.angle.is_some(), c.angle_deg.is_some(), c.lonlat.is_some(), c.mean.is_some()];
    if set.iter().filter(|&&s| s).count() != 1 {
        return Err(Error::Config("each component needs exactly one of angle, angle_deg, lonlat, mean".into()));
    }
    if let Some(a) = c.angle {
        angle_to_unit(a)
    } else if let Some(a) = c.angle_deg {
        angle_to_unit(a.to_radians())
    } else if let Some([lon, lat]) = c.lonlat {
        lonlat_to_unit(lon, lat)
    } else {
        UnitVector::from_slice(c.mean.as_deref().unwrap_or_default())
    }
}

/// Parses a TOML mixture description:
///
/// ```toml
/// dim = "circle"
/// [[component]]
/// angle = 0.0
/// kappa = 4.0
/// weight = 0.5
/// [[component]]
/// angle_deg = 180.0
/// kappa = 4.0
/// weight = 0.5
/// ```
pub fn parse_mixture(text: &str) -> Result<MixtureModel> {
    let file: MixtureFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut comps = Vec::with_capacity(file.component.len());
    let mut weights = Vec::with_capacity(file.component.len());
    for c in &file.component {
        let mu = component_mean(c)?;
        if let Some(d) = file.dim {
            check_same_dim(d, mu.dim())?;
        }
        comps.push(VonMisesFisher::new(mu, c.kappa)?);
        weights.push(c.weight);
    }
    MixtureModel::new(comps, weights)
}

/// Benchmark name (S1–S9) or path to a mixture TOML file.
pub fn load_model(name_or_path: &str) -> Result<MixtureModel> {
    if BENCHMARK_NAMES.iter().any(|n| n.eq_ignore_ascii_case(name_or_path)) {
        return load_benchmark(name_or_path);
    }
    let text =
        std::fs::read_to_string(name_or_path).map_err(|e| Error::UnknownModel(format!("{name_or_path}: {e}")))?;
    parse_mixture(&text)
}

/// Mean resultant vector length ‖(1/n) Σ xᵢ‖ and the mean direction.
pub fn mean_resultant(sample: &[UnitVector]) -> Result<(f64, Option<UnitVector>)> {
    let first = sample.first().ok_or(Error::EmptySet)?;
    let mut s = [0.0; 3];
    for x in sample {
        check_same_dim(first.dim(), x.dim())?;
        let v = x.xyz();
        for k in 0..3 {
            s[k] += v[k];
        }
    }
    let n = sample.len() as f64;
    let len = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() / n;
    let dir = (len > 0.0).then(|| UnitVector::normalized(s, first.dim()));
    Ok((len, dir))
}
