//! Points on the circle S¹ and the sphere S², the chord metric, and the
//! quadrature grids every density evaluation runs on.
//!
//! Both manifolds are stored in a fixed three-slot coordinate array; circle
//! points keep `z = 0`, so inner products and chord distances are computed
//! the same way for both.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Manifold dimension `q`: the circle (q = 1) or the sphere (q = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dim {
    Circle,
    Sphere,
}

impl Dim {
    pub fn from_q(q: usize) -> Result<Self> {
        match q {
            1 => Ok(Dim::Circle),
            2 => Ok(Dim::Sphere),
            _ => Err(Error::InvalidArgument(format!("sphere dimension q = {q}; only 1 and 2 are supported"))),
        }
    }

    pub fn q(self) -> usize {
        match self {
            Dim::Circle => 1,
            Dim::Sphere => 2,
        }
    }

    /// Dimension of the embedding space, q + 1.
    pub fn ambient(self) -> usize {
        self.q() + 1
    }

    /// Total surface measure: 2π for S¹, 4π for S².
    pub fn surface_measure(self) -> f64 {
        match self {
            Dim::Circle => TAU,
            Dim::Sphere => 2.0 * TAU,
        }
    }

    pub fn default_resolution(self) -> usize {
        match self {
            Dim::Circle => 2048,
            Dim::Sphere => 512,
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dim::Circle => write!(f, "circle (q=1)"),
            Dim::Sphere => write!(f, "sphere (q=2)"),
        }
    }
}

/// A unit-norm direction on S¹ or S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    v: [f64; 3],
    dim: Dim,
}

impl UnitVector {
    /// Normalizes `coords` (length 2 for the circle, 3 for the sphere).
    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        let dim = match coords.len() {
            2 => Dim::Circle,
            3 => Dim::Sphere,
            n => return Err(Error::InvalidArgument(format!("unit vector needs 2 or 3 coordinates, got {n}"))),
        };
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("unit vector coordinates"));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero vector has no direction".into()));
        }
        let mut v = [0.0; 3];
        for (dst, src) in v.iter_mut().zip(coords) {
            *dst = src / norm;
        }
        Ok(Self { v, dim })
    }

    /// Builds from ambient coordinates that are already unit norm.
    pub(crate) fn from_raw(v: [f64; 3], dim: Dim) -> Self {
        Self { v, dim }
    }

    pub(crate) fn normalized(v: [f64; 3], dim: Dim) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Self { v: [v[0] / n, v[1] / n, v[2] / n], dim }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Coordinates in R^{q+1}.
    pub fn coords(&self) -> &[f64] {
        &self.v[..self.dim.ambient()]
    }

    pub(crate) fn xyz(&self) -> [f64; 3] {
        self.v
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.v[0] * other.v[0] + self.v[1] * other.v[1] + self.v[2] * other.v[2]
    }

    pub fn antipode(&self) -> UnitVector {
        Self { v: [-self.v[0], -self.v[1], -self.v[2]], dim: self.dim }
    }

    /// Angle in [0, 2π) for circle points.
    pub fn angle(&self) -> Result<f64> {
        if self.dim != Dim::Circle {
            return Err(Error::DimensionMismatch { expected: Dim::Circle, found: self.dim });
        }
        Ok(wrap_angle(self.v[1].atan2(self.v[0])))
    }

    /// (longitude, latitude) in degrees with longitude in [-180, 180).
    pub fn lonlat(&self) -> Result<(f64, f64)> {
        if self.dim != Dim::Sphere {
            return Err(Error::DimensionMismatch { expected: Dim::Sphere, found: self.dim });
        }
        let lat = self.v[2].clamp(-1.0, 1.0).asin().to_degrees();
        let mut lon = self.v[1].atan2(self.v[0]).to_degrees();
        if lon >= 180.0 {
            lon -= 360.0;
        }
        Ok((lon, lat))
    }
}

/// Reduces an angle to [0, 2π).
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

pub fn angle_to_unit(theta: f64) -> Result<UnitVector> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    let (s, c) = theta.sin_cos();
    Ok(UnitVector::from_raw([c, s, 0.0], Dim::Circle))
}

pub fn unit_to_angle(x: &UnitVector) -> Result<f64> {
    x.angle()
}

/// Geographic embedding: (cos lat cos lon, cos lat sin lon, sin lat).
pub fn lonlat_to_unit(lon_deg: f64, lat_deg: f64) -> Result<UnitVector> {
    if !lon_deg.is_finite() || !lat_deg.is_finite() {
        return Err(Error::NonFinite("longitude/latitude"));
    }
    if !(-90.0..=90.0).contains(&lat_deg) {
        return Err(Error::LatitudeOutOfRange(lat_deg));
    }
    let (slat, clat) = lat_deg.to_radians().sin_cos();
    let (slon, clon) = lon_deg.to_radians().sin_cos();
    Ok(UnitVector::normalized([clat * clon, clat * slon, slat], Dim::Sphere))
}

pub(crate) fn check_same_dim(expected: Dim, found: Dim) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Euclidean chord distance √(2(1 − xᵀy)), in [0, 2].
///
/// Computed as ‖x − y‖, which equals the inner-product form on the sphere but
/// does not lose precision for nearby points.
pub fn chord_distance(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    check_same_dim(x.dim, y.dim)?;
    Ok(chord_sq(&x.v, &y.v).sqrt().min(2.0))
}

#[inline]
pub(crate) fn chord_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// A proper rotation of R³, used to move samples drawn about the north pole
/// (or about angle 0 on the circle) onto an arbitrary mean direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Self { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// Rodrigues rotation by `angle` radians about `axis` (normalized here).
    pub fn about_axis(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Self {
            m: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        }
    }

    /// Rotation whose third column is `mu`: maps the north pole e₃ onto `mu`.
    pub fn pole_to(mu: &UnitVector) -> Self {
        let w = mu.v;
        // any unit vector not parallel to w
        let a = if w[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = a[0] * w[0] + a[1] * w[1] + a[2] * w[2];
        let mut u = [a[0] - d * w[0], a[1] - d * w[1], a[2] - d * w[2]];
        let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        u = [u[0] / un, u[1] / un, u[2] / un];
        let v = [w[1] * u[2] - w[2] * u[1], w[2] * u[0] - w[0] * u[2], w[0] * u[1] - w[1] * u[0]];
        Self { m: [[u[0], v[0], w[0]], [u[1], v[1], w[1]], [u[2], v[2], w[2]]] }
    }

    pub fn apply_raw(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    /// Rotates `x`. Circle points must only be rotated about the z axis.
    pub fn apply(&self, x: &UnitVector) -> UnitVector {
        UnitVector::normalized(self.apply_raw(x.v), x.dim)
    }
}

/// Index structure of an [`EvalGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    /// `n` equally spaced angles starting at 0.
    Circle { n: usize },
    /// Equiangular nodes: `n_lon` longitudes starting at -180°, and
    /// `n_lat = n_lon / 2 + 1` latitude rows from the south pole (row 0) to
    /// the north pole. Pole rows repeat the pole point once per longitude.
    LonLat { n_lon: usize, n_lat: usize },
    /// Arbitrary points with user weights and no adjacency.
    Scattered,
}

/// Up to four grid neighbors, without allocation.
#[derive(Debug, Clone, Copy)]
pub struct Neighbors {
    idx: [usize; 4],
    len: usize,
    pos: usize,
}

impl Iterator for Neighbors {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.pos < self.len {
            self.pos += 1;
            Some(self.idx[self.pos - 1])
        } else {
            None
        }
    }
}

/// Quadrature grid on S¹ or S².
#[derive(Debug, Clone)]
pub struct EvalGrid {
    dim: Dim,
    layout: GridLayout,
    points: Vec<UnitVector>,
    weights: Vec<f64>,
}

pub const MIN_CIRCLE_RESOLUTION: usize = 4;
pub const MIN_SPHERE_RESOLUTION: usize = 8;

/// Builds the standard evaluation grid; see [`GridLayout`].
pub fn make_grid(dim: Dim, resolution: usize) -> Result<EvalGrid> {
    match dim {
        Dim::Circle => EvalGrid::circle(resolution),
        Dim::Sphere => EvalGrid::lonlat(resolution),
    }
}

/// Clenshaw–Curtis weights on the nodes z_j = −cos(πj/N), j = 0..=N, for
/// ∫₋₁¹ g(z) dz. On the lon-lat grid these nodes are exactly the latitude
/// rows, so smooth densities integrate with spectral accuracy instead of the
/// second-order error of per-row band areas.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..=n)
        .map(|j| {
            let theta = PI * j as f64 / nf;
            let mut s = 1.0;
            for k in 1..=n / 2 {
                let b = if 2 * k == n { 1.0 } else { 2.0 };
                s -= b * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            c * s / nf
        })
        .collect()
}

impl EvalGrid {
    pub fn circle(n: usize) -> Result<Self> {
        if n < MIN_CIRCLE_RESOLUTION {
            return Err(Error::ResolutionTooSmall { dim: Dim::Circle, got: n, min: MIN_CIRCLE_RESOLUTION });
        }
        let step = TAU / n as f64;
        let points = (0..n)
            .map(|k| {
                let (s, c) = (k as f64 * step).sin_cos();
                UnitVector::from_raw([c, s, 0.0], Dim::Circle)
            })
            .collect();
        Ok(Self { dim: Dim::Circle, layout: GridLayout::Circle { n }, points, weights: vec![step; n] })
    }

    /// Lon-lat grid with `n_lon` longitudes; `n_lon` must be even.
    #[allow(clippy::needless_range_loop)] // the row index also sets the latitude
    pub fn lonlat(n_lon: usize) -> Result<Self> {
        if n_lon < MIN_SPHERE_RESOLUTION {
            return Err(Error::ResolutionTooSmall { dim: Dim::Sphere, got: n_lon, min: MIN_SPHERE_RESOLUTION });
        }
        if n_lon % 2 != 0 {
            return Err(Error::InvalidArgument(format!("sphere grid resolution must be even, got {n_lon}")));
        }
        let n_lat = n_lon / 2 + 1;
        let step = TAU / n_lon as f64;
        let lon_sc: Vec<(f64, f64)> = (0..n_lon).map(|c| (-PI + c as f64 * step).sin_cos()).collect();
        let row_w: Vec<f64> = clenshaw_curtis(n_lat - 1).iter().map(|w| w * step).collect();

        let mut points = Vec::with_capacity(n_lon * n_lat);
        let mut weights = Vec::with_capacity(n_lon * n_lat);
        for r in 0..n_lat {
            if r == 0 || r == n_lat - 1 {
                let z = if r == 0 { -1.0 } else { 1.0 };
                for _ in 0..n_lon {
                    points.push(UnitVector::from_raw([0.0, 0.0, z], Dim::Sphere));
                    weights.push(row_w[r]);
                }
                continue;
            }
            let (slat, clat) = (-0.5 * PI + r as f64 * step).sin_cos();
            for &(slon, clon) in &lon_sc {
                points.push(UnitVector::from_raw([clat * clon, clat * slon, slat], Dim::Sphere));
                weights.push(row_w[r]);
            }
        }
        Ok(Self { dim: Dim::Sphere, layout: GridLayout::LonLat { n_lon, n_lat }, points, weights })
    }

    /// Grid over arbitrary points; used for pointwise evaluation batches.
    pub fn from_points(points: Vec<UnitVector>, weights: Vec<f64>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let dim = first.dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidArgument("grid points must share one dimension".into()));
        }
        if weights.len() != points.len() {
            return Err(Error::InvalidArgument("one weight per grid point required".into()));
        }
        Ok(Self { dim, layout: GridLayout::Scattered, points, weights })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grid-aligned longitude/angle step, or `None` for scattered grids.
    pub fn spacing(&self) -> Option<f64> {
        match self.layout {
            GridLayout::Circle { n } => Some(TAU / n as f64),
            GridLayout::LonLat { n_lon, .. } => Some(TAU / n_lon as f64),
            GridLayout::Scattered => None,
        }
    }

    /// Quadrature Σ wᵢ vᵢ.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Four-neighbor adjacency with longitude wraparound. Pole rows form
    /// rings (all their nodes are the same point).
    pub fn neighbors(&self, i: usize) -> Neighbors {
        let mut idx = [0usize; 4];
        let mut len = 0;
        match self.layout {
            GridLayout::Circle { n } => {
                idx[0] = (i + n - 1) % n;
                idx[1] = (i + 1) % n;
                len = 2;
            }
            GridLayout::LonLat { n_lon, n_lat } => {
                let (r, c) = (i / n_lon, i % n_lon);
                idx[0] = r * n_lon + (c + n_lon - 1) % n_lon;
                idx[1] = r * n_lon + (c + 1) % n_lon;
                len = 2;
                if r > 0 {
                    idx[len] = (r - 1) * n_lon + c;
                    len += 1;
                }
                if r + 1 < n_lat {
                    idx[len] = (r + 1) * n_lon + c;
                    len += 1;
                }
            }
            GridLayout::Scattered => {}
        }
        Neighbors { idx, len, pos: 0 }
    }

    /// Index of the grid node closest to `x` (by grid coordinates).
    pub fn nearest(&self, x: &UnitVector) -> Result<usize> {
        check_same_dim(self.dim, x.dim())?;
        match self.layout {
            GridLayout::Circle { n } => {
                let t = x.angle()? / (TAU / n as f64);
                Ok(t.round() as usize % n)
            }
            GridLayout::LonLat { n_lon, n_lat } => {
                let step = TAU / n_lon as f64;
                let xyz = x.xyz();
                let lat = xyz[2].clamp(-1.0, 1.0).asin();
                let lon = xyz[1].atan2(xyz[0]);
                let r = (((lat + 0.5 * PI) / step).round() as usize).min(n_lat - 1);
                let c = (((lon + PI) / step).round() as usize) % n_lon;
                Ok(r * n_lon + c)
            }
            GridLayout::Scattered => {
                let v = x.xyz();
                self.points
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k, chord_sq(&p.xyz(), &v)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(k, _)| k)
                    .ok_or(Error::EmptySet)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn axis_angles() {
        let a = angle_to_unit(0.0).unwrap();
        assert_eq!(a.coords(), &[1.0, 0.0]);
        let b = angle_to_unit(PI / 2.0).unwrap();
        assert!((b.coords()[0]).abs() < 1e-16 && (b.coords()[1] - 1.0).abs() < 1e-16);
        let c = angle_to_unit(TAU + 0.3).unwrap();
        let d = angle_to_unit(0.3).unwrap();
        assert!(chord_distance(&c, &d).unwrap() < 1e-15);
        assert!(angle_to_unit(f64::NAN).is_err());
        assert!(angle_to_unit(f64::INFINITY).is_err());
    }

    #[test]
    fn lonlat_axes() {
        let close = |u: UnitVector, e: [f64; 3]| u.coords().iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-15);
        assert!(close(lonlat_to_unit(0.0, 0.0).unwrap(), [1.0, 0.0, 0.0]));
        assert!(close(lonlat_to_unit(0.0, 90.0).unwrap(), [0.0, 0.0, 1.0]));
        assert!(close(lonlat_to_unit(90.0, 0.0).unwrap(), [0.0, 1.0, 0.0]));
        assert_eq!(lonlat_to_unit(0.0, 90.5), Err(Error::LatitudeOutOfRange(90.5)));
    }

    #[test]
    fn chord_examples() {
        let x = angle_to_unit(0.0).unwrap();
        let y = angle_to_unit(PI / 2.0).unwrap();
        assert_eq!(chord_distance(&x, &x).unwrap(), 0.0);
        assert_relative_eq!(chord_distance(&x, &x.antipode()).unwrap(), 2.0);
        assert_relative_eq!(chord_distance(&x, &y).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        let s = lonlat_to_unit(0.0, 0.0).unwrap();
        assert!(matches!(chord_distance(&x, &s), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn circle_grid_small() {
        let g = make_grid(Dim::Circle, 4).unwrap();
        assert_eq!(g.len(), 4);
        for (k, p) in g.points().iter().enumerate() {
            assert_relative_eq!(p.angle().unwrap(), k as f64 * PI / 2.0, epsilon = 1e-15);
        }
        assert!(g.weights().iter().all(|&w| (w - PI / 2.0).abs() < 1e-15));
        assert!(make_grid(Dim::Circle, 3).is_err());
        assert!(make_grid(Dim::Sphere, 6).is_err());
        assert!(make_grid(Dim::Sphere, 9).is_err());
    }

    #[test]
    fn circle_grid_wraps() {
        let g = make_grid(Dim::Circle, 360).unwrap();
        let nb: Vec<usize> = g.neighbors(359).collect();
        assert!(nb.contains(&0) && nb.contains(&358));
    }

    #[test]
    fn sphere_grid_area_and_symmetry() {
        for res in [8, 16, 90, 256] {
            let g = make_grid(Dim::Sphere, res).unwrap();
            let ones = vec![1.0; g.len()];
            assert_relative_eq!(g.integrate(&ones), 4.0 * PI, max_relative = 1e-9);
            for axis in 0..3 {
                let vals: Vec<f64> = g.points().iter().map(|p| p.xyz()[axis]).collect();
                assert!(g.integrate(&vals).abs() < 1e-6, "axis {axis} res {res}");
            }
        }
        let g = make_grid(Dim::Circle, 2048).unwrap();
        assert_relative_eq!(g.integrate(&vec![1.0; g.len()]), TAU, max_relative = 1e-12);
        let cx: Vec<f64> = g.points().iter().map(|p| p.coords()[0]).collect();
        assert!(g.integrate(&cx).abs() < 1e-12);
    }

    #[test]
    fn sphere_adjacency_symmetric() {
        let g = make_grid(Dim::Sphere, 16).unwrap();
        for i in 0..g.len() {
            let nb: Vec<usize> = g.neighbors(i).collect();
            assert!(nb.len() >= 2);
            for j in nb {
                assert!(g.neighbors(j).any(|k| k == i), "{i} -> {j} not symmetric");
            }
        }
    }

    #[test]
    fn nearest_node_roundtrip() {
        let g = make_grid(Dim::Sphere, 32).unwrap();
        for i in (0..g.len()).step_by(7) {
            let j = g.nearest(&g.points()[i]).unwrap();
            assert!(chord_distance(&g.points()[i], &g.points()[j]).unwrap() < 1e-12);
        }
        let c = make_grid(Dim::Circle, 100).unwrap();
        for i in 0..100 {
            assert_eq!(c.nearest(&c.points()[i]).unwrap(), i);
        }
    }

    #[test]
    fn pole_rotation_maps_north_pole() {
        let mu = UnitVector::from_slice(&[0.3, -0.4, 0.2]).unwrap();
        let r = Rotation::pole_to(&mu);
        let np = UnitVector::from_raw([0.0, 0.0, 1.0], Dim::Sphere);
        assert!(chord_distance(&r.apply(&np), &mu).unwrap() < 1e-15);
    }

    fn unit3() -> impl Strategy<Value = UnitVector> {
        (-1.0f64..1.0, 0.0f64..TAU).prop_map(|(z, phi)| {
            let r = (1.0 - z * z).sqrt();
            UnitVector::normalized([r * phi.cos(), r * phi.sin(), z], Dim::Sphere)
        })
    }

    proptest! {
        #[test]
        fn chord_is_metric(x in unit3(), y in unit3(), z in unit3()) {
            let dxy = chord_distance(&x, &y).unwrap();
            let dyx = chord_distance(&y, &x).unwrap();
            let dxz = chord_distance(&x, &z).unwrap();
            let dzy = chord_distance(&z, &y).unwrap();
            prop_assert_eq!(dxy, dyx);
            prop_assert!(dxy <= dxz + dzy + 1e-12);
            prop_assert!(dxy <= 2.0);
            prop_assert!(chord_distance(&x, &x).unwrap() < 1e-12);
            let alt = (2.0 * (1.0 - x.dot(&y)).max(0.0)).sqrt();
            prop_assert!((alt - dxy).abs() < 1e-7);
        }

        #[test]
        fn angle_roundtrip(theta in -50.0f64..50.0) {
            let u = angle_to_unit(theta).unwrap();
            let back = unit_to_angle(&u).unwrap();
            prop_assert!((0.0..TAU).contains(&back));
            let diff = (back - theta).rem_euclid(TAU);
            prop_assert!(diff < 1e-12 || TAU - diff < 1e-12);
        }

        #[test]
        fn lonlat_roundtrip(lon in -180.0f64..179.999, lat in -89.9f64..89.9) {
            let u = lonlat_to_unit(lon, lat).unwrap();
            let (lo, la) = u.lonlat().unwrap();
            prop_assert!((la - lat).abs() < 1e-9);
            prop_assert!((lo - lon).abs() < 1e-9);
        }
    }
}
