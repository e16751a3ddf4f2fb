use std::f64::consts::TAU;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use super::contour::{self, LonLatShape, Polyline};
use super::prune::BlockIndex;
use crate::density::{Density, DirectionalSampler};
use crate::error::{Error, Result};
use crate::kde::KdeEstimate;
use crate::sphere::{angle_to_unit, check_same_dim, wrap_angle, Dim, EvalGrid, GridLayout, UnitVector};

/// Angular tolerance of arc endpoints on the circle.
pub const ARC_TOLERANCE: f64 = 1e-10;

/// Half-open arc [start, start + len) measured counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircularArc {
    pub start: f64,
    pub len: f64,
}

impl CircularArc {
    pub fn end(&self) -> f64 {
        wrap_angle(self.start + self.len)
    }

    pub fn contains(&self, theta: f64) -> bool {
        wrap_angle(theta - self.start) < self.len
    }
}

/// Disjoint arcs sorted by start angle, or the full circle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcSet {
    arcs: Vec<CircularArc>,
    full: bool,
}

impl ArcSet {
    pub fn empty() -> Self {
        Self { arcs: Vec::new(), full: false }
    }

    pub fn full() -> Self {
        Self { arcs: Vec::new(), full: true }
    }

    /// Builds from (start, end) angle pairs; each arc runs counter-clockwise
    /// from start to end. Arcs must not overlap.
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        let mut arcs: Vec<CircularArc> = intervals
            .iter()
            .map(|&(a, b)| {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite("arc endpoint"));
                }
                let start = wrap_angle(a);
                let len = wrap_angle(b - a);
                if len == 0.0 {
                    return Err(Error::InvalidArgument(format!("arc [{a}, {b}) is empty")));
                }
                Ok(CircularArc { start, len })
            })
            .collect::<Result<_>>()?;
        arcs.sort_by(|x, y| x.start.total_cmp(&y.start));
        for (i, a) in arcs.iter().enumerate() {
            let next = &arcs[(i + 1) % arcs.len()];
            if arcs.len() > 1 && wrap_angle(next.start - a.start) < a.len {
                return Err(Error::InvalidArgument("arcs overlap".into()));
            }
        }
        let total: f64 = arcs.iter().map(|a| a.len).sum();
        if total > TAU + 1e-12 {
            return Err(Error::InvalidArgument("arcs exceed the circle".into()));
        }
        Ok(Self { arcs, full: false })
    }

    pub fn arcs(&self) -> &[CircularArc] {
        &self.arcs
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn is_empty(&self) -> bool {
        !self.full && self.arcs.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        if self.full {
            TAU
        } else {
            self.arcs.iter().map(|a| a.len).sum()
        }
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        self.full || self.arcs.iter().any(|a| a.contains(theta))
    }
}

/// Super-level set on a lon-lat grid.
///
/// `values` holds the density at grid nodes; regions built through the
/// pruned KDE path store NaN at nodes whose exact value was never needed
/// (those far from the boundary).
#[derive(Debug, Clone)]
pub struct GridRegion {
    grid: Arc<EvalGrid>,
    values: Vec<f64>,
    level: f64,
    mask: Vec<bool>,
}

impl GridRegion {
    fn shape(&self) -> LonLatShape {
        match self.grid.layout() {
            GridLayout::LonLat { n_lon, n_lat } => LonLatShape { n_lon, n_lat },
            _ => unreachable!("sphere regions are built on lon-lat grids only"),
        }
    }

    pub fn grid(&self) -> &Arc<EvalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Closed contour polylines of the region boundary.
    pub fn polylines(&self) -> Vec<Polyline> {
        contour::trace(&self.grid, &self.shape(), &self.values, &self.mask, self.level)
    }

    fn boundary_points(&self) -> Vec<UnitVector> {
        contour::crossings(&self.grid, &self.shape(), &self.values, &self.mask, self.level).into_values().collect()
    }
}

#[derive(Debug, Clone)]
pub enum Region {
    Circle(ArcSet),
    Sphere(GridRegion),
}

impl Region {
    pub fn dim(&self) -> Dim {
        match self {
            Region::Circle(_) => Dim::Circle,
            Region::Sphere(_) => Dim::Sphere,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::Circle(a) => a.is_empty(),
            Region::Sphere(g) => !g.mask.iter().any(|&m| m),
        }
    }

    pub fn is_full(&self) -> bool {
        match self {
            Region::Circle(a) => a.is_full(),
            Region::Sphere(g) => g.mask.iter().all(|&m| m),
        }
    }

    /// Neither empty nor the whole space.
    pub fn is_proper(&self) -> bool {
        !self.is_empty() && !self.is_full()
    }

    /// Membership; sphere points use their nearest grid node.
    pub fn contains(&self, x: &UnitVector) -> Result<bool> {
        check_same_dim(self.dim(), x.dim())?;
        match self {
            Region::Circle(a) => Ok(a.contains_angle(x.angle()?)),
            Region::Sphere(g) => Ok(g.mask[g.grid.nearest(x)?]),
        }
    }

    /// Arc length on S¹, quadrature area on S².
    pub fn measure(&self) -> f64 {
        match self {
            Region::Circle(a) => a.total_length(),
            Region::Sphere(g) => g.grid.weights().iter().zip(&g.mask).filter(|(_, &m)| m).map(|(w, _)| w).sum(),
        }
    }

    pub fn as_arcs(&self) -> Option<&ArcSet> {
        match self {
            Region::Circle(a) => Some(a),
            Region::Sphere(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridRegion> {
        match self {
            Region::Sphere(g) => Some(g),
            Region::Circle(_) => None,
        }
    }
}

/// Finite point set on one of the spheres (typically a region boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    dim: Dim,
    points: Vec<UnitVector>,
}

impl BoundarySet {
    pub fn new(points: Vec<UnitVector>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptySet)?.dim();
        for p in &points {
            check_same_dim(dim, p.dim())?;
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Boundary points: arc endpoints on S¹, interpolated contour crossings on S².
pub fn extract_boundary(region: &Region) -> Result<BoundarySet> {
    if !region.is_proper() {
        return Err(Error::EmptyBoundary);
    }
    let points = match region {
        Region::Circle(a) => {
            let mut pts = Vec::with_capacity(2 * a.arcs().len());
            for arc in a.arcs() {
                pts.push(angle_to_unit(arc.start)?);
                pts.push(angle_to_unit(arc.end())?);
            }
            pts
        }
        Region::Sphere(g) => g.boundary_points(),
    };
    BoundarySet::new(points)
}

/// Refines the crossing of `level` inside [lo, lo + step] where the
/// membership at `lo` is `inside_lo`.
fn bisect_crossing(density: &dyn Density, level: f64, mut lo: f64, mut hi: f64, inside_lo: bool) -> f64 {
    while hi - lo > ARC_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let (s, c) = mid.sin_cos();
        let inside = density.eval(&UnitVector::from_raw([c, s, 0.0], Dim::Circle)) >= level;
        if inside == inside_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Arcs from a node mask on a circle grid, endpoints refined on `density`.
fn arcs_from_mask(density: &dyn Density, level: f64, grid: &EvalGrid, mask: &[bool]) -> Result<ArcSet> {
    let n = mask.len();
    if mask.iter().all(|&m| m) {
        return Ok(ArcSet::full());
    }
    if !mask.iter().any(|&m| m) {
        return Ok(ArcSet::empty());
    }
    let step = grid.spacing().ok_or_else(|| Error::InvalidArgument("circle regions need a regular grid".into()))?;
    let flips: Vec<usize> = (0..n).filter(|&k| mask[k] != mask[(k + 1) % n]).collect();
    let points: Vec<(f64, bool)> = flips
        .par_iter()
        .map(|&k| {
            let lo = k as f64 * step;
            (bisect_crossing(density, level, lo, lo + step, mask[k]), !mask[k])
        })
        .collect();
    // rising crossings (entering the set) start arcs
    let first = points.iter().position(|p| p.1).expect("a proper mask has a rising crossing");
    let mut arcs = Vec::with_capacity(points.len() / 2);
    for i in 0..points.len() / 2 {
        let (a, _) = points[(first + 2 * i) % points.len()];
        let (b, _) = points[(first + 2 * i + 1) % points.len()];
        let start = wrap_angle(a);
        let len = wrap_angle(b - a);
        if len > 0.0 {
            arcs.push(CircularArc { start, len });
        }
    }
    arcs.sort_by(|x, y| x.start.total_cmp(&y.start));
    if arcs.is_empty() {
        return Ok(ArcSet::empty());
    }
    Ok(ArcSet { arcs, full: false })
}

fn check_level(t: f64) -> Result<()> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::InvalidArgument(format!("level must be a positive finite number, got {t}")));
    }
    Ok(())
}

fn check_sphere_grid(grid: &EvalGrid) -> Result<()> {
    match grid.layout() {
        GridLayout::LonLat { .. } => Ok(()),
        _ => Err(Error::InvalidArgument("sphere regions need a lon-lat grid".into())),
    }
}

/// {x : f(x) ≥ t} on the grid; arc endpoints refined by bisection on S¹.
pub fn level_set_fixed(density: &dyn Density, t: f64, grid: &Arc<EvalGrid>) -> Result<Region> {
    check_level(t)?;
    check_same_dim(density.dim(), grid.dim())?;
    let values = density.eval_grid(grid)?;
    region_from_values(density, values, t, grid)
}

/// Region from precomputed grid values of `density`.
pub fn region_from_values(density: &dyn Density, values: Vec<f64>, t: f64, grid: &Arc<EvalGrid>) -> Result<Region> {
    check_level(t)?;
    if values.len() != grid.len() {
        return Err(Error::InvalidArgument("one density value per grid node required".into()));
    }
    let mask: Vec<bool> = values.iter().map(|&v| v >= t).collect();
    match grid.dim() {
        Dim::Circle => Ok(Region::Circle(arcs_from_mask(density, t, grid, &mask)?)),
        Dim::Sphere => {
            check_sphere_grid(grid)?;
            Ok(Region::Sphere(GridRegion { grid: Arc::clone(grid), values, level: t, mask }))
        }
    }
}

/// Same region as [`level_set_fixed`] for a KDE, evaluating only the grid
/// nodes that the block bounds cannot decide plus the corners of cells the
/// boundary passes through.
pub fn kde_level_set(est: &KdeEstimate, t: f64, grid: &Arc<EvalGrid>, blocks: &BlockIndex) -> Result<Region> {
    check_level(t)?;
    check_same_dim(est.dim(), grid.dim())?;
    if blocks.n_nodes() != grid.len() {
        return Err(Error::InvalidArgument("block index was built for another grid".into()));
    }
    let (mask, mut values) = blocks.classify(est, grid, t);
    match grid.dim() {
        Dim::Circle => Ok(Region::Circle(arcs_from_mask(est, t, grid, &mask)?)),
        Dim::Sphere => {
            check_sphere_grid(grid)?;
            let shape = match grid.layout() {
                GridLayout::LonLat { n_lon, n_lat } => LonLatShape { n_lon, n_lat },
                _ => unreachable!(),
            };
            let mut missing: Vec<usize> = contour::mixed_cells(&shape, &mask)
                .flat_map(|(r, c)| shape.corners(r, c))
                .filter(|&k| values[k].is_nan())
                .collect();
            missing.sort_unstable();
            missing.dedup();
            let filled: Vec<f64> = missing.par_iter().map(|&k| est.eval(&grid.points()[k])).collect();
            for (k, v) in missing.into_iter().zip(filled) {
                values[k] = v;
            }
            Ok(Region::Sphere(GridRegion { grid: Arc::clone(grid), values, level: t, mask }))
        }
    }
}

/// Number of connected pieces: arc count on S¹, 4-neighbor union-find with
/// longitude wraparound and pole rings on S².
pub fn count_components(region: &Region) -> usize {
    match region {
        Region::Circle(a) => {
            if a.is_full() {
                1
            } else {
                a.arcs().len()
            }
        }
        Region::Sphere(g) => {
            let n = g.mask.len();
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(parent: &mut [usize], mut x: usize) -> usize {
                while parent[x] != x {
                    parent[x] = parent[parent[x]];
                    x = parent[x];
                }
                x
            }
            for i in 0..n {
                if !g.mask[i] {
                    continue;
                }
                for j in g.grid.neighbors(i) {
                    if j > i && g.mask[j] {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
            (0..n).filter(|&i| g.mask[i] && find(&mut parent, i) == i).count()
        }
    }
}

/// Composite Simpson over [a, a + len] with at least `min_pieces` panels.
fn simpson_arc(density: &dyn Density, a: f64, len: f64, min_pieces: usize) -> f64 {
    let pieces = (((len / TAU) * 8192.0).ceil() as usize).max(min_pieces).div_ceil(2) * 2;
    let h = len / pieces as f64;
    let f = |k: usize| {
        let (s, c) = (a + k as f64 * h).sin_cos();
        density.eval(&UnitVector::from_raw([c, s, 0.0], Dim::Circle))
    };
    let inner: f64 = (1..pieces).map(|k| if k % 2 == 1 { 4.0 * f(k) } else { 2.0 * f(k) }).sum();
    h / 3.0 * (f(0) + inner + f(pieces))
}

/// Probability content of the region under `density` by quadrature
/// (Simpson along arcs on S¹, grid quadrature over the mask on S²).
pub fn region_probability(region: &Region, density: &dyn Density) -> Result<f64> {
    check_same_dim(region.dim(), density.dim())?;
    let p = match region {
        Region::Circle(a) => {
            if a.is_full() {
                simpson_arc(density, 0.0, TAU, 64)
            } else {
                a.arcs().iter().map(|arc| simpson_arc(density, arc.start, arc.len, 64)).sum()
            }
        }
        Region::Sphere(g) => {
            let w = g.grid.weights();
            let pts = g.grid.points();
            (0..g.mask.len()).into_par_iter().filter(|&k| g.mask[k]).map(|k| w[k] * density.eval(&pts[k])).sum()
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Fraction of `n` draws from `sampler` that land in the region.
pub fn region_probability_mc(
    region: &Region,
    sampler: &dyn DirectionalSampler,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    check_same_dim(region.dim(), sampler.dim())?;
    if n == 0 {
        return Err(Error::InvalidArgument("Monte Carlo size must be positive".into()));
    }
    let draws = sampler.sample_with(n, rng);
    let mut inside = 0usize;
    for x in &draws {
        if region.contains(x)? {
            inside += 1;
        }
    }
    Ok(inside as f64 / n as f64)
}
