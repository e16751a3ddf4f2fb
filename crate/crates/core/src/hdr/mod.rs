//! Highest density regions: thresholds, super-level sets, boundaries and
//! cluster counts.

mod contour;
mod prune;
mod region;
mod threshold;

use std::sync::Arc;

pub use contour::Polyline;
pub use prune::BlockIndex;
pub use region::{
    count_components, extract_boundary, kde_level_set, level_set_fixed, region_from_values, region_probability,
    region_probability_mc, ArcSet, BoundarySet, CircularArc, GridRegion, Region, ARC_TOLERANCE,
};
pub use threshold::{
    density_threshold, estimate_threshold, order_index, quadrature_threshold, threshold_from_values, validate_tau,
    ThresholdEstimate, ThresholdMode, ThresholdSource,
};

use crate::error::Result;
use crate::kde::KdeEstimate;
use crate::sphere::EvalGrid;

/// A plug-in HDR: the estimated threshold and its super-level set.
#[derive(Debug, Clone)]
pub struct HdrEstimate {
    pub threshold: ThresholdEstimate,
    pub region: Region,
}

/// {x : f_n(x) ≥ f̂_τ} on `grid`.
pub fn hdr_region(est: &KdeEstimate, tau: f64, grid: &Arc<EvalGrid>, mode: ThresholdMode) -> Result<HdrEstimate> {
    let threshold = estimate_threshold(est, tau, mode)?;
    let region = level_set_fixed(est, threshold.value, grid)?;
    Ok(HdrEstimate { threshold, region })
}

/// As [`hdr_region`] but through the pruned evaluation path; the region
/// mask and boundary are identical, interior grid values are not stored.
pub fn hdr_region_pruned(
    est: &KdeEstimate,
    tau: f64,
    grid: &Arc<EvalGrid>,
    blocks: &BlockIndex,
    mode: ThresholdMode,
) -> Result<HdrEstimate> {
    let threshold = estimate_threshold(est, tau, mode)?;
    let region = kde_level_set(est, threshold.value, grid, blocks)?;
    Ok(HdrEstimate { threshold, region })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;
    use crate::rng::stream;
    use crate::sphere::{angle_to_unit, make_grid, Dim, UnitVector};
    use crate::vmf::{load_benchmark, MixtureModel, VonMisesFisher};
    use std::f64::consts::{PI, TAU};

    fn circle_grid(n: usize) -> Arc<EvalGrid> {
        Arc::new(make_grid(Dim::Circle, n).unwrap())
    }

    fn sphere_grid(n: usize) -> Arc<EvalGrid> {
        Arc::new(make_grid(Dim::Sphere, n).unwrap())
    }

    fn pole() -> UnitVector {
        UnitVector::from_slice(&[0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn empty_and_full_levels() {
        let vm = VonMisesFisher::new(angle_to_unit(1.0).unwrap(), 2.0).unwrap();
        let g = circle_grid(512);
        let max = vm.eval(vm.mu());
        let min = vm.eval(&vm.mu().antipode());
        let r = level_set_fixed(&vm, max * 1.01, &g).unwrap();
        assert!(r.is_empty());
        assert_eq!(count_components(&r), 0);
        let r = level_set_fixed(&vm, min, &g).unwrap();
        assert!(r.is_full());
        assert_eq!(count_components(&r), 1);
        assert!(matches!(extract_boundary(&r), Err(crate::Error::EmptyBoundary)));

        let s = load_benchmark("S1").unwrap();
        let gs = sphere_grid(64);
        assert!(level_set_fixed(&s, 1e3, &gs).unwrap().is_empty());
        assert!(level_set_fixed(&s, 1e-12, &gs).unwrap().is_full());
        assert!(level_set_fixed(&s, 0.0, &gs).is_err());
    }

    #[test]
    fn single_vm_arc_halfwidth() {
        let mu = 2.0;
        let vm = VonMisesFisher::new(angle_to_unit(mu).unwrap(), 2.0).unwrap();
        let t = vm.eval(&angle_to_unit(mu + 1.0).unwrap());
        let r = level_set_fixed(&vm, t, &circle_grid(2048)).unwrap();
        let arcs = r.as_arcs().unwrap().arcs();
        assert_eq!(arcs.len(), 1);
        assert!((arcs[0].len - 2.0).abs() < 1e-6);
        assert!((arcs[0].start - (mu - 1.0)).abs() < 1e-6);
        let b = extract_boundary(&r).unwrap();
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn arc_counting() {
        let a = ArcSet::from_intervals(&[(0.0, 1.0), (2.0, 3.0), (5.0, 6.0)]).unwrap();
        let r = Region::Circle(a);
        assert_eq!(count_components(&r), 3);
        assert_eq!(extract_boundary(&r).unwrap().len(), 6);
        assert!(r.contains(&angle_to_unit(0.5).unwrap()).unwrap());
        assert!(!r.contains(&angle_to_unit(1.5).unwrap()).unwrap());
        assert!(ArcSet::from_intervals(&[(0.0, 2.0), (1.0, 3.0)]).is_err());
        let wrap = ArcSet::from_intervals(&[(6.0, 0.5)]).unwrap();
        assert!(wrap.contains_angle(0.1) && wrap.contains_angle(6.1) && !wrap.contains_angle(3.0));
        assert_eq!(count_components(&Region::Circle(ArcSet::empty())), 0);
        assert_eq!(count_components(&Region::Circle(ArcSet::full())), 1);
    }

    #[test]
    fn four_mode_mixture_splits() {
        let comps: Vec<_> =
            (0..4).map(|k| VonMisesFisher::new(angle_to_unit(k as f64 * PI / 2.0).unwrap(), 12.0).unwrap()).collect();
        let m = MixtureModel::new(comps, vec![0.25; 4]).unwrap();
        let g = circle_grid(2048);
        let truth_t = density_threshold(&m, &g, 0.5).unwrap().value;
        let truth = level_set_fixed(&m, truth_t, &g).unwrap();
        assert_eq!(count_components(&truth), 4);
        let xs = m.sample(1000, &mut stream(21, &[]));
        let est = KdeEstimate::new(xs, 0.12).unwrap();
        let hdr = hdr_region(&est, 0.5, &g, ThresholdMode::SampleValues).unwrap();
        assert_eq!(count_components(&hdr.region), 4);
    }

    #[test]
    fn grid_shift_keeps_component_count() {
        let comps: Vec<_> =
            [0.3, 2.0, 4.1].iter().map(|&a| VonMisesFisher::new(angle_to_unit(a).unwrap(), 8.0).unwrap()).collect();
        let m = MixtureModel::new(comps, vec![0.3, 0.3, 0.4]).unwrap();
        let n = 720;
        let step = TAU / n as f64;
        let base = level_set_fixed(&m, 0.2, &circle_grid(n)).unwrap();
        for shift in [1usize, 17, 200] {
            let comps: Vec<_> = m
                .components()
                .iter()
                .map(|c| {
                    VonMisesFisher::new(
                        angle_to_unit(c.mu().angle().unwrap() + shift as f64 * step).unwrap(),
                        c.kappa(),
                    )
                    .unwrap()
                })
                .collect();
            let shifted = MixtureModel::new(comps, m.weights().to_vec()).unwrap();
            let r = level_set_fixed(&shifted, 0.2, &circle_grid(n)).unwrap();
            assert_eq!(count_components(&r), count_components(&base));
        }
    }

    #[test]
    fn cap_boundary_matches_analytic_angle() {
        let vm = VonMisesFisher::new(pole(), 10.0).unwrap();
        let colat: f64 = 0.5;
        let t = vm.eval(&UnitVector::from_slice(&[colat.sin(), 0.0, colat.cos()]).unwrap());
        // invert κ cos δ = log t − log C
        let analytic = ((t.ln() - vm.log_normalizer()) / 10.0).acos();
        let g = sphere_grid(256);
        let r = level_set_fixed(&vm, t, &g).unwrap();
        assert_eq!(count_components(&r), 1);
        let cell = TAU / 256.0;
        let b = extract_boundary(&r).unwrap();
        for p in b.points() {
            assert!((p.dot(&pole()).acos() - analytic).abs() < cell);
        }
        let lines = r.as_grid().unwrap().polylines();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
    }

    #[test]
    fn boundary_points_sit_on_the_level() {
        let m = load_benchmark("S4").unwrap();
        let g = sphere_grid(128);
        let t = 0.5;
        let r = level_set_fixed(&m, t, &g).unwrap();
        let grid = r.as_grid().unwrap();
        let vals = grid.values();
        let spread = vals.iter().cloned().fold(0.0f64, f64::max);
        let cell = TAU / 128.0;
        for p in extract_boundary(&r).unwrap().points() {
            // local variation: density change over one grid cell around p
            let k = g.nearest(p).unwrap();
            let local = g.neighbors(k).map(|j| (vals[j] - vals[k]).abs()).fold(0.0, f64::max);
            let var = local.max(spread * cell);
            assert!((m.eval(p) - t).abs() <= var, "{} vs {t}", m.eval(p));
        }
    }

    #[test]
    fn probability_content() {
        let s1 = load_benchmark("S1").unwrap();
        let g = sphere_grid(256);
        let full = level_set_fixed(&s1, 1e-12, &g).unwrap();
        assert!((region_probability(&full, &s1).unwrap() - 1.0).abs() < 1e-6);
        let empty = level_set_fixed(&s1, 1e3, &g).unwrap();
        assert_eq!(region_probability(&empty, &s1).unwrap(), 0.0);

        // brute-force oracle: dense quadrature of f over angles, f_τ by
        // sorting cell masses
        let vm = VonMisesFisher::new(angle_to_unit(0.0).unwrap(), 2.0).unwrap();
        let m = 200_000;
        let mut cells: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let th = (k as f64 + 0.5) * TAU / m as f64;
                let f = (2.0 * th.cos()).exp() * vm.eval(&angle_to_unit(0.0).unwrap()) / 2.0f64.exp();
                (f, f * TAU / m as f64)
            })
            .collect();
        cells.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = 0.0;
        let mut ft = 0.0;
        for (f, p) in cells {
            acc += p;
            if acc >= 0.5 {
                ft = f;
                break;
            }
        }
        let r = level_set_fixed(&vm, ft, &circle_grid(2048)).unwrap();
        let p = region_probability(&r, &vm).unwrap();
        assert!((p - 0.5).abs() < 0.01, "{p}");
        let mc = region_probability_mc(&r, &vm, 20_000, &mut stream(5, &[])).unwrap();
        assert!((mc - 0.5).abs() < 0.02, "{mc}");
    }

    #[test]
    fn nested_in_tau() {
        let m = load_benchmark("S7").unwrap();
        let xs = m.sample(400, &mut stream(8, &[]));
        let est = KdeEstimate::new(xs, 0.3).unwrap();
        let g = sphere_grid(64);
        let vals = est.eval_grid(&g).unwrap();
        let mut prev: Option<Vec<bool>> = None;
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let t = estimate_threshold(&est, tau, ThresholdMode::SampleValues).unwrap().value;
            let r = region_from_values(&est, vals.clone(), t, &g).unwrap();
            let mask = r.as_grid().unwrap().mask().to_vec();
            if let Some(p) = &prev {
                assert!(mask.iter().zip(p).all(|(&now, &before)| !now || before));
            }
            prev = Some(mask);
        }
    }

    #[test]
    fn small_tau_covers_almost_everything() {
        let u = VonMisesFisher::new(pole(), 0.3).unwrap();
        let n = 500;
        let xs = u.sample(n, &mut stream(3, &[]));
        let est = KdeEstimate::new(xs, 0.8).unwrap();
        let g = sphere_grid(64);
        let hdr = hdr_region(&est, 1.0 / n as f64, &g, ThresholdMode::SampleValues).unwrap();
        assert!(hdr.region.measure() >= 0.99 * 4.0 * PI);
    }

    #[test]
    fn pruned_path_is_exact() {
        for name in ["S1", "S4", "S9"] {
            let m = load_benchmark(name).unwrap();
            let xs = m.sample(300, &mut stream(11, &[]));
            for h in [0.08, 0.2, 0.5] {
                let est = KdeEstimate::new(xs.clone(), h).unwrap();
                let g = sphere_grid(128);
                let blocks = BlockIndex::new(&g);
                let a = hdr_region(&est, 0.5, &g, ThresholdMode::SampleValues).unwrap();
                let b = hdr_region_pruned(&est, 0.5, &g, &blocks, ThresholdMode::SampleValues).unwrap();
                let (ga, gb) = (a.region.as_grid().unwrap(), b.region.as_grid().unwrap());
                assert_eq!(ga.mask(), gb.mask());
                assert_eq!(extract_boundary(&a.region).unwrap(), extract_boundary(&b.region).unwrap());
                assert_eq!(ga.polylines(), gb.polylines());
            }
        }
        let vm = VonMisesFisher::new(angle_to_unit(2.0).unwrap(), 4.0).unwrap();
        let xs = vm.sample(300, &mut stream(12, &[]));
        let est = KdeEstimate::new(xs, 0.3).unwrap();
        let g = circle_grid(512);
        let blocks = BlockIndex::new(&g);
        let a = hdr_region(&est, 0.3, &g, ThresholdMode::SampleValues).unwrap();
        let b = hdr_region_pruned(&est, 0.3, &g, &blocks, ThresholdMode::SampleValues).unwrap();
        assert_eq!(a.region.as_arcs(), b.region.as_arcs());
    }
}
