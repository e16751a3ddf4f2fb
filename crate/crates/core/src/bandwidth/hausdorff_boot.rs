//! Bootstrap Hausdorff selector h₁.
//!
//! The reference boundary comes from the pilot estimate and stays fixed.
//! B smoothed-bootstrap resamples are drawn from the pilot once and reused
//! for every candidate bandwidth, so the objective is a deterministic,
//! smooth-ish function of h instead of a fresh Monte Carlo draw per call.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::optimize::{minimize_scalar, Minimum, ScalarSearch, SelectionWarning};
use crate::error::{Error, Result};
use crate::hdr::{extract_boundary, hdr_region_pruned, validate_tau, BlockIndex, BoundarySet, ThresholdMode};
use crate::kde::KdeEstimate;
use crate::metrics::{error_or_penalty, hdr_error_to, DEGENERATE_PENALTY};
use crate::rng::stream;
use crate::sphere::{make_grid, EvalGrid, UnitVector};

pub const H1_MIN_SAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Settings {
    pub tau: f64,
    pub pilot_h: f64,
    pub replicates: usize,
    pub grid_resolution: usize,
    pub seed: u64,
}

struct Setup {
    grid: Arc<EvalGrid>,
    blocks: BlockIndex,
    reference: Option<BoundarySet>,
    resamples: Vec<KdeEstimate>,
    tau: f64,
}

impl Setup {
    /// Mean error over the resamples at bandwidth h and the number of
    /// penalized replicates; `None` on a numerical failure.
    fn evaluate(&self, reference: &BoundarySet, h: f64) -> Option<(f64, usize)> {
        let scored: Vec<Option<(f64, bool)>> = self
            .resamples
            .par_iter()
            .map(|r| {
                let est = r.with_bandwidth(h).ok()?;
                let hdr =
                    hdr_region_pruned(&est, self.tau, &self.grid, &self.blocks, ThresholdMode::SampleValues).ok()?;
                error_or_penalty(hdr_error_to(reference, &hdr.region)).ok()
            })
            .collect();
        let mut sum = 0.0;
        let mut penalized = 0;
        for s in scored {
            let (v, p) = s?;
            sum += v;
            penalized += usize::from(p);
        }
        Some((sum / self.resamples.len() as f64, penalized))
    }
}

fn setup(sample: &[UnitVector], s: &H1Settings) -> Result<Setup> {
    if sample.len() < H1_MIN_SAMPLE {
        return Err(Error::SampleTooSmall { needed: H1_MIN_SAMPLE, got: sample.len() });
    }
    if s.replicates == 0 {
        return Err(Error::InvalidArgument("bootstrap replicate count must be at least 1".into()));
    }
    let tau = validate_tau(s.tau)?;
    let pilot = KdeEstimate::new(sample.to_vec(), s.pilot_h)?;
    let grid = Arc::new(make_grid(pilot.dim(), s.grid_resolution)?);
    let blocks = BlockIndex::new(&grid);
    let reference_hdr = hdr_region_pruned(&pilot, tau, &grid, &blocks, ThresholdMode::SampleValues)?;
    let reference = match extract_boundary(&reference_hdr.region) {
        Ok(b) => Some(b),
        Err(Error::EmptyBoundary) => None,
        Err(e) => return Err(e),
    };
    let n = sample.len();
    let resamples = (0..s.replicates)
        .into_par_iter()
        .map(|b| KdeEstimate::new(pilot.sample_smoothed(n, &mut stream(s.seed, &[b as u64])), 1.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(Setup { grid, blocks, reference, resamples, tau })
}

pub fn h1_bootstrap_hausdorff(sample: &[UnitVector], settings: &H1Settings, search: &ScalarSearch) -> Result<Minimum> {
    let st = setup(sample, settings)?;
    let Some(reference) = st.reference.as_ref() else {
        let mut m = minimize_scalar(|_| DEGENERATE_PENALTY, search)?;
        m.warnings.insert(0, SelectionWarning::DegenerateReference);
        return Ok(m);
    };
    let penalties = Mutex::new(BTreeMap::new());
    let mut m = minimize_scalar(
        |h| match st.evaluate(reference, h) {
            Some((v, p)) => {
                penalties.lock().expect("no panics while holding the lock").insert(h.to_bits(), p);
                v
            }
            None => f64::INFINITY,
        },
        search,
    )?;
    let count = penalties.into_inner().expect("lock not poisoned").get(&m.x.to_bits()).copied().unwrap_or(0);
    if count > 0 {
        m.warnings.push(SelectionWarning::PenalizedReplicates { count });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandwidth::optimize::Edge;
    use crate::vmf::load_benchmark;

    fn settings(replicates: usize, pilot_h: f64) -> H1Settings {
        H1Settings { tau: 0.5, pilot_h, replicates, grid_resolution: 64, seed: 9 }
    }

    #[test]
    fn deterministic_and_bounded() {
        let xs = load_benchmark("S1").unwrap().sample(100, &mut stream(1, &[]));
        let search = ScalarSearch::new(0.1, 1.0, 8).unwrap().with_tolerance(1e-2);
        let a = h1_bootstrap_hausdorff(&xs, &settings(1, 0.3), &search).unwrap();
        let b = h1_bootstrap_hausdorff(&xs, &settings(1, 0.3), &search).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.iter().all(|&(_, v)| (0.0..=2.0).contains(&v)));
        let c = h1_bootstrap_hausdorff(&xs, &settings(4, 0.3), &search).unwrap();
        assert!(c.x > 0.0 && c.x.is_finite());
    }

    #[test]
    fn oversmoothed_pilot_is_degenerate() {
        // at h = 1e9 every kernel term rounds to the same value, so the pilot is exactly flat
        let xs = load_benchmark("S1").unwrap().sample(60, &mut stream(2, &[]));
        let search = ScalarSearch::new(0.1, 1.0, 8).unwrap();
        let m = h1_bootstrap_hausdorff(&xs, &settings(2, 1e9), &search).unwrap();
        assert_eq!(m.warnings[0], SelectionWarning::DegenerateReference);
        assert!(m.warnings.contains(&SelectionWarning::BoundaryHit { edge: Edge::Lower, h: 0.1 }));
        assert!(m.trace.iter().all(|&(_, v)| v == DEGENERATE_PENALTY));
    }

    #[test]
    fn needs_fifty_points() {
        let xs = load_benchmark("S1").unwrap().sample(49, &mut stream(3, &[]));
        let search = ScalarSearch::new(0.1, 1.0, 8).unwrap();
        assert_eq!(
            h1_bootstrap_hausdorff(&xs, &settings(2, 0.3), &search).unwrap_err(),
            Error::SampleTooSmall { needed: 50, got: 49 }
        );
    }
}
