use rand::RngCore;
use rayon::prelude::*;

use crate::error::Result;
use crate::sphere::{check_same_dim, Dim, EvalGrid, UnitVector};

/// A probability density on S¹ or S².
///
/// `eval` does not re-check dimensions; the public entry points
/// (`density_at`, `eval_grid`) do.
pub trait Density: Sync {
    fn dim(&self) -> Dim;

    fn eval(&self, x: &UnitVector) -> f64;

    fn density_at(&self, x: &UnitVector) -> Result<f64> {
        check_same_dim(self.dim(), x.dim())?;
        Ok(self.eval(x))
    }

    fn eval_many(&self, points: &[UnitVector]) -> Vec<f64> {
        points.par_iter().map(|p| self.eval(p)).collect()
    }

    fn eval_grid(&self, grid: &EvalGrid) -> Result<Vec<f64>> {
        check_same_dim(self.dim(), grid.dim())?;
        Ok(self.eval_many(grid.points()))
    }
}

/// A law we can draw exact samples from.
pub trait DirectionalSampler {
    fn dim(&self) -> Dim;

    fn sample_with(&self, n: usize, rng: &mut dyn RngCore) -> Vec<UnitVector>;
}
