//! Replicated simulation experiments over (model, n, τ, selector).
//!
//! Each (model, n, replicate) triple owns one random stream, so every
//! selector and τ level in a replicate sees the same sample, and the table
//! does not depend on how rayon schedules the replicates. Bandwidths that do
//! not depend on τ are selected once per sample.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;

use crate::bandwidth::{select, Pilot, SelectorConfig, SelectorId};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::hdr::{
    density_threshold, extract_boundary, hdr_region_pruned, level_set_fixed, BlockIndex, BoundarySet, ThresholdMode,
};
use crate::kde::KdeEstimate;
use crate::metrics::{error_or_penalty, hdr_error_to};
use crate::rng::{derive_seed, stream};
use crate::sphere::{make_grid, EvalGrid};
use crate::vmf::{load_model, MixtureModel};

/// Resolution of the grid on which truth thresholds are computed.
pub const TRUTH_RESOLUTION: usize = 1024;
/// Cells with a larger fraction of degenerate replicates are flagged.
pub const DEGENERATE_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PilotSpec {
    Selector(SelectorId),
    Bandwidth(f64),
}

/// Per-selector overrides in a plan file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorSettings {
    pub bootstrap: Option<usize>,
    pub pilot: Option<PilotSpec>,
    pub search: Option<[f64; 2]>,
    pub search_grid: Option<usize>,
    pub grid_resolution: Option<usize>,
    pub refine_tol: Option<f64>,
}

impl SelectorSettings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_config(&self, tau: Option<f64>, seed: u64) -> SelectorConfig {
        SelectorConfig {
            search: self.search.map(|[a, b]| (a, b)),
            search_grid: self.search_grid,
            bootstrap: self.bootstrap,
            pilot: match self.pilot {
                None => Pilot::Default,
                Some(PilotSpec::Selector(p)) => Pilot::Selector(p),
                Some(PilotSpec::Bandwidth(h)) => Pilot::Fixed(h),
            },
            tau,
            seed,
            grid_resolution: self.grid_resolution,
            refine_tol: self.refine_tol,
            ..SelectorConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Benchmark names or mixture TOML paths.
    pub models: Vec<String>,
    pub sample_sizes: Vec<usize>,
    pub taus: Vec<f64>,
    pub selectors: Vec<SelectorId>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Estimation grid; defaults to the dimension's default resolution.
    #[serde(default)]
    pub grid_resolution: Option<usize>,
    #[serde(default)]
    pub truth_resolution: Option<usize>,
    #[serde(default)]
    pub selector: BTreeMap<SelectorId, SelectorSettings>,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(plan)
    }

    /// Checks counts, τ levels and selector overrides, and loads every model.
    pub fn validate(&self) -> Result<Vec<MixtureModel>> {
        let nonempty = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("plan needs at least one {what}")))
            }
        };
        nonempty(!self.models.is_empty(), "model")?;
        nonempty(!self.sample_sizes.is_empty(), "sample size")?;
        nonempty(!self.taus.is_empty(), "tau")?;
        nonempty(!self.selectors.is_empty(), "selector")?;
        nonempty(self.replicates >= 1, "replicate")?;
        if self.sample_sizes.contains(&0) {
            return Err(Error::Config("sample sizes must be at least 1".into()));
        }
        for &t in &self.taus {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("tau must lie in (0, 1), got {t}")));
            }
        }
        for id in &self.selectors {
            self.selector_config(*id, 0.5, 0).validate().map_err(|e| Error::Config(format!("{id}: {e}")))?;
        }
        let models = self.models.iter().map(|m| load_model(m)).collect::<Result<Vec<_>>>()?;
        for (name, m) in self.models.iter().zip(&models) {
            for id in &self.selectors {
                if !id.supports(m.dim()) {
                    return Err(Error::Config(format!(
                        "selector {id} is not available for model {name} on the {}",
                        m.dim()
                    )));
                }
            }
        }
        Ok(models)
    }

    fn selector_config(&self, id: SelectorId, tau: f64, seed: u64) -> SelectorConfig {
        self.selector.get(&id).cloned().unwrap_or_default().to_config(Some(tau), seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TauKey(u64);

impl TauKey {
    // τ > 0, so the bit pattern orders like the value
    fn new(t: f64) -> Self {
        TauKey(t.to_bits())
    }

    fn value(self) -> f64 {
        f64::from_bits(self.0)
    }
}

/// Field order gives the row order (model, τ, n, selector).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub model: String,
    tau: TauKey,
    pub n: usize,
    pub selector: SelectorId,
}

impl CellKey {
    pub fn new(model: &str, tau: f64, n: usize, selector: SelectorId) -> Self {
        Self { model: model.to_string(), tau: TauKey::new(tau), n, selector }
    }

    pub fn tau(&self) -> f64 {
        self.tau.value()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cell {
    /// Hausdorff error per replicate, penalty included.
    pub errors: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub bandwidths: Vec<f64>,
}

impl Cell {
    pub fn replicates(&self) -> usize {
        self.errors.len()
    }

    pub fn mean(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    /// Sample standard deviation (0 for a single replicate).
    pub fn sd(&self) -> f64 {
        let m = self.errors.len();
        if m < 2 {
            return 0.0;
        }
        let mean = self.mean();
        (self.errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTable {
    pub seed: u64,
    pub cells: BTreeMap<CellKey, Cell>,
    /// (model, τ, f_τ) for every truth boundary used.
    pub truth_thresholds: Vec<(String, f64, f64)>,
}

impl ErrorTable {
    pub fn cell(&self, model: &str, tau: f64, n: usize, selector: SelectorId) -> Option<&Cell> {
        self.cells.get(&CellKey::new(model, tau, n, selector))
    }

    /// Cells whose degenerate fraction exceeds [`DEGENERATE_LIMIT`].
    pub fn over_degenerate_limit(&self) -> Vec<&CellKey> {
        self.cells
            .iter()
            .filter(|(_, c)| c.degenerate_count() as f64 > DEGENERATE_LIMIT * c.replicates() as f64)
            .map(|(k, _)| k)
            .collect()
    }
}

struct TruthCell {
    boundary: BoundarySet,
    threshold: f64,
}

/// Truth boundary for one (model, τ): threshold from sort-and-accumulate
/// quadrature on the fine grid, level set on the estimation grid.
fn truth_cell(model: &MixtureModel, tau: f64, truth_grid: &EvalGrid, grid: &Arc<EvalGrid>) -> Result<TruthCell> {
    let threshold = density_threshold(model, truth_grid, tau)?.value;
    let region = level_set_fixed(model, threshold, grid)?;
    Ok(TruthCell { boundary: extract_boundary(&region)?, threshold })
}

struct ReplicateResult {
    key: CellKey,
    error: f64,
    degenerate: bool,
    h: f64,
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<ErrorTable> {
    let models = plan.validate()?;
    let mut table = ErrorTable { seed: plan.seed, ..ErrorTable::default() };
    for (mi, (name, model)) in plan.models.iter().zip(&models).enumerate() {
        let dim = model.dim();
        let grid = Arc::new(make_grid(dim, plan.grid_resolution.unwrap_or(dim.default_resolution()))?);
        let truth_grid = make_grid(dim, plan.truth_resolution.unwrap_or(TRUTH_RESOLUTION))?;
        let blocks = BlockIndex::new(&grid);
        let truths = plan.taus.iter().map(|&t| truth_cell(model, t, &truth_grid, &grid)).collect::<Result<Vec<_>>>()?;
        for (tau, t) in plan.taus.iter().zip(&truths) {
            table.truth_thresholds.push((name.clone(), *tau, t.threshold));
        }
        for &n in &plan.sample_sizes {
            let results: Vec<Vec<ReplicateResult>> = (0..plan.replicates)
                .into_par_iter()
                .map(|r| run_replicate(plan, name, model, mi, n, r, &grid, &blocks, &truths))
                .collect::<Result<_>>()?;
            for res in results.into_iter().flatten() {
                let cell = table.cells.entry(res.key).or_default();
                cell.errors.push(res.error);
                cell.degenerate.push(res.degenerate);
                cell.bandwidths.push(res.h);
            }
        }
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn run_replicate(
    plan: &ExperimentPlan,
    name: &str,
    model: &MixtureModel,
    model_index: usize,
    n: usize,
    replicate: usize,
    grid: &Arc<EvalGrid>,
    blocks: &BlockIndex,
    truths: &[TruthCell],
) -> Result<Vec<ReplicateResult>> {
    let path = [model_index as u64, n as u64, replicate as u64];
    let sample = model.sample(n, &mut stream(plan.seed, &path));
    let base = KdeEstimate::new(sample.clone(), 1.0)?;
    let mut out = Vec::with_capacity(plan.selectors.len() * plan.taus.len());
    for (si, &id) in plan.selectors.iter().enumerate() {
        let seed = derive_seed(plan.seed, &[path[0], path[1], path[2], si as u64]);
        let mut shared_h = None;
        for (tau, truth) in plan.taus.iter().zip(truths) {
            let h = match shared_h {
                Some(h) => h,
                None => {
                    let h = select(id, &sample, &plan.selector_config(id, *tau, seed))?.h;
                    if id != SelectorId::H1 {
                        shared_h = Some(h);
                    }
                    h
                }
            };
            let est = base.with_bandwidth(h)?;
            let hdr = hdr_region_pruned(&est, *tau, grid, blocks, ThresholdMode::SampleValues)?;
            let (error, degenerate) = error_or_penalty(hdr_error_to(&truth.boundary, &hdr.region))?;
            out.push(ReplicateResult { key: CellKey::new(name, *tau, n, id), error, degenerate, h });
        }
    }
    Ok(out)
}

/// Truth threshold f_τ used for (model, τ), for reporting.
pub fn truth_threshold(model: &dyn Density, tau: f64, resolution: usize) -> Result<f64> {
    let g = make_grid(model.dim(), resolution)?;
    Ok(density_threshold(model, &g, tau)?.value)
}

pub const SUMMARY_HEADER: &str = "model,selector,n,tau,replicates,mean,sd,degenerate_count";
pub const RAW_HEADER: &str = "model,selector,n,tau,replicate,error,degenerate,h";

/// One row per cell in (model, τ, n, selector) order.
pub fn summarize(table: &ErrorTable) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for (k, c) in &table.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            k.model,
            k.selector,
            k.n,
            k.tau(),
            c.replicates(),
            c.mean(),
            c.sd(),
            c.degenerate_count()
        );
    }
    s
}

/// Long-format per-replicate errors for violin plots.
pub fn violin_export(table: &ErrorTable) -> String {
    let mut s = String::from(RAW_HEADER);
    s.push('\n');
    for (k, c) in &table.cells {
        for (i, ((e, d), h)) in c.errors.iter().zip(&c.degenerate).zip(&c.bandwidths).enumerate() {
            let _ = writeln!(s, "{},{},{},{},{},{},{},{}", k.model, k.selector, k.n, k.tau(), i, e, u8::from(*d), h);
        }
    }
    s
}
