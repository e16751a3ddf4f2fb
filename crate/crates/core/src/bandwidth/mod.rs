//! Bandwidth selectors h1–h7 behind one entry point, [`select`].
//!
//! | id | method |
//! |----|--------|
//! | h1 | bootstrap mean Hausdorff distance between HDR boundaries |
//! | h2 | von Mises plug-in (circle) |
//! | h3 | AMISE with a von Mises mixture fitted by EM (circle) |
//! | h4 | least squares cross-validation |
//! | h5 | likelihood cross-validation |
//! | h6 | smoothed-bootstrap MISE (circle) |
//! | h7 | directional rule of thumb |

mod bootstrap_mise;
mod cv;
mod hausdorff_boot;
mod mixture_em;
mod optimize;
mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bootstrap_mise::{
    conv_grid_size, exact_mise, h6_bootstrap_mise, mise_terms_on_grid, BootstrapMise, MiseTerms, MAX_CONV_GRID,
    MIN_CONV_GRID,
};
pub use cv::{h4_lscv, h5_lcv, lcv_objective, lscv_objective};
pub use hausdorff_boot::{h1_bootstrap_hausdorff, H1Settings, H1_MIN_SAMPLE};
pub use mixture_em::{
    amise, curvature_functional, em_fit_vm_mixture, h3_oliveira, EmConfig, H3Result, MixtureFit, CURVATURE_GRID,
};
pub use optimize::{minimize_scalar, Edge, Minimum, ScalarSearch, SelectionWarning, MIN_GRID_POINTS};
pub use rules::{
    h2_formula, h2_taylor, h7_circle_formula, h7_rot, h7_sphere_formula, inverse_a, kappa_ml, KAPPA_BRACKET,
    POINT_MASS_RBAR,
};

use crate::error::{Error, Result};
use crate::sphere::{Dim, UnitVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SelectorId {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
}

impl SelectorId {
    pub const ALL: [SelectorId; 7] = [
        SelectorId::H1,
        SelectorId::H2,
        SelectorId::H3,
        SelectorId::H4,
        SelectorId::H5,
        SelectorId::H6,
        SelectorId::H7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectorId::H1 => "h1",
            SelectorId::H2 => "h2",
            SelectorId::H3 => "h3",
            SelectorId::H4 => "h4",
            SelectorId::H5 => "h5",
            SelectorId::H6 => "h6",
            SelectorId::H7 => "h7",
        }
    }

    pub fn supports(self, dim: Dim) -> bool {
        !matches!((self, dim), (SelectorId::H2 | SelectorId::H3 | SelectorId::H6, Dim::Sphere))
    }
}

impl fmt::Display for SelectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        SelectorId::ALL.into_iter().find(|id| id.as_str() == t).ok_or_else(|| Error::UnknownSelector(s.to_string()))
    }
}

impl TryFrom<String> for SelectorId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SelectorId> for String {
    fn from(id: SelectorId) -> String {
        id.as_str().to_string()
    }
}

/// Bandwidth of the reference estimate used by h1 and h6.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Pilot {
    /// h1: h3 on the circle, h5 on the sphere. h6: h5.
    #[default]
    Default,
    Selector(SelectorId),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorConfig {
    /// Search interval; `None` picks one from the data.
    pub search: Option<(f64, f64)>,
    /// Log-spaced scan size; `None` means 40 (24 for h1).
    pub search_grid: Option<usize>,
    /// Bootstrap replicates for h1; `None` means 200 on S¹ and 50 on S².
    pub bootstrap: Option<usize>,
    pub pilot: Pilot,
    /// HDR level, required by h1.
    pub tau: Option<f64>,
    pub seed: u64,
    /// Grid for the h1 inner HDRs; `None` means 512 on S¹ and 128 on S².
    pub grid_resolution: Option<usize>,
    /// Golden-section stopping width in log h; `None` means 1e-6 (1e-2 for h1).
    pub refine_tol: Option<f64>,
    pub em: EmConfig,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            search: None,
            search_grid: None,
            bootstrap: None,
            pilot: Pilot::Default,
            tau: None,
            seed: 0,
            grid_resolution: None,
            refine_tol: None,
            em: EmConfig::default(),
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.search {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "search interval must satisfy 0 < lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if let Some(g) = self.search_grid {
            if g < MIN_GRID_POINTS {
                return Err(Error::InvalidArgument(format!(
                    "search grid needs at least {MIN_GRID_POINTS} points, got {g}"
                )));
            }
        }
        if self.bootstrap == Some(0) {
            return Err(Error::InvalidArgument("bootstrap replicate count must be at least 1".into()));
        }
        if let Pilot::Fixed(h) = self.pilot {
            crate::kde::validate_bandwidth(h)?;
        }
        if let Pilot::Selector(SelectorId::H1) = self.pilot {
            return Err(Error::InvalidArgument("h1 cannot be its own pilot".into()));
        }
        if let Some(t) = self.tau {
            crate::hdr::validate_tau(t)?;
        }
        if let Some(t) = self.refine_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument("refinement tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selector: SelectorId,
    pub h: f64,
    /// Objective at `h` for the optimizing selectors.
    pub objective: Option<f64>,
    /// (h, objective) pairs evaluated, sorted by h.
    pub trace: Vec<(f64, f64)>,
    pub warnings: Vec<SelectionWarning>,
    pub pilot_h: Option<f64>,
    pub search: Option<(f64, f64)>,
}

impl Selection {
    fn closed_form(selector: SelectorId, h: f64) -> Self {
        Self { selector, h, objective: None, trace: Vec::new(), warnings: Vec::new(), pilot_h: None, search: None }
    }

    fn from_minimum(selector: SelectorId, m: Minimum, search: &ScalarSearch, pilot_h: Option<f64>) -> Self {
        Self {
            selector,
            h: m.x,
            objective: Some(m.value),
            trace: m.trace,
            warnings: m.warnings,
            pilot_h,
            search: Some((search.lo, search.hi)),
        }
    }
}

/// Used when the rule of thumb cannot anchor the interval (near-uniform data).
const FALLBACK_SEARCH: (f64, f64) = (0.01, 4.0);

/// Data-driven interval around the rule-of-thumb bandwidth, wide enough
/// for the cross-validation and MISE optima on multimodal data.
fn default_search(sample: &[UnitVector]) -> Result<(f64, f64)> {
    match h7_rot(sample) {
        Ok(h) => Ok((h / 25.0, h * 4.0)),
        Err(Error::UniformData(_)) => Ok(FALLBACK_SEARCH),
        Err(e) => Err(e),
    }
}

fn search_for(sample: &[UnitVector], cfg: &SelectorConfig, grid: usize, tol: f64) -> Result<ScalarSearch> {
    let (lo, hi) = match cfg.search {
        Some(s) => s,
        None => default_search(sample)?,
    };
    Ok(ScalarSearch::new(lo, hi, cfg.search_grid.unwrap_or(grid))?.with_tolerance(cfg.refine_tol.unwrap_or(tol)))
}

fn pilot_bandwidth(id: SelectorId, sample: &[UnitVector], cfg: &SelectorConfig) -> Result<f64> {
    let dim = sample[0].dim();
    let pilot_id = match cfg.pilot {
        Pilot::Fixed(h) => return Ok(h),
        Pilot::Selector(p) => p,
        Pilot::Default => match (id, dim) {
            (SelectorId::H1, Dim::Circle) => SelectorId::H3,
            _ => SelectorId::H5,
        },
    };
    // the pilot runs on its own defaults apart from seed and EM settings
    let inner = SelectorConfig { seed: cfg.seed, em: cfg.em, ..SelectorConfig::default() };
    Ok(select(pilot_id, sample, &inner)?.h)
}

/// Runs selector `id` on `sample`.
pub fn select(id: SelectorId, sample: &[UnitVector], cfg: &SelectorConfig) -> Result<Selection> {
    cfg.validate()?;
    let dim = sample.first().ok_or(Error::EmptySet)?.dim();
    if !id.supports(dim) {
        return Err(Error::UnsupportedDimension { selector: id.as_str(), dim });
    }
    match id {
        SelectorId::H2 => Ok(Selection::closed_form(id, h2_taylor(sample)?)),
        SelectorId::H7 => Ok(Selection::closed_form(id, h7_rot(sample)?)),
        SelectorId::H3 => {
            let search = search_for(sample, cfg, 40, 1e-6)?;
            let em = EmConfig { seed: cfg.seed, ..cfg.em };
            let r = h3_oliveira(sample, &em, &search)?;
            Ok(Selection::from_minimum(id, r.minimum, &search, None))
        }
        SelectorId::H4 => {
            let search = search_for(sample, cfg, 40, 1e-6)?;
            Ok(Selection::from_minimum(id, h4_lscv(sample, &search)?, &search, None))
        }
        SelectorId::H5 => {
            let search = search_for(sample, cfg, 40, 1e-6)?;
            Ok(Selection::from_minimum(id, h5_lcv(sample, &search)?, &search, None))
        }
        SelectorId::H6 => {
            let search = search_for(sample, cfg, 40, 1e-6)?;
            let pilot = pilot_bandwidth(id, sample, cfg)?;
            Ok(Selection::from_minimum(id, h6_bootstrap_mise(sample, pilot, &search)?, &search, Some(pilot)))
        }
        SelectorId::H1 => {
            let tau = cfg.tau.ok_or(Error::MissingTau)?;
            if sample.len() < H1_MIN_SAMPLE {
                return Err(Error::SampleTooSmall { needed: H1_MIN_SAMPLE, got: sample.len() });
            }
            let pilot = pilot_bandwidth(id, sample, cfg)?;
            let (lo, hi) = cfg.search.unwrap_or((pilot / 8.0, pilot * 8.0));
            let search = ScalarSearch::new(lo, hi, cfg.search_grid.unwrap_or(24))?
                .with_tolerance(cfg.refine_tol.unwrap_or(1e-2));
            let settings = H1Settings {
                tau,
                pilot_h: pilot,
                replicates: cfg.bootstrap.unwrap_or(match dim {
                    Dim::Circle => 200,
                    Dim::Sphere => 50,
                }),
                grid_resolution: cfg.grid_resolution.unwrap_or(match dim {
                    Dim::Circle => 512,
                    Dim::Sphere => 128,
                }),
                seed: cfg.seed,
            };
            Ok(Selection::from_minimum(id, h1_bootstrap_hausdorff(sample, &settings, &search)?, &search, Some(pilot)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sphere::{angle_to_unit, Rotation};
    use crate::vmf::{load_benchmark, VonMisesFisher};

    #[test]
    fn parse_ids() {
        assert_eq!("H5".parse::<SelectorId>().unwrap(), SelectorId::H5);
        assert_eq!(" h1 ".parse::<SelectorId>().unwrap(), SelectorId::H1);
        assert_eq!("h9".parse::<SelectorId>(), Err(Error::UnknownSelector("h9".into())));
        for id in SelectorId::ALL {
            assert_eq!(id.to_string().parse::<SelectorId>().unwrap(), id);
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            SelectorConfig { search: Some((0.5, 0.1)), ..Default::default() },
            SelectorConfig { search_grid: Some(4), ..Default::default() },
            SelectorConfig { bootstrap: Some(0), ..Default::default() },
            SelectorConfig { tau: Some(1.5), ..Default::default() },
            SelectorConfig { pilot: Pilot::Fixed(-1.0), ..Default::default() },
            SelectorConfig { pilot: Pilot::Selector(SelectorId::H1), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn h1_needs_tau_and_dims_are_checked() {
        let xs = load_benchmark("S1").unwrap().sample(100, &mut stream(1, &[]));
        assert_eq!(select(SelectorId::H1, &xs, &SelectorConfig::default()), Err(Error::MissingTau));
        for id in [SelectorId::H2, SelectorId::H3, SelectorId::H6] {
            assert!(matches!(select(id, &xs, &SelectorConfig::default()), Err(Error::UnsupportedDimension { .. })));
        }
    }

    #[test]
    fn every_selector_returns_positive_h() {
        let c = VonMisesFisher::new(angle_to_unit(0.4).unwrap(), 3.0).unwrap().sample(120, &mut stream(2, &[]));
        let s = load_benchmark("S3").unwrap().sample(120, &mut stream(3, &[]));
        let cfg =
            SelectorConfig { tau: Some(0.5), bootstrap: Some(3), grid_resolution: Some(64), ..Default::default() };
        for id in SelectorId::ALL {
            for xs in [&c, &s] {
                if !id.supports(xs[0].dim()) {
                    continue;
                }
                let r = select(id, xs, &cfg).unwrap();
                assert!(r.h > 0.0 && r.h.is_finite(), "{id}: {}", r.h);
            }
        }
    }

    #[test]
    fn rotation_invariance() {
        let c = load_benchmark("S5").unwrap().sample(150, &mut stream(4, &[]));
        let rot = Rotation::about_axis([0.3, -1.0, 2.0], 1.1);
        let d: Vec<_> = c.iter().map(|x| rot.apply(x)).collect();
        for id in [SelectorId::H4, SelectorId::H5, SelectorId::H7] {
            let a = select(id, &c, &SelectorConfig::default()).unwrap().h;
            let b = select(id, &d, &SelectorConfig::default()).unwrap().h;
            assert!((a - b).abs() <= 1e-10 * a, "{id}: {a} vs {b}");
        }
        let c = VonMisesFisher::new(angle_to_unit(0.4).unwrap(), 3.0).unwrap().sample(150, &mut stream(5, &[]));
        let rot = Rotation::about_axis([0.0, 0.0, 1.0], 2.3);
        let d: Vec<_> = c.iter().map(|x| rot.apply(x)).collect();
        for id in [SelectorId::H2, SelectorId::H4, SelectorId::H5, SelectorId::H6, SelectorId::H7] {
            let a = select(id, &c, &SelectorConfig::default()).unwrap().h;
            let b = select(id, &d, &SelectorConfig::default()).unwrap().h;
            assert!((a - b).abs() <= 1e-10 * a, "{id}: {a} vs {b}");
        }
    }
}
