//! Highest density regions for directional data on the circle and sphere.

pub mod bandwidth;
pub mod density;
pub mod error;
mod fastexp;
pub mod hdr;
pub mod kde;
pub mod metrics;
pub mod rng;
pub mod sim;
pub mod special;
pub mod sphere;
pub mod vmf;

pub use density::{Density, DirectionalSampler};
pub use error::{Error, Result};
pub use kde::KdeEstimate;
pub use sphere::{chord_distance, make_grid, Dim, EvalGrid, UnitVector};
pub use vmf::{load_benchmark, MixtureModel, VonMisesFisher};
