//! Seeded fixtures shared by the benchmarks.

use dirhdr_core::sphere::angle_to_unit;
use dirhdr_core::{load_benchmark, rng, MixtureModel, UnitVector, VonMisesFisher};

pub const SEED: u64 = 20_240_601;

pub fn sphere_sample(model: &str, n: usize) -> Vec<UnitVector> {
    load_benchmark(model).expect("benchmark model").sample(n, &mut rng::stream(SEED, &[n as u64]))
}

pub fn circle_sample(n: usize) -> Vec<UnitVector> {
    let comps = vec![
        VonMisesFisher::new(angle_to_unit(0.5).expect("angle"), 6.0).expect("vmf"),
        VonMisesFisher::new(angle_to_unit(3.5).expect("angle"), 3.0).expect("vmf"),
    ];
    let model = MixtureModel::new(comps, vec![0.6, 0.4]).expect("mixture");
    model.sample(n, &mut rng::stream(SEED, &[1, n as u64]))
}
