//! Application problems: objectives, geometries, projections and data
//! generators.

pub mod dag;
pub mod fair;
pub mod io;
pub mod mlr;
pub mod quadratic;
pub mod sets;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn normal<T: crate::Real>(rng: &mut ChaCha8Rng) -> T {
    use rand_distr::{Distribution, StandardNormal};
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}
