//! Seeded random smooth decaying fields: sums of `r^p e^{-σr²}` with even `p`.

use crate::grid::{FieldPair, RadialGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn component<R: Rng>(grid: &RadialGrid, rng: &mut R) -> Vec<C64> {
    let terms = rng.random_range(1..=3);
    let mut f = grid.zeros();
    for _ in 0..terms {
        let p = 2 * rng.random_range(0..=2);
        let sigma: f64 = rng.random_range(0.05..1.0);
        let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for (fi, &r) in f.iter_mut().zip(&grid.nodes) {
            *fi += c * r.powi(p) * (-sigma * r * r).exp() * sigma.powi(p / 2);
        }
    }
    f
}

/// A complex pair with both components random.
pub fn random_pair<R: Rng>(grid: &RadialGrid, kappa: f64, rng: &mut R) -> FieldPair {
    FieldPair { u: component(grid, rng), v: component(grid, rng), kappa }
}

/// A real-valued pair.
pub fn random_real_pair<R: Rng>(grid: &RadialGrid, kappa: f64, rng: &mut R) -> FieldPair {
    random_pair(grid, kappa, rng).re()
}
