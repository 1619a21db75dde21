//! Fixtures shared by the operator benchmarks.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nscrit_core::grid::{make_grid, TimeSpacing};
use nscrit_core::presets::{random_band_limited, random_solenoidal, TrigSeries};
use nscrit_core::{Grid, SpaceGrid, SpaceTimeField, SpatialField};

pub fn ladder(dim: usize, n: usize, n_time: usize) -> Grid {
    make_grid(dim, 2.0 * PI, n, 1e-3, 1.0, n_time, TimeSpacing::Geometric).expect("valid fixture grid")
}

pub fn slice(dim: usize, n: usize, components: usize, seed: u64) -> SpatialField {
    let space = SpaceGrid::new(dim, 2.0 * PI, n).expect("valid fixture space");
    random_band_limited(&mut ChaCha8Rng::seed_from_u64(seed), space, components, 4)
}

pub fn solenoidal(grid: &Grid, seed: u64) -> SpatialField {
    random_solenoidal(&mut ChaCha8Rng::seed_from_u64(seed), grid.space(), 2)
}

/// Heat extension of smooth random data.
pub fn smooth(grid: &Grid, components: usize, seed: u64) -> SpaceTimeField {
    let space = grid.space();
    TrigSeries::random(&mut ChaCha8Rng::seed_from_u64(seed), space.dim, space.length, components, 2)
        .heat_extension(grid)
}
