//! Seeded test fields defined analytically, so the same continuum field can be
//! sampled on any grid (refinement and dilation studies depend on this).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::{SpaceTimeField, SpatialField};
use crate::grid::{Grid, SpaceGrid};

/// One real Fourier term `cos·cos(k·x) + sin·sin(k·x)` of a component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub component: usize,
    pub k: [i32; 3],
    pub cos: f64,
    pub sin: f64,
}

/// A finite trigonometric series on the box `[0, L)^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    pub dim: usize,
    pub length: f64,
    pub components: usize,
    pub terms: Vec<TrigTerm>,
}

/// Integer frequencies in `[-kmax, kmax]^dim` with first nonzero entry positive.
fn half_lattice(dim: usize, kmax: i32) -> Vec<[i32; 3]> {
    let range = |axis: usize| if axis < dim { -kmax..=kmax } else { 0..=0 };
    let mut out = Vec::new();
    for kz in range(2) {
        for ky in range(1) {
            for kx in range(0) {
                let k = [kx, ky, kz];
                if k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
                    out.push(k);
                }
            }
        }
    }
    out
}

impl TrigSeries {
    /// Random mean-free series with every frequency `|k_i| ≤ kmax`, coefficients
    /// uniform in `[-1, 1]/√(terms)`.
    pub fn random(
        rng: &mut impl Rng,
        dim: usize,
        length: f64,
        components: usize,
        kmax: i32,
    ) -> Self {
        let ks = half_lattice(dim, kmax);
        let scale = 1.0 / ((ks.len() * components) as f64).sqrt();
        let mut terms = Vec::with_capacity(ks.len() * components);
        for component in 0..components {
            for &k in &ks {
                terms.push(TrigTerm {
                    component,
                    k,
                    cos: scale * rng.gen_range(-1.0..1.0),
                    sin: scale * rng.gen_range(-1.0..1.0),
                });
            }
        }
        Self {
            dim,
            length,
            components,
            terms,
        }
    }

    /// Random divergence-free vector series (each frequency's amplitude is
    /// projected orthogonally to `k`).
    pub fn random_solenoidal(rng: &mut impl Rng, dim: usize, length: f64, kmax: i32) -> Self {
        let ks = half_lattice(dim, kmax);
        let scale = 1.0 / ((ks.len() * dim) as f64).sqrt();
        let mut terms = Vec::new();
        for &k in &ks {
            let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
            let k2: f64 = kf.iter().map(|v| v * v).sum();
            let mut draw = || {
                let mut a: Vec<f64> = (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
                let dot: f64 = (0..dim).map(|i| a[i] * kf[i]).sum();
                for i in 0..dim {
                    a[i] -= dot * kf[i] / k2;
                }
                a
            };
            let (c, s) = (draw(), draw());
            for component in 0..dim {
                terms.push(TrigTerm {
                    component,
                    k,
                    cos: c[component],
                    sin: s[component],
                });
            }
        }
        Self {
            dim,
            length,
            components: dim,
            terms,
        }
    }

    fn wave(&self, k: &[i32; 3]) -> [f64; 3] {
        let unit = 2.0 * std::f64::consts::PI / self.length;
        [unit * k[0] as f64, unit * k[1] as f64, unit * k[2] as f64]
    }

    /// Value of the heat-evolved series `e^{tΔ}` at one point.
    fn eval(&self, t: f64, p: &[f64; 3], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for term in &self.terms {
            let xi = self.wave(&term.k);
            let phase: f64 = (0..self.dim).map(|a| xi[a] * p[a]).sum();
            let decay = if t == 0.0 {
                1.0
            } else {
                (-t * xi.iter().map(|v| v * v).sum::<f64>()).exp()
            };
            out[term.component] += decay * (term.cos * phase.cos() + term.sin * phase.sin());
        }
    }

    pub fn sample(&self, space: SpaceGrid) -> SpatialField {
        let n = space.len();
        let mut values = vec![0.0; self.components * n];
        let mut buf = vec![0.0; self.components];
        for s in 0..n {
            self.eval(0.0, &space.position(s), &mut buf);
            for c in 0..self.components {
                values[c * n + s] = buf[c];
            }
        }
        SpatialField::from_values(space, self.components, values).expect("sizes agree")
    }

    /// Exact heat extension `e^{tΔ}u₀` sampled on the grid.
    pub fn heat_extension(&self, grid: &Grid) -> SpaceTimeField {
        let space = grid.space();
        let ns = space.len();
        let nt = grid.n_time();
        let mut values = vec![0.0; self.components * grid.len()];
        let mut buf = vec![0.0; self.components];
        for (k, &t) in grid.times().iter().enumerate() {
            for s in 0..ns {
                self.eval(t, &space.position(s), &mut buf);
                for c in 0..self.components {
                    values[(c * nt + k) * ns + s] = buf[c];
                }
            }
        }
        SpaceTimeField::from_values(grid, self.components, values).expect("sizes agree")
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.cos *= a;
            t.sin *= a;
        }
        out
    }
}

/// Random mean-free band-limited slice (`|k_i| ≤ kmax` in lattice units).
pub fn random_band_limited(
    rng: &mut impl Rng,
    space: SpaceGrid,
    components: usize,
    kmax: i32,
) -> SpatialField {
    TrigSeries::random(rng, space.dim, space.length, components, kmax).sample(space)
}

/// Random divergence-free band-limited vector slice.
pub fn random_solenoidal(rng: &mut impl Rng, space: SpaceGrid, kmax: i32) -> SpatialField {
    TrigSeries::random_solenoidal(rng, space.dim, space.length, kmax).sample(space)
}

/// A space-time Gaussian bump, log-normal in time:
/// `A·exp(−|x−c|²/(2w²))·exp(−ln²(t/t_c)/(2s²))`, periodized over nearest images.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub component: usize,
    pub center: [f64; 3],
    pub width: f64,
    pub t_center: f64,
    pub t_spread: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpField {
    pub dim: usize,
    pub length: f64,
    pub components: usize,
    pub bumps: Vec<Bump>,
}

/// Parameter ranges for [`BumpField::random`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpRanges {
    pub count: usize,
    pub width: (f64, f64),
    pub t_center: (f64, f64),
    pub t_spread: (f64, f64),
    /// Draw amplitudes from `(0, 1]` instead of `[-1, 1]`.
    pub nonnegative: bool,
}

impl BumpField {
    pub fn random(
        rng: &mut impl Rng,
        dim: usize,
        length: f64,
        components: usize,
        ranges: &BumpRanges,
    ) -> Self {
        let draw = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.gen_range(lo..hi)
            } else {
                lo
            }
        };
        let mut bumps = Vec::with_capacity(ranges.count);
        for i in 0..ranges.count {
            let mut center = [0.0; 3];
            for c in center.iter_mut().take(dim) {
                *c = rng.gen_range(0.0..length);
            }
            // Log-uniform draws keep scales spread across the ladder.
            let t_center = draw(rng, (ranges.t_center.0.ln(), ranges.t_center.1.ln())).exp();
            let amplitude = if ranges.nonnegative {
                rng.gen_range(0.1..1.0)
            } else {
                rng.gen_range(-1.0..1.0)
            };
            bumps.push(Bump {
                component: i % components,
                center,
                width: draw(rng, ranges.width),
                t_center,
                t_spread: draw(rng, ranges.t_spread),
                amplitude,
            });
        }
        Self {
            dim,
            length,
            components,
            bumps,
        }
    }

    pub fn sample(&self, grid: &Grid) -> SpaceTimeField {
        let space = grid.space();
        let ns = space.len();
        let nt = grid.n_time();
        let l = self.length;
        let images: Vec<[f64; 3]> = {
            let r = |axis: usize| if axis < self.dim { -1..=1 } else { 0..=0 };
            let mut v = Vec::new();
            for iz in r(2) {
                for iy in r(1) {
                    for ix in r(0) {
                        v.push([ix as f64 * l, iy as f64 * l, iz as f64 * l]);
                    }
                }
            }
            v
        };
        let mut values = vec![0.0; self.components * grid.len()];
        for b in &self.bumps {
            let spatial: Vec<f64> = (0..ns)
                .map(|s| {
                    let p = space.position(s);
                    images
                        .iter()
                        .map(|img| {
                            let r2: f64 = (0..self.dim)
                                .map(|a| (p[a] - b.center[a] + img[a]).powi(2))
                                .sum();
                            (-r2 / (2.0 * b.width * b.width)).exp()
                        })
                        .sum()
                })
                .collect();
            for (k, &t) in grid.times().iter().enumerate() {
                let lt = (t / b.t_center).ln();
                let profile = b.amplitude * (-lt * lt / (2.0 * b.t_spread * b.t_spread)).exp();
                let row = &mut values[(b.component * nt + k) * ns..(b.component * nt + k + 1) * ns];
                for (v, g) in row.iter_mut().zip(&spatial) {
                    *v += profile * g;
                }
            }
        }
        SpaceTimeField::from_values(grid, self.components, values).expect("sizes agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, TimeSpacing};
    use crate::spectral::divergence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_lattice_counts() {
        assert_eq!(half_lattice(1, 3).len(), 3);
        assert_eq!(half_lattice(2, 1).len(), 4);
        assert_eq!(half_lattice(3, 1).len(), 13);
    }

    #[test]
    fn solenoidal_series_is_divergence_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = SpaceGrid::new(3, 5.0, 8).unwrap();
        let u = random_solenoidal(&mut rng, space, 2);
        assert!(divergence(&u).unwrap().l2_norm() < 1e-12 * u.l2_norm());
    }

    #[test]
    fn heat_extension_matches_spectral_heat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = make_grid(2, 3.0, 16, 0.01, 0.5, 4, TimeSpacing::Geometric).unwrap();
        let series = TrigSeries::random(&mut rng, 2, 3.0, 1, 3);
        let ext = series.heat_extension(&g);
        let u0 = series.sample(g.space());
        for k in 0..4 {
            let h = crate::spectral::heat(&u0, g.times()[k]).unwrap();
            for (a, b) in h.values().iter().zip(ext.slice_values(0, k)) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bump_fields_are_seed_reproducible() {
        let ranges = BumpRanges {
            count: 3,
            width: (0.2, 0.5),
            t_center: (0.05, 0.5),
            t_spread: (0.3, 0.8),
            nonnegative: true,
        };
        let a = BumpField::random(&mut ChaCha8Rng::seed_from_u64(9), 2, 4.0, 1, &ranges);
        let b = BumpField::random(&mut ChaCha8Rng::seed_from_u64(9), 2, 4.0, 1, &ranges);
        assert_eq!(a, b);
        let g = make_grid(2, 4.0, 8, 0.01, 1.0, 6, TimeSpacing::Geometric).unwrap();
        assert!(a.sample(&g).values().iter().all(|&v| v >= 0.0));
    }
}
