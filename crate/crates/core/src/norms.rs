//! Critical space-time norms, each evaluated as a discrete supremum with the
//! region that attains it.
//!
//! Suprema over `(T, x, r)` run over a finite sample set: `T ∈ {t_min·2^m}`,
//! centers on a coarsened lattice (`centers_per_axis` per axis) and squared
//! radii in `{t_min·2^m}`. Local masses use the ladder's time cells (clipped to
//! the window) and lattice sums over periodic balls; balls narrower than two
//! grid spacings use the exact ball volume times the lattice average instead.
//! Vector fields enter through their pointwise Euclidean magnitude.
//!
//! In dimension `d` the parabolic dimension is `D = d + 2`; the normalizations
//! are the scale-invariant ones (`T^{-d/4}` for the Carleson mass, `r^{-(D/p − D/λ)}`
//! for Morrey masses, `T^{1/2 − D/(2q)}` for the upper-cylinder Morrey branch).

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::duhamel::heat_extension;
use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::field::{SpaceTimeField, SpatialField};
use crate::grid::{CylinderSpec, Grid, SpaceGrid, RADIUS_SLACK};

/// Sampling density of the discrete suprema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormConfig {
    /// Cylinder centers per axis (clamped to the lattice size).
    pub centers_per_axis: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self { centers_per_axis: 8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormSpace {
    #[serde(rename = "y2")]
    Y2,
    #[serde(rename = "z0")]
    Z0,
    #[serde(rename = "ykt")]
    Ykt,
    #[serde(rename = "yktq")]
    Yktq,
    #[serde(rename = "morrey")]
    Morrey,
    #[serde(rename = "l2a")]
    L2a,
    #[serde(rename = "l2winf")]
    L2wInf,
    #[serde(rename = "bmo-1")]
    BmoNeg1,
}

impl NormSpace {
    pub const ALL: [NormSpace; 8] = [
        NormSpace::Y2,
        NormSpace::Z0,
        NormSpace::Ykt,
        NormSpace::Yktq,
        NormSpace::Morrey,
        NormSpace::L2a,
        NormSpace::L2wInf,
        NormSpace::BmoNeg1,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            NormSpace::Y2 => "y2",
            NormSpace::Z0 => "z0",
            NormSpace::Ykt => "ykt",
            NormSpace::Yktq => "yktq",
            NormSpace::Morrey => "morrey",
            NormSpace::L2a => "l2a",
            NormSpace::L2wInf => "l2winf",
            NormSpace::BmoNeg1 => "bmo-1",
        }
    }
}

impl fmt::Display for NormSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NormSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormSpace::ALL
            .into_iter()
            .find(|n| n.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown norm space '{s}'")))
    }
}

/// The region (or slice, or level) attaining a discrete supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// The field vanishes, or the norm is not a supremum.
    None,
    Cylinder { region: CylinderSpec },
    /// A Morrey cylinder inside the upper half-cylinder `R_{T,x}`.
    Nested {
        outer: CylinderSpec,
        inner: CylinderSpec,
    },
    TimeSlice {
        index: usize,
        t: f64,
        space_index: usize,
    },
    Level { level: f64, measure: f64 },
    /// Witnesses of the summands of a sum norm.
    Sum { parts: Vec<Witness> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

/// How densely the supremum was sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub t_levels: usize,
    pub centers: usize,
    pub radii: usize,
    pub regions: usize,
}

impl Sampling {
    fn merge(self, other: Sampling) -> Sampling {
        Sampling {
            t_levels: self.t_levels.max(other.t_levels),
            centers: self.centers.max(other.centers),
            radii: self.radii.max(other.radii),
            regions: self.regions + other.regions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub space: NormSpace,
    pub value: f64,
    pub witness: Witness,
    pub params: NormParams,
    pub sampling: Sampling,
}

/// Unit-ball volume in dimension `d`.
fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        _ => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
    }
}

/// Rows of a periodic lattice ball: `(row offsets, x half-width or None for a full row)`.
#[derive(Clone, Debug)]
struct Stencil {
    rows: Vec<([i64; 2], Option<i64>)>,
    count: usize,
}

fn stencil(space: &SpaceGrid, r: f64) -> Stencil {
    let n = space.n as i64;
    let h2 = space.spacing() * space.spacing();
    let bound = r * r * (1.0 + RADIUS_SLACK);
    let inside = |m: i64| (m as f64) * h2 <= bound;
    let axis_offsets = |active: bool| -> Vec<i64> {
        if active {
            (-n / 2..n / 2).collect()
        } else {
            vec![0]
        }
    };
    let mut rows = Vec::new();
    let mut count = 0usize;
    for dz in axis_offsets(space.dim > 2) {
        for dy in axis_offsets(space.dim > 1) {
            let rest = dy * dy + dz * dz;
            if !inside(rest) {
                continue;
            }
            let mut m = ((bound / h2 - rest as f64).max(0.0)).sqrt() as i64;
            while inside(rest + (m + 1) * (m + 1)) {
                m += 1;
            }
            while m > 0 && !inside(rest + m * m) {
                m -= 1;
            }
            if m >= n / 2 {
                rows.push(([dy, dz], None));
                count += n as usize;
            } else {
                rows.push(([dy, dz], Some(m)));
                count += (2 * m + 1) as usize;
            }
        }
    }
    Stencil { rows, count }
}

/// `|u|^p` on a contiguous range of ladder samples, with per-row prefix sums.
struct Density {
    space: SpaceGrid,
    k0: usize,
    n_times: usize,
    rows: usize,
    prefix: Vec<f64>,
}

impl Density {
    fn new(space: SpaceGrid, k0: usize, slices: &[Vec<f64>]) -> Self {
        let n = space.n;
        let rows = space.len() / n;
        let mut prefix = Vec::with_capacity(slices.len() * rows * (n + 1));
        for slice in slices {
            for row in slice.chunks(n) {
                let mut acc = 0.0;
                prefix.push(0.0);
                for v in row {
                    acc += v;
                    prefix.push(acc);
                }
            }
        }
        Self {
            space,
            k0,
            n_times: slices.len(),
            rows,
            prefix,
        }
    }

    fn row_segment(&self, local: usize, row: usize, center: i64, half: Option<i64>) -> f64 {
        let n = self.space.n as i64;
        let base = (local * self.rows + row) * (self.space.n + 1);
        let p = &self.prefix[base..base + self.space.n + 1];
        match half {
            None => p[self.space.n],
            Some(m) => {
                let lo = center - m;
                let hi = center + m;
                if lo >= 0 && hi < n {
                    p[(hi + 1) as usize] - p[lo as usize]
                } else if lo < 0 {
                    (p[(hi + 1) as usize] - p[0]) + (p[n as usize] - p[(lo + n) as usize])
                } else {
                    (p[n as usize] - p[lo as usize]) + (p[(hi - n + 1) as usize] - p[0])
                }
            }
        }
    }

    /// Ball masses `∫_{B(c,r)} density(t_k)` for ladder indices `ks`.
    fn ball_series(&self, center: [usize; 3], r: f64, st: &Stencil, ks: std::ops::Range<usize>) -> Vec<f64> {
        let n = self.space.n as i64;
        let rows: Vec<(usize, Option<i64>)> = st
            .rows
            .iter()
            .map(|&([dy, dz], half)| {
                let y = (center[1] as i64 + dy).rem_euclid(n);
                let z = (center[2] as i64 + dz).rem_euclid(n);
                let row = if self.space.dim == 3 {
                    (y + n * z) as usize
                } else if self.space.dim == 2 {
                    y as usize
                } else {
                    0
                };
                (row, half)
            })
            .collect();
        let h = self.space.spacing();
        let scale = if r < 2.0 * h {
            ball_volume(self.space.dim, r) / st.count as f64
        } else {
            self.space.cell_volume()
        };
        ks.map(|k| {
            let local = k - self.k0;
            debug_assert!(local < self.n_times);
            let raw: f64 = rows
                .iter()
                .map(|&(row, half)| self.row_segment(local, row, center[0] as i64, half))
                .sum();
            raw.max(0.0) * scale
        })
        .collect()
    }
}

/// `Σ_k |cell_k ∩ (lo, hi) ∩ (0, ∞)| · series[k − k_start]`.
fn window_mass(edges: &[f64], series: &[f64], k_start: usize, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(0.0);
    let mut total = 0.0;
    for (i, s) in series.iter().enumerate() {
        let k = k_start + i;
        let a = edges[k].max(lo);
        let b = edges[k + 1].min(hi);
        if b > a {
            total += (b - a) * s;
        }
    }
    total
}

/// Ladder indices whose cells meet `(lo, hi)`.
fn cells_meeting(edges: &[f64], lo: f64, hi: f64) -> std::ops::Range<usize> {
    let n = edges.len() - 1;
    let start = (0..n).find(|&k| edges[k + 1] > lo.max(0.0)).unwrap_or(n);
    let end = (0..n).rev().find(|&k| edges[k] < hi).map_or(start, |k| k + 1);
    start..end.max(start)
}

/// Coarse lattice of cylinder centers.
fn centers(space: &SpaceGrid, config: &NormConfig) -> Vec<[usize; 3]> {
    let per = config.centers_per_axis.clamp(1, space.n);
    let step = space.n / per;
    let axis = |a: usize| -> Vec<usize> {
        if a < space.dim {
            (0..per).map(|i| i * step).collect()
        } else {
            vec![0]
        }
    };
    let mut out = Vec::new();
    for z in axis(2) {
        for y in axis(1) {
            for x in axis(0) {
                out.push([x, y, z]);
            }
        }
    }
    out
}

fn center_position(space: &SpaceGrid, c: [usize; 3]) -> [f64; 3] {
    space.position(space.flat_index(c))
}

fn center_index(space: &SpaceGrid, pos: &[f64; 3]) -> [usize; 3] {
    space.multi_index(space.nearest_index(pos))
}

/// `T ∈ {t_min·2^m}` from `t_min` to the first value `≥ t_max`.
fn t_levels(grid: &Grid) -> Vec<f64> {
    let mut out = Vec::new();
    let mut m = 0;
    loop {
        let t = grid.t_min() * 2f64.powi(m);
        out.push(t);
        if t >= grid.t_max() {
            break;
        }
        m += 1;
    }
    out
}

/// Squared radii `{t_min·2^m}` within `[lo², hi²]`.
fn radii_sq(grid: &Grid, lo: f64, hi_sq: f64) -> Vec<f64> {
    let mut m = 0i32;
    while grid.t_min() * 2f64.powi(m) > lo * lo {
        m -= 1;
    }
    while grid.t_min() * 2f64.powi(m) < lo * lo {
        m += 1;
    }
    let mut out = Vec::new();
    loop {
        let r2 = grid.t_min() * 2f64.powi(m);
        if r2 > hi_sq {
            break;
        }
        out.push(r2);
        m += 1;
    }
    out
}

fn radius_cap_sq(grid: &Grid) -> f64 {
    let space = grid.space();
    let half_diag = 0.5 * space.length * (space.dim as f64).sqrt();
    4.0 * grid.t_max().max(half_diag * half_diag)
}

/// Per-slice `|u|^p` (magnitude over components).
fn density_slices(u: &SpaceTimeField, p: f64, keep: impl Fn(usize, usize) -> bool) -> Vec<Vec<f64>> {
    let grid = u.grid();
    let ns = grid.space().len();
    let mag = u.magnitude();
    (0..grid.n_time())
        .map(|k| {
            mag[k * ns..(k + 1) * ns]
                .iter()
                .enumerate()
                .map(|(s, &m)| {
                    if !keep(k, s) {
                        0.0
                    } else if p == 2.0 {
                        m * m
                    } else {
                        m.powf(p)
                    }
                })
                .collect()
        })
        .collect()
}

fn zero_report(space: NormSpace, params: NormParams) -> NormReport {
    NormReport {
        space,
        value: 0.0,
        witness: Witness::None,
        params,
        sampling: Sampling::default(),
    }
}

struct Best {
    value: f64,
    witness: Witness,
}

impl Best {
    fn new() -> Self {
        Self {
            value: 0.0,
            witness: Witness::None,
        }
    }

    fn offer(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        if value > self.value {
            self.value = value;
            self.witness = witness();
        }
    }
}

/// Carleson mass `T^{-d/4} ‖u‖_{L²(Q_{T,x})}` over one region.
fn y2_value(grid: &Grid, density: &Density, t: f64, center: [usize; 3]) -> f64 {
    let space = grid.space();
    let edges = grid.cell_edges();
    let r = t.sqrt();
    let st = stencil(&space, r);
    let ks = cells_meeting(edges, 0.0, t);
    let series = density.ball_series(center, r, &st, ks.clone());
    t.powf(-(space.dim as f64) / 4.0) * window_mass(edges, &series, ks.start, 0.0, t).sqrt()
}

/// `sup_{T,x} T^{-d/4} ‖u‖_{L²(Q_{T,x})}`.
pub fn norm_y2(u: &SpaceTimeField, config: &NormConfig) -> Result<NormReport> {
    let grid = u.grid();
    let space = grid.space();
    if u.max_abs() == 0.0 {
        return Ok(zero_report(NormSpace::Y2, NormParams::default()));
    }
    let density = Density::new(space, 0, &density_slices(u, 2.0, |_, _| true));
    let edges = grid.cell_edges();
    let levels = t_levels(grid);
    let cs = centers(&space, config);
    let mut best = Best::new();
    for &t in &levels {
        let r = t.sqrt();
        let st = stencil(&space, r);
        let ks = cells_meeting(edges, 0.0, t);
        let norm = t.powf(-(space.dim as f64) / 4.0);
        for &c in &cs {
            let series = density.ball_series(c, r, &st, ks.clone());
            let value = norm * window_mass(edges, &series, ks.start, 0.0, t).sqrt();
            best.offer(value, || Witness::Cylinder {
                region: CylinderSpec::Q {
                    t,
                    center: center_position(&space, c),
                },
            });
        }
    }
    Ok(NormReport {
        space: NormSpace::Y2,
        value: best.value,
        witness: best.witness,
        params: NormParams::default(),
        sampling: Sampling {
            t_levels: levels.len(),
            centers: cs.len(),
            radii: levels.len(),
            regions: levels.len() * cs.len(),
        },
    })
}

/// `sup_k √t_k ‖u(t_k)‖_∞`.
pub fn norm_z0(u: &SpaceTimeField) -> NormReport {
    let grid = u.grid();
    let ns = grid.space().len();
    let mag = u.magnitude();
    let mut best = Best::new();
    for (k, &t) in grid.times().iter().enumerate() {
        let (s, m) = mag[k * ns..(k + 1) * ns]
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (s, &m)| if m > acc.1 { (s, m) } else { acc });
        best.offer(t.sqrt() * m, || Witness::TimeSlice {
            index: k,
            t,
            space_index: s,
        });
    }
    NormReport {
        space: NormSpace::Z0,
        value: best.value,
        witness: best.witness,
        params: NormParams::default(),
        sampling: Sampling {
            t_levels: grid.n_time(),
            centers: ns,
            radii: 0,
            regions: grid.n_time(),
        },
    }
}

/// `‖u‖_{𝒴₂} + sup √t ‖u(t)‖_∞`.
pub fn norm_ykt(u: &SpaceTimeField, config: &NormConfig) -> Result<NormReport> {
    let y2 = norm_y2(u, config)?;
    let z0 = norm_z0(u);
    Ok(NormReport {
        space: NormSpace::Ykt,
        value: y2.value + z0.value,
        witness: Witness::Sum {
            parts: vec![y2.witness, z0.witness],
        },
        params: NormParams::default(),
        sampling: y2.sampling.merge(z0.sampling),
    })
}

fn check_morrey(p: f64, lambda: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("Morrey exponent p must be >= 1 (got {p})")));
    }
    if !(lambda >= p && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "Morrey exponent lambda must satisfy lambda >= p (got p={p}, lambda={lambda})"
        )));
    }
    Ok(())
}

/// Normalized local `L^p` mass over one centered cylinder.
fn morrey_value(
    grid: &Grid,
    density: &Density,
    p: f64,
    exponent: f64,
    center: [usize; 3],
    radius: f64,
    t_center: f64,
    clip: (f64, f64),
) -> f64 {
    let edges = grid.cell_edges();
    let half = radius * radius;
    let lo = (t_center - half).max(clip.0);
    let hi = (t_center + half).min(clip.1);
    let st = stencil(&grid.space(), radius);
    let ks = cells_meeting(edges, lo, hi);
    let series = density.ball_series(center, radius, &st, ks.clone());
    let mass = window_mass(edges, &series, ks.start, lo, hi);
    radius.powf(-exponent) * mass.powf(1.0 / p)
}

/// Sweep of the Morrey supremum for one density; `clip` bounds the windows and
/// `center_ok` prunes centers.
#[allow(clippy::too_many_arguments)]
fn morrey_sweep(
    grid: &Grid,
    density: &Density,
    p: f64,
    exponent: f64,
    radii_sq: &[f64],
    cs: &[[usize; 3]],
    t_centers: &[f64],
    clip: (f64, f64),
    center_ok: impl Fn([usize; 3], f64) -> bool,
    best: &mut Best,
    wrap: impl Fn(CylinderSpec) -> Witness,
) -> usize {
    let space = grid.space();
    let edges = grid.cell_edges();
    let all = density.k0..density.k0 + density.n_times;
    let mut regions = 0;
    for &r2 in radii_sq {
        let radius = r2.sqrt();
        let half = radius * radius;
        let st = stencil(&space, radius);
        let norm = radius.powf(-exponent);
        for &c in cs {
            if !center_ok(c, radius) {
                continue;
            }
            let series = density.ball_series(c, radius, &st, all.clone());
            for &tc in t_centers {
                let lo = (tc - half).max(clip.0);
                let hi = (tc + half).min(clip.1);
                let ks = cells_meeting(edges, lo, hi);
                if ks.is_empty() {
                    continue;
                }
                let local = &series[ks.start - all.start..ks.end - all.start];
                let mass = window_mass(edges, local, ks.start, lo, hi);
                regions += 1;
                best.offer(norm * mass.powf(1.0 / p), || {
                    wrap(CylinderSpec::Centered {
                        t_center: tc,
                        radius,
                        center: center_position(&space, c),
                    })
                });
            }
        }
    }
    regions
}

/// `sup r^{-(D/p − D/λ)} (∬_{(t−r², t+r²)×B(x,r), s>0} |u|^p)^{1/p}`.
pub fn norm_morrey(u: &SpaceTimeField, p: f64, lambda: f64, config: &NormConfig) -> Result<NormReport> {
    check_morrey(p, lambda)?;
    let params = NormParams {
        p: Some(p),
        lambda: Some(lambda),
        q: None,
    };
    if u.max_abs() == 0.0 {
        return Ok(zero_report(NormSpace::Morrey, params));
    }
    let grid = u.grid();
    let space = grid.space();
    let dd = space.parabolic_dim();
    let exponent = dd / p - dd / lambda;
    let density = Density::new(space, 0, &density_slices(u, p, |_, _| true));
    let radii = radii_sq(grid, 0.5 * space.spacing(), radius_cap_sq(grid));
    let cs = centers(&space, config);
    let mut best = Best::new();
    let regions = morrey_sweep(
        grid,
        &density,
        p,
        exponent,
        &radii,
        &cs,
        grid.times(),
        (0.0, f64::INFINITY),
        |_, _| true,
        &mut best,
        |region| Witness::Cylinder { region },
    );
    Ok(NormReport {
        space: NormSpace::Morrey,
        value: best.value,
        witness: best.witness,
        params,
        sampling: Sampling {
            t_levels: grid.n_time(),
            centers: cs.len(),
            radii: radii.len(),
            regions,
        },
    })
}

/// `|u|^p 𝟙_{B(x,√T)}` on the cells meeting `(T/2, T)`.
fn restricted_density(u: &SpaceTimeField, mag_p: &[Vec<f64>], t: f64, x: [usize; 3]) -> Density {
    let grid = u.grid();
    let space = grid.space();
    let ks = cells_meeting(grid.cell_edges(), 0.5 * t, t);
    let st = stencil(&space, t.sqrt());
    let n = space.n as i64;
    let mut inside = vec![false; space.len()];
    for &([dy, dz], half) in &st.rows {
        let y = (x[1] as i64 + dy).rem_euclid(n);
        let z = (x[2] as i64 + dz).rem_euclid(n);
        let (lo, hi) = match half {
            None => (0, n - 1),
            Some(m) => (x[0] as i64 - m, x[0] as i64 + m),
        };
        for xi in lo..=hi {
            let xx = xi.rem_euclid(n);
            let idx = match space.dim {
                1 => xx,
                2 => xx + n * y,
                _ => xx + n * (y + n * z),
            };
            inside[idx as usize] = true;
        }
    }
    let slices: Vec<Vec<f64>> = ks
        .clone()
        .map(|k| {
            mag_p[k]
                .iter()
                .zip(&inside)
                .map(|(v, &keep)| if keep { *v } else { 0.0 })
                .collect()
        })
        .collect();
    Density::new(space, ks.start, &slices)
}

/// Second branch of the modified Koch–Tataru norm:
/// `sup_{T,x} T^{1/2 − D/(2q)} ‖𝟙_{R_{T,x}} u‖_{𝓜̇₂^{2q/D, q}}`.
pub fn yktq_morrey_branch(u: &SpaceTimeField, q: f64, config: &NormConfig) -> Result<NormReport> {
    let grid = u.grid();
    let space = grid.space();
    let dd = space.parabolic_dim();
    if !(q > dd && q.is_finite()) {
        return Err(Error::invalid(format!("q must satisfy {dd} < q < inf (got {q})")));
    }
    let p = 2.0 * q / dd;
    let params = NormParams {
        p: Some(p),
        lambda: Some(q),
        q: Some(q),
    };
    if u.max_abs() == 0.0 {
        return Ok(zero_report(NormSpace::Yktq, params));
    }
    let exponent = dd / p - dd / q;
    let t_exp = 0.5 - dd / (2.0 * q);
    let mag_p = density_slices(u, p, |_, _| true);
    let levels = t_levels(grid);
    let cs = centers(&space, config);
    let mut best = Best::new();
    let mut regions = 0;
    let mut radii_count = 0;
    for &t in &levels {
        let outer_r = t.sqrt();
        let radii = radii_sq(grid, 0.5 * space.spacing(), 2.0 * t);
        radii_count = radii_count.max(radii.len());
        let scale = t.powf(t_exp);
        for &x in &cs {
            let density = restricted_density(u, &mag_p, t, x);
            if density.n_times == 0 {
                continue;
            }
            let t_centers: Vec<f64> =
                (density.k0..density.k0 + density.n_times).map(|k| grid.times()[k]).collect();
            let xpos = center_position(&space, x);
            let outer = CylinderSpec::R { t, center: xpos };
            let mut local = Best::new();
            regions += morrey_sweep(
                grid,
                &density,
                p,
                exponent,
                &radii,
                &cs,
                &t_centers,
                (0.5 * t, t),
                |c, r| {
                    let d2 = space.periodic_distance_sq(&center_position(&space, c), &xpos);
                    d2 <= (outer_r + r).powi(2) * (1.0 + RADIUS_SLACK)
                },
                &mut local,
                |inner| Witness::Nested { outer, inner },
            );
            best.offer(scale * local.value, || local.witness.clone());
        }
    }
    Ok(NormReport {
        space: NormSpace::Yktq,
        value: best.value,
        witness: best.witness,
        params,
        sampling: Sampling {
            t_levels: levels.len(),
            centers: cs.len(),
            radii: radii_count,
            regions,
        },
    })
}

/// `max(‖u‖_{𝒴₂}, sup_{T,x} T^{1/2 − D/(2q)} ‖𝟙_{R_{T,x}} u‖_{𝓜̇₂^{2q/D,q}})`; the
/// witness variant tells which branch attained the maximum.
pub fn norm_yktq(u: &SpaceTimeField, q: f64, config: &NormConfig) -> Result<NormReport> {
    let branch = yktq_morrey_branch(u, q, config)?;
    let y2 = norm_y2(u, config)?;
    let (value, witness) = if branch.value > y2.value {
        (branch.value, branch.witness)
    } else {
        (y2.value, y2.witness)
    };
    Ok(NormReport {
        space: NormSpace::Yktq,
        value,
        witness,
        params: branch.params,
        sampling: branch.sampling.merge(y2.sampling),
    })
}

/// `(Σ_k w_k (Σ_ξ |c_ξ(t_k)|)²)^{1/2}` with Fourier-series coefficients
/// `c_ξ = DFT/N` (Euclidean over components per frequency).
pub fn norm_l2a(u: &SpaceTimeField) -> NormReport {
    let grid = u.grid();
    let space = grid.space();
    let plan = FftNd::for_space(&space);
    let n = space.len() as f64;
    let weights = grid.time_weights();
    let mut total = 0.0;
    for (k, w) in weights.iter().enumerate() {
        let spectra: Vec<Vec<Complex64>> = (0..u.components())
            .map(|c| plan.forward_real(u.slice_values(c, k)))
            .collect();
        let mass: f64 = (0..space.len())
            .map(|i| spectra.iter().map(|s| s[i].norm_sqr()).sum::<f64>().sqrt() / n)
            .sum();
        total += w * mass * mass;
    }
    NormReport {
        space: NormSpace::L2a,
        value: total.sqrt(),
        witness: Witness::None,
        params: NormParams::default(),
        sampling: Sampling {
            t_levels: grid.n_time(),
            ..Sampling::default()
        },
    }
}

/// Weak-`L²` norm in time of `‖u(t)‖_∞`: `sup_λ λ·|{t : ‖u(t)‖_∞ ≥ λ}|^{1/2}`,
/// with `λ` running over the attained slice maxima.
pub fn norm_l2winf(u: &SpaceTimeField) -> NormReport {
    let grid = u.grid();
    let ns = grid.space().len();
    let mag = u.magnitude();
    let maxima: Vec<f64> = (0..grid.n_time())
        .map(|k| mag[k * ns..(k + 1) * ns].iter().fold(0.0f64, |m, &v| m.max(v)))
        .collect();
    let weights = grid.time_weights();
    let mut best = Best::new();
    for &level in &maxima {
        if level <= 0.0 {
            continue;
        }
        let measure: f64 = maxima
            .iter()
            .zip(&weights)
            .filter(|(m, _)| **m >= level)
            .map(|(_, w)| w)
            .sum();
        best.offer(level * measure.sqrt(), || Witness::Level { level, measure });
    }
    NormReport {
        space: NormSpace::L2wInf,
        value: best.value,
        witness: best.witness,
        params: NormParams::default(),
        sampling: Sampling {
            t_levels: grid.n_time(),
            ..Sampling::default()
        },
    }
}

/// `‖e^{tΔ}u₀‖_{𝒴₂}` on the ladder of `grid`.
pub fn norm_bmo_neg1(u0: &SpatialField, grid: &Grid, config: &NormConfig) -> Result<NormReport> {
    let ext = heat_extension(u0, grid)?;
    let mut report = norm_y2(&ext, config)?;
    report.space = NormSpace::BmoNeg1;
    Ok(report)
}

/// Evaluates a norm by its tag.
pub fn norm_by_space(
    u: &SpaceTimeField,
    space: NormSpace,
    params: &NormParams,
    config: &NormConfig,
) -> Result<NormReport> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::invalid(format!("norm '{space}' needs parameter {name}")))
    };
    match space {
        NormSpace::Y2 => norm_y2(u, config),
        NormSpace::Z0 => Ok(norm_z0(u)),
        NormSpace::Ykt => norm_ykt(u, config),
        NormSpace::Yktq => norm_yktq(u, need(params.q, "q")?, config),
        NormSpace::Morrey => {
            let p = need(params.p, "p")?;
            let dd = u.grid().space().parabolic_dim();
            norm_morrey(u, p, params.lambda.unwrap_or(dd), config)
        }
        NormSpace::L2a => Ok(norm_l2a(u)),
        NormSpace::L2wInf => Ok(norm_l2winf(u)),
        NormSpace::BmoNeg1 => {
            if u.grid().n_time() == 0 {
                return Err(Error::invalid("empty ladder"));
            }
            // The first slice is taken as the initial datum.
            let u0 = u.slice(0);
            norm_bmo_neg1(&u0, u.grid(), config)
        }
    }
}

/// Recomputes the functional of `report` at its witness. For `bmo-1`, pass the
/// heat extension of the datum.
pub fn evaluate_witness(u: &SpaceTimeField, report: &NormReport) -> Result<f64> {
    witness_value(u, report.space, &report.params, &report.witness)
}

fn witness_value(u: &SpaceTimeField, space: NormSpace, params: &NormParams, witness: &Witness) -> Result<f64> {
    let grid = u.grid();
    let sp = grid.space();
    let dd = sp.parabolic_dim();
    match witness {
        Witness::None => match space {
            NormSpace::L2a => Ok(norm_l2a(u).value),
            _ => Ok(0.0),
        },
        Witness::Sum { parts } => {
            let spaces = [NormSpace::Y2, NormSpace::Z0];
            parts
                .iter()
                .zip(spaces)
                .map(|(w, s)| witness_value(u, s, params, w))
                .sum()
        }
        Witness::Cylinder {
            region: CylinderSpec::Q { t, center },
        } => {
            let density = Density::new(sp, 0, &density_slices(u, 2.0, |_, _| true));
            Ok(y2_value(grid, &density, *t, center_index(&sp, center)))
        }
        Witness::Cylinder {
            region:
                CylinderSpec::Centered {
                    t_center,
                    radius,
                    center,
                },
        } => {
            let p = params.p.ok_or_else(|| Error::invalid("Morrey witness without p"))?;
            let lambda = params.lambda.unwrap_or(dd);
            let density = Density::new(sp, 0, &density_slices(u, p, |_, _| true));
            Ok(morrey_value(
                grid,
                &density,
                p,
                dd / p - dd / lambda,
                center_index(&sp, center),
                *radius,
                *t_center,
                (0.0, f64::INFINITY),
            ))
        }
        Witness::Nested {
            outer: CylinderSpec::R { t, center: x },
            inner:
                CylinderSpec::Centered {
                    t_center,
                    radius,
                    center,
                },
        } => {
            let q = params.q.ok_or_else(|| Error::invalid("nested witness without q"))?;
            let p = 2.0 * q / dd;
            let mag_p = density_slices(u, p, |_, _| true);
            let density = restricted_density(u, &mag_p, *t, center_index(&sp, x));
            let inner = morrey_value(
                grid,
                &density,
                p,
                dd / p - dd / q,
                center_index(&sp, center),
                *radius,
                *t_center,
                (0.5 * t, *t),
            );
            Ok(t.powf(0.5 - dd / (2.0 * q)) * inner)
        }
        Witness::TimeSlice { index, .. } => {
            let ns = sp.len();
            let mag = u.magnitude();
            let m = mag[index * ns..(index + 1) * ns].iter().fold(0.0f64, |a, &v| a.max(v));
            Ok(grid.times()[*index].sqrt() * m)
        }
        Witness::Level { level, .. } => {
            let ns = sp.len();
            let mag = u.magnitude();
            let weights = grid.time_weights();
            let measure: f64 = (0..grid.n_time())
                .filter(|&k| mag[k * ns..(k + 1) * ns].iter().fold(0.0f64, |a, &v| a.max(v)) >= *level)
                .map(|k| weights[k])
                .sum();
            Ok(level * measure.sqrt())
        }
        other => Err(Error::invalid(format!("witness {other:?} does not match norm '{space}'"))),
    }
}
