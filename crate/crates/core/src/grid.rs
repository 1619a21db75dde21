//! Discretization of `(0, ∞) × ℝ^d` as a finite time ladder over a periodic box.
//!
//! Spatial samples sit on the lattice `x_i = i·L/n` of `[0, L)^d`, flattened with
//! the x axis fastest (`index = x + n·(y + n·z)`). Every distance `|x − y|` is the
//! periodic (minimum image) distance. Each time sample `t_k` owns a cell of the
//! time axis; the cell widths are the quadrature weights of every space-time
//! integral in the crate, so masses are additive over disjoint sample sets.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;

/// Relative slack applied when comparing a squared distance with a squared radius.
pub const RADIUS_SLACK: f64 = 1e-12;

/// Relative tolerance used when two grids are compared for compatibility.
const GRID_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub dim: usize,
    pub length: f64,
    pub n: usize,
}

impl SpaceGrid {
    pub fn new(dim: usize, length: f64, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("spatial dimension must be 1, 2 or 3 (got {dim})")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!("box length must be positive (got {length})")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "points per axis must be a power of two >= 2 (got {n})"
            )));
        }
        Ok(Self { dim, length, n })
    }

    /// Number of spatial samples, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Parabolic dimension `dim + 2` (5 in three space dimensions).
    pub fn parabolic_dim(&self) -> f64 {
        self.dim as f64 + 2.0
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        let mut m = [0usize; 3];
        let mut rest = idx;
        for slot in m.iter_mut().take(self.dim) {
            *slot = rest % n;
            rest /= n;
        }
        m
    }

    pub fn flat_index(&self, m: [usize; 3]) -> usize {
        let n = self.n;
        let mut idx = 0;
        for axis in (0..self.dim).rev() {
            idx = idx * n + m[axis];
        }
        idx
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let m = self.multi_index(idx);
        let mut p = [0.0; 3];
        for axis in 0..self.dim {
            p[axis] = m[axis] as f64 * h;
        }
        p
    }

    /// Lattice index nearest to `pos`, wrapping periodically.
    pub fn nearest_index(&self, pos: &[f64; 3]) -> usize {
        let h = self.spacing();
        let n = self.n as i64;
        let mut m = [0usize; 3];
        for axis in 0..self.dim {
            let i = (pos[axis] / h).round() as i64;
            m[axis] = i.rem_euclid(n) as usize;
        }
        self.flat_index(m)
    }

    /// Signed integer frequency of FFT slot `i` (Nyquist maps to `-n/2`).
    pub fn signed_mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI / self.length * self.signed_mode(i) as f64
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            xi[axis] = self.wavenumber(m[axis]);
        }
        xi
    }

    /// Whether FFT slot `idx` carries a Nyquist frequency along some axis.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim).any(|a| m[a] == self.n / 2)
    }

    /// `|ξ|²` for every FFT slot.
    pub fn wavevector_norms_sq(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let xi = self.wavevector(idx);
                xi.iter().map(|v| v * v).sum()
            })
            .collect()
    }

    /// Minimum-image offset along one axis, in `[-L/2, L/2)`.
    pub fn periodic_offset(&self, delta: f64) -> f64 {
        let l = self.length;
        let mut d = delta.rem_euclid(l);
        if d >= 0.5 * l {
            d -= l;
        }
        d
    }

    pub fn periodic_distance_sq(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        (0..self.dim)
            .map(|axis| {
                let d = self.periodic_offset(a[axis] - b[axis]);
                d * d
            })
            .sum()
    }

    pub fn periodic_distance(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        self.periodic_distance_sq(a, b).sqrt()
    }

    /// Index reached from `idx` by a lattice translation.
    pub fn shift_index(&self, idx: usize, shift: [isize; 3]) -> usize {
        let n = self.n as isize;
        let mut m = self.multi_index(idx);
        for axis in 0..self.dim {
            m[axis] = (m[axis] as isize + shift[axis]).rem_euclid(n) as usize;
        }
        self.flat_index(m)
    }

    /// The same lattice on a box shrunk by `lambda`.
    pub fn dilated(&self, lambda: f64) -> Self {
        Self {
            length: self.length / lambda,
            ..*self
        }
    }

    pub fn compatible(&self, other: &SpaceGrid) -> bool {
        self.dim == other.dim && self.n == other.n && close(self.length, other.length)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeSpacing {
    Uniform,
    Geometric,
    /// Explicit ladder, e.g. clustered toward a blow-up time.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    space: SpaceGrid,
    spacing: TimeSpacing,
    times: Vec<f64>,
    edges: Vec<f64>,
}

/// Builds a validated grid with `n_time` samples from `t_min` to `t_max`.
pub fn make_grid(
    dim: usize,
    length: f64,
    n_space: usize,
    t_min: f64,
    t_max: f64,
    n_time: usize,
    spacing: TimeSpacing,
) -> Result<Grid> {
    Grid::new(SpaceGrid::new(dim, length, n_space)?, t_min, t_max, n_time, spacing)
}

impl Grid {
    pub fn new(
        space: SpaceGrid,
        t_min: f64,
        t_max: f64,
        n_time: usize,
        spacing: TimeSpacing,
    ) -> Result<Self> {
        if !(t_min.is_finite() && t_min > 0.0) {
            return Err(Error::invalid(format!("t_min must be positive (got {t_min})")));
        }
        if !(t_max.is_finite() && t_max > t_min) {
            return Err(Error::invalid(format!(
                "t_max must exceed t_min (got t_min={t_min}, t_max={t_max})"
            )));
        }
        if n_time < 2 {
            return Err(Error::invalid("a time ladder needs at least two samples"));
        }
        let last = (n_time - 1) as f64;
        let times: Vec<f64> = match spacing {
            TimeSpacing::Uniform => {
                let dt = (t_max - t_min) / last;
                (0..n_time)
                    .map(|k| if k == n_time - 1 { t_max } else { t_min + k as f64 * dt })
                    .collect()
            }
            TimeSpacing::Geometric => {
                let ratio = (t_max / t_min).powf(1.0 / last);
                (0..n_time)
                    .map(|k| if k == n_time - 1 { t_max } else { t_min * ratio.powi(k as i32) })
                    .collect()
            }
            TimeSpacing::Custom => {
                return Err(Error::invalid("custom ladders are built with Grid::with_times"))
            }
        };
        Ok(Self::assemble(space, spacing, times))
    }

    /// Grid over an explicit, strictly increasing ladder of positive times.
    pub fn with_times(space: SpaceGrid, times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid("a time ladder needs at least two samples"));
        }
        if !(times[0].is_finite() && times[0] > 0.0) {
            return Err(Error::invalid("time samples must be positive"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid("time samples must be strictly increasing"));
        }
        Ok(Self::assemble(space, TimeSpacing::Custom, times))
    }

    /// Grid over validated `times` that keeps the `spacing` label.
    pub(crate) fn labeled(space: SpaceGrid, spacing: TimeSpacing, times: Vec<f64>) -> Result<Self> {
        let checked = Self::with_times(space, times)?;
        Ok(Self::assemble(space, spacing, checked.times))
    }

    fn assemble(space: SpaceGrid, spacing: TimeSpacing, times: Vec<f64>) -> Self {
        let n = times.len();
        let geometric = spacing == TimeSpacing::Geometric;
        let mid = |a: f64, b: f64| if geometric { (a * b).sqrt() } else { 0.5 * (a + b) };
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(0.0);
        for k in 1..n {
            edges.push(mid(times[k - 1], times[k]));
        }
        let first = if geometric {
            times[0] * times[0] / edges[1]
        } else {
            (times[0] - (edges[1] - times[0])).max(0.0)
        };
        edges[0] = first;
        let last = times[n - 1];
        let upper = if geometric {
            last * last / edges[n - 1]
        } else {
            last + (last - edges[n - 1])
        };
        edges.push(upper);
        Self {
            space,
            spacing,
            times,
            edges,
        }
    }

    pub fn space(&self) -> SpaceGrid {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn spacing(&self) -> TimeSpacing {
        self.spacing
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_time(&self) -> usize {
        self.times.len()
    }

    pub fn t_min(&self) -> f64 {
        self.times[0]
    }

    pub fn t_max(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Boundaries of the time cells; cell `k` is `[edges[k], edges[k+1])`.
    pub fn cell_edges(&self) -> &[f64] {
        &self.edges
    }

    /// Width of the time cell owned by sample `k`.
    pub fn time_weight(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn time_weights(&self) -> Vec<f64> {
        (0..self.n_time()).map(|k| self.time_weight(k)).collect()
    }

    /// Common ratio `t_{k+1}/t_k` of a geometric ladder.
    pub fn ratio(&self) -> Option<f64> {
        (self.spacing == TimeSpacing::Geometric).then(|| self.times[1] / self.times[0])
    }

    /// Total number of space-time samples.
    pub fn len(&self) -> usize {
        self.n_time() * self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the ladder sample equal to `t` (relative tolerance 1e-9).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(s.abs()))
    }

    /// Parabolic dilation `(t, x) ↦ (t/λ², x/λ)` of the whole grid.
    pub fn dilated(&self, lambda: f64) -> Self {
        let s = lambda * lambda;
        let times = self.times.iter().map(|t| t / s).collect();
        Self::assemble(self.space.dilated(lambda), self.spacing, times)
    }

    /// Whether two grids describe the same samples (up to rounding).
    pub fn compatible(&self, other: &Grid) -> bool {
        self.space.compatible(&other.space)
            && self.times.len() == other.times.len()
            && self.times.iter().zip(&other.times).all(|(a, b)| close(*a, *b))
    }

    pub(crate) fn ensure_compatible(&self, other: &Grid, what: &str) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: fields live on different grids")))
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= GRID_TOLERANCE * a.abs().max(b.abs())
}

/// Whether a squared distance lies inside a closed ball of the given radius.
pub fn within_radius(dist_sq: f64, radius: f64) -> bool {
    dist_sq <= radius * radius * (1.0 + RADIUS_SLACK)
}

/// A parabolic region of space-time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CylinderSpec {
    /// `{0 < t < T, |x − y| ≤ √T}`
    Q { t: f64, center: [f64; 3] },
    /// `{T/2 < t < T, |x − y| ≤ √T}`
    R { t: f64, center: [f64; 3] },
    /// `{T/4 < t < T, |x − y| ≤ √(10T)}`
    S { t: f64, center: [f64; 3] },
    /// `{t_c − r² < t < t_c + r², t > 0, |x − y| ≤ r}`
    Centered {
        t_center: f64,
        radius: f64,
        center: [f64; 3],
    },
}

impl CylinderSpec {
    /// Open time interval of the region (before intersecting with `t > 0`).
    pub fn time_window(&self) -> (f64, f64) {
        match *self {
            CylinderSpec::Q { t, .. } => (0.0, t),
            CylinderSpec::R { t, .. } => (0.5 * t, t),
            CylinderSpec::S { t, .. } => (0.25 * t, t),
            CylinderSpec::Centered {
                t_center, radius, ..
            } => (t_center - radius * radius, t_center + radius * radius),
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            CylinderSpec::Q { t, .. } | CylinderSpec::R { t, .. } => t.sqrt(),
            CylinderSpec::S { t, .. } => (10.0 * t).sqrt(),
            CylinderSpec::Centered { radius, .. } => radius,
        }
    }

    pub fn center(&self) -> [f64; 3] {
        match *self {
            CylinderSpec::Q { center, .. }
            | CylinderSpec::R { center, .. }
            | CylinderSpec::S { center, .. }
            | CylinderSpec::Centered { center, .. } => center,
        }
    }

    pub fn contains_time(&self, t: f64) -> bool {
        let (lo, hi) = self.time_window();
        t > 0.0 && t > lo && t < hi
    }

    pub fn contains(&self, space: &SpaceGrid, t: f64, pos: &[f64; 3]) -> bool {
        self.contains_time(t)
            && within_radius(space.periodic_distance_sq(pos, &self.center()), self.radius())
    }

    pub fn with_center(&self, center: [f64; 3]) -> Self {
        let mut out = *self;
        match &mut out {
            CylinderSpec::Q { center: c, .. }
            | CylinderSpec::R { center: c, .. }
            | CylinderSpec::S { center: c, .. }
            | CylinderSpec::Centered { center: c, .. } => *c = center,
        }
        out
    }
}

/// Sorted set of `(time index, space index)` samples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexSet {
    entries: Vec<(usize, usize)>,
}

impl IndexSet {
    pub fn from_entries(mut entries: Vec<(usize, usize)>) -> Self {
        entries.sort_unstable();
        entries.dedup();
        Self { entries }
    }

    /// Every sample of the grid.
    pub fn full(grid: &Grid) -> Self {
        let ns = grid.space().len();
        Self {
            entries: (0..grid.n_time())
                .flat_map(|k| (0..ns).map(move |s| (k, s)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }

    pub fn contains(&self, time: usize, space: usize) -> bool {
        self.entries.binary_search(&(time, space)).is_ok()
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].cmp(&other.entries[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn is_superset(&self, other: &IndexSet) -> bool {
        other.iter().all(|(k, s)| self.contains(k, s))
    }
}

/// Samples of `grid` inside the region described by `spec`.
pub fn cylinder_mask(grid: &Grid, spec: &CylinderSpec) -> IndexSet {
    let space = grid.space();
    let radius = spec.radius();
    let center = spec.center();
    let inside: Vec<usize> = (0..space.len())
        .filter(|&s| within_radius(space.periodic_distance_sq(&space.position(s), &center), radius))
        .collect();
    let mut entries = Vec::new();
    for (k, &t) in grid.times().iter().enumerate() {
        if spec.contains_time(t) {
            entries.extend(inside.iter().map(|&s| (k, s)));
        }
    }
    IndexSet { entries }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellKind {
    /// `1 ≤ 4^j t < 4`
    R,
    /// `0 < 4^j t < 16`
    Q,
}

/// A cell of the parabolic dyadic decomposition: scale `j`, lattice vector `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCell {
    pub j: i32,
    pub k: [i64; 3],
    pub kind: CellKind,
}

impl DyadicCell {
    /// The unique `j` with `1 ≤ 4^j t < 4`.
    pub fn scale_of(t: f64) -> i32 {
        debug_assert!(t > 0.0);
        let mut j = (-t.log(4.0)).ceil() as i32;
        while 4f64.powi(j) * t < 1.0 {
            j += 1;
        }
        while 4f64.powi(j) * t >= 4.0 {
            j -= 1;
        }
        j
    }

    /// The R-cell containing `(t, pos)`.
    pub fn r_cell_of(t: f64, pos: &[f64; 3], dim: usize) -> Self {
        let j = Self::scale_of(t);
        Self {
            j,
            k: Self::lattice_vector(j, pos, dim),
            kind: CellKind::R,
        }
    }

    fn lattice_vector(j: i32, pos: &[f64; 3], dim: usize) -> [i64; 3] {
        let scale = 2f64.powi(j);
        let mut k = [0i64; 3];
        for axis in 0..dim {
            k[axis] = (scale * pos[axis]).floor() as i64;
        }
        k
    }

    /// Time band of the cell: `[4^-j, 4·4^-j)` for R cells, `(0, 16·4^-j)` for Q cells.
    pub fn time_band(&self) -> (f64, f64) {
        let unit = 4f64.powi(-self.j);
        match self.kind {
            CellKind::R => (unit, 4.0 * unit),
            CellKind::Q => (0.0, 16.0 * unit),
        }
    }

    pub fn contains(&self, t: f64, pos: &[f64; 3], dim: usize) -> bool {
        let scaled = 4f64.powi(self.j) * t;
        let in_time = match self.kind {
            CellKind::R => (1.0..4.0).contains(&scaled),
            CellKind::Q => scaled > 0.0 && scaled < 16.0,
        };
        in_time && Self::lattice_vector(self.j, pos, dim)[..dim] == self.k[..dim]
    }
}

/// Partition of every grid sample into the R-cells `R_{j,k}`, ordered by `(j, k)`.
pub fn dyadic_partition(grid: &Grid) -> Vec<(DyadicCell, IndexSet)> {
    let space = grid.space();
    let positions: Vec<[f64; 3]> = (0..space.len()).map(|s| space.position(s)).collect();
    let mut cells: BTreeMap<DyadicCell, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, &t) in grid.times().iter().enumerate() {
        for (s, pos) in positions.iter().enumerate() {
            let cell = DyadicCell::r_cell_of(t, pos, space.dim);
            cells.entry(cell).or_default().push((k, s));
        }
    }
    cells
        .into_iter()
        .map(|(cell, entries)| (cell, IndexSet { entries }))
        .collect()
}

/// Samples of `grid` inside one dyadic cell (R or Q kind).
pub fn cell_mask(grid: &Grid, cell: &DyadicCell) -> IndexSet {
    let space = grid.space();
    let mut entries = Vec::new();
    for (k, &t) in grid.times().iter().enumerate() {
        for s in 0..space.len() {
            if cell.contains(t, &space.position(s), space.dim) {
                entries.push((k, s));
            }
        }
    }
    IndexSet { entries }
}

/// `field · 𝟙_mask`: zero outside the mask.
pub fn restrict(field: &SpaceTimeField, mask: &IndexSet) -> Result<SpaceTimeField> {
    let grid = field.grid();
    if let Some(&(k, s)) = mask.entries().last() {
        if k >= grid.n_time() || s >= grid.space().len() {
            return Err(Error::GridMismatch("mask indices exceed the field's grid".into()));
        }
    }
    let mut out = SpaceTimeField::zeros(grid, field.components());
    let ns = grid.space().len();
    let nt = grid.n_time();
    for c in 0..field.components() {
        let src = field.values();
        let dst = out.values_mut();
        for (k, s) in mask.iter() {
            let i = (c * nt + k) * ns + s;
            dst[i] = src[i];
        }
    }
    Ok(out)
}

/// Writes a mask as CSV rows `time_index,space_index,t,x,y,z`.
pub fn write_mask_csv<W: Write>(mut out: W, grid: &Grid, mask: &IndexSet) -> std::io::Result<()> {
    let space = grid.space();
    writeln!(out, "time_index,space_index,t,x,y,z")?;
    for (k, s) in mask.iter() {
        let p = space.position(s);
        writeln!(out, "{k},{s},{},{},{},{}", grid.times()[k], p[0], p[1], p[2])?;
    }
    Ok(())
}
