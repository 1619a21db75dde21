//! Sampled fields: single time slices and full space-time arrays.

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::grid::{Grid, SpaceGrid};

/// One time slice, stored component-major, with a lazily computed DFT.
#[derive(Clone, Debug)]
pub struct SpatialField {
    space: SpaceGrid,
    components: usize,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl SpatialField {
    pub fn zeros(space: SpaceGrid, components: usize) -> Self {
        Self::from_parts(space, components, vec![0.0; components * space.len()])
    }

    fn from_parts(space: SpaceGrid, components: usize, values: Vec<f64>) -> Self {
        Self {
            space,
            components,
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_values(space: SpaceGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != components * space.len() {
            return Err(Error::invalid(format!(
                "expected {} values for {components} component(s), found {}",
                components * space.len(),
                values.len()
            )));
        }
        Ok(Self::from_parts(space, components, values))
    }

    /// Samples `f(component, position)` on the lattice.
    pub fn from_fn(space: SpaceGrid, components: usize, f: impl Fn(usize, [f64; 3]) -> f64) -> Self {
        let positions: Vec<[f64; 3]> = (0..space.len()).map(|s| space.position(s)).collect();
        let values = (0..components)
            .flat_map(|c| positions.iter().map(move |&p| (c, p)))
            .map(|(c, p)| f(c, p))
            .collect();
        Self::from_parts(space, components, values)
    }

    /// Field whose DFT is `spectrum` (component-major), keeping the real part.
    pub fn from_spectrum(space: SpaceGrid, components: usize, spectrum: Vec<Complex64>) -> Self {
        let plan = FftNd::for_space(&space);
        let n = space.len();
        assert_eq!(spectrum.len(), components * n);
        let mut values = Vec::with_capacity(components * n);
        for chunk in spectrum.chunks(n) {
            values.extend(plan.inverse_real(chunk.to_vec()));
        }
        Self::from_parts(space, components, values)
    }

    pub fn space(&self) -> SpaceGrid {
        self.space
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.space.len();
        &self.values[c * n..(c + 1) * n]
    }

    /// Mutable samples; drops the cached spectrum.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.spectrum = OnceLock::new();
        &mut self.values
    }

    /// Unnormalized DFT of every component, concatenated.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let plan = FftNd::for_space(&self.space);
            self.values
                .chunks(self.space.len())
                .flat_map(|c| plan.forward_real(c))
                .collect()
        })
    }

    pub fn component_spectrum(&self, c: usize) -> &[Complex64] {
        let n = self.space.len();
        &self.spectrum()[c * n..(c + 1) * n]
    }

    pub(crate) fn expect_components(&self, expected: usize, what: &str) -> Result<()> {
        if self.components == expected {
            Ok(())
        } else {
            Err(Error::Components {
                expected: format!("{expected} ({what})"),
                found: self.components,
            })
        }
    }

    /// `(∫ |u|²)^{1/2}` over the box.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.space.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise Euclidean magnitude over components.
    pub fn magnitude(&self) -> Vec<f64> {
        let n = self.space.len();
        (0..n)
            .map(|s| {
                (0..self.components)
                    .map(|c| self.values[c * n + s].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_parts(self.space, self.components, self.values.iter().map(|v| a * v).collect())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SpatialField, b: f64) -> Result<Self> {
        if !self.space.compatible(&other.space) || self.components != other.components {
            return Err(Error::GridMismatch("slices differ in grid or components".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_parts(self.space, self.components, values))
    }

    /// `u(· − shift·h)`: samples translated by a lattice vector.
    pub fn shifted(&self, shift: [isize; 3]) -> Self {
        let n = self.space.len();
        let mut values = vec![0.0; self.values.len()];
        for c in 0..self.components {
            for s in 0..n {
                values[c * n + self.space.shift_index(s, shift)] = self.values[c * n + s];
            }
        }
        Self::from_parts(self.space, self.components, values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Samples indexed `(component, time, space)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &Grid, components: usize) -> Self {
        Self {
            grid: grid.clone(),
            components,
            values: vec![0.0; components * grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != components * grid.len() {
            return Err(Error::invalid(format!(
                "expected {} values for {components} component(s), found {}",
                components * grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            components,
            values,
        })
    }

    /// Samples `f(component, t, position)`.
    pub fn from_fn(grid: &Grid, components: usize, f: impl Fn(usize, f64, [f64; 3]) -> f64) -> Self {
        let space = grid.space();
        let positions: Vec<[f64; 3]> = (0..space.len()).map(|s| space.position(s)).collect();
        let mut values = Vec::with_capacity(components * grid.len());
        for c in 0..components {
            for &t in grid.times() {
                values.extend(positions.iter().map(|&p| f(c, t, p)));
            }
        }
        Self {
            grid: grid.clone(),
            components,
            values,
        }
    }

    /// Stacks one slice per ladder time.
    pub fn from_slices(grid: &Grid, slices: &[SpatialField]) -> Result<Self> {
        if slices.len() != grid.n_time() {
            return Err(Error::GridMismatch(format!(
                "{} slices for a ladder of {} times",
                slices.len(),
                grid.n_time()
            )));
        }
        let components = slices[0].components();
        let mut out = Self::zeros(grid, components);
        for (k, s) in slices.iter().enumerate() {
            out.set_slice(k, s)?;
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn offset(&self, c: usize, k: usize) -> usize {
        (c * self.grid.n_time() + k) * self.grid.space().len()
    }

    pub fn at(&self, c: usize, k: usize, s: usize) -> f64 {
        self.values[self.offset(c, k) + s]
    }

    /// Samples of component `c` at time index `k`.
    pub fn slice_values(&self, c: usize, k: usize) -> &[f64] {
        let o = self.offset(c, k);
        &self.values[o..o + self.grid.space().len()]
    }

    pub fn slice_values_mut(&mut self, c: usize, k: usize) -> &mut [f64] {
        let o = self.offset(c, k);
        let n = self.grid.space().len();
        &mut self.values[o..o + n]
    }

    /// All components at time index `k`.
    pub fn slice(&self, k: usize) -> SpatialField {
        let n = self.grid.space().len();
        let mut values = Vec::with_capacity(self.components * n);
        for c in 0..self.components {
            values.extend_from_slice(self.slice_values(c, k));
        }
        SpatialField::from_parts(self.grid.space(), self.components, values)
    }

    pub fn set_slice(&mut self, k: usize, slice: &SpatialField) -> Result<()> {
        if slice.components() != self.components || !slice.space().compatible(&self.grid.space()) {
            return Err(Error::GridMismatch("slice does not fit the field".into()));
        }
        for c in 0..self.components {
            self.slice_values_mut(c, k).copy_from_slice(slice.component(c));
        }
        Ok(())
    }

    /// Component `c` as a scalar field.
    pub fn component(&self, c: usize) -> SpaceTimeField {
        let len = self.grid.len();
        Self {
            grid: self.grid.clone(),
            components: 1,
            values: self.values[c * len..(c + 1) * len].to_vec(),
        }
    }

    /// Concatenates scalar fields into one multi-component field.
    pub fn from_components(parts: &[SpaceTimeField]) -> Result<Self> {
        let grid = parts
            .first()
            .ok_or_else(|| Error::invalid("no components given"))?
            .grid()
            .clone();
        let mut values = Vec::new();
        let mut components = 0;
        for p in parts {
            grid.ensure_compatible(p.grid(), "from_components")?;
            values.extend_from_slice(&p.values);
            components += p.components;
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    pub(crate) fn expect_components(&self, expected: usize, what: &str) -> Result<()> {
        if self.components == expected {
            Ok(())
        } else {
            Err(Error::Components {
                expected: format!("{expected} ({what})"),
                found: self.components,
            })
        }
    }

    /// Pointwise Euclidean magnitude, indexed `(time, space)`.
    pub fn magnitude(&self) -> Vec<f64> {
        let len = self.grid.len();
        if self.components == 1 {
            return self.values.iter().map(|v| v.abs()).collect();
        }
        (0..len)
            .map(|i| {
                (0..self.components)
                    .map(|c| self.values[c * len + i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Discrete `‖u‖_{L²((0,∞)×box)}` with the ladder's time-cell weights.
    pub fn l2l2_norm(&self) -> f64 {
        let ns = self.grid.space().len();
        let weights = self.grid.time_weights();
        let mut total = 0.0;
        for c in 0..self.components {
            for (k, w) in weights.iter().enumerate() {
                let o = (c * self.grid.n_time() + k) * ns;
                total += w * self.values[o..o + ns].iter().map(|v| v * v).sum::<f64>();
            }
        }
        (total * self.grid.space().cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self.components,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SpaceTimeField, b: f64) -> Result<Self> {
        self.grid.ensure_compatible(other.grid(), "combine")?;
        if self.components != other.components {
            return Err(Error::Components {
                expected: self.components.to_string(),
                found: other.components,
            });
        }
        Ok(Self {
            grid: self.grid.clone(),
            components: self.components,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn add(&self, other: &SpaceTimeField) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    /// Translation of every slice by a lattice vector.
    pub fn shifted(&self, shift: [isize; 3]) -> Self {
        let space = self.grid.space();
        let ns = space.len();
        let target: Vec<usize> = (0..ns).map(|s| space.shift_index(s, shift)).collect();
        let mut values = vec![0.0; self.values.len()];
        for (chunk_in, chunk_out) in self.values.chunks(ns).zip(values.chunks_mut(ns)) {
            for s in 0..ns {
                chunk_out[target[s]] = chunk_in[s];
            }
        }
        Self {
            grid: self.grid.clone(),
            components: self.components,
            values,
        }
    }

    /// The same samples reinterpreted on the dilated grid and scaled by `factor`.
    ///
    /// With `factor = λ` this is the Navier–Stokes scaling `λ u(λ²t, λx)`.
    pub fn dilated(&self, lambda: f64, factor: f64) -> Self {
        Self {
            grid: self.grid.dilated(lambda),
            components: self.components,
            values: self.values.iter().map(|v| factor * v).collect(),
        }
    }

    /// Samples with `keep(time_index, space_index)` false are set to zero.
    pub fn masked(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let ns = self.grid.space().len();
        let nt = self.grid.n_time();
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            let k = (i / ns) % nt;
            if !keep(k, i % ns) {
                *v = 0.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, TimeSpacing};

    #[test]
    fn spectrum_round_trip() {
        let space = SpaceGrid::new(2, 3.0, 8).unwrap();
        let f = SpatialField::from_fn(space, 2, |c, p| (p[0] + c as f64).sin() * p[1].cos());
        let g = SpatialField::from_spectrum(space, 2, f.spectrum().to_vec());
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn l2l2_norm_of_constant_field() {
        let g = make_grid(1, 2.0, 8, 0.5, 2.5, 3, TimeSpacing::Uniform).unwrap();
        let u = SpaceTimeField::from_fn(&g, 1, |_, _, _| 3.0);
        // Cells cover [0, 3): total measure 3 × 2.
        assert!((u.l2l2_norm() - (9.0f64 * 6.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn slices_and_components_round_trip() {
        let g = make_grid(2, 1.0, 4, 0.1, 1.0, 3, TimeSpacing::Geometric).unwrap();
        let u = SpaceTimeField::from_fn(&g, 2, |c, t, p| c as f64 + t * p[0] - p[1]);
        let slices: Vec<SpatialField> = (0..3).map(|k| u.slice(k)).collect();
        let v = SpaceTimeField::from_slices(&g, &slices).unwrap();
        assert_eq!(u.values(), v.values());
        let w = SpaceTimeField::from_components(&[u.component(0), u.component(1)]).unwrap();
        assert_eq!(u.values(), w.values());
    }

    #[test]
    fn shift_is_a_permutation() {
        let g = make_grid(3, 1.0, 4, 0.1, 1.0, 2, TimeSpacing::Uniform).unwrap();
        let u = SpaceTimeField::from_fn(&g, 1, |_, t, p| t + p[0] + 10.0 * p[1] + 100.0 * p[2]);
        let back = u.shifted([1, -2, 3]).shifted([-1, 2, -3]);
        assert_eq!(u.values(), back.values());
        assert!((u.l2l2_norm() - u.shifted([1, 1, 0]).l2l2_norm()).abs() < 1e-12);
    }
}
