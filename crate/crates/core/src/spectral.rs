//! Fourier multipliers on spatial slices.
//!
//! Derivatives follow `∂_j ↔ iξ_j`. Homogeneous multipliers are undefined at
//! `ξ = 0` and send the mean to zero; the heat semigroup keeps it. Operators
//! built from odd symbols also drop Nyquist slots.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpatialField;
use crate::grid::SpaceGrid;

type Rule = Arc<dyn Fn(&[f64; 3]) -> Complex64 + Send + Sync>;

/// A positively homogeneous Fourier multiplier `ξ ↦ σ(ξ)`.
#[derive(Clone)]
pub struct Symbol {
    name: String,
    degree: f64,
    rule: Rule,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("name", &self.name)
            .field("degree", &self.degree)
            .finish()
    }
}

fn norm_sq(xi: &[f64; 3]) -> f64 {
    xi.iter().map(|v| v * v).sum()
}

impl Symbol {
    pub fn new(
        name: impl Into<String>,
        degree: f64,
        rule: impl Fn(&[f64; 3]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            degree,
            rule: Arc::new(rule),
        }
    }

    /// `σ₀(ξ) = |ξ|`, i.e. `√(−Δ)`.
    pub fn abs() -> Self {
        Self::new("|xi|", 1.0, |xi| Complex64::new(norm_sq(xi).sqrt(), 0.0))
    }

    /// `iξ_j`, i.e. `∂_j`.
    pub fn derivative(axis: usize) -> Self {
        Self::new(format!("i*xi_{axis}"), 1.0, move |xi| Complex64::new(0.0, xi[axis]))
    }

    /// `i(δ_ik ξ_j − ξ_i ξ_j ξ_k/|ξ|²)`, the `(i, j, k)` entry of `ℙDiv` acting on `u_j v_k`.
    pub fn leray_divergence(i: usize, j: usize, k: usize) -> Self {
        Self::new(format!("B_{i}{j}{k}"), 1.0, move |xi| {
            let delta = if i == k { xi[j] } else { 0.0 };
            let n2 = norm_sq(xi);
            let cubic = if n2 > 0.0 { xi[i] * xi[j] * xi[k] / n2 } else { 0.0 };
            Complex64::new(0.0, delta - cubic)
        })
    }

    /// `|ξ|^α`, i.e. `(−Δ)^{α/2}`.
    pub fn fractional(alpha: f64) -> Self {
        Self::new(format!("|xi|^{alpha}"), alpha, move |xi| {
            Complex64::new(norm_sq(xi).sqrt().powf(alpha), 0.0)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    pub fn eval(&self, xi: &[f64; 3]) -> Complex64 {
        (self.rule)(xi)
    }

    /// Largest relative defect `|σ(λξ) − λ^d σ(ξ)| / |λ^d σ(ξ)|` over the samples.
    pub fn homogeneity_defect(&self, samples: &[[f64; 3]], lambdas: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for xi in samples {
            let base = self.eval(xi);
            for &l in lambdas {
                let scaled = self.eval(&[l * xi[0], l * xi[1], l * xi[2]]);
                let want = base * l.powf(self.degree);
                let denom = want.norm();
                if denom > 0.0 {
                    worst = worst.max((scaled - want).norm() / denom);
                } else {
                    worst = worst.max(scaled.norm());
                }
            }
        }
        worst
    }

    /// The symbol evaluated on every FFT slot of `space`, zero at `ξ = 0` and on
    /// Nyquist slots (where an odd symbol has no real-valued counterpart).
    pub fn table(&self, space: &SpaceGrid) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(space.len());
        for idx in 0..space.len() {
            let xi = space.wavevector(idx);
            let v = if idx == 0 || space.is_nyquist(idx) {
                Complex64::default()
            } else {
                self.eval(&xi)
            };
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite(format!("symbol {} at {xi:?}", self.name)));
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Applies a per-slot multiplier table to every component.
fn apply_table(u: &SpatialField, table: &[Complex64]) -> SpatialField {
    let n = u.space().len();
    let mut spec = u.spectrum().to_vec();
    for chunk in spec.chunks_mut(n) {
        for (c, m) in chunk.iter_mut().zip(table) {
            *c *= m;
        }
    }
    SpatialField::from_spectrum(u.space(), u.components(), spec)
}

/// `e^{tΔ}u`, applied per component.
pub fn heat(u: &SpatialField, t: f64) -> Result<SpatialField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("heat time must be non-negative (got {t})")));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let table: Vec<Complex64> = u
        .space()
        .wavevector_norms_sq()
        .iter()
        .map(|a| Complex64::new((-t * a).exp(), 0.0))
        .collect();
    Ok(apply_table(u, &table))
}

/// `σ(D)u`, applied per component; the zero mode is annihilated.
pub fn apply_symbol(sigma: &Symbol, u: &SpatialField) -> Result<SpatialField> {
    Ok(apply_table(u, &sigma.table(&u.space())?))
}

/// `(−Δ)^{α/2}u`. The mean is kept for `α = 0` and dropped otherwise.
pub fn frac_laplacian(u: &SpatialField, alpha: f64) -> SpatialField {
    if alpha == 0.0 {
        return u.clone();
    }
    let table: Vec<Complex64> = u
        .space()
        .wavevector_norms_sq()
        .iter()
        .map(|&a| {
            if a == 0.0 {
                Complex64::default()
            } else {
                Complex64::new(a.powf(0.5 * alpha), 0.0)
            }
        })
        .collect();
    apply_table(u, &table)
}

/// Hilbert transform `−i·sgn(ξ)` on a one-dimensional slice.
pub fn hilbert_1d(u: &SpatialField) -> Result<SpatialField> {
    let space = u.space();
    if space.dim != 1 {
        return Err(Error::invalid(format!(
            "the Hilbert transform needs a 1-D grid (got dim={})",
            space.dim
        )));
    }
    let table: Vec<Complex64> = (0..space.len())
        .map(|i| Complex64::new(0.0, -(space.signed_mode(i).signum() as f64)))
        .collect();
    Ok(apply_table(u, &table))
}

/// Leray projection `û ↦ û − ξ(ξ·û)/|ξ|²`; the zero mode is left untouched and
/// Nyquist slots, whose direction `ξ` is ambiguous, are dropped.
pub fn leray(u: &SpatialField) -> Result<SpatialField> {
    let space = u.space();
    let d = space.dim;
    u.expect_components(d, "vector field")?;
    let n = space.len();
    let src = u.spectrum();
    let mut out = src.to_vec();
    for idx in 1..n {
        if space.is_nyquist(idx) {
            for a in 0..d {
                out[a * n + idx] = Complex64::default();
            }
            continue;
        }
        let xi = space.wavevector(idx);
        let n2 = norm_sq(&xi);
        let mut dot = Complex64::default();
        for a in 0..d {
            dot += src[a * n + idx] * xi[a];
        }
        for a in 0..d {
            out[a * n + idx] -= dot * (xi[a] / n2);
        }
    }
    Ok(SpatialField::from_spectrum(space, d, out))
}

/// `Σ_j ∂_j u_j`.
pub fn divergence(u: &SpatialField) -> Result<SpatialField> {
    let space = u.space();
    let d = space.dim;
    u.expect_components(d, "vector field")?;
    let n = space.len();
    let src = u.spectrum();
    let out: Vec<Complex64> = (0..n)
        .map(|idx| {
            if space.is_nyquist(idx) {
                return Complex64::default();
            }
            let xi = space.wavevector(idx);
            (0..d).map(|a| src[a * n + idx] * Complex64::new(0.0, xi[a])).sum()
        })
        .collect();
    Ok(SpatialField::from_spectrum(space, 1, out))
}

/// L² norm of the antisymmetric gradient `∂_i u_j − ∂_j u_i` over all `i < j`.
pub fn curl_norm(u: &SpatialField) -> Result<f64> {
    let space = u.space();
    let d = space.dim;
    u.expect_components(d, "vector field")?;
    let n = space.len();
    let src = u.spectrum();
    let mut total = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let comp: Vec<Complex64> = (0..n)
                .map(|idx| {
                    if space.is_nyquist(idx) {
                        return Complex64::default();
                    }
                    let xi = space.wavevector(idx);
                    Complex64::new(0.0, 1.0) * (src[j * n + idx] * xi[i] - src[i * n + idx] * xi[j])
                })
                .collect();
            total += SpatialField::from_spectrum(space, 1, comp).l2_norm().powi(2);
        }
    }
    Ok(total.sqrt())
}

/// Pressure gradient from `Δ∇p = ∇((∇⊗∇)·(F − u⊗u))`:
/// `∇p̂(ξ) = iξ (ξ·Ĝ(ξ)·ξ)/|ξ|²` with `G = F − u⊗u`, zero at `ξ = 0`.
///
/// `F` is stored row-major, component `a·dim + b` holding `F_ab`. The product
/// `u⊗u` is formed pointwise on the lattice.
pub fn pressure_gradient(f: &SpatialField, u: &SpatialField) -> Result<SpatialField> {
    let space = u.space();
    let d = space.dim;
    u.expect_components(d, "velocity")?;
    f.expect_components(d * d, "tensor forcing")?;
    if !space.compatible(&f.space()) {
        return Err(Error::GridMismatch("forcing and velocity live on different grids".into()));
    }
    let n = space.len();
    let mut g = f.values().to_vec();
    for a in 0..d {
        for b in 0..d {
            let (ua, ub) = (u.component(a), u.component(b));
            let row = &mut g[(a * d + b) * n..(a * d + b + 1) * n];
            for s in 0..n {
                row[s] -= ua[s] * ub[s];
            }
        }
    }
    let g = SpatialField::from_values(space, d * d, g)?;
    let gs = g.spectrum();
    let mut out = vec![Complex64::default(); d * n];
    for idx in 1..n {
        if space.is_nyquist(idx) {
            continue;
        }
        let xi = space.wavevector(idx);
        let n2 = norm_sq(&xi);
        let mut contraction = Complex64::default();
        for a in 0..d {
            for b in 0..d {
                contraction += gs[(a * d + b) * n + idx] * (xi[a] * xi[b]);
            }
        }
        for a in 0..d {
            out[a * n + idx] = Complex64::new(0.0, xi[a]) * contraction / n2;
        }
    }
    Ok(SpatialField::from_spectrum(space, d, out))
}
