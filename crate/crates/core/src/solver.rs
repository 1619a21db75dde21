//! Picard construction of mild solutions `u = e^{tΔ}u₀ + ℒ(F) − B(u, u)` with
//! a contraction certificate in a selected critical space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::duhamel::{heat_extension, Duhamel};
use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, SpatialField};
use crate::grid::Grid;
use crate::norms::{self, NormConfig};
use crate::presets::TrigSeries;
use crate::quadrature::QuadratureRule;
use crate::spectral;

/// Space in which smallness and increments are measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceSelector {
    Ykt,
    Yktq { q: f64 },
    /// `𝓜̇₂^{p, D}`
    Morrey { p: f64 },
    /// `𝒴_{KT,q} + 𝓜̇₂^{p,D}`: the first forcing part is measured in the first
    /// space, the second in the Morrey space. Norms of single fields use the
    /// smaller of the two, an upper bound for the sum-space norm.
    Sum { q: f64, p: f64 },
}

impl SpaceSelector {
    pub fn name(&self) -> String {
        match self {
            SpaceSelector::Ykt => "ykt".into(),
            SpaceSelector::Yktq { q } => format!("yktq(q={q})"),
            SpaceSelector::Morrey { p } => format!("morrey(p={p})"),
            SpaceSelector::Sum { q, p } => format!("yktq(q={q})+morrey(p={p})"),
        }
    }

    /// Norm of `u` in the selected space.
    pub fn norm(&self, u: &SpaceTimeField, config: &NormConfig) -> Result<f64> {
        let dd = u.grid().space().parabolic_dim();
        Ok(match *self {
            SpaceSelector::Ykt => norms::norm_ykt(u, config)?.value,
            SpaceSelector::Yktq { q } => norms::norm_yktq(u, q, config)?.value,
            SpaceSelector::Morrey { p } => norms::norm_morrey(u, p, dd, config)?.value,
            SpaceSelector::Sum { q, p } => norms::norm_yktq(u, q, config)?
                .value
                .min(norms::norm_morrey(u, p, dd, config)?.value),
        })
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        let dd = grid.space().parabolic_dim();
        let q_ok = |q: f64| q > dd && q.is_finite();
        let p_ok = |p: f64| (1.0..=dd).contains(&p);
        let ok = match *self {
            SpaceSelector::Ykt => true,
            SpaceSelector::Yktq { q } => q_ok(q),
            SpaceSelector::Morrey { p } => p_ok(p),
            SpaceSelector::Sum { q, p } => q_ok(q) && p_ok(p),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid space parameters {}", self.name())))
        }
    }
}

/// Initial velocity and tensor forcing `F = F₁ + F₂`.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub grid: Grid,
    pub u0: SpatialField,
    pub f1: Option<SpaceTimeField>,
    pub f2: Option<SpaceTimeField>,
}

impl ProblemData {
    /// Validates shapes and `Div u₀ = 0` (to `1e-10` relative).
    pub fn new(
        grid: Grid,
        u0: SpatialField,
        f1: Option<SpaceTimeField>,
        f2: Option<SpaceTimeField>,
    ) -> Result<Self> {
        let space = grid.space();
        let d = space.dim;
        if !u0.space().compatible(&space) {
            return Err(Error::GridMismatch("u0 and grid differ".into()));
        }
        if u0.components() != d {
            return Err(Error::Components {
                expected: d.to_string(),
                found: u0.components(),
            });
        }
        let div = spectral::divergence(&u0)?.l2_norm();
        if div > 1e-10 * u0.l2_norm() {
            return Err(Error::invalid(format!(
                "u0 is not divergence-free (relative divergence {:.3e})",
                div / u0.l2_norm()
            )));
        }
        for f in [&f1, &f2].into_iter().flatten() {
            if !f.grid().compatible(&grid) {
                return Err(Error::GridMismatch("forcing and grid differ".into()));
            }
            if f.components() != d * d {
                return Err(Error::Components {
                    expected: (d * d).to_string(),
                    found: f.components(),
                });
            }
            if !f.is_finite() {
                return Err(Error::NonFinite("forcing".into()));
            }
        }
        Ok(Self { grid, u0, f1, f2 })
    }

    pub fn unforced(grid: Grid, u0: SpatialField) -> Result<Self> {
        Self::new(grid, u0, None, None)
    }

    /// `F₁ + F₂`, or `None` without forcing.
    pub fn forcing(&self) -> Result<Option<SpaceTimeField>> {
        match (&self.f1, &self.f2) {
            (Some(a), Some(b)) => Ok(Some(a.add(b)?)),
            (Some(a), None) | (None, Some(a)) => Ok(Some(a.clone())),
            (None, None) => Ok(None),
        }
    }

    /// Translation of the data by a lattice vector.
    pub fn shifted(&self, shift: [isize; 3]) -> Self {
        Self {
            grid: self.grid.clone(),
            u0: self.u0.shifted(shift),
            f1: self.f1.as_ref().map(|f| f.shifted(shift)),
            f2: self.f2.as_ref().map(|f| f.shifted(shift)),
        }
    }

    /// Data multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            u0: self.u0.scaled(c),
            f1: self.f1.as_ref().map(|f| f.scaled(c)),
            f2: self.f2.as_ref().map(|f| f.scaled(c)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub space: SpaceSelector,
    /// Bilinear constant; estimated from an ensemble when absent.
    pub c0: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default)]
    pub rule: QuadratureRule,
    #[serde(default)]
    pub norm: NormConfig,
    /// Ensemble size for the C₀ estimate.
    #[serde(default = "default_c0_samples")]
    pub c0_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_c0_samples() -> usize {
    4
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            space: SpaceSelector::Ykt,
            c0: None,
            max_iter: 50,
            tol: 1e-10,
            rule: QuadratureRule::default(),
            norm: NormConfig::default(),
            c0_samples: default_c0_samples(),
            seed: 0,
        }
    }
}

/// Outcome of [`picard_solve`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionTrace {
    pub space: String,
    pub iterations: usize,
    /// `‖u⁽ⁿ⁺¹⁾ − u⁽ⁿ⁾‖` in the selected space.
    pub increments: Vec<f64>,
    pub converged: bool,
    /// Increments grew three times in a row.
    pub diverged: bool,
    pub certified: bool,
    pub c0: f64,
    /// `4C₀(‖e^{tΔ}u₀‖ + ‖ℒ(F)‖)` (sum-space form for split forcing).
    pub margin: f64,
    /// `‖e^{tΔ}u₀‖ + ‖ℒ(F)‖` in the same form.
    pub linear_norm: f64,
    pub solution_norm: f64,
    /// `‖u‖ ≤ 2(‖e^{tΔ}u₀‖ + ‖ℒ(F)‖)`.
    pub bound_holds: bool,
    /// `δ_{n+1} ≤ margin·δ_n` for every recorded step.
    pub geometric: bool,
    pub residual: f64,
    /// Largest relative spectral divergence over iterates and slices.
    pub max_divergence: f64,
    #[serde(skip)]
    pub solution: Option<SpaceTimeField>,
}

/// `e^{tΔ}u₀ + ℒ(F₁) + ℒ(F₂)` with the three parts kept separately.
struct LinearParts {
    heat: SpaceTimeField,
    f1: Option<SpaceTimeField>,
    f2: Option<SpaceTimeField>,
}

impl LinearParts {
    fn new(data: &ProblemData, op: &Duhamel) -> Result<Self> {
        Ok(Self {
            heat: heat_extension(&data.u0, &data.grid)?,
            f1: data.f1.as_ref().map(|f| op.linear_force(f)).transpose()?,
            f2: data.f2.as_ref().map(|f| op.linear_force(f)).transpose()?,
        })
    }

    fn total(&self) -> Result<SpaceTimeField> {
        let mut u = self.heat.clone();
        for part in [&self.f1, &self.f2].into_iter().flatten() {
            u = u.add(part)?;
        }
        Ok(u)
    }

    /// `‖e^{tΔ}u₀‖ + ‖ℒ(F)‖`; in a sum space `‖e^{tΔ}u₀‖_{𝒴_{KT,q}} + ‖ℒ(F₁)‖_{𝒴_{KT,q}} + ‖ℒ(F₂)‖_{𝓜}`.
    fn norm(&self, space: &SpaceSelector, config: &NormConfig) -> Result<f64> {
        match *space {
            SpaceSelector::Sum { q, p } => {
                let first = SpaceSelector::Yktq { q };
                let second = SpaceSelector::Morrey { p };
                let mut total = first.norm(&self.heat, config)?;
                if let Some(f) = &self.f1 {
                    total += first.norm(f, config)?;
                }
                if let Some(f) = &self.f2 {
                    total += second.norm(f, config)?;
                }
                Ok(total)
            }
            _ => {
                let mut total = space.norm(&self.heat, config)?;
                let forced = match (&self.f1, &self.f2) {
                    (Some(a), Some(b)) => Some(a.add(b)?),
                    (Some(a), None) | (None, Some(a)) => Some(a.clone()),
                    (None, None) => None,
                };
                if let Some(f) = forced {
                    total += space.norm(&f, config)?;
                }
                Ok(total)
            }
        }
    }
}

fn max_divergence(u: &SpaceTimeField) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..u.grid().n_time() {
        let slice = u.slice(k);
        let norm = slice.l2_norm();
        if norm > 0.0 {
            worst = worst.max(spectral::divergence(&slice)?.l2_norm() / norm);
        }
    }
    Ok(worst)
}

/// `2·max ‖B(u, v)‖ / (‖u‖‖v‖)` over heat extensions of random solenoidal
/// data plus the pairs built from `extra`.
pub fn estimate_c0(
    grid: &Grid,
    space: &SpaceSelector,
    config: &NormConfig,
    samples: usize,
    seed: u64,
    extra: &[SpaceTimeField],
    rule: QuadratureRule,
) -> Result<f64> {
    space.check(grid)?;
    let sp = grid.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields: Vec<SpaceTimeField> = extra.iter().filter(|f| f.max_abs() > 0.0).cloned().collect();
    for _ in 0..samples {
        let data = TrigSeries::random_solenoidal(&mut rng, sp.dim, sp.length, 2);
        fields.push(data.heat_extension(grid));
    }
    let op = Duhamel::new(rule);
    let norms: Vec<f64> = fields.iter().map(|f| space.norm(f, config)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..fields.len() {
        // Neighbouring pairs keep the sweep linear in the ensemble size.
        for j in [i, (i + 1) % fields.len()] {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let b = op.bilinear_b(&fields[i], &fields[j])?;
            worst = worst.max(space.norm(&b, config)? / (norms[i] * norms[j]));
        }
    }
    Ok(2.0 * worst)
}

/// `4C₀(‖e^{tΔ}u₀‖ + ‖ℒ(F)‖)` in the selected space (sum-space form when the
/// selector is a sum).
pub fn smallness_margin(data: &ProblemData, space: &SpaceSelector, c0: f64, config: &NormConfig) -> Result<f64> {
    space.check(&data.grid)?;
    let linear = LinearParts::new(data, &Duhamel::default())?;
    Ok(4.0 * c0 * linear.norm(space, config)?)
}

/// `‖u − e^{tΔ}u₀ − ℒ(F) + B(u, u)‖_{L²L²}`, divided by `‖u‖_{L²L²}` when `u ≠ 0`.
pub fn residual(data: &ProblemData, u: &SpaceTimeField) -> Result<f64> {
    residual_with(data, u, &Duhamel::default())
}

fn residual_with(data: &ProblemData, u: &SpaceTimeField, op: &Duhamel) -> Result<f64> {
    if !u.grid().compatible(&data.grid) {
        return Err(Error::GridMismatch("solution and data grids differ".into()));
    }
    let linear = LinearParts::new(data, op)?.total()?;
    let b = op.bilinear_b(u, u)?;
    let defect = u.sub(&linear)?.add(&b)?.l2l2_norm();
    let norm = u.l2l2_norm();
    Ok(if norm > 0.0 { defect / norm } else { defect })
}

/// Picard iteration `u⁽⁰⁾ = e^{tΔ}u₀ + ℒ(F)`, `u⁽ⁿ⁺¹⁾ = u⁽⁰⁾ − B(u⁽ⁿ⁾, u⁽ⁿ⁾)`,
/// stopped when the increment drops below `tol`. Growth over three
/// consecutive steps marks the run as divergent.
pub fn picard_solve(data: &ProblemData, options: &SolveOptions) -> Result<SolutionTrace> {
    options.space.check(&data.grid)?;
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::invalid("tol must be positive and max_iter at least 1"));
    }
    let op = Duhamel::new(options.rule);
    let cfg = &options.norm;
    let parts = LinearParts::new(data, &op)?;
    let u_lin = parts.total()?;
    let linear_norm = parts.norm(&options.space, cfg)?;
    let c0 = match options.c0 {
        Some(c) => c,
        None => estimate_c0(
            &data.grid,
            &options.space,
            cfg,
            options.c0_samples,
            options.seed,
            std::slice::from_ref(&u_lin),
            options.rule,
        )?,
    };
    let margin = 4.0 * c0 * linear_norm;

    let mut u = u_lin.clone();
    let mut increments = Vec::new();
    let mut max_div = max_divergence(&u)?;
    let mut converged = false;
    let mut diverged = false;
    let mut growth = 0;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let next = u_lin.sub(&op.bilinear_b(&u, &u)?)?;
        if !next.is_finite() {
            diverged = true;
            break;
        }
        let delta = options.space.norm(&next.sub(&u)?, cfg)?;
        max_div = max_div.max(max_divergence(&next)?);
        u = next;
        if let Some(&prev) = increments.last() {
            growth = if delta > prev { growth + 1 } else { 0 };
        }
        increments.push(delta);
        if delta < options.tol {
            converged = true;
            break;
        }
        if growth >= 3 {
            diverged = true;
            break;
        }
    }
    let solution_norm = options.space.norm(&u, cfg)?;
    let bound_holds = solution_norm <= 2.0 * linear_norm * (1.0 + 1e-12);
    let geometric = increments
        .windows(2)
        .all(|w| w[1] <= margin * w[0] || w[1] < options.tol);
    let residual = residual_with(data, &u, &op)?;
    let certified = converged && !diverged && margin < 1.0 && bound_holds && geometric;
    Ok(SolutionTrace {
        space: options.space.name(),
        iterations,
        increments,
        converged,
        diverged,
        certified,
        c0,
        margin,
        linear_norm,
        solution_norm,
        bound_holds,
        geometric,
        residual,
        max_divergence: max_div,
        solution: Some(u),
    })
}

/// Manufactured solution
/// `w = a(t)(cos x₂, 0) + b(t)(0, cos x₁) + c(t)(sin(x₁+x₂), −sin(x₁+x₂))`
/// (trailing components zero) with `a = ε(1 + t)`, `b = ε(1 − t/2)`,
/// `c = ε(0.8 − 0.24t)`, and forcing `F = G + w⊗w` where `Div G = ∂_t w − Δw`.
/// Box length must be `2π`. Returns the problem and `w` on the ladder.
pub fn manufactured(grid: &Grid, eps: f64) -> Result<(ProblemData, SpaceTimeField)> {
    let space = grid.space();
    let d = space.dim;
    if d < 2 {
        return Err(Error::invalid("the manufactured solution needs dim >= 2"));
    }
    if (space.length - 2.0 * std::f64::consts::PI).abs() > 1e-12 {
        return Err(Error::invalid("the manufactured solution needs L = 2π"));
    }
    let a = move |t: f64| eps * (1.0 + t);
    let b = move |t: f64| eps * (1.0 - 0.5 * t);
    let c = move |t: f64| eps * (0.8 - 0.24 * t);
    // a' + a, b' + b, c' + 2c
    let ga = move |t: f64| eps * (2.0 + t);
    let gb = move |t: f64| eps * (0.5 - 0.5 * t);
    let gc = move |t: f64| eps * (1.36 - 0.48 * t);
    let w_at = move |k: usize, t: f64, p: [f64; 3]| {
        let shear = c(t) * (p[0] + p[1]).sin();
        match k {
            0 => a(t) * p[1].cos() + shear,
            1 => b(t) * p[0].cos() - shear,
            _ => 0.0,
        }
    };
    let w = SpaceTimeField::from_fn(grid, d, w_at);
    let f = SpaceTimeField::from_fn(grid, d * d, |comp, t, p| {
        let (j, k) = (comp / d, comp % d);
        let shear = gc(t) * (p[0] + p[1]).cos();
        let g = match (j, k) {
            (1, 0) => ga(t) * p[1].sin(),
            (0, 1) => gb(t) * p[0].sin() + shear,
            (0, 0) => -shear,
            _ => 0.0,
        };
        g + w_at(j, t, p) * w_at(k, t, p)
    });
    let u0 = SpatialField::from_fn(space, d, |k, p| w_at(k, 0.0, p));
    Ok((ProblemData::new(grid.clone(), u0, Some(f), None)?, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, TimeSpacing};
    use std::f64::consts::PI;

    fn grid2() -> Grid {
        make_grid(2, 2.0 * PI, 8, 1e-3, 1.0, 24, TimeSpacing::Geometric).unwrap()
    }

    fn opts() -> SolveOptions {
        SolveOptions {
            norm: NormConfig { centers_per_axis: 4 },
            c0_samples: 2,
            ..SolveOptions::default()
        }
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let g = grid2();
        let data = ProblemData::unforced(g.clone(), SpatialField::zeros(g.space(), 2)).unwrap();
        let trace = picard_solve(&data, &opts()).unwrap();
        assert_eq!(trace.iterations, 1);
        assert_eq!(trace.solution.unwrap().max_abs(), 0.0);
        assert_eq!(trace.margin, 0.0);
        assert_eq!(smallness_margin(&data, &SpaceSelector::Ykt, 1.0, &NormConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn small_single_mode_converges_and_certifies() {
        let g = grid2();
        let u0 = SpatialField::from_fn(g.space(), 2, |c, p| if c == 0 { 1e-3 * p[1].sin() } else { 0.0 });
        let data = ProblemData::unforced(g, u0).unwrap();
        let trace = picard_solve(&data, &opts()).unwrap();
        assert!(trace.converged && trace.certified, "{trace:?}");
        assert!(trace.bound_holds);
        assert!(trace.residual <= 10.0 * 1e-10 + 1e-12);
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let g = grid2();
        let (data, w) = manufactured(&g, 0.05).unwrap();
        let trace = picard_solve(&data, &opts()).unwrap();
        let u = trace.solution.clone().unwrap();
        let err = u.sub(&w).unwrap().l2l2_norm() / w.l2l2_norm();
        assert!(err < 1e-4, "{err}");
        assert!(residual(&data, &w).unwrap() < 1e-4);
    }

    #[test]
    fn residual_of_zero_is_unnormalized() {
        let g = grid2();
        let u0 = SpatialField::from_fn(g.space(), 2, |c, p| if c == 1 { p[0].cos() } else { 0.0 });
        let data = ProblemData::unforced(g.clone(), u0.clone()).unwrap();
        let r = residual(&data, &SpaceTimeField::zeros(&g, 2)).unwrap();
        let want = heat_extension(&u0, &g).unwrap().l2l2_norm();
        assert!((r - want).abs() < 1e-12 * want);
    }

    #[test]
    fn margin_is_linear_in_the_data() {
        let g = grid2();
        let (data, _) = manufactured(&g, 0.05).unwrap();
        let cfg = NormConfig { centers_per_axis: 4 };
        let m1 = smallness_margin(&data, &SpaceSelector::Ykt, 1.5, &cfg).unwrap();
        let m3 = smallness_margin(&data.scaled(3.0), &SpaceSelector::Ykt, 1.5, &cfg).unwrap();
        assert!((m3 - 3.0 * m1).abs() < 1e-12 * m3);
    }

    #[test]
    fn rejects_compressible_data() {
        let g = grid2();
        let u0 = SpatialField::from_fn(g.space(), 2, |c, p| if c == 0 { p[0].sin() } else { 0.0 });
        assert!(ProblemData::unforced(g, u0).is_err());
    }

    #[test]
    fn large_data_is_not_certified() {
        let g = grid2();
        let u0 = SpatialField::from_fn(g.space(), 2, |c, p| {
            if c == 0 {
                40.0 * (p[1] + p[0]).sin()
            } else {
                -40.0 * (p[1] + p[0]).sin()
            }
        });
        let data = ProblemData::unforced(g, u0).unwrap();
        let trace = picard_solve(&data, &SolveOptions { max_iter: 8, ..opts() }).unwrap();
        assert!(!trace.certified);
        assert!(trace.margin >= 1.0);
    }
}
