//! Experiment presets: the counterexample trend suite, ensemble sweeps of the
//! Duhamel estimates and ready-made solver problems.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::duhamel::{self, KernelSampling};
use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::field::{SpaceTimeField, SpatialField};
use crate::grid::{cylinder_mask, make_grid, restrict, CylinderSpec, Grid, SpaceGrid};
use crate::norms::{self, NormConfig};
use crate::presets::{random_solenoidal, BumpField, BumpRanges, TrigSeries};
use crate::quadrature::{integrate, product_singular_weights};
use crate::report::{EstimateReport, GridInfo};
use crate::solver::{self, ProblemData, SolutionTrace, SolveOptions};
use crate::spectral::{self, Symbol};
use crate::Complex64;

// ---------------------------------------------------------------------------
// Trend reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseId {
    Y2Unbounded,
    HilbertL1,
    KtBlowup,
    MultiplierGap,
    YktObstruction,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [
        CaseId::Y2Unbounded,
        CaseId::HilbertL1,
        CaseId::KtBlowup,
        CaseId::MultiplierGap,
        CaseId::YktObstruction,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CaseId::Y2Unbounded => "y2-unbounded",
            CaseId::HilbertL1 => "hilbert-l1",
            CaseId::KtBlowup => "kt-blowup",
            CaseId::MultiplierGap => "multiplier-gap",
            CaseId::YktObstruction => "ykt-obstruction",
        }
    }

    /// The sweep used when none is given.
    pub fn default_sweep(self) -> Vec<f64> {
        match self {
            CaseId::Y2Unbounded => vec![4.0, 8.0, 16.0, 32.0, 64.0],
            CaseId::HilbertL1 => vec![2.0, 4.0, 8.0, 16.0, 32.0],
            CaseId::KtBlowup => vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            CaseId::MultiplierGap => vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            CaseId::YktObstruction => vec![0.25, 0.1, 0.04],
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown case '{s}'")))
    }
}

/// Least-squares line `measured ≈ slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("a fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, r2 })
}

/// A named diagnostic with its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub case: CaseId,
    /// Human-readable form of the fitted model.
    pub model: String,
    pub sweep: Vec<f64>,
    /// The fit abscissa for each sweep value (`ln n`, `(ln(1/(2δ)))^{1/4}`, ...).
    pub regressor: Vec<f64>,
    pub measured: Vec<f64>,
    pub fit: LinearFit,
    pub checks: Vec<Check>,
    /// Informational values without a threshold.
    #[serde(default)]
    pub notes: BTreeMap<String, f64>,
}

impl TrendReport {
    fn assemble(
        case: CaseId,
        model: &str,
        sweep: &[f64],
        regressor: Vec<f64>,
        measured: Vec<f64>,
        mut checks: Vec<Check>,
        notes: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if let Some(bad) = measured.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NonFinite(format!("{case}: measured value {bad}")));
        }
        let fit = fit_line(&regressor, &measured)?;
        let mut order: Vec<usize> = (0..sweep.len()).collect();
        order.sort_by(|&a, &b| regressor[a].total_cmp(&regressor[b]));
        let drops = order
            .windows(2)
            .map(|w| (measured[w[0]] - measured[w[1]]).max(0.0))
            .fold(0.0, f64::max);
        checks.push(Check::at_most("monotone_drop", drops, 0.0));
        Ok(Self {
            case,
            model: model.into(),
            sweep: sweep.to_vec(),
            regressor,
            measured,
            fit,
            checks,
            notes,
        })
    }

    /// Measured values never decrease as the regressor grows.
    pub fn monotone(&self) -> bool {
        self.check("monotone_drop").is_some_and(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Two columns: sweep value, measured value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,measured\n");
        for (s, m) in self.sweep.iter().zip(&self.measured) {
            out.push_str(&format!("{s:e},{m:e}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Resolution presets for the counterexample suite. `Desk` is the full
/// setting; `Quick` trades depth for speed in tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPreset {
    #[default]
    Desk,
    Quick,
}

impl FromStr for GridPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(GridPreset::Desk),
            "quick" => Ok(GridPreset::Quick),
            _ => Err(Error::invalid(format!("unknown grid preset '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: CaseId,
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub preset: GridPreset,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(case: CaseId) -> Self {
        Self {
            case,
            sweep: case.default_sweep(),
            preset: GridPreset::Desk,
            output: None,
        }
    }

    /// The sweep, or the case default when empty; values must be positive and
    /// strictly monotone.
    pub fn validated_sweep(&self) -> Result<Vec<f64>> {
        let sweep = if self.sweep.is_empty() {
            self.case.default_sweep()
        } else {
            self.sweep.clone()
        };
        if sweep.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("sweep values must be positive and finite"));
        }
        let up = sweep.windows(2).all(|w| w[1] > w[0]);
        let down = sweep.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::invalid("sweep values must be strictly monotone"));
        }
        Ok(sweep)
    }

    pub fn run(&self) -> Result<TrendReport> {
        let sweep = self.validated_sweep()?;
        let report = match self.case {
            CaseId::Y2Unbounded => cx_y2_unbounded(&sweep, &Y2Setup::preset(self.preset)),
            CaseId::HilbertL1 => cx_hilbert_l1(&sweep, &HilbertSetup::preset(self.preset)),
            CaseId::KtBlowup => cx_kt_blowup(&sweep),
            CaseId::MultiplierGap => {
                cx_multiplier_gap(&sweep, &MultiplierSetup::preset(self.preset))
            }
            CaseId::YktObstruction => {
                cx_ykt_obstruction(&sweep, &ObstructionSetup::preset(self.preset))
            }
        }?;
        if let Some(path) = &self.output {
            report.write_csv(path)?;
        }
        Ok(report)
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale > 0.0 {
        (a - b).abs() / scale
    } else {
        0.0
    }
}

/// Richardson checks: the deepest sweep point gets the looser threshold.
fn richardson_checks(fine: &[f64], coarse: &[f64], deepest: usize) -> Vec<Check> {
    let mut rest: f64 = 0.0;
    let mut deep = 0.0;
    for (i, (a, b)) in fine.iter().zip(coarse).enumerate() {
        let change = relative_change(*a, *b);
        if i == deepest {
            deep = change;
        } else {
            rest = rest.max(change);
        }
    }
    vec![
        Check::at_most("richardson", rest, 1e-6),
        Check::at_most("richardson_deepest", deep, 1e-4),
    ]
}

fn index_of_max(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
        .0
}

// ---------------------------------------------------------------------------
// Inverse half-Laplacian mass of a concentrating mollifier (2-D)

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Y2Setup {
    pub length: f64,
    pub n_space: usize,
}

impl Y2Setup {
    pub fn preset(preset: GridPreset) -> Self {
        match preset {
            GridPreset::Desk => Self { length: 4.0, n_space: 2048 },
            GridPreset::Quick => Self { length: 4.0, n_space: 256 },
        }
    }
}

/// `φ_n(y) = (n²/π) e^{−n²|y|²}` centred in the box; unit mass, width `1/n`.
pub fn mollifier_2d(space: SpaceGrid, n: f64) -> SpatialField {
    let c = 0.5 * space.length;
    SpatialField::from_fn(space, 1, |_, p| {
        let r2 = (p[0] - c).powi(2) + (p[1] - c).powi(2);
        n * n / std::f64::consts::PI * (-n * n * r2).exp()
    })
}

/// `‖(−Δ)^{−1/2}φ_n‖²` over the square of half-width 1 about the centre,
/// trapezoidal in each axis.
pub fn y2_mass(space: SpaceGrid, n: f64) -> Result<f64> {
    if space.dim != 2 {
        return Err(Error::invalid("the mollifier mass is defined on 2-D grids"));
    }
    let h = space.spacing();
    let steps = 1.0 / h;
    if space.length <= 2.0 || (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::invalid("the box must exceed 2 and 1/h must be an integer"));
    }
    let f = spectral::frac_laplacian(&mollifier_2d(space, n), -1.0);
    let c = 0.5 * space.length;
    let weight = |x: f64| {
        let d = (x - c).abs();
        if d < 1.0 - 0.5 * h {
            1.0
        } else if d < 1.0 + 0.5 * h {
            0.5
        } else {
            0.0
        }
    };
    let total: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(s, v)| {
            let p = space.position(s);
            weight(p[0]) * weight(p[1]) * v * v
        })
        .sum();
    Ok(total * h * h)
}

/// Grows like `ln n / (2π)`: the kernel of `(−Δ)^{−1/2}` in the plane is
/// `1/(2π|y|)`, which is not square integrable at the origin.
pub fn cx_y2_unbounded(n_list: &[f64], setup: &Y2Setup) -> Result<TrendReport> {
    let space = SpaceGrid::new(2, setup.length, setup.n_space)?;
    let coarse_space = SpaceGrid::new(2, setup.length, setup.n_space / 2)?;
    let mut measured = Vec::with_capacity(n_list.len());
    let mut coarse = Vec::with_capacity(n_list.len());
    for &n in n_list {
        measured.push(y2_mass(space, n)?);
        coarse.push(y2_mass(coarse_space, n)?);
    }
    let regressor: Vec<f64> = n_list.iter().map(|n| n.ln()).collect();
    let checks = richardson_checks(&measured, &coarse, index_of_max(&regressor));
    TrendReport::assemble(
        CaseId::Y2Unbounded,
        "mass ≈ slope·ln n + intercept",
        n_list,
        regressor,
        measured,
        checks,
        BTreeMap::new(),
    )
}

// ---------------------------------------------------------------------------
// L¹ mass of a Hilbert transform (1-D)

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HilbertSetup {
    pub period: f64,
    pub n_space: usize,
}

impl HilbertSetup {
    pub fn preset(preset: GridPreset) -> Self {
        match preset {
            GridPreset::Desk => Self { period: 1024.0, n_space: 1 << 16 },
            GridPreset::Quick => Self { period: 256.0, n_space: 1 << 14 },
        }
    }
}

/// The even bump `e^{−1/(1−ξ²)}` on `(−1, 1)`.
pub fn even_bump(xi: f64) -> f64 {
    if xi.abs() < 1.0 {
        (-1.0 / (1.0 - xi * xi)).exp()
    } else {
        0.0
    }
}

/// `H(φ̂)` for the even bump, centred in a box of the given period.
pub fn hilbert_of_bump(space: SpaceGrid) -> Result<SpatialField> {
    let c = 0.5 * space.length;
    let f = SpatialField::from_fn(space, 1, |_, p| even_bump(p[0] - c));
    spectral::hilbert_1d(&f)
}

/// `∫_{−R}^{R} |H(φ̂)|` by Simpson's rule on each half line (`H(φ̂)` is odd
/// and smooth, so the kink of `|H|` sits at a node).
fn hilbert_mass(h_field: &SpatialField, r: f64) -> Result<f64> {
    let space = h_field.space();
    let h = space.spacing();
    let steps = r / h;
    let m = steps.round() as usize;
    if (steps - m as f64).abs() > 1e-9 || m % 2 != 0 || m == 0 {
        return Err(Error::invalid(format!("R={r} must be a positive multiple of 2h = {}", 2.0 * h)));
    }
    let mid = space.n / 2;
    if m >= mid {
        return Err(Error::invalid(format!("R={r} must stay below half the period")));
    }
    let v = h_field.values();
    let simpson = |side: &dyn Fn(usize) -> f64| {
        let mut s = side(0) + side(m);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * side(i);
        }
        s * h / 3.0
    };
    let right = simpson(&|i| v[mid + i].abs());
    let left = simpson(&|i| v[mid - i].abs());
    Ok(right + left)
}

/// `∫_{−R}^{R}|H(φ̂)|` grows like `(2/π)‖φ̂‖₁ ln R` since `H(φ̂)(ξ) ~ ∫φ̂/(πξ)`.
pub fn cx_hilbert_l1(r_list: &[f64], setup: &HilbertSetup) -> Result<TrendReport> {
    let fine = hilbert_of_bump(SpaceGrid::new(1, setup.period, setup.n_space)?)?;
    let coarse = hilbert_of_bump(SpaceGrid::new(1, setup.period, setup.n_space / 2)?)?;
    let measured = r_list.iter().map(|&r| hilbert_mass(&fine, r)).collect::<Result<Vec<_>>>()?;
    let coarse_vals = r_list.iter().map(|&r| hilbert_mass(&coarse, r)).collect::<Result<Vec<_>>>()?;
    let regressor: Vec<f64> = r_list.iter().map(|r| r.ln()).collect();
    let checks = richardson_checks(&measured, &coarse_vals, index_of_max(&regressor));
    // ‖φ̂‖₁ does not depend on R.
    let l1 = integrate(even_bump, -1.0, 1.0, 1e-12).value;
    let notes = BTreeMap::from([("phi_l1".to_string(), l1)]);
    TrendReport::assemble(
        CaseId::HilbertL1,
        "I(R) ≈ slope·ln R + intercept",
        r_list,
        regressor,
        measured,
        checks,
        notes,
    )
}

// ---------------------------------------------------------------------------
// The divergent time integral behind the 𝒴_KT target counterexample

/// `∫₀^{1−δ} ds / ((1−s)|ln(2−2s)|^{3/4})` for `δ ∈ (0, 1/4)`.
///
/// Near `s = 1/2` the substitution `s = 1/2 ∓ w⁴` removes the `|ln|^{−3/4}`
/// singularity; on `[3/4, 1−δ]` the variable `y = −ln(1−s)` turns the
/// integrand into `(y − ln 2)^{−3/4}`.
pub fn kt_blowup_integral(delta: f64, rel_tol: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::invalid(format!("δ must lie in (0, 1/4) (got {delta})")));
    }
    let below = integrate(
        |w| {
            let w4 = w.powi(4);
            4.0 * w.powi(3) / ((0.5 + w4) * (2.0 * w4).ln_1p().powf(0.75))
        },
        0.0,
        0.5f64.powf(0.25),
        rel_tol,
    );
    let above = integrate(
        |w| {
            let w4 = w.powi(4);
            4.0 * w.powi(3) / ((0.5 - w4) * (-(-2.0 * w4).ln_1p()).powf(0.75))
        },
        0.0,
        0.25f64.powf(0.25),
        rel_tol,
    );
    let ln2 = std::f64::consts::LN_2;
    let tail = integrate(|y| (y - ln2).powf(-0.75), 4f64.ln(), (1.0 / delta).ln(), rel_tol);
    Ok(below.value + above.value + tail.value)
}

/// The integral grows like `4(ln(1/(2δ)))^{1/4}`.
pub fn cx_kt_blowup(delta_list: &[f64]) -> Result<TrendReport> {
    let mut measured = Vec::with_capacity(delta_list.len());
    let mut refinement: f64 = 0.0;
    for &d in delta_list {
        let fine = kt_blowup_integral(d, 1e-12)?;
        let loose = kt_blowup_integral(d, 1e-10)?;
        refinement = refinement.max(relative_change(fine, loose));
        measured.push(fine);
    }
    let regressor: Vec<f64> = delta_list.iter().map(|d| (1.0 / (2.0 * d)).ln().powf(0.25)).collect();
    TrendReport::assemble(
        CaseId::KtBlowup,
        "I(δ) ≈ slope·(ln(1/(2δ)))^{1/4} + intercept",
        delta_list,
        regressor,
        measured,
        vec![Check::at_most("richardson", refinement, 1e-8)],
        BTreeMap::new(),
    )
}

// ---------------------------------------------------------------------------
// Multiplier gap: concentrating time profiles against the (t−s)^{−1/2} kernel

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSetup {
    /// Product-rule nodes for the inner integral.
    pub nodes: usize,
}

impl MultiplierSetup {
    pub fn preset(preset: GridPreset) -> Self {
        match preset {
            GridPreset::Desk => Self { nodes: 2048 },
            GridPreset::Quick => Self { nodes: 512 },
        }
    }
}

fn raw_theta_sq(s: f64) -> f64 {
    if s > 0.0 && s < 1.0 {
        (-2.0 / (s * (1.0 - s))).exp()
    } else {
        0.0
    }
}

/// `θ(s) = C e^{−1/(s(1−s))}` on `(0, 1)` with `‖θ‖₂ = 1`.
#[derive(Clone, Copy, Debug)]
pub struct Theta {
    scale_sq: f64,
}

impl Theta {
    pub fn new() -> Self {
        let mass = integrate(raw_theta_sq, 0.0, 1.0, 1e-14).value;
        Self { scale_sq: 1.0 / mass }
    }

    pub fn square(&self, s: f64) -> f64 {
        self.scale_sq * raw_theta_sq(s)
    }

    /// `ω_ε(s) = ε^{−1/2} θ(s/ε)`
    pub fn omega(&self, eps: f64, s: f64) -> f64 {
        (self.square(s / eps) / eps).sqrt()
    }
}

impl Default for Theta {
    fn default() -> Self {
        Self::new()
    }
}

/// `∫₀ᵗ (t−s)^{−1/2} ω_ε²(s) ds = ε^{−1/2} ∫₀^{min(τ,1)} (τ−σ)^{−1/2} θ²(σ) dσ`
/// with `τ = t/ε`, by the product rule on `nodes` uniform nodes.
fn gap_inner(theta: &Theta, eps: f64, t: f64, nodes: usize) -> Result<f64> {
    let tau = t / eps;
    let upper = tau.min(1.0);
    let xs: Vec<f64> = (0..nodes).map(|i| upper * i as f64 / (nodes - 1) as f64).collect();
    let w = product_singular_weights(&xs, tau)?;
    Ok(w.iter().zip(&xs).map(|(w, x)| w * theta.square(*x)).sum::<f64>() / eps.sqrt())
}

/// `J(ε) = ∫₀¹ (∫₀ᵗ (t−s)^{−1/2} ω_ε²(s) ds)² dt`; the outer integral runs in
/// `ln t` on `(ε, 1)` where the inner one behaves like `t^{−1/2}`.
pub fn multiplier_gap_integral(theta: &Theta, eps: f64, nodes: usize) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("ε must lie in (0, 1) (got {eps})")));
    }
    if nodes < 2 {
        return Err(Error::invalid("the inner rule needs at least two nodes"));
    }
    let mut failure = None;
    let mut inner = |t: f64| match gap_inner(theta, eps, t, nodes) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let head = integrate(|t| inner(t).powi(2), 0.0, eps, 1e-9).value;
    let tail = integrate(
        |u| {
            let t = u.exp();
            inner(t).powi(2) * t
        },
        eps.ln(),
        0.0,
        1e-9,
    )
    .value;
    match failure {
        Some(e) => Err(e),
        None => Ok(head + tail),
    }
}

/// `J(ε)` grows like `ln(1/ε)`: the inner integral tends to `t^{−1/2}`.
pub fn cx_multiplier_gap(eps_list: &[f64], setup: &MultiplierSetup) -> Result<TrendReport> {
    let theta = Theta::new();
    let mut measured = Vec::with_capacity(eps_list.len());
    let mut coarse = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        measured.push(multiplier_gap_integral(&theta, eps, setup.nodes)?);
        coarse.push(multiplier_gap_integral(&theta, eps, setup.nodes / 2)?);
    }
    let regressor: Vec<f64> = eps_list.iter().map(|e| (1.0 / e).ln()).collect();
    let checks = richardson_checks(&measured, &coarse, index_of_max(&regressor));
    TrendReport::assemble(
        CaseId::MultiplierGap,
        "J(ε) ≈ slope·ln(1/ε) + intercept",
        eps_list,
        regressor,
        measured,
        checks,
        BTreeMap::new(),
    )
}

// ---------------------------------------------------------------------------
// 𝒴_KT × L²𝒜 → 𝒴_KT obstruction (3-D, profiles shrinking like √(1−t))

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstructionSetup {
    pub length: f64,
    pub n_space: usize,
    /// Ladder step in `y = −ln(1−s)`.
    pub dy: f64,
}

impl ObstructionSetup {
    pub fn preset(preset: GridPreset) -> Self {
        let length = 4.0 * std::f64::consts::PI;
        match preset {
            GridPreset::Desk => Self { length, n_space: 128, dy: 0.05 },
            GridPreset::Quick => Self { length, n_space: 64, dy: 0.1 },
        }
    }
}

/// Radial bump with unit integral over ℝ³, supported in the shell `a < |ζ| < b`
/// (`a = 0` gives a ball).
#[derive(Clone, Copy, Debug)]
pub struct ShellBump {
    inner: f64,
    outer: f64,
    scale: f64,
}

impl ShellBump {
    pub fn new(inner: f64, outer: f64) -> Self {
        let mut b = Self { inner, outer, scale: 1.0 };
        let mass = integrate(|r| 4.0 * std::f64::consts::PI * r * r * b.eval(r), inner, outer, 1e-13);
        b.scale = 1.0 / mass.value;
        b
    }

    pub fn eval(&self, r: f64) -> f64 {
        if self.inner == 0.0 {
            if r < self.outer {
                let x = r / self.outer;
                self.scale * (-1.0 / (1.0 - x * x)).exp()
            } else {
                0.0
            }
        } else if r > self.inner && r < self.outer {
            let half = 0.5 * (self.outer - self.inner);
            let x = (r - 0.5 * (self.inner + self.outer)) / half;
            self.scale * (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    }
}

/// Weights of `∫ f(y) |y − c|^{−3/4} dy` over the ladder with `f` linear between
/// nodes; `c` must be a node or lie outside the ladder.
fn log_singular_weights(nodes: &[f64], c: f64) -> Vec<f64> {
    let mut w = vec![0.0; nodes.len()];
    for p in 0..nodes.len() - 1 {
        let (z0, z1) = ((nodes[p] - c).abs(), (nodes[p + 1] - c).abs());
        let a = 4.0 * (z1.powf(0.25) - z0.powf(0.25)).abs();
        let b = 0.8 * (z1.powf(1.25) - z0.powf(1.25)).abs();
        let lin = (b - z0 * a) / (z1 - z0);
        w[p] += a - lin;
        w[p + 1] += lin;
    }
    w
}

/// Ladder in `y = −ln(1−s)` from 0 to `ln(1/δ_min)`: uniform steps plus the
/// singular point `ln 2` and every cutoff `ln(1/δ)` as nodes.
fn obstruction_ladder(deltas: &[f64], dy: f64) -> Vec<f64> {
    let y_max = deltas.iter().map(|d| (1.0 / d).ln()).fold(0.0, f64::max);
    let mut special: Vec<f64> = deltas.iter().map(|d| (1.0 / d).ln()).collect();
    special.push(std::f64::consts::LN_2);
    let steps = (y_max / dy).ceil() as usize;
    let mut nodes: Vec<f64> = (0..=steps)
        .map(|i| i as f64 * dy)
        .filter(|y| *y <= y_max && special.iter().all(|s| (y - s).abs() > 0.25 * dy))
        .collect();
    nodes.extend(special);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    nodes
}

/// `√t‖B_{σ₀}(u,v)(t)‖_∞` at `t = 1` for `u = φ_{√(1−s)}`,
/// `v = ψ_{√(1−s)} / (√(1−s)|ln(2−2s)|^{3/4})` truncated to `s ≤ 1−δ`, with
/// `φ̂ ≥ 0` on the unit ball and `ψ̂ ≥ 0` on the shell `2 < |ξ| < 4` realized by
/// exact spectral sampling. Grows like the truncated integral of [`cx_kt_blowup`].
pub fn cx_ykt_obstruction(delta_list: &[f64], setup: &ObstructionSetup) -> Result<TrendReport> {
    let space = SpaceGrid::new(3, setup.length, setup.n_space)?;
    if delta_list.iter().any(|d| !(*d > 0.0 && *d < 0.5)) {
        return Err(Error::invalid("cutoffs δ must lie in (0, 1/2)"));
    }
    let d_min = delta_list.iter().copied().fold(f64::INFINITY, f64::min);
    // The product uv has spectral support in |ξ| < 5/√δ; keep it (and its
    // unpadded lattice product) below the Nyquist frequency.
    let nyquist = std::f64::consts::PI / space.spacing();
    if 10.0 / d_min.sqrt() >= 2.0 * nyquist - 1e-12 {
        return Err(Error::invalid(format!(
            "δ={d_min} needs |ξ| up to {:.1}, beyond the resolvable {:.1}",
            5.0 / d_min.sqrt(),
            nyquist
        )));
    }
    let phi = ShellBump::new(0.0, 1.0);
    let psi = ShellBump::new(2.0, 4.0);
    let plan = FftNd::for_space(&space);
    let n = space.len();
    let norms_sq = space.wavevector_norms_sq();
    let dxi3 = (2.0 * std::f64::consts::PI / space.length).powi(3);
    let nodes = obstruction_ladder(delta_list, setup.dy);

    let spectrum_of = |bump: &ShellBump, eps: f64| -> Vec<Complex64> {
        norms_sq
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let v = if space.is_nyquist(i) { 0.0 } else { bump.eval(eps * a.sqrt()) };
                Complex64::new(n as f64 * eps.powi(3) * v * dxi3, 0.0)
            })
            .collect()
    };
    // Spectral integrand at node y: e^{−e^{−y}|ξ|²}|ξ| e^{−y/2} (φ_ε ψ_ε)^.
    let mut worst_negative: f64 = 0.0;
    let mut integrand = |y: f64| -> Vec<Complex64> {
        let eps = (-0.5 * y).exp();
        let u = plan.inverse_real(spectrum_of(&phi, eps));
        let v = plan.inverse_real(spectrum_of(&psi, eps));
        let prod: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
        let spec = plan.forward_real(&prod);
        let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let lowest = spec.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if peak > 0.0 {
            worst_negative = worst_negative.max(-lowest / peak);
        }
        let decay = (-y).exp();
        spec.iter()
            .zip(&norms_sq)
            .map(|(c, a)| c * ((-decay * a).exp() * a.sqrt() * (-0.5 * y).exp()))
            .collect()
    };

    let cutoffs: Vec<f64> = delta_list.iter().map(|d| (1.0 / d).ln()).collect();
    let mut snapshots: Vec<Option<Vec<Complex64>>> = vec![None; delta_list.len()];
    let mut acc = vec![Complex64::default(); n];
    let mut left = integrand(nodes[0]);
    for p in 0..nodes.len() - 1 {
        let pair = [nodes[p], nodes[p + 1]];
        let w = log_singular_weights(&pair, std::f64::consts::LN_2);
        let right = integrand(nodes[p + 1]);
        for ((a, l), r) in acc.iter_mut().zip(&left).zip(&right) {
            *a += l * w[0] + r * w[1];
        }
        for (slot, &y) in snapshots.iter_mut().zip(&cutoffs) {
            if (y - nodes[p + 1]).abs() < 1e-12 {
                *slot = Some(acc.clone());
            }
        }
        left = right;
    }
    let t = 1.0f64;
    let mut measured = Vec::with_capacity(delta_list.len());
    let mut worst_output: f64 = 0.0;
    for snap in snapshots {
        let spec = snap.ok_or_else(|| Error::invalid("cutoff missing from the ladder"))?;
        let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let lowest = spec.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if peak > 0.0 {
            worst_output = worst_output.max(-lowest / peak);
        }
        let field = plan.inverse_real(spec);
        measured.push(t.sqrt() * field.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let regressor: Vec<f64> = delta_list.iter().map(|d| (1.0 / (2.0 * d)).ln().powf(0.25)).collect();
    TrendReport::assemble(
        CaseId::YktObstruction,
        "sup|B(u,v)(1)| ≈ slope·(ln(1/(2δ)))^{1/4} + intercept",
        delta_list,
        regressor,
        measured,
        vec![
            Check::at_most("fourier_negativity_integrand", worst_negative, 1e-10),
            Check::at_most("fourier_negativity_output", worst_output, 1e-10),
        ],
        BTreeMap::from([("ladder_nodes".to_string(), nodes.len() as f64)]),
    )
}

// ---------------------------------------------------------------------------
// Ensemble sweeps of the Duhamel estimates

/// Seeded ensemble description.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub size: usize,
    pub seed: u64,
}

impl Ensemble {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    fn check(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("ensemble size must be positive"));
        }
        Ok(())
    }
}

/// Heat extension of random smooth scalar data (`|k| ≤ 2` lattice modes).
pub fn smooth_scalar(grid: &Grid, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let space = grid.space();
    TrigSeries::random(rng, space.dim, space.length, 1, 2).heat_extension(grid)
}

/// Nonnegative space-time Gaussian bumps sized relative to the box and ladder.
pub fn bump_scalar(grid: &Grid, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let space = grid.space();
    let l = space.length;
    let ranges = BumpRanges {
        count: 3,
        width: (0.12 * l, 0.2 * l),
        t_center: (2.0 * grid.t_min(), 0.5 * grid.t_max()),
        t_spread: (0.5, 1.0),
        nonnegative: true,
    };
    BumpField::random(rng, space.dim, l, 1, &ranges).sample(grid)
}

/// `abs`, `xi<j>` or `leray<i><j><k>`.
pub fn symbol_by_name(name: &str, dim: usize) -> Result<Symbol> {
    let digits = |s: &str| -> Option<Vec<usize>> {
        s.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect()
    };
    let bad = || Error::invalid(format!("unknown symbol '{name}' for dim={dim}"));
    if name == "abs" {
        return Ok(Symbol::abs());
    }
    if let Some(rest) = name.strip_prefix("xi") {
        return match digits(rest).as_deref() {
            Some([j]) if *j < dim => Ok(Symbol::derivative(*j)),
            _ => Err(bad()),
        };
    }
    if let Some(rest) = name.strip_prefix("leray") {
        return match digits(rest).as_deref() {
            Some([i, j, k]) if *i < dim && *j < dim && *k < dim => {
                Ok(Symbol::leray_divergence(*i, *j, *k))
            }
            _ => Err(bad()),
        };
    }
    Err(bad())
}

/// Empirical kernel-domination constant over pairs of nonnegative bump fields.
pub fn kernel_domination_sweep(sigma: &Symbol, grid: &Grid, ensemble: &Ensemble) -> Result<EstimateReport> {
    ensemble.check()?;
    let mut rng = ensemble.rng(1);
    let mut per_sample = Vec::new();
    let mut details = Vec::new();
    for _ in 0..ensemble.size {
        let u = bump_scalar(grid, &mut rng);
        let v = bump_scalar(grid, &mut rng);
        let d = duhamel::kernel_domination_residual(sigma, &u, &v, &KernelSampling::default())?;
        per_sample.push(d.c_emp);
        details.push(d);
    }
    let worst = details.iter().map(|d| d.max_violation).fold(0.0, f64::max);
    let i = index_of_max(&per_sample);
    EstimateReport::new(
        format!("kernel_domination[{}]", sigma.name()),
        grid,
        per_sample,
        json!({"sample": i, "detail": details[i], "max_violation_all": worst}),
    )
}

/// The split pieces' Carleson constants
/// `‖𝟙_{Q_{T,x}} wᵢ‖_{L²L²} / (T^{d/4}‖u‖_{𝒴_KT}‖v‖_{𝒴_KT})`, one report per piece,
/// at the box centre. `t` defaults to the ladder's middle time.
///
/// For refinement studies pick `T` so that `√T` is a whole number of lattice
/// spacings at every level; otherwise the ball's lattice count dominates the drift.
pub fn kt_split_sweep(
    sigma: &Symbol,
    grid: &Grid,
    t: Option<f64>,
    ensemble: &Ensemble,
    config: &NormConfig,
) -> Result<Vec<EstimateReport>> {
    ensemble.check()?;
    let space = grid.space();
    let t = match t {
        Some(t) => {
            let k = grid
                .time_index(t)
                .ok_or_else(|| Error::invalid(format!("T={t} is not a ladder time")))?;
            grid.times()[k]
        }
        None => grid.times()[grid.n_time() / 2],
    };
    let mut x = [0.0; 3];
    for c in x.iter_mut().take(space.dim) {
        *c = 0.5 * space.length;
    }
    let region = CylinderSpec::Q { t, center: x };
    let mask = cylinder_mask(grid, &region);
    let mut rng = ensemble.rng(2);
    let mut pieces = [Vec::new(), Vec::new(), Vec::new()];
    let mut reconstruction: f64 = 0.0;
    let mut saturated = false;
    for _ in 0..ensemble.size {
        let u = smooth_scalar(grid, &mut rng);
        let v = smooth_scalar(grid, &mut rng);
        let split = duhamel::kt_split(sigma, &u, &v, t, x)?;
        saturated |= split.saturated;
        let full = duhamel::bilinear_sigma(sigma, &u, &v)?;
        let sum = split.w1.add(&split.w2)?.add(&split.w3)?;
        reconstruction = reconstruction.max(relative_change_field(&sum, &full)?);
        let scale = t.powf(space.dim as f64 / 4.0)
            * norms::norm_ykt(&u, config)?.value
            * norms::norm_ykt(&v, config)?.value;
        for (slot, w) in pieces.iter_mut().zip([&split.w1, &split.w2, &split.w3]) {
            slot.push(restrict(w, &mask)?.l2l2_norm() / scale);
        }
    }
    let mut out = Vec::new();
    for (name, per_sample) in ["w1", "w2", "w3"].into_iter().zip(pieces) {
        let i = index_of_max(&per_sample);
        out.push(EstimateReport::new(
            format!("kt_split.{name}[{}]", sigma.name()),
            grid,
            per_sample,
            json!({
                "sample": i,
                "region": region,
                "saturated": saturated,
                "max_reconstruction_error": reconstruction,
            }),
        )?);
    }
    Ok(out)
}

fn relative_change_field(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    let diff = a.sub(b)?.l2l2_norm();
    let scale = b.l2l2_norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Fefferman–Phong ratios over pairs of bump fields.
pub fn fefferman_phong_sweep(
    grid: &Grid,
    beta: f64,
    p: f64,
    ensemble: &Ensemble,
    config: &NormConfig,
) -> Result<EstimateReport> {
    ensemble.check()?;
    let mut rng = ensemble.rng(3);
    let mut per_sample = Vec::new();
    let mut degenerate = 0;
    for _ in 0..ensemble.size {
        let f = bump_scalar(grid, &mut rng);
        let g = bump_scalar(grid, &mut rng);
        match duhamel::fefferman_phong_ratio(&f, &g, beta, p, config)?.value() {
            Some(r) => per_sample.push(r),
            None => degenerate += 1,
        }
    }
    let i = index_of_max(&per_sample);
    EstimateReport::new(
        format!("fefferman_phong[beta={beta},p={p}]"),
        grid,
        per_sample,
        json!({"sample": i, "degenerate": degenerate}),
    )
}

/// Band bound ratios `‖U‖/(‖v‖·sup T^{1/2−D/(2q)}‖𝟙_R u‖_𝓜)` with smooth `u` and bump `v`.
pub fn band_sweep(grid: &Grid, q: f64, ensemble: &Ensemble, config: &NormConfig) -> Result<EstimateReport> {
    ensemble.check()?;
    let mut rng = ensemble.rng(4);
    let mut per_sample = Vec::new();
    let mut defect: f64 = 0.0;
    let mut degenerate = 0;
    for _ in 0..ensemble.size {
        let u = smooth_scalar(grid, &mut rng);
        let v = bump_scalar(grid, &mut rng);
        let out = duhamel::band_u(&u, &v, q, config)?;
        defect = defect.max(out.band_defect);
        match out.bound_ratio.value() {
            Some(r) => per_sample.push(r),
            None => degenerate += 1,
        }
    }
    let i = index_of_max(&per_sample);
    EstimateReport::new(
        format!("band_u[q={q}]"),
        grid,
        per_sample,
        json!({"sample": i, "max_band_defect": defect, "degenerate": degenerate}),
    )
}

/// Embedding constants `‖u‖_{𝒴_{KT,q}}/‖u‖_{𝒴_KT}` and
/// `‖u‖_{𝓜̇₂^{2,D}}/‖u‖_{𝒴_{KT,q}}` over smooth heat extensions.
pub fn embedding_sweep(
    grid: &Grid,
    q: f64,
    ensemble: &Ensemble,
    config: &NormConfig,
) -> Result<[EstimateReport; 2]> {
    ensemble.check()?;
    let dd = grid.space().parabolic_dim();
    let mut rng = ensemble.rng(5);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for _ in 0..ensemble.size {
        let u = smooth_scalar(grid, &mut rng);
        let kt = norms::norm_ykt(&u, config)?.value;
        let ktq = norms::norm_yktq(&u, q, config)?.value;
        let morrey = norms::norm_morrey(&u, 2.0, dd, config)?.value;
        first.push(ktq / kt);
        second.push(morrey / ktq);
    }
    let a = index_of_max(&first);
    let b = index_of_max(&second);
    Ok([
        EstimateReport::new(format!("embedding.ykt->yktq[q={q}]"), grid, first, json!({"sample": a}))?,
        EstimateReport::new(format!("embedding.yktq->morrey[q={q},p=2]"), grid, second, json!({"sample": b}))?,
    ])
}

// ---------------------------------------------------------------------------
// Solve presets

impl GridInfo {
    pub fn build(&self) -> Result<Grid> {
        make_grid(
            self.dim,
            self.length,
            self.n_space,
            self.t_min,
            self.t_max,
            self.n_time,
            self.spacing,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolvePreset {
    /// Exact solution with matching forcing; needs `L = 2π`, `dim ≥ 2`.
    Manufactured { eps: f64 },
    /// `u₀ = ε(sin(2πx₂/L), 0, …)`, no forcing.
    SingleMode { eps: f64 },
    /// Random solenoidal data with `|k| ≤ kmax`, no forcing.
    RandomData { amplitude: f64, kmax: i32, seed: u64 },
    /// Random data plus `F₁` (heat extension of smooth tensor data) and `F₂`
    /// (localized space-time bumps).
    SplitForcing { amplitude: f64, seed: u64 },
    /// NSF1 files: a spatial `u₀` and optional `d²`-component forcing parts on
    /// the configured grid.
    Files {
        u0: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f1: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f2: Option<PathBuf>,
    },
}

impl SolvePreset {
    /// The problem and, for manufactured data, the exact solution.
    pub fn build(&self, grid: &Grid) -> Result<(ProblemData, Option<SpaceTimeField>)> {
        let space = grid.space();
        let d = space.dim;
        if d < 2 {
            return Err(Error::invalid("solve presets need dim >= 2"));
        }
        match self {
            &SolvePreset::Manufactured { eps } => {
                let (data, w) = solver::manufactured(grid, eps)?;
                Ok((data, Some(w)))
            }
            &SolvePreset::SingleMode { eps } => {
                let k = 2.0 * std::f64::consts::PI / space.length;
                let u0 = SpatialField::from_fn(space, d, |c, p| {
                    if c == 0 {
                        eps * (k * p[1]).sin()
                    } else {
                        0.0
                    }
                });
                Ok((ProblemData::unforced(grid.clone(), u0)?, None))
            }
            &SolvePreset::RandomData { amplitude, kmax, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u0 = random_solenoidal(&mut rng, space, kmax).scaled(amplitude);
                Ok((ProblemData::unforced(grid.clone(), u0)?, None))
            }
            &SolvePreset::SplitForcing { amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u0 = random_solenoidal(&mut rng, space, 2).scaled(amplitude);
                let f1 = TrigSeries::random(&mut rng, d, space.length, d * d, 2)
                    .heat_extension(grid)
                    .scaled(amplitude);
                let ranges = BumpRanges {
                    count: 2 * d * d,
                    width: (0.1 * space.length, 0.2 * space.length),
                    t_center: (2.0 * grid.t_min(), 0.5 * grid.t_max()),
                    t_spread: (0.3, 0.6),
                    nonnegative: false,
                };
                let f2 = BumpField::random(&mut rng, d, space.length, d * d, &ranges)
                    .sample(grid)
                    .scaled(amplitude);
                Ok((ProblemData::new(grid.clone(), u0, Some(f1), Some(f2))?, None))
            }
            SolvePreset::Files { u0, f1, f2 } => {
                let u0 = crate::io::load_spatial(u0)?;
                if !u0.space().compatible(&space) {
                    return Err(Error::GridMismatch("u0 file and configured grid differ".into()));
                }
                let load = |path: &Option<PathBuf>| -> Result<Option<SpaceTimeField>> {
                    let Some(path) = path else { return Ok(None) };
                    let f = crate::io::load_field(path)?;
                    if !f.grid().compatible(grid) {
                        return Err(Error::GridMismatch(format!(
                            "{}: forcing grid differs from the configured grid",
                            path.display()
                        )));
                    }
                    Ok(Some(f))
                };
                Ok((ProblemData::new(grid.clone(), u0, load(f1)?, load(f2)?)?, None))
            }
        }
    }

    /// Relative file paths are taken relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let SolvePreset::Files { u0, f1, f2 } = self {
            for path in std::iter::once(u0).chain(f1.iter_mut()).chain(f2.iter_mut()) {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }
}

/// Everything a `solve` run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub grid: GridInfo,
    pub preset: SolvePreset,
    #[serde(default)]
    pub options: SolveOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub trace: SolutionTrace,
    /// `‖u − w‖_{L²L²}/‖w‖_{L²L²}` against the exact solution, when known.
    pub recovery_error: Option<f64>,
}

pub fn run_solve(config: &SolveConfig) -> Result<SolveOutcome> {
    let grid = config.grid.build()?;
    let (data, exact) = config.preset.build(&grid)?;
    let trace = solver::picard_solve(&data, &config.options)?;
    let recovery_error = match (&exact, &trace.solution) {
        (Some(w), Some(u)) => Some(relative_change_field(u, w)?),
        _ => None,
    };
    Ok(SolveOutcome { trace, recovery_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeSpacing;

    #[test]
    fn line_fit_recovers_exact_lines_and_clamps_r2() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept + 1.0).abs() < 1e-12);
        assert_eq!(fit.r2, 1.0);
        let flat = fit_line(&x, &[2.0; 4]).unwrap();
        assert_eq!((flat.slope, flat.r2), (0.0, 1.0));
        let noisy = fit_line(&x, &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((0.0..=1.0).contains(&noisy.r2));
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn sweeps_must_be_positive_and_monotone() {
        let mut cfg = ExperimentConfig::new(CaseId::KtBlowup);
        assert!(cfg.validated_sweep().is_ok());
        cfg.sweep = vec![1e-2, 1e-3, 1e-3];
        assert!(cfg.validated_sweep().is_err());
        cfg.sweep = vec![1e-2, -1e-3];
        assert!(cfg.validated_sweep().is_err());
        cfg.sweep = vec![1e-3, 1e-2];
        assert!(cfg.validated_sweep().is_ok());
        assert_eq!("kt-blowup".parse::<CaseId>().unwrap(), CaseId::KtBlowup);
        assert!("nope".parse::<CaseId>().is_err());
    }

    #[test]
    fn kt_integral_matches_closed_form() {
        // u = 1−s, v = ln(2u) turns the integral into ∫|v|^{−3/4} dv.
        for d in [0.2f64, 1e-2, 1e-4, 1e-6] {
            let exact = 4.0 * (1.0 / (2.0 * d)).ln().powf(0.25) + 4.0 * std::f64::consts::LN_2.powf(0.25);
            let got = kt_blowup_integral(d, 1e-12).unwrap();
            assert!((got - exact).abs() < 1e-9 * exact, "{d}: {got} vs {exact}");
        }
        assert!(kt_blowup_integral(0.25, 1e-10).is_err());
        assert!(kt_blowup_integral(0.0, 1e-10).is_err());
    }

    #[test]
    fn kt_trend_has_slope_four() {
        let r = cx_kt_blowup(&CaseId::KtBlowup.default_sweep()).unwrap();
        assert!((r.fit.slope - 4.0).abs() < 1e-6, "{:?}", r.fit);
        assert!(r.fit.r2 > 0.999999);
        assert!(r.monotone());
        assert!(r.check("richardson").unwrap().passed);
    }

    #[test]
    fn log_singular_weights_are_exact_for_linear_data() {
        let c = 0.7;
        let nodes = [0.0, 0.3, 0.7, 0.9, 1.6];
        let w = log_singular_weights(&nodes, c);
        let f = |y: f64| 2.0 - 0.5 * y;
        let got: f64 = w.iter().zip(&nodes).map(|(w, y)| w * f(*y)).sum();
        // Antiderivatives of |y−c|^{−3/4} and (y−c)|y−c|^{−3/4}.
        let m0 = |z: f64| 4.0 * z.powf(0.25);
        let m1 = |z: f64| 0.8 * z.powf(1.25);
        let left = f(c) * m0(c) + 0.5 * m1(c);
        let right = f(c) * m0(1.6 - c) - 0.5 * m1(1.6 - c);
        assert!((got - (left + right)).abs() < 1e-13, "{got} vs {}", left + right);
    }

    #[test]
    fn ladder_contains_singular_point_and_cutoffs() {
        let nodes = obstruction_ladder(&[0.25, 0.1], 0.1);
        for y in [std::f64::consts::LN_2, 4f64.ln(), 10f64.ln(), 0.0] {
            assert!(nodes.iter().any(|n| (n - y).abs() < 1e-12), "{y}");
        }
        assert!(nodes.windows(2).all(|w| w[1] - w[0] > 0.02));
    }

    #[test]
    fn symbols_parse_by_name() {
        assert_eq!(symbol_by_name("abs", 3).unwrap().name(), Symbol::abs().name());
        assert!(symbol_by_name("xi2", 3).is_ok());
        assert!(symbol_by_name("xi2", 2).is_err());
        assert!(symbol_by_name("leray010", 2).is_ok());
        assert!(symbol_by_name("leray01", 2).is_err());
        assert!(symbol_by_name("curl", 2).is_err());
    }

    #[test]
    fn csv_has_two_columns() {
        let r = cx_kt_blowup(&[1e-2, 1e-3]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "sweep,measured");
        assert_eq!(lines.len(), 3);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 2));
    }

    #[test]
    fn theta_is_normalized_for_every_scale() {
        let theta = Theta::new();
        for eps in [1.0, 1e-2, 1e-4] {
            let norm = integrate(|s| theta.omega(eps, s).powi(2), 0.0, eps, 1e-12).value;
            assert!((norm - 1.0).abs() < 1e-10, "{eps}: {norm}");
        }
    }

    #[test]
    fn solve_presets_build_valid_problems() {
        let g = make_grid(2, 2.0 * std::f64::consts::PI, 8, 0.01, 0.5, 6, TimeSpacing::Geometric).unwrap();
        for p in [
            SolvePreset::Manufactured { eps: 1e-3 },
            SolvePreset::SingleMode { eps: 1e-3 },
            SolvePreset::RandomData { amplitude: 1e-3, kmax: 2, seed: 3 },
            SolvePreset::SplitForcing { amplitude: 1e-3, seed: 3 },
        ] {
            let (data, exact) = p.build(&g).unwrap();
            assert_eq!(exact.is_some(), matches!(p, SolvePreset::Manufactured { .. }));
            assert_eq!(data.u0.components(), 2);
        }
    }
}
