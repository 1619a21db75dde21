//! Counterexample trends against independent quadrature oracles.

use std::f64::consts::{LN_2, PI};

use nscrit_core::harness::{
    cx_hilbert_l1, cx_kt_blowup, cx_multiplier_gap, cx_y2_unbounded, cx_ykt_obstruction, even_bump,
    multiplier_gap_integral, y2_mass, CaseId, ExperimentConfig, GridPreset, HilbertSetup,
    MultiplierSetup, ObstructionSetup, ShellBump, Theta, TrendReport, Y2Setup,
};
use nscrit_core::quadrature::integrate;
use nscrit_core::SpaceGrid;

/// `e^{−z} I₀(z) = (1/π)∫₀^π e^{−z(1−cos θ)} dθ`
fn scaled_i0(z: f64) -> f64 {
    integrate(|th| (-z * (1.0 - th.cos())).exp(), 0.0, PI, 1e-13).value / PI
}

/// `‖(−Δ)^{−1/2}φ_n‖²` over `(−1,1)²` in the plane, where
/// `(−Δ)^{−1/2}φ_n(r) = n/(2√π)·e^{−n²r²/2} I₀(n²r²/2)`.
fn plane_mass(n: f64) -> f64 {
    let f = |r: f64| n / (2.0 * PI.sqrt()) * scaled_i0(0.5 * n * n * r * r);
    let inner = |x: f64| integrate(|y| f((x * x + y * y).sqrt()).powi(2), 0.0, x, 1e-10).value;
    8.0 * integrate(inner, 0.0, 1.0, 1e-10).value
}

#[test]
fn y2_increments_match_the_planar_kernel() {
    let space = SpaceGrid::new(2, 8.0, 512).unwrap();
    let ns = [4.0, 8.0, 16.0];
    let spec: Vec<f64> = ns.iter().map(|&n| y2_mass(space, n).unwrap()).collect();
    let plane: Vec<f64> = ns.iter().map(|&n| plane_mass(n)).collect();
    for i in 0..2 {
        let (a, b) = (spec[i + 1] - spec[i], plane[i + 1] - plane[i]);
        assert!((a - b).abs() < 0.03 * b, "increment {i}: {a} vs {b}");
        // Each doubling adds about ln 2/(2π).
        assert!((b - LN_2 / (2.0 * PI)).abs() < 0.02 * b);
    }
}

#[test]
fn y2_baseline_is_finite_and_box_shifts_only_the_intercept() {
    let small = SpaceGrid::new(2, 4.0, 256).unwrap();
    let base = y2_mass(small, 1.0).unwrap();
    assert!(base.is_finite() && base > 0.0);
    let sweep = [2.0, 4.0, 8.0, 16.0];
    let a = cx_y2_unbounded(&sweep, &Y2Setup { length: 4.0, n_space: 256 }).unwrap();
    let b = cx_y2_unbounded(&sweep, &Y2Setup { length: 8.0, n_space: 512 }).unwrap();
    assert!(a.fit.slope > 0.0 && b.fit.slope > 0.0);
    assert!(a.fit.r2 >= 0.99 && b.fit.r2 >= 0.99);
    assert!((a.fit.intercept - b.fit.intercept).abs() > 0.05);
    assert!(a.monotone() && b.monotone());
}

/// `H(φ̂)(ξ) = (1/π) p.v.∫ φ̂(η)/(ξ−η) dη`, subtracting `φ̂(ξ)` inside the support.
fn hilbert_direct(xi: f64) -> f64 {
    if xi.abs() >= 1.0 {
        integrate(|e| even_bump(e) / (xi - e), -1.0, 1.0, 1e-12).value / PI
    } else {
        let f0 = even_bump(xi);
        // The difference quotient is bounded; a node landing on ξ contributes nothing.
        let q = |e: f64| if e == xi { 0.0 } else { (even_bump(e) - f0) / (xi - e) };
        let smooth = integrate(q, -1.0, 1.0, 1e-12).value;
        (smooth + f0 * ((1.0 + xi) / (1.0 - xi)).ln()) / PI
    }
}

#[test]
fn hilbert_mass_matches_direct_quadrature() {
    let rs = [2.0, 8.0, 32.0];
    let report = cx_hilbert_l1(&rs, &HilbertSetup::preset(GridPreset::Desk)).unwrap();
    for (r, got) in rs.iter().zip(&report.measured) {
        let inside = integrate(|x| hilbert_direct(x).abs(), 0.0, 1.0, 1e-9).value;
        let outside = integrate(|x| hilbert_direct(x).abs(), 1.0, *r, 1e-9).value;
        let want = 2.0 * (inside + outside);
        assert!((got - want).abs() < 2e-3 * want, "R={r}: {got} vs {want}");
    }
    // Slope approaches (2/π)‖φ̂‖₁ since H(φ̂) ~ ‖φ̂‖₁/(πξ).
    let l1 = report.notes["phi_l1"];
    assert!((report.fit.slope - 2.0 / PI * l1).abs() < 0.02 * report.fit.slope);
}

/// Inner integral by `σ = τ − w²`, which removes the `(τ−σ)^{−1/2}` singularity.
fn gap_direct(theta: &Theta, eps: f64) -> f64 {
    let inner = |t: f64| {
        let tau = t / eps;
        let upper = tau.min(1.0);
        let lo = (tau - upper).max(0.0).sqrt();
        2.0 * integrate(|w| theta.square(tau - w * w), lo, tau.sqrt(), 1e-12).value / eps.sqrt()
    };
    let head = integrate(|t| inner(t).powi(2), 0.0, eps, 1e-10).value;
    let tail = integrate(|u| inner(u.exp()).powi(2) * u.exp(), eps.ln(), 0.0, 1e-10).value;
    head + tail
}

#[test]
fn multiplier_gap_matches_substitution_oracle() {
    let theta = Theta::new();
    for eps in [1e-1, 1e-3] {
        let got = multiplier_gap_integral(&theta, eps, 1024).unwrap();
        let want = gap_direct(&theta, eps);
        assert!((got - want).abs() < 1e-5 * want, "ε={eps}: {got} vs {want}");
    }
    let r = cx_multiplier_gap(&[1e-1, 1e-2, 1e-3], &MultiplierSetup { nodes: 256 }).unwrap();
    assert!(r.monotone() && r.fit.r2 >= 0.99);
    assert!((r.fit.slope - 1.0).abs() < 0.05);
}

#[test]
fn kt_blowup_trend_and_range() {
    let r = cx_kt_blowup(&CaseId::KtBlowup.default_sweep()).unwrap();
    assert!((r.fit.slope - 4.0).abs() < 0.2 && r.fit.r2 >= 0.999);
    assert!(r.measured.windows(2).all(|w| w[1] > w[0]));
    assert!(cx_kt_blowup(&[0.3]).is_err());
}

/// `Σ_ξ B̂(1, ξ)` by lattice convolution of the coefficient supports and
/// adaptive quadrature in `s` (substituting `s = 1/2 ∓ w⁴` at the log singularity).
fn obstruction_direct(delta: f64) -> f64 {
    assert!((delta - 0.25).abs() < 1e-15, "the oracle covers s ≤ 3/4 only");
    let phi = ShellBump::new(0.0, 1.0);
    let psi = ShellBump::new(2.0, 4.0);
    let support = |radius: f64| -> Vec<[f64; 3]> {
        let m = radius.ceil() as i32;
        let mut out = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                for k in -m..=m {
                    out.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        out
    };
    let lattice_sum = |s: f64| -> f64 {
        let eps = (1.0 - s).sqrt();
        let norm = |v: &[f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let us: Vec<([f64; 3], f64)> = support(1.0 / eps)
            .into_iter()
            .map(|a| (a, eps.powi(3) * phi.eval(eps * norm(&a))))
            .filter(|(_, c)| *c > 0.0)
            .collect();
        let vs: Vec<([f64; 3], f64)> = support(4.0 / eps)
            .into_iter()
            .map(|b| (b, eps.powi(3) * psi.eval(eps * norm(&b))))
            .filter(|(_, c)| *c > 0.0)
            .collect();
        let mut total = 0.0;
        for (a, ca) in &us {
            for (b, cb) in &vs {
                let xi = norm(&[a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
                total += ca * cb * (-(1.0 - s) * xi * xi).exp() * xi;
            }
        }
        total
    };
    let below = integrate(
        |w| {
            let w4 = w.powi(4);
            let s = 0.5 - w4;
            4.0 * w.powi(3) * lattice_sum(s) / ((1.0 - s).sqrt() * (2.0 * w4).ln_1p().powf(0.75))
        },
        0.0,
        0.5f64.powf(0.25),
        1e-8,
    );
    let above = integrate(
        |w| {
            let w4 = w.powi(4);
            let s = 0.5 + w4;
            4.0 * w.powi(3) * lattice_sum(s) / ((1.0 - s).sqrt() * (-(-2.0 * w4).ln_1p()).powf(0.75))
        },
        0.0,
        0.25f64.powf(0.25),
        1e-8,
    );
    below.value + above.value
}

#[test]
fn obstruction_matches_direct_lattice_evaluation() {
    let setup = ObstructionSetup {
        length: 2.0 * PI,
        n_space: 32,
        dy: 0.02,
    };
    let got = cx_ykt_obstruction(&[0.25, 0.4], &setup).unwrap();
    let want = obstruction_direct(0.25);
    assert!((got.measured[0] - want).abs() < 1e-3 * want, "{} vs {want}", got.measured[0]);
    assert!(got.measured[0] > got.measured[1]);
}

#[test]
fn obstruction_grows_with_positive_spectrum() {
    let r = cx_ykt_obstruction(&[0.25, 0.16, 0.1], &ObstructionSetup::preset(GridPreset::Quick)).unwrap();
    assert!(r.monotone());
    assert!(r.check("fourier_negativity_integrand").unwrap().passed);
    assert!(r.check("fourier_negativity_output").unwrap().passed);
    assert!(r.measured[0].is_finite() && r.measured[0] > 0.0);
    // Too deep a cutoff for the lattice is refused rather than aliased.
    assert!(cx_ykt_obstruction(&[0.25, 0.04], &ObstructionSetup::preset(GridPreset::Quick)).is_err());
}

#[test]
fn reports_are_reproducible_and_export_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trend.csv");
    let mut cfg = ExperimentConfig::new(CaseId::HilbertL1);
    cfg.preset = GridPreset::Quick;
    cfg.sweep = vec![2.0, 4.0, 8.0];
    cfg.output = Some(path.clone());
    let a = cfg.run().unwrap();
    let b = cfg.run().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fit.r2.to_bits(), b.fit.r2.to_bits());
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv, a.to_csv());
    let json = serde_json::to_string(&a).unwrap();
    let back: TrendReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
}
