//! Solver symmetries and configuration plumbing.

use std::f64::consts::PI;

use nscrit_core::grid::{make_grid, TimeSpacing};
use nscrit_core::harness::{run_solve, SolveConfig, SolvePreset};
use nscrit_core::solver::{picard_solve, residual};
use nscrit_core::{GridInfo, NormConfig, SolveOptions, SpaceSelector};

fn options(space: SpaceSelector) -> SolveOptions {
    SolveOptions {
        space,
        norm: NormConfig { centers_per_axis: 4 },
        c0: Some(1.0),
        ..SolveOptions::default()
    }
}

#[test]
fn solutions_commute_with_lattice_translation() {
    let grid = make_grid(2, 2.0 * PI, 16, 1e-3, 1.0, 16, TimeSpacing::Geometric).unwrap();
    let (data, _) = SolvePreset::SplitForcing { amplitude: 0.05, seed: 2 }.build(&grid).unwrap();
    let shift = [3, -5, 0];
    let opts = options(SpaceSelector::Ykt);
    let u = picard_solve(&data, &opts).unwrap().solution.unwrap();
    let v = picard_solve(&data.shifted(shift), &opts).unwrap().solution.unwrap();
    let diff = v.sub(&u.shifted(shift)).unwrap().l2l2_norm();
    assert!(diff < 1e-12 * u.l2l2_norm(), "{diff}");
}

#[test]
fn small_data_scales_almost_linearly() {
    let grid = make_grid(2, 2.0 * PI, 16, 1e-3, 1.0, 16, TimeSpacing::Geometric).unwrap();
    let (data, _) = SolvePreset::RandomData { amplitude: 1.0, kmax: 2, seed: 5 }.build(&grid).unwrap();
    let opts = options(SpaceSelector::Ykt);
    let solve = |c: f64| picard_solve(&data.scaled(c), &opts).unwrap().solution.unwrap();
    // u(c) = c·u_lin − c²·B(u_lin, u_lin) + O(c³), so the deviation from
    // linearity shrinks quadratically.
    let dev = |c: f64| solve(c).sub(&solve(1e-4).scaled(c / 1e-4)).unwrap().l2l2_norm();
    let ratio = dev(2e-2) / dev(1e-2);
    assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
}

#[test]
fn residual_vanishes_only_at_the_fixed_point() {
    let grid = make_grid(2, 2.0 * PI, 16, 1e-3, 1.0, 16, TimeSpacing::Geometric).unwrap();
    let (data, exact) = SolvePreset::Manufactured { eps: 0.05 }.build(&grid).unwrap();
    let w = exact.unwrap();
    assert!(residual(&data, &w).unwrap() < 1e-4 * w.l2l2_norm());
    assert!(residual(&data, &w.scaled(1.01)).unwrap() > 1e-3 * w.l2l2_norm());
}

#[test]
fn config_json_round_trips_and_runs() {
    let grid = make_grid(2, 2.0 * PI, 8, 1e-3, 1.0, 12, TimeSpacing::Geometric).unwrap();
    let config = SolveConfig {
        grid: GridInfo::of(&grid),
        preset: SolvePreset::SplitForcing { amplitude: 0.05, seed: 1 },
        options: options(SpaceSelector::Sum { q: 6.0, p: 2.0 }),
    };
    let json = serde_json::to_string_pretty(&config).unwrap();
    let back: SolveConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, config);
    let out = run_solve(&back).unwrap();
    assert!(out.trace.certified && out.recovery_error.is_none());
    // A minimal config leaves the options at their defaults.
    let minimal = r#"{"grid": {"dim": 2, "L": 6.283185307179586, "n_space": 8, "n_time": 8,
        "t_min": 0.001, "t_max": 1.0, "spacing": "geometric"},
        "preset": {"kind": "single-mode", "eps": 0.001}}"#;
    let parsed: SolveConfig = serde_json::from_str(minimal).unwrap();
    assert_eq!(parsed.options, SolveOptions::default());
}

#[test]
fn invalid_spaces_are_rejected() {
    let grid = make_grid(2, 2.0 * PI, 8, 1e-3, 1.0, 8, TimeSpacing::Geometric).unwrap();
    let (data, _) = SolvePreset::SingleMode { eps: 1e-3 }.build(&grid).unwrap();
    // q must exceed the parabolic dimension d + 2 = 4.
    assert!(picard_solve(&data, &options(SpaceSelector::Yktq { q: 3.0 })).is_err());
    assert!(picard_solve(&data, &options(SpaceSelector::Morrey { p: 5.0 })).is_err());
}
