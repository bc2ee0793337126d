#![allow(dead_code)]

use levygame_core::{GameParams, JumpSpec, LevyModel, TabulatedDensity};

/// `ψ(θ) = θ²`.
pub fn canonical() -> LevyModel {
    LevyModel::brownian(0.0, 2.0).unwrap()
}

pub fn canonical_params(q: f64) -> GameParams {
    GameParams::new(1.0, 1.0, q, 2.0).unwrap()
}

/// Bounded variation: `X = -2t + CPP(λ=1, Exp(2))`.
pub fn bv_exp() -> LevyModel {
    LevyModel::with_canonical_drift(2.0, 0.0, JumpSpec::Exponential { intensity: 1.0, decay: 2.0 }).unwrap()
}

/// Gaussian part plus exponential jumps.
pub fn uv_exp() -> LevyModel {
    LevyModel::new(0.3, 0.5, JumpSpec::Exponential { intensity: 1.5, decay: 3.0 }).unwrap()
}

pub fn tab_density() -> TabulatedDensity {
    let grid: Vec<f64> = (1..=80).map(|k| k as f64 / 20.0).collect();
    let values: Vec<f64> = grid.iter().map(|z| 2.0 * (-1.5 * z).exp() * (1.0 + 0.3 * z)).collect();
    TabulatedDensity::new(grid, values, 1.5).unwrap()
}

pub fn tabulated() -> LevyModel {
    LevyModel::new(0.5, 0.4, JumpSpec::Tabulated(tab_density())).unwrap()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

#[track_caller]
pub fn assert_rel(got: f64, want: f64, tol: f64) {
    let e = rel_err(got, want);
    assert!(e <= tol, "got {got:.17e}, want {want:.17e}, rel err {e:.3e} > {tol:.1e}");
}
