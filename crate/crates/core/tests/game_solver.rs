mod common;

use common::*;
use levygame_core::{
    a_star, c_star, call_threshold_function, classify, exit_expectation, g_function, q0, q1, q1_condition, solve_as,
    FitKind, GameError, GameParams, JumpSpec, LevyModel, Regime, RegimeSolution, ScaleEvaluator, StopRule,
};
use levygame_core::numerics::quad::integrate;
use proptest::prelude::*;

// Canonical instance: ψ(θ) = θ², α = β = 1, K = 2.
const Q0_CANONICAL: f64 = 2.798_867_594_059_437_696_6;

fn solve(model: &LevyModel, params: &GameParams) -> RegimeSolution {
    classify(model, params).unwrap()
}

/// Checks `e^x ≤ V(x) ≤ max(e^x, K)` and monotonicity on `n` points.
fn check_bounds_and_monotone(sol: &RegimeSolution, lo: f64, hi: f64, n: usize) {
    let k = sol.params.strike;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = sol.value(x).unwrap();
        assert!(v >= x.exp() * (1.0 - 1e-12), "{:?} V({x}) = {v} below e^x", sol.regime);
        assert!(v <= x.exp().max(k) + 1e-9, "{:?} V({x}) = {v} above max(e^x, K)", sol.regime);
        assert!(v >= prev - 1e-10, "{:?} V decreases at {x}: {prev} -> {v}", sol.regime);
        prev = v;
    }
}

#[test]
fn canonical_thresholds() {
    let m = canonical();
    let p = canonical_params(5.0);
    assert_rel(a_star(&m, &p).unwrap(), 0.482_404_531_833_319_313_09, 1e-13);
    let q0v = q0(&m, &p).unwrap();
    assert_rel(q0v, Q0_CANONICAL, 1e-12);
    assert_rel(a_star(&m, &p.with_q(q0v)).unwrap(), 2.0, 1e-9);
    assert!(a_star(&m, &p.with_q(q0v * (1.0 + 1e-6))).unwrap() < 2.0);
    assert!(a_star(&m, &p.with_q(q0v * (1.0 - 1e-6))).unwrap() > 2.0);
    // h(1) = K b²/2 + (α/Φ)(K/a* - 1) = 2 + (2/(-2) - 1) = 0.
    assert!(q1_condition(&m, &p, 1.0).unwrap().abs() < 1e-14);
    let (q1v, warning) = q1(&m, &p).unwrap();
    assert!(warning.is_none());
    assert!((q1v - 1.0).abs() < 1e-10, "q1 = {q1v}");
    assert!(0.5 < q1v && q1v <= q0v && q0v > 2.0);
}

#[test]
fn a_star_is_decreasing_with_correct_limits() {
    let m = canonical();
    let p = canonical_params(3.0);
    let lo = 2.01;
    let hi = 4.0 * Q0_CANONICAL;
    let mut prev = f64::INFINITY;
    for i in 0..50 {
        let q = lo + (hi - lo) * i as f64 / 49.0;
        let a = a_star(&m, &p.with_q(q)).unwrap();
        assert!(a > 0.0 && a < prev);
        prev = a;
    }
    assert!(a_star(&m, &p.with_q(2.0 + 1e-9)).unwrap() > 1e8);
    assert!(a_star(&m, &p.with_q(1e8)).unwrap() < 1e-3);
    assert!(a_star(&m, &p.with_q(2.0)).is_err());
}

#[test]
fn q0_tends_to_lower_edge_for_large_strike() {
    let m = canonical();
    let p = GameParams::new(1.0, 1.0, 3.0, 1e6).unwrap();
    let v = q0(&m, &p).unwrap();
    assert!(v > 2.0 && v < 2.01, "q0 = {v}");
}

#[test]
fn regimes_on_canonical_instance() {
    let m = canonical();
    let cases = [
        (0.4, Regime::R1),
        (0.5, Regime::R1),
        (0.75, Regime::R4),
        (1.0, Regime::R3),
        (1.5, Regime::R3),
        (3.0, Regime::R2),
        (Q0_CANONICAL, Regime::R2),
    ];
    for (q, want) in cases {
        let sol = solve(&m, &canonical_params(q));
        assert_eq!(sol.regime, want, "q = {q}");
    }
    let r1 = solve(&m, &canonical_params(0.4));
    assert_eq!(r1.sigma, StopRule::Immediate);
    assert_eq!(r1.tau, StopRule::Above(2f64.ln()));
    let r2 = solve(&m, &canonical_params(3.0));
    assert_eq!(r2.tau, StopRule::Above(r2.a_star.unwrap().ln()));
    assert_eq!(r2.sigma, StopRule::Above(2f64.ln()));
    let r3 = solve(&m, &canonical_params(1.5));
    assert_eq!((r3.tau, r3.sigma), (StopRule::Above(2f64.ln()), StopRule::Above(2f64.ln())));
    let r4 = solve(&m, &canonical_params(0.75));
    assert_eq!(r4.sigma, StopRule::Above(r4.c_star.unwrap()));
    assert!(!r4.assumption_a && !r4.warnings.is_empty());
}

#[test]
fn shared_boundary_admits_both_descriptions() {
    let m = canonical();
    let p = canonical_params(Q0_CANONICAL);
    let q0v = q0(&m, &p).unwrap();
    let p = p.with_q(q0v);
    let r2 = solve_as(&m, &p, Regime::R2).unwrap();
    let r3 = solve_as(&m, &p, Regime::R3).unwrap();
    assert!(r2.warnings.iter().any(|w| w.contains("q0")));
    for x in [-1.0, 0.0, 0.5] {
        assert_rel(r2.value(x).unwrap(), r3.value(x).unwrap(), 1e-8);
    }
    let err = solve_as(&m, &canonical_params(3.0), Regime::R4).unwrap_err();
    assert!(matches!(err, GameError::RegimeNotApplicable { requested: Regime::R4, .. }));
}

#[test]
fn r1_value_is_payoff_cap() {
    let sol = solve(&canonical(), &canonical_params(0.4));
    assert_eq!(sol.value(0.0).unwrap(), 2.0);
    assert_eq!(sol.value(1.0).unwrap(), 1f64.exp());
    check_bounds_and_monotone(&sol, -3.0, 2.0, 50);
}

#[test]
fn r2_values_match_oracle() {
    let sol = solve(&canonical(), &canonical_params(3.0));
    let a = sol.a_star.unwrap();
    assert_rel(a, 1.577_350_269_189_625_764_5, 1e-13);
    assert_rel(sol.value(-1.0).unwrap(), 0.553_857_443_324_525_958_32, 1e-11);
    assert_rel(sol.value(-0.5).unwrap(), 0.723_575_951_809_675_727_16, 1e-11);
    assert_rel(sol.value(0.0).unwrap(), 1.040_116_851_074_915_222_3, 1e-11);
    assert_rel(sol.value(a.ln() - 0.3).unwrap(), 1.188_412_478_266_730_858_3, 1e-11);
    assert_rel(sol.value(a.ln()).unwrap(), a, 1e-13);
    assert_eq!(sol.value(1.0).unwrap(), 1f64.exp());
    check_bounds_and_monotone(&sol, -4.0, 2f64.ln() + 2.0, 50);
}

#[test]
fn r2_derivative_is_nonnegative() {
    let sol = solve(&canonical(), &canonical_params(3.0));
    let h = 1e-5;
    for i in 0..60 {
        let x = -5.0 + 5.5 * i as f64 / 59.0;
        let d = (sol.value(x + h).unwrap() - sol.value(x - h).unwrap()) / (2.0 * h);
        assert!(d >= -1e-9, "V'({x}) = {d}");
    }
}

#[test]
fn r3_values_match_oracle() {
    let sol = solve(&canonical(), &canonical_params(1.5));
    assert_rel(sol.value(-1.0).unwrap(), 1.067_163_921_020_316_310_1, 1e-11);
    assert_rel(sol.value(0.0).unwrap(), 1.525_671_541_440_173_203_8, 1e-11);
    assert_rel(sol.value(0.5).unwrap(), 1.859_198_106_522_403_263_4, 1e-11);
    assert_rel(sol.value(2f64.ln() - 1e-12).unwrap(), 2.0, 1e-10);
    check_bounds_and_monotone(&sol, -4.0, 2f64.ln() + 2.0, 50);
}

#[test]
fn r4_values_match_oracle() {
    let sol = solve(&canonical(), &canonical_params(0.75));
    let c = sol.c_star.unwrap();
    assert_rel(c, 0.074_504_572_030_816_553_51, 1e-11);
    assert_rel(sol.value(-1.0).unwrap(), 1.824_065_449_912_994_087_2, 1e-11);
    assert_rel(sol.value(-0.5).unwrap(), 1.932_795_555_887_345_629_8, 1e-11);
    assert_rel(sol.value(0.0).unwrap(), 1.998_469_940_530_864_041, 1e-11);
    assert_rel(sol.value(c - 1e-13).unwrap(), 2.0, 1e-10);
    assert_eq!(sol.value(0.5).unwrap(), 2.0);
    check_bounds_and_monotone(&sol, -4.0, 2f64.ln() + 2.0, 50);
}

#[test]
fn c_star_closed_reduction_without_jumps() {
    let m = canonical();
    for q in [0.55, 0.75, 0.9] {
        let p = canonical_params(q);
        let phi = m.phi(q).unwrap();
        let want = ((phi + 1.0) * (2.0 * q - 1.0) / phi).ln();
        let got = c_star(&m, &p).unwrap();
        assert!((got - want).abs() < 1e-10, "q = {q}: {got} vs {want}");
    }
    // c* runs off to -∞ as q approaches α/K.
    let near = c_star(&m, &canonical_params(0.5 + 1e-6)).unwrap();
    assert!(near < -10.0, "c* = {near}");
}

#[test]
fn c_star_residual_and_limits_with_jumps() {
    let m = bv_exp();
    let p = GameParams::new(1.0, 1.0, 0.8, 2.0).unwrap();
    let c = c_star(&m, &p).unwrap();
    assert_rel(c, 0.259_332_601_133_499_892_89, 1e-11);
    let resid = call_threshold_function(&m, &p, c).unwrap() - 2.0;
    assert!(resid.abs() <= 1e-9 * 2.0, "residual {resid}");
    // Limits of F at the two ends of (-∞, log K).
    let phi = m.phi(0.8).unwrap();
    let far = call_threshold_function(&m, &p, 2f64.ln() - 20.0).unwrap();
    let limit = 2.0 - 2.0 * 0.8 / phi * (1.0 - 1.0 / (2.0 * 0.8));
    assert!(far < 2.0);
    assert!((far - limit).abs() < 1e-6, "{far} vs {limit}");
    assert!(call_threshold_function(&m, &p, 2f64.ln() - 1e-6).unwrap() > 2.0);
    // F increases through the root.
    assert!(call_threshold_function(&m, &p, c - 0.01).unwrap() < 2.0);
    assert!(call_threshold_function(&m, &p, c + 0.01).unwrap() > 2.0);
}

#[test]
fn q1_equals_q0_without_gaussian_part() {
    let m = bv_exp();
    let p = GameParams::new(1.0, 1.0, 0.8, 2.0).unwrap();
    let q0v = q0(&m, &p).unwrap();
    assert_rel(q0v, 1.187_633_805_371_723_588_7, 1e-12);
    assert_eq!(q1(&m, &p).unwrap().0, q0v);
}

#[test]
fn bounded_variation_values_match_oracle() {
    let m = bv_exp();
    let r2 = solve(&m, &GameParams::new(1.0, 1.0, 2.0, 2.0).unwrap());
    assert_eq!(r2.regime, Regime::R2);
    let a = r2.a_star.unwrap();
    assert_rel(a, 0.921_535_165_408_626_791_24, 1e-13);
    let y = a.ln();
    assert_rel(r2.value(y - 1.0).unwrap(), 0.634_187_265_406_291_996_2, 1e-11);
    assert_rel(r2.value(y - 0.5).unwrap(), 0.735_530_787_863_260_398_93, 1e-11);
    assert_rel(r2.value(y - 0.1).unwrap(), 0.874_559_095_062_273_043_11, 1e-11);
    check_bounds_and_monotone(&r2, y - 4.0, 2f64.ln() + 2.0, 50);

    let r4 = solve(&m, &GameParams::new(1.0, 1.0, 0.8, 2.0).unwrap());
    assert_eq!(r4.regime, Regime::R4);
    let c = r4.c_star.unwrap();
    assert_rel(r4.value(c - 1.0).unwrap(), 1.520_936_069_100_751_767_4, 1e-11);
    assert_rel(r4.value(c - 0.5).unwrap(), 1.700_187_603_681_735_615_6, 1e-11);
    assert_rel(r4.value(c - 0.1).unwrap(), 1.927_049_151_794_490_631_8, 1e-11);
    check_bounds_and_monotone(&r4, c - 4.0, 2f64.ln() + 2.0, 50);
}

#[test]
fn jump_term_closed_form_matches_quadrature() {
    let cases = [
        (bv_exp(), GameParams::new(1.0, 1.0, 0.8, 2.0).unwrap()),
        (uv_exp(), GameParams::new(1.0, 0.5, 0.8, 2.0).unwrap()),
    ];
    for (m, p) in cases {
        let sol = solve(&m, &p);
        assert_eq!(sol.regime, Regime::R4);
        for z in [0.0, 0.3, 1.0, 4.0] {
            let closed = sol.jump_term(z, false).unwrap();
            let quad = sol.jump_term(z, true).unwrap();
            assert!((closed - quad).abs() <= 1e-9 * closed.abs().max(1e-3), "z = {z}: {closed} vs {quad}");
        }
    }
}

#[test]
fn tabulated_r4_is_consistent() {
    let m = tabulated();
    let p = GameParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
    let sol = solve(&m, &p);
    assert_eq!(sol.regime, Regime::R4);
    let c = sol.c_star.unwrap();
    assert!(c < 2f64.ln());
    let resid = call_threshold_function(&m, &p, c).unwrap() - 2.0;
    assert!(resid.abs() <= 1e-9 * 2.0);
    assert!((sol.value(c - 1e-12).unwrap() - 2.0).abs() < 1e-6);
    check_bounds_and_monotone(&sol, c - 3.0, 2f64.ln() + 1.0, 40);
    let fit = sol.fit_report(1e-4).unwrap();
    assert_eq!(fit.expected_kind, FitKind::Smooth);
    assert_eq!(fit.observed_kind, FitKind::Smooth);
}

#[test]
fn fit_kinds_follow_path_variation() {
    let m = canonical();
    // Smooth fit at log a* in R2.
    let r2 = solve(&m, &canonical_params(3.0));
    let a = r2.a_star.unwrap();
    let f = r2.fit_report(1e-4).unwrap();
    assert!((f.left_deriv - a).abs() <= 1e-4 * a, "{f:?}");
    assert_eq!((f.expected_kind, f.observed_kind), (FitKind::Smooth, FitKind::Smooth));

    // R3: kinked, with the left slope from the q1 condition.
    let r3 = solve(&m, &canonical_params(1.5));
    let f = r3.fit_report(1e-4).unwrap();
    let phi = r3.phi_q;
    // K/a* written through 1/a*, which stays finite (and negative) for q ≤ ψ(-1) + β.
    let k_over_a = 2.0 * phi * (1.5 - 1.0 - 1.0) / (phi + 1.0);
    let predicted = 2.0 + 2.0 / (phi * 2.0) * (k_over_a - 1.0);
    assert!((f.left_deriv - predicted).abs() <= 1e-3, "{} vs {predicted}", f.left_deriv);
    assert!((f.left_deriv - 0.734_013_676_289_095_869_07).abs() <= 1e-6);
    assert!(f.left_deriv > 0.0 && f.left_deriv < 2.0);
    assert_eq!((f.expected_kind, f.observed_kind), (FitKind::ContinuousOnly, FitKind::ContinuousOnly));

    // At q1 the left slope vanishes, at q0 it reaches K.
    let (q1v, _) = q1(&m, &canonical_params(1.0)).unwrap();
    let at_q1 = solve(&m, &canonical_params(q1v)).fit_report(1e-4).unwrap();
    assert!(at_q1.left_deriv.abs() <= 1e-3, "{at_q1:?}");
    assert_eq!(at_q1.expected_kind, FitKind::Smooth);
    let q0v = q0(&m, &canonical_params(3.0)).unwrap();
    let at_q0 = solve_as(&m, &canonical_params(q0v), Regime::R3).unwrap().fit_report(1e-4).unwrap();
    assert!((at_q0.left_deriv - 2.0).abs() <= 1e-3, "{at_q0:?}");

    // R4: flat pasting onto K at c*.
    let r4 = solve(&m, &canonical_params(0.75));
    let f = r4.fit_report(1e-4).unwrap();
    assert!(f.left_deriv.abs() <= 1e-4 * 2.0, "{f:?}");
    assert_eq!(f.observed_kind, FitKind::Smooth);

    // Bounded variation: continuous but not smooth.
    let bv = solve(&bv_exp(), &GameParams::new(1.0, 1.0, 2.0, 2.0).unwrap());
    let f = bv.fit_report(1e-4).unwrap();
    assert!((f.left_value - f.right_value).abs() <= 1e-6);
    assert!((f.left_value - bv.a_star.unwrap()).abs() <= 1e-6);
    assert_eq!((f.expected_kind, f.observed_kind), (FitKind::ContinuousOnly, FitKind::ContinuousOnly));
    let bv4 = solve(&bv_exp(), &GameParams::new(1.0, 1.0, 0.8, 2.0).unwrap());
    let f = bv4.fit_report(1e-4).unwrap();
    assert!((f.left_value - 2.0).abs() <= 1e-6);
    assert_eq!((f.expected_kind, f.observed_kind), (FitKind::ContinuousOnly, FitKind::ContinuousOnly));
}

#[test]
fn g_function_starts_at_zero_and_increases() {
    let ev = ScaleEvaluator::new(&canonical(), 5.0).unwrap();
    assert_eq!(g_function(&ev, 0.0), 0.0);
    let phi = ev.phi();
    let want = {
        let a = integrate(|y| (y - 1.0f64).exp() * ev.w(y), 0.0, 1.0, 1e-15, 1e-14).unwrap().value;
        let b = integrate(|y| ev.w(y), 0.0, 1.0, 1e-15, 1e-14).unwrap().value;
        (phi + 1.0) * a - phi * b
    };
    assert_rel(g_function(&ev, 1.0), want, 1e-11);
    assert!(want > 0.0);
    let mut prev = 0.0;
    for i in 1..=100 {
        let z = 0.05 * i as f64;
        let g = g_function(&ev, z);
        assert!(g > prev, "g not increasing at {z}");
        prev = g;
    }
}

#[test]
fn exit_expectation_values() {
    let ev = ScaleEvaluator::new(&canonical(), 1.0).unwrap();
    assert_rel(exit_expectation(&ev, 1.0), (-1f64).exp(), 1e-13);
    assert_eq!(exit_expectation(&ev, -0.5), 1.0);
    for m in [bv_exp(), uv_exp(), tabulated()] {
        let ev = ScaleEvaluator::new(&m, 0.7).unwrap();
        let mut prev = 1.0;
        for y in [0.0, 0.1, 0.5, 1.0, 3.0] {
            let e = exit_expectation(&ev, y);
            assert!(e > 0.0 && e <= 1.0 + 1e-12 && e <= prev + 1e-12, "y = {y}: {e}");
            prev = e;
        }
    }
}

#[test]
fn divergent_exponential_moment_is_rejected() {
    let m = LevyModel::new(1.0, 0.5, JumpSpec::Exponential { intensity: 1.0, decay: 1.0 }).unwrap();
    let err = classify(&m, &canonical_params(3.0)).unwrap_err();
    assert!(matches!(err, GameError::AssumptionAViolated));
}

#[test]
fn invalid_game_parameters() {
    assert!(GameParams::new(-1.0, 1.0, 1.0, 2.0).is_err());
    assert!(GameParams::new(1.0, 0.0, 1.0, 2.0).is_err());
    assert!(GameParams::new(1.0, 1.0, 0.0, 2.0).is_err());
    assert!(GameParams::new(1.0, 1.0, 1.0, f64::NAN).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn value_respects_payoff_bounds(q in 0.3..6.0f64, b2 in 0.5..3.0f64, alpha in 0.2..2.0f64, x in -3.0..2.0f64) {
        let m = LevyModel::brownian(0.1, b2).unwrap();
        let p = GameParams::new(alpha, 0.5, q, 2.0).unwrap();
        let sol = classify(&m, &p).unwrap();
        let v = sol.value(x).unwrap();
        prop_assert!(v >= x.exp() * (1.0 - 1e-12));
        prop_assert!(v <= x.exp().max(2.0) + 1e-9);
        prop_assert!(sol.value(x + 0.05).unwrap() >= v - 1e-10);
    }

    #[test]
    fn thresholds_are_ordered(b2 in 0.5..3.0f64, alpha in 0.2..2.0f64, beta in 0.1..2.0f64) {
        let m = LevyModel::brownian(0.0, b2).unwrap();
        let p = GameParams::new(alpha, beta, 1.0, 2.0).unwrap();
        let q0v = q0(&m, &p).unwrap();
        let (q1v, _) = q1(&m, &p).unwrap();
        prop_assert!(alpha / 2.0 < q1v && q1v <= q0v);
        prop_assert!(q0v > beta + m.psi_minus_one().unwrap());
    }
}
