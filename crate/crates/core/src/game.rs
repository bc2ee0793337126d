//! Equilibrium of the perpetual convertible-bond game.
//!
//! The bondholder (sup player) converts at `τ` receiving `L_τ = e^{X_τ}`; the
//! issuer (inf player) calls at `σ` paying `U_σ = e^{X_σ} ∨ K`; until then
//! the coupon `α + β e^{X_t}` accrues. Both are discounted at rate `q`.

use std::fmt;
use std::sync::Arc;

use crate::error::GameError;
use crate::levy::{JumpSpec, LevyModel, PathVariation};
use crate::numerics::quad::integrate;
use crate::numerics::roots::brent;
use crate::scale::ScaleEvaluator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub strike: f64,
}

impl GameParams {
    pub fn new(alpha: f64, beta: f64, q: f64, strike: f64) -> Result<Self, GameError> {
        let ok = |v: f64| v.is_finite();
        if !(ok(alpha) && alpha >= 0.0) {
            return Err(GameError::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(ok(beta) && beta > 0.0) {
            return Err(GameError::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if !(ok(q) && q > 0.0) {
            return Err(GameError::InvalidParameter(format!("q must be > 0, got {q}")));
        }
        if !(ok(strike) && strike > 0.0) {
            return Err(GameError::InvalidParameter(format!("K must be > 0, got {strike}")));
        }
        Ok(Self { alpha, beta, q, strike })
    }

    pub fn with_q(&self, q: f64) -> Self {
        Self { q, ..*self }
    }

    pub fn log_strike(&self) -> f64 {
        self.strike.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `q ≤ α/K`: the issuer calls immediately.
    R1,
    /// `q ≥ q0`: convert above `log a*`, call above `log K`.
    R2,
    /// `b² > 0` and `q1 ≤ q < q0`: both stop above `log K`.
    R3,
    /// `α/K < q < q1`: convert above `log K`, call above `c*`.
    R4,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A threshold strategy in log-price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Immediate,
    /// First time `X_t > level`.
    Above(f64),
    Never,
}

impl StopRule {
    pub fn level(&self) -> Option<f64> {
        match self {
            StopRule::Above(l) => Some(*l),
            _ => None,
        }
    }
}

impl fmt::Display for StopRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopRule::Immediate => f.write_str("immediate"),
            StopRule::Above(l) => write!(f, "first passage above {l:.10}"),
            StopRule::Never => f.write_str("never"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Smooth,
    ContinuousOnly,
    /// No interior free boundary (immediate stopping).
    NeitherInterior,
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FitKind::Smooth => "smooth",
            FitKind::ContinuousOnly => "continuous",
            FitKind::NeitherInterior => "none (immediate stop)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub boundary: f64,
    pub left_value: f64,
    pub right_value: f64,
    pub left_deriv: f64,
    pub right_deriv: f64,
    pub expected_kind: FitKind,
    pub observed_kind: FitKind,
}

#[derive(Debug, Clone)]
pub struct RegimeSolution {
    pub regime: Regime,
    pub params: GameParams,
    pub q0: f64,
    pub q1: f64,
    pub a_star: Option<f64>,
    pub c_star: Option<f64>,
    pub tau: StopRule,
    pub sigma: StopRule,
    pub phi_q: f64,
    pub psi_minus_one: f64,
    /// Whether `q > ψ(-1)`.
    pub assumption_a: bool,
    pub warnings: Vec<String>,
    evaluator: Arc<ScaleEvaluator>,
}

/// `a*(q) = α(Φ+1) / (Φ (q - ψ(-1) - β))`.
pub fn a_star(model: &LevyModel, params: &GameParams) -> Result<f64, GameError> {
    let p1 = psi_minus_one(model)?;
    let q = params.q;
    if !(q > p1 + params.beta) {
        return Err(GameError::InvalidParameter(format!(
            "a* needs q > psi(-1) + beta = {}, got q = {q}",
            p1 + params.beta
        )));
    }
    let phi = model.phi(q)?;
    Ok(params.alpha * (phi + 1.0) / (phi * (q - p1 - params.beta)))
}

fn psi_minus_one(model: &LevyModel) -> Result<f64, GameError> {
    model.psi_minus_one().ok_or(GameError::AssumptionAViolated)
}

/// Rate above which the bondholder converts before the issuer calls:
/// the unique `q` with `a*(q) = K`.
pub fn q0(model: &LevyModel, params: &GameParams) -> Result<f64, GameError> {
    let p1 = psi_minus_one(model)?;
    let lo = (p1 + params.beta).max(0.0);
    if params.alpha == 0.0 {
        return Ok(lo);
    }
    let log_k = params.log_strike();
    let f = |q: f64| -> f64 {
        match a_star(model, &params.with_q(q)) {
            Ok(a) => a.ln() - log_k,
            Err(_) => f64::NAN,
        }
    };
    // Walk the lower edge inward until a* exceeds K.
    let mut left = lo + 1e-9 * lo.abs().max(1.0);
    let mut steps = 0;
    while !(f(left) > 0.0) {
        if f(left).is_nan() {
            return Err(GameError::NoRoot("q0 (a* undefined)"));
        }
        // a* < K right at the edge: the set {a* < K} is the whole line.
        if steps > 60 || left == lo {
            log::warn!("a*(q) < K already at the lower edge {lo}; q0 set to that edge");
            return Ok(lo);
        }
        left = lo + 0.5 * (left - lo);
        steps += 1;
    }
    let mut right = left.max(1.0) * 2.0;
    while f(right) > 0.0 {
        right *= 2.0;
        if right > 1e12 {
            return Err(GameError::NoRoot("q0"));
        }
    }
    Ok(brent(f, left, right, 1e-14 * right)?)
}

/// `h(q) = K b²/2 + K (q - ψ(-1) - β)/(Φ(q)+1) - α/Φ(q)`, which equals
/// `K b²/2 + (α/Φ)(K/a* - 1)`.
pub fn q1_condition(model: &LevyModel, params: &GameParams, q: f64) -> Result<f64, GameError> {
    let p1 = psi_minus_one(model)?;
    let phi = model.phi(q)?;
    let k = params.strike;
    Ok(0.5 * k * model.gaussian_var() + k * (q - p1 - params.beta) / (phi + 1.0) - params.alpha / phi)
}

/// Lower end of the interval of rates where both players stop at `log K`.
/// Returns `q0` when there is no Gaussian part.
pub fn q1(model: &LevyModel, params: &GameParams) -> Result<(f64, Option<String>), GameError> {
    let q0v = q0(model, params)?;
    if model.gaussian_var() == 0.0 {
        return Ok((q0v, None));
    }
    let h = |q: f64| q1_condition(model, params, q).unwrap_or(f64::NAN);
    let edge = params.alpha / params.strike;
    let lo = if edge > 0.0 { edge * (1.0 + 1e-6) } else { q0v * 1e-9 };
    if !(lo < q0v) {
        return Ok((q0v, None));
    }
    const SCAN: usize = 200;
    let ratio = (q0v / lo).ln() / SCAN as f64;
    let mut prev = q0v;
    for i in (0..SCAN).rev() {
        let qi = lo * (ratio * i as f64).exp();
        if h(qi) <= 0.0 {
            let root = brent(h, qi, prev, 1e-15 * prev)?;
            return Ok((root, None));
        }
        prev = qi;
    }
    // No sign change on the scan: push towards α/K before giving up.
    if edge > 0.0 {
        for k in [1e-8, 1e-10, 1e-12] {
            let qi = edge * (1.0 + k);
            if h(qi) <= 0.0 {
                let root = brent(h, qi, lo, 1e-15 * lo)?;
                return Ok((root, None));
            }
        }
    }
    let msg = format!("h(q) > 0 on the whole scan down to {lo}; q1 set to the scan edge");
    log::warn!("{msg}");
    Ok((lo, Some(msg)))
}

/// `F(c)`; the call threshold `c*` solves `F(c) = K`.
pub fn call_threshold_function(model: &LevyModel, params: &GameParams, c: f64) -> Result<f64, GameError> {
    let q = params.q;
    let phi = model.phi(q)?;
    let k = params.strike;
    let s = params.log_strike() - c;
    let (i1, i2) = model.shifted_jump_integrals(s, phi)?;
    Ok(k * (1.0 - q / phi) + params.alpha / phi + params.beta * c.exp() / (phi + 1.0) + k * (i2 / (phi + 1.0) - i1 / phi))
}

/// Root of `F(c) = K` in `(-∞, log K)`.
pub fn c_star(model: &LevyModel, params: &GameParams) -> Result<f64, GameError> {
    let k = params.strike;
    let f = |c: f64| call_threshold_function(model, params, c).map(|v| v - k);
    let hi = params.log_strike() - 1e-10;
    if f(hi)? <= 0.0 {
        return Err(GameError::NoRoot("c* (F(log K-) <= K; q is not below q1)"));
    }
    let mut step = 1.0;
    let mut lo = hi - step;
    while f(lo)? >= 0.0 {
        step *= 2.0;
        lo = hi - step;
        if step > 1e6 {
            return Err(GameError::NoRoot("c* (F stays above K; q is not above alpha/K)"));
        }
    }
    let root = brent(|c| f(c).unwrap_or(f64::NAN), lo, hi, 1e-14 * hi.abs().max(1.0))?;
    Ok(root)
}

/// `g(z) = (Φ+1) ∫_0^z e^{y-z} W(y) dy - Φ ∫_0^z W(y) dy`.
pub fn g_function(ev: &ScaleEvaluator, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let phi = ev.phi();
    let (iw, iew) = ev.w_integrals(z);
    (phi + 1.0) * (-z).exp() * iew - phi * iw
}

/// `E[e^{-q τ⁺_y}; τ⁺_y < ∞] = Z(y) - (q/Φ) W(y)` for `X_0 = 0`.
pub fn exit_expectation(ev: &ScaleEvaluator, y: f64) -> f64 {
    if y < 0.0 {
        return 1.0;
    }
    let q = ev.q();
    if q == 0.0 {
        // q/Φ(q) tends to 0 when Φ(0) > 0 and to ψ'(0+) otherwise.
        if ev.phi() > 0.0 {
            return 1.0;
        }
        let slope = ev.model().exponent_slope_at_zero().unwrap_or(0.0);
        return 1.0 - slope * ev.w(y);
    }
    ev.z(y) - q / ev.phi() * ev.w(y)
}

/// Relative tolerance for treating `q` as equal to a computed threshold.
const TIE_TOL: f64 = 1e-10;

fn ties(q: f64, threshold: f64) -> bool {
    (q - threshold).abs() <= TIE_TOL * threshold
}

fn applicable(regime: Regime, params: &GameParams, q0v: f64, q1v: f64, b2: f64) -> Result<(), String> {
    let q = params.q;
    let edge = params.alpha / params.strike;
    match regime {
        Regime::R1 if q <= edge => Ok(()),
        Regime::R1 => Err(format!("needs q <= alpha/K = {edge}")),
        Regime::R2 if q >= q0v || ties(q, q0v) => Ok(()),
        Regime::R2 => Err(format!("needs q >= q0 = {q0v}")),
        Regime::R3 if b2 > 0.0 && (q >= q1v || ties(q, q1v)) && (q <= q0v || ties(q, q0v)) && q > edge => Ok(()),
        Regime::R3 => Err(format!("needs b^2 > 0 and q in [q1, q0] = [{q1v}, {q0v}]")),
        Regime::R4 if q > edge && q < q1v && !(b2 > 0.0 && ties(q, q1v)) => Ok(()),
        Regime::R4 => Err(format!("needs alpha/K < q < q1, i.e. q in ({edge}, {q1v})")),
    }
}

/// Determines the regime and builds the equilibrium.
pub fn classify(model: &LevyModel, params: &GameParams) -> Result<RegimeSolution, GameError> {
    let q = params.q;
    let q0v = q0(model, params)?;
    let (q1v, _) = q1(model, params)?;
    let regime = if q <= params.alpha / params.strike {
        Regime::R1
    } else if q >= q0v || ties(q, q0v) {
        Regime::R2
    } else if model.gaussian_var() > 0.0 && (q >= q1v || ties(q, q1v)) {
        Regime::R3
    } else {
        Regime::R4
    };
    solve_as(model, params, regime)
}

/// Builds the solution of a given regime, failing if the regime does not
/// apply. Used to surface both descriptions at the shared boundary `q = q0`.
pub fn solve_as(model: &LevyModel, params: &GameParams, regime: Regime) -> Result<RegimeSolution, GameError> {
    let p1 = psi_minus_one(model)?;
    let q = params.q;
    let q0v = q0(model, params)?;
    let (q1v, q1_warning) = q1(model, params)?;
    applicable(regime, params, q0v, q1v, model.gaussian_var())
        .map_err(|reason| GameError::RegimeNotApplicable { requested: regime, reason })?;
    let evaluator = Arc::new(ScaleEvaluator::new(model, q)?);
    let log_k = params.log_strike();
    let mut warnings = Vec::new();
    if let Some(w) = q1_warning {
        warnings.push(w);
    }
    let assumption_a = q > p1;
    if !assumption_a {
        let msg = format!(
            "assumption q > psi(-1) fails (psi(-1) = {p1}); equilibrium formulas are applied since both strategies stop at finite levels"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let (mut a_star_v, mut c_star_v) = (None, None);
    let (tau, sigma) = match regime {
        Regime::R1 => (StopRule::Above(log_k), StopRule::Immediate),
        Regime::R2 => {
            let a = a_star(model, params)?;
            a_star_v = Some(a);
            if ties(q, q0v) {
                warnings.push("q equals q0: the regime R3 pair (both stop above log K) is also a saddle point".into());
            }
            let tau = if a > 0.0 { StopRule::Above(a.ln()) } else { StopRule::Immediate };
            (tau, StopRule::Above(log_k))
        }
        Regime::R3 => {
            if q > p1 + params.beta {
                a_star_v = Some(a_star(model, params)?);
            }
            (StopRule::Above(log_k), StopRule::Above(log_k))
        }
        Regime::R4 => {
            let c = c_star(model, params)?;
            c_star_v = Some(c);
            (StopRule::Above(log_k), StopRule::Above(c))
        }
    };
    Ok(RegimeSolution {
        regime,
        params: *params,
        q0: q0v,
        q1: q1v,
        a_star: a_star_v,
        c_star: c_star_v,
        tau,
        sigma,
        phi_q: evaluator.phi(),
        psi_minus_one: p1,
        assumption_a,
        warnings,
        evaluator,
    })
}

impl RegimeSolution {
    pub fn evaluator(&self) -> &ScaleEvaluator {
        &self.evaluator
    }

    pub fn model(&self) -> &LevyModel {
        self.evaluator.model()
    }

    /// Free boundary below which the game continues.
    pub fn boundary(&self) -> f64 {
        match self.regime {
            Regime::R1 | Regime::R3 => self.params.log_strike(),
            Regime::R2 => self.a_star.map(f64::ln).unwrap_or(f64::NEG_INFINITY),
            Regime::R4 => self.c_star.expect("R4 carries c*"),
        }
    }

    /// `V(x)`.
    pub fn value(&self, x: f64) -> Result<f64, GameError> {
        let k = self.params.strike;
        match self.regime {
            Regime::R1 => Ok(k.max(x.exp())),
            _ => {
                if x >= self.boundary() {
                    Ok(self.right_branch(x))
                } else {
                    self.left_branch(x)
                }
            }
        }
    }

    fn right_branch(&self, x: f64) -> f64 {
        match self.regime {
            Regime::R1 | Regime::R4 => x.exp().max(self.params.strike),
            Regime::R2 | Regime::R3 => x.exp(),
        }
    }

    /// Continuation-region formula, valid for `x ≤ boundary` (at the boundary
    /// it gives the left limit).
    fn left_branch(&self, x: f64) -> Result<f64, GameError> {
        let ev = &*self.evaluator;
        let p = &self.params;
        let phi = ev.phi();
        let z = (self.boundary() - x).max(0.0);
        match self.regime {
            Regime::R1 => Ok(p.strike),
            Regime::R2 | Regime::R3 => {
                // H_y(x) = e^x + e^x (q - ψ(-1) - β) ∫_0^z e^v W - α ∫_0^z W
                //          + W(z) [α/Φ + (β - q + ψ(-1)) e^y / (Φ+1)],   y = x + z.
                let y = self.boundary();
                let (iw, iew) = ev.w_integrals(z);
                let drift = p.q - self.psi_minus_one - p.beta;
                let coef = if self.regime == Regime::R2 {
                    0.0
                } else {
                    p.alpha / phi - drift * y.exp() / (phi + 1.0)
                };
                Ok(x.exp() * (1.0 + drift * iew) - p.alpha * iw + coef * ev.w(z))
            }
            Regime::R4 => {
                let c = self.boundary();
                let w = ev.w(z);
                let (iw, iew) = ev.w_integrals(z);
                let main = p.strike * (ev.z(z) - p.q / phi * w) + w * (p.alpha / phi + p.beta * c.exp() / (phi + 1.0))
                    - p.alpha * iw
                    - p.beta * x.exp() * iew;
                Ok(main + self.jump_term(z, false)?)
            }
        }
    }

    /// `K ∫_0^∞ [W(z) e^{-Φv} - W(z - v)] Ψ(s + v) dv` with
    /// `Ψ(L) = ∫_{u>L} (e^{u-L} - 1) Π(du)` and `s = log K - c*`.
    pub fn jump_term(&self, z: f64, force_quadrature: bool) -> Result<f64, GameError> {
        let model = self.model();
        let ev = &*self.evaluator;
        let phi = ev.phi();
        let k = self.params.strike;
        let c = self.c_star.ok_or(GameError::NoRoot("c* (jump term outside R4)"))?;
        let s = self.params.log_strike() - c;
        match model.jumps() {
            JumpSpec::NoJumps => Ok(0.0),
            JumpSpec::Exponential { intensity, decay } if !force_quadrature => {
                let (lam, rho) = (*intensity, *decay);
                let damped = if z > 0.0 {
                    (-rho * z).exp() * ev.w_exp_integral(rho, z)
                } else {
                    0.0
                };
                Ok(lam * k * (-rho * s).exp() / (rho - 1.0) * (ev.w(z) / (rho + phi) - damped))
            }
            _ => {
                let wz = ev.w(z);
                let overshoot = |l: f64| model.overshoot_excess(l).unwrap_or(f64::NAN);
                let mut total = 0.0;
                let mut cuts = vec![0.0];
                if let JumpSpec::Tabulated(t) = model.jumps() {
                    cuts.extend(t.grid().iter().map(|g| g - s).filter(|v| *v > 0.0));
                }
                let decay = match model.jumps() {
                    JumpSpec::Exponential { decay, .. } => *decay,
                    JumpSpec::Tabulated(t) => t.tail_decay(),
                    JumpSpec::NoJumps => 1.0,
                };
                let far = z + 60.0 / (phi + decay - 1.0).max(1e-3);
                cuts.push(z);
                cuts.push(far);
                cuts.retain(|v| *v <= far);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                for win in cuts.windows(2) {
                    let (a, b) = (win[0], win[1]);
                    if b <= a {
                        continue;
                    }
                    let r = integrate(
                        |v| (wz * (-phi * v).exp() - ev.w(z - v)) * overshoot(s + v),
                        a,
                        b,
                        1e-13,
                        1e-11,
                    )
                    .map_err(GameError::Numeric)?;
                    total += r.value;
                }
                Ok(k * total)
            }
        }
    }

    /// One-sided values and derivatives at the free boundary.
    pub fn fit_report(&self, h: f64) -> Result<FitReport, GameError> {
        let unbounded = matches!(self.model().path_variation(), PathVariation::Unbounded);
        let k = self.params.strike;
        let b = self.boundary();
        if self.regime == Regime::R1 {
            return Ok(FitReport {
                boundary: b,
                left_value: k,
                right_value: k,
                left_deriv: 0.0,
                right_deriv: k,
                expected_kind: FitKind::NeitherInterior,
                observed_kind: FitKind::NeitherInterior,
            });
        }
        let left_value = self.left_branch(b)?;
        let right_value = self.right_branch(b);
        let right_deriv = match self.regime {
            Regime::R4 => 0.0,
            _ => b.exp(),
        };
        let step = h.abs().max(1e-12) * b.abs().max(1.0);
        let d1 = (left_value - self.left_branch(b - step)?) / step;
        let d2 = (left_value - self.left_branch(b - 0.5 * step)?) / (0.5 * step);
        let left_deriv = 2.0 * d2 - d1;
        let expected_kind = match self.regime {
            Regime::R2 | Regime::R4 => {
                if unbounded {
                    FitKind::Smooth
                } else {
                    FitKind::ContinuousOnly
                }
            }
            _ => {
                let q = self.params.q;
                let at_edge = (q - self.q0).abs() <= 1e-9 * self.q0 || (q - self.q1).abs() <= 1e-9 * self.q1;
                if at_edge {
                    FitKind::Smooth
                } else {
                    FitKind::ContinuousOnly
                }
            }
        };
        let tol = 1e-4 * k.max(right_deriv.abs()).max(1.0);
        let mut smooth = (left_deriv - right_deriv).abs() <= tol;
        if self.regime == Regime::R3 {
            // At q1 the left slope vanishes, matching the flat continuation K.
            smooth |= left_deriv.abs() <= tol;
        }
        Ok(FitReport {
            boundary: b,
            left_value,
            right_value,
            left_deriv,
            right_deriv,
            expected_kind,
            observed_kind: if smooth { FitKind::Smooth } else { FitKind::ContinuousOnly },
        })
    }
}
