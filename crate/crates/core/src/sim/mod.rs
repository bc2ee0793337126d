//! Monte Carlo verification of the game and of the fluctuation identities.
//!
//! Every path draws from its own generators keyed by `(seed, path_index)`,
//! and results are reduced in path order, so estimates do not depend on how
//! rayon schedules the work.

mod jumps;
mod path;

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::SimError;
use crate::game::{GameParams, RegimeSolution, StopRule};
use crate::levy::{JumpSpec, LevyModel};
use crate::numerics::compensated_sum;

pub use jumps::JUMP_CUTOFF;
pub use path::Piece;
use path::{bridge_coupon, walk, Dynamics, Hit, Streams, WalkSpec};

/// Horizon in units of the effective discount rate when none is given.
pub const HORIZON_DISCOUNTS: f64 = 40.0;
/// Truncation error tolerated relative to the estimate before warning.
pub const TRUNCATION_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Time truncation; `None` picks one from the discount rate.
    pub horizon: Option<f64>,
    /// Finest step of the Gaussian grid.
    pub dt: f64,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            horizon: None,
            dt: 1e-3,
            seed: 0,
            bridge_correction: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_paths < 2 {
            return Err(SimError::InvalidConfig(format!("n_paths = {} (need at least 2)", self.n_paths)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt = {}", self.dt)));
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SimError::InvalidConfig(format!("horizon = {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    pub n: usize,
    /// Bound on the contribution lost by stopping paths at the horizon.
    pub truncation_bound: f64,
    pub warnings: Vec<String>,
}

impl PayoffEstimate {
    fn from_values(values: &[f64], truncation_bound: f64) -> Self {
        let (mean, stderr) = mean_stderr(values);
        let mut warnings = Vec::new();
        if truncation_bound > TRUNCATION_RATIO * mean.abs() {
            warnings.push(format!(
                "truncation bound {truncation_bound:.3e} exceeds {TRUNCATION_RATIO:e} of the estimate"
            ));
        }
        Self {
            mean,
            stderr,
            n: values.len(),
            truncation_bound,
            warnings,
        }
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap <= ROUNDING * (1.0 + target.abs()) {
            0.0
        } else {
            gap / self.stderr
        }
    }

    /// `|mean - target| <= k·stderr + truncation_bound`, up to rounding.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + self.truncation_bound + ROUNDING * (1.0 + target.abs())
    }

    /// Pass within 3 standard errors, Inconclusive within 5.
    pub fn verdict(&self, target: f64) -> Verdict {
        if self.agrees_with(target, 3.0) {
            Verdict::Pass
        } else if self.agrees_with(target, 5.0) {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        }
    }
}

/// Slack for paths that all pay the same amount, where the stderr is only rounding noise.
const ROUNDING: f64 = 1e-12;

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let var = if values.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn run_paths<T, F>(config: &SimConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..config.n_paths as u64).into_par_iter().map(f).collect()
}

/// Whether Monte Carlo results for this model can be trusted.
///
/// A pure-jump tabulated density that is at least `1/z` at its first node
/// is read as a truncated infinite-activity measure. Small jumps then drive
/// the paths, and folding them into the drift misplaces first passages.
pub fn mc_eligibility(model: &LevyModel) -> Result<(), String> {
    if model.gaussian_var() > 0.0 {
        return Ok(());
    }
    if let JumpSpec::Tabulated(t) = model.jumps() {
        let (z0, g0) = (t.grid()[0], t.values()[0]);
        if g0 * z0 >= 1.0 {
            return Err(format!(
                "pure-jump tabulated measure with density {g0:.3e} at z = {z0:.3e} looks infinite-activity; \
                 small-jump folding biases first passage"
            ));
        }
    }
    Ok(())
}

fn discounted_horizon(config: &SimConfig, rate: f64) -> Result<f64, SimError> {
    match config.horizon {
        Some(t) => Ok(t),
        None if rate > 0.0 => Ok(HORIZON_DISCOUNTS / rate),
        None => Err(SimError::InvalidConfig(
            "a horizon is required when nothing is discounted".to_string(),
        )),
    }
}

fn immediate(rule: StopRule, x: f64, sigma_pos: bool) -> bool {
    match rule {
        StopRule::Immediate => true,
        StopRule::Above(l) => x > l || (x == l && sigma_pos),
        StopRule::Never => false,
    }
}

/// `E e^{J}` for one jump, the factor bounding the overshoot.
fn overshoot_factor(model: &LevyModel) -> f64 {
    let lam = model.jump_intensity();
    if lam == 0.0 {
        return 1.0;
    }
    match model.overshoot_excess(0.0) {
        Ok(excess) => 1.0 + excess / lam,
        Err(_) => f64::INFINITY,
    }
}

/// Simulates the game payoff `M_x(τ, σ)` path by path.
struct GameSim {
    dynamics: Dynamics,
    params: GameParams,
    horizon: f64,
    dt: f64,
    bridge: bool,
    overshoot: f64,
    psi_minus_one: Option<f64>,
}

impl GameSim {
    fn new(model: &LevyModel, params: &GameParams, config: &SimConfig, levels: bool) -> Result<Self, SimError> {
        config.validate()?;
        let psi_minus_one = model.psi_minus_one();
        let horizon = if levels {
            discounted_horizon(config, params.q)?
        } else {
            match psi_minus_one {
                Some(p) if params.q > p => discounted_horizon(config, params.q - p)?,
                _ => {
                    return Err(SimError::Divergent(
                        "neither player stops and q <= psi(-1), so the coupon stream has infinite mean".into(),
                    ))
                }
            }
        };
        Ok(Self {
            dynamics: Dynamics::new(model)?,
            params: *params,
            horizon,
            dt: config.dt,
            bridge: config.bridge_correction,
            overshoot: overshoot_factor(model),
            psi_minus_one,
        })
    }

    fn payoff(&self, x: f64, tau: StopRule, sigma: StopRule, streams: &mut Streams) -> f64 {
        let GameParams {
            alpha,
            beta,
            q,
            strike,
        } = self.params;
        let sigma_pos = self.dynamics.sigma > 0.0;
        if immediate(sigma, x, sigma_pos) {
            return x.exp().max(strike);
        }
        if immediate(tau, x, sigma_pos) {
            return x.exp();
        }
        let lt = tau.level().unwrap_or(f64::INFINITY);
        let ls = sigma.level().unwrap_or(f64::INFINITY);
        let mut spec = WalkSpec::new(self.dt, self.horizon, self.bridge);
        spec.up = lt.min(ls);
        spec.discount = q;
        spec.coupon = true;
        let out = walk(&self.dynamics, x, &spec, streams, None);
        let coupon = alpha * -(-q * out.time).exp_m1() / q + beta * out.coupon;
        match out.hit {
            Hit::Up => {
                let level = out.position.exp();
                let stop = if ls <= lt || out.position > ls { level.max(strike) } else { level };
                coupon + (-q * out.time).exp() * stop
            }
            _ => coupon,
        }
    }

    /// What the horizon can hide: the coupon after `T` plus a terminal payoff.
    fn truncation_bound(&self, x: f64, tau: StopRule, sigma: StopRule) -> f64 {
        let GameParams {
            alpha,
            beta,
            q,
            strike,
        } = self.params;
        let t = self.horizon;
        let level = tau.level().unwrap_or(f64::INFINITY).min(sigma.level().unwrap_or(f64::INFINITY));
        if level.is_finite() {
            let top = level.max(x).exp();
            (-q * t).exp() * (alpha / q + beta * top / q + strike.max(top * self.overshoot))
        } else {
            let gap = q - self.psi_minus_one.unwrap_or(f64::INFINITY);
            (-q * t).exp() * alpha / q + beta * x.exp() * (-gap * t).exp() / gap
        }
    }
}

/// Monte Carlo estimate of `M_x(τ, σ)` for threshold strategies started at `x`.
pub fn estimate_game_value(
    model: &LevyModel,
    params: &GameParams,
    x: f64,
    tau: StopRule,
    sigma: StopRule,
    config: &SimConfig,
) -> Result<PayoffEstimate, SimError> {
    let levels = tau.level().is_some() || sigma.level().is_some();
    let game = GameSim::new(model, params, config, levels)?;
    let values = run_paths(config, |i| game.payoff(x, tau, sigma, &mut Streams::new(config.seed, i)));
    Ok(PayoffEstimate::from_values(&values, game.truncation_bound(x, tau, sigma)))
}

/// `E e^{-q τ⁺_y}` from `X_0 = 0`.
pub fn estimate_exit_transform(model: &LevyModel, q: f64, y: f64, config: &SimConfig) -> Result<PayoffEstimate, SimError> {
    config.validate()?;
    if !(q > 0.0) || !(y >= 0.0) {
        return Err(SimError::InvalidConfig(format!("need q > 0 and y >= 0, got q = {q}, y = {y}")));
    }
    let horizon = discounted_horizon(config, q)?;
    let dynamics = Dynamics::new(model)?;
    let mut spec = WalkSpec::new(config.dt, horizon, config.bridge_correction);
    spec.up = y;
    let values = run_paths(config, |i| {
        let out = walk(&dynamics, 0.0, &spec, &mut Streams::new(config.seed, i), None);
        if out.hit == Hit::Up {
            (-q * out.time).exp()
        } else {
            0.0
        }
    });
    Ok(PayoffEstimate::from_values(&values, (-q * horizon).exp()))
}

/// `E[e^{-p τ⁻_{-x}}; τ⁻_{-x} < τ⁺_y]` from `X_0 = 0`, for `x, y > 0`.
pub fn estimate_two_sided_exit(
    model: &LevyModel,
    p: f64,
    x: f64,
    y: f64,
    config: &SimConfig,
) -> Result<PayoffEstimate, SimError> {
    config.validate()?;
    if !(p >= 0.0) || !(x > 0.0) || !(y > 0.0) {
        return Err(SimError::InvalidConfig(format!("need p >= 0, x > 0, y > 0, got {p}, {x}, {y}")));
    }
    let horizon = discounted_horizon(config, p)?;
    let dynamics = Dynamics::new(model)?;
    let mut spec = WalkSpec::new(config.dt, horizon, config.bridge_correction);
    spec.up = y;
    spec.down = -x;
    let outcomes = run_paths(config, |i| walk(&dynamics, 0.0, &spec, &mut Streams::new(config.seed, i), None));
    let values: Vec<f64> = outcomes
        .iter()
        .map(|o| if o.hit == Hit::Down { (-p * o.time).exp() } else { 0.0 })
        .collect();
    let unexited = outcomes.iter().filter(|o| o.hit == Hit::Horizon).count() as f64 / outcomes.len() as f64;
    let bound = if p > 0.0 { (-p * horizon).exp().min(unexited) } else { unexited };
    Ok(PayoffEstimate::from_values(&values, bound))
}

/// `E e^{-θ X_t}` from `X_0 = 0`; equals `e^{t ψ(θ)}`.
pub fn estimate_laplace(model: &LevyModel, theta: f64, t: f64, config: &SimConfig) -> Result<PayoffEstimate, SimError> {
    config.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(SimError::InvalidConfig(format!("t = {t}")));
    }
    let dynamics = Dynamics::new(model)?;
    let spec = WalkSpec::new(config.dt, t, config.bridge_correction);
    let values = run_paths(config, |i| {
        let out = walk(&dynamics, 0.0, &spec, &mut Streams::new(config.seed, i), None);
        (-theta * out.position).exp()
    });
    Ok(PayoffEstimate::from_values(&values, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerHopfReport {
    pub estimate: PayoffEstimate,
    /// `(q/Φ(q))·(Φ(q)+1)/(q-ψ(-1))`.
    pub expected: f64,
}

/// Monte Carlo of `E e^{sup_{s ≤ e_q} X_s}` against its closed form.
pub fn wiener_hopf_check(model: &LevyModel, q: f64, config: &SimConfig) -> Result<WienerHopfReport, SimError> {
    config.validate()?;
    let psi_m1 = model
        .psi_minus_one()
        .ok_or_else(|| SimError::Divergent("psi(-1) is infinite".into()))?;
    if !(q > 0.0 && q > psi_m1) {
        return Err(SimError::Divergent(format!("need q > max(0, psi(-1) = {psi_m1}), got {q}")));
    }
    let phi = model.phi(q)?;
    let expected = q / phi * (phi + 1.0) / (q - psi_m1);
    let dynamics = Dynamics::new(model)?;
    let values = run_paths(config, |i| {
        let s = &mut Streams::new(config.seed, i);
        let e: f64 = Exp1.sample(&mut s.coarse);
        let mut spec = WalkSpec::new(config.dt, e / q, config.bridge_correction);
        spec.track_sup = true;
        walk(&dynamics, 0.0, &spec, s, None).sup.exp()
    });
    Ok(WienerHopfReport {
        estimate: PayoffEstimate::from_values(&values, 0.0),
        expected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleComparison {
    pub label: String,
    pub tau: StopRule,
    pub sigma: StopRule,
    pub value: f64,
    /// Perturbed minus equilibrium payoff, averaged over paired paths.
    pub diff: f64,
    /// Standard error of `diff` from the per-path differences.
    pub stderr: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleReport {
    pub x: f64,
    pub delta: f64,
    pub equilibrium: PayoffEstimate,
    pub comparisons: Vec<SaddleComparison>,
}

impl SaddleReport {
    pub fn all_pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn any_fail(&self) -> bool {
        self.comparisons.iter().any(|c| c.verdict == Verdict::Fail)
    }
}

fn shift(rule: StopRule, by: f64, x: f64, cap: f64) -> StopRule {
    match rule {
        StopRule::Above(l) => StopRule::Above((l + by).min(cap)),
        // Stopping at once is the level just below x; moving it up means waiting.
        StopRule::Immediate if by > 0.0 => StopRule::Above((x + by).min(cap)),
        other => other,
    }
}

/// Checks `M_x(τ, σ*) <= M_x(τ*, σ*) <= M_x(τ*, σ)` for level shifts of `±delta`
/// on each side, with common random numbers across the five strategy pairs.
pub fn saddle_check(
    model: &LevyModel,
    params: &GameParams,
    solution: &RegimeSolution,
    x: f64,
    delta: f64,
    config: &SimConfig,
) -> Result<SaddleReport, SimError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(SimError::InvalidConfig(format!("delta = {delta}")));
    }
    let (tau, sigma) = (solution.tau, solution.sigma);
    let log_k = params.log_strike();
    let candidates = [
        ("tau + delta", shift(tau, delta, x, f64::INFINITY), sigma, false),
        ("tau - delta", shift(tau, -delta, x, f64::INFINITY), sigma, false),
        ("sigma + delta", tau, shift(sigma, delta, x, log_k), true),
        ("sigma - delta", tau, shift(sigma, -delta, x, log_k), true),
    ];
    let levels = [tau, sigma]
        .iter()
        .chain(candidates.iter().flat_map(|c| [&c.1, &c.2]))
        .all(|r| r.level().is_some() || *r == StopRule::Immediate);
    let game = GameSim::new(model, params, config, levels)?;
    // Every strategy pair replays the same path.
    let rows: Vec<[f64; 5]> = run_paths(config, |i| {
        let mut row = [0.0; 5];
        row[0] = game.payoff(x, tau, sigma, &mut Streams::new(config.seed, i));
        for (k, c) in candidates.iter().enumerate() {
            row[k + 1] = game.payoff(x, c.1, c.2, &mut Streams::new(config.seed, i));
        }
        row
    });
    let base: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let bound = game.truncation_bound(x, tau, sigma);
    let equilibrium = PayoffEstimate::from_values(&base, bound);
    let comparisons = candidates
        .iter()
        .enumerate()
        .map(|(k, (label, t, sg, sigma_side))| {
            let diffs: Vec<f64> = rows.iter().map(|r| r[k + 1] - r[0]).collect();
            let values: Vec<f64> = rows.iter().map(|r| r[k + 1]).collect();
            let (diff, stderr) = mean_stderr(&diffs);
            let value = compensated_sum(values) / rows.len() as f64;
            // The holder cannot gain by deviating; the issuer cannot save.
            let violation = if *sigma_side { -diff } else { diff };
            let slack = 2.0 * bound + ROUNDING * (1.0 + equilibrium.mean.abs());
            let verdict = if violation <= 3.0 * stderr + slack {
                Verdict::Pass
            } else if violation <= 5.0 * stderr + slack {
                Verdict::Inconclusive
            } else {
                Verdict::Fail
            };
            SaddleComparison {
                label: label.to_string(),
                tau: *t,
                sigma: *sg,
                value,
                diff,
                stderr,
                verdict,
            }
        })
        .collect();
    Ok(SaddleReport {
        x,
        delta,
        equilibrium,
        comparisons,
    })
}

/// A simulated path on the `dt` grid with its jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub start: f64,
    pub horizon: f64,
    /// Volatility of the Gaussian part, zero for bounded variation.
    pub sigma: f64,
    pub pieces: Vec<Piece>,
}

impl PathSample {
    /// Jump times and sizes.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.pieces
            .iter()
            .filter(|p| p.jump_after > 0.0)
            .map(|p| (p.t1, p.jump_after))
            .collect()
    }

    pub fn running_sup(&self) -> f64 {
        self.pieces
            .iter()
            .fold(self.start, |m, p| m.max(p.max).max(p.b + p.jump_after))
    }

    pub fn final_value(&self) -> f64 {
        self.pieces.last().map_or(self.start, |p| p.b + p.jump_after)
    }

    /// The same path started from `x` instead.
    pub fn started_at(&self, x: f64) -> PathSample {
        let d = x - self.start;
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                a: p.a + d,
                b: p.b + d,
                max: p.max + d,
                min: p.min + d,
                ..*p
            })
            .collect();
        PathSample {
            start: x,
            horizon: self.horizon,
            sigma: self.sigma,
            pieces,
        }
    }
}

/// Samples path `path_index` from `X_0 = 0` on `[0, horizon]`.
pub fn sample_path(model: &LevyModel, config: &SimConfig, path_index: u64) -> Result<PathSample, SimError> {
    config.validate()?;
    let horizon = config
        .horizon
        .ok_or_else(|| SimError::InvalidConfig("sample_path needs a horizon".to_string()))?;
    let dynamics = Dynamics::new(model)?;
    let mut spec = WalkSpec::new(config.dt, horizon, config.bridge_correction);
    spec.coarse = config.dt;
    let mut pieces = Vec::new();
    walk(
        &dynamics,
        0.0,
        &spec,
        &mut Streams::new(config.seed, path_index),
        Some(&mut pieces),
    );
    Ok(PathSample {
        start: 0.0,
        horizon,
        sigma: dynamics.sigma,
        pieces,
    })
}

/// First time the recorded path exceeds `level`, and where it is then.
/// A crossing inside a grid piece is placed at the piece's linear crossing
/// point, or at its midpoint when only the sampled bridge maximum crosses.
/// Returns `(∞, final value)` when the level is not passed before the horizon.
pub fn first_passage_up(path: &PathSample, level: f64) -> (f64, f64) {
    if path.start > level || (path.start == level && path.sigma > 0.0) {
        return (0.0, path.start);
    }
    for p in &path.pieces {
        if p.max > level {
            let t = if p.b > level && p.b != p.a {
                p.t0 + (p.t1 - p.t0) * ((level - p.a) / (p.b - p.a)).clamp(0.0, 1.0)
            } else {
                0.5 * (p.t0 + p.t1)
            };
            return (t, level);
        }
        if p.b + p.jump_after > level {
            return (p.t1, p.b + p.jump_after);
        }
    }
    (f64::INFINITY, path.final_value())
}

/// First time the recorded path goes below `level`; no undershoot is possible.
pub fn first_passage_down(path: &PathSample, level: f64) -> (f64, f64) {
    if path.start < level || (path.start == level && path.sigma > 0.0) {
        return (0.0, path.start);
    }
    for p in &path.pieces {
        if p.min < level {
            let t = if p.b < level && p.b != p.a {
                p.t0 + (p.t1 - p.t0) * ((p.a - level) / (p.a - p.b)).clamp(0.0, 1.0)
            } else {
                0.5 * (p.t0 + p.t1)
            };
            return (t, level);
        }
    }
    (f64::INFINITY, path.final_value())
}

/// Discounted game payoff along a recorded path, with both strategies
/// read as first passages of their levels.
pub fn payoff(path: &PathSample, params: &GameParams, tau: StopRule, sigma: StopRule) -> f64 {
    let GameParams {
        alpha,
        beta,
        q,
        strike,
    } = *params;
    let x = path.start;
    let sigma_pos = path.sigma > 0.0;
    if immediate(sigma, x, sigma_pos) {
        return x.exp().max(strike);
    }
    if immediate(tau, x, sigma_pos) {
        return x.exp();
    }
    let lt = tau.level().unwrap_or(f64::INFINITY);
    let ls = sigma.level().unwrap_or(f64::INFINITY);
    let (t_hit, pos) = first_passage_up(path, lt.min(ls));
    let end = t_hit.min(path.horizon);
    let mut coupon = Vec::with_capacity(path.pieces.len());
    for p in &path.pieces {
        if p.t0 >= end {
            break;
        }
        if p.t1 <= end {
            coupon.push(bridge_coupon(q, path.sigma, p.t0, p.t1, p.a, p.b));
        } else {
            coupon.push(bridge_coupon(q, path.sigma, p.t0, end, p.a, pos.min(p.max)));
        }
    }
    let mut total = alpha * -(-q * end).exp_m1() / q + beta * compensated_sum(coupon);
    if t_hit.is_finite() {
        let level = pos.exp();
        let stop = if ls <= lt || pos > ls { level.max(strike) } else { level };
        total += (-q * t_hit).exp() * stop;
    }
    total
}
