//! Path generation with exact Brownian-bridge level crossings.
//!
//! Between jumps the log-price is `X_t = X_s + drift (t - s) + σ (B_t - B_s)`.
//! The Gaussian part is laid down on a coarse grid and refined by bridge
//! midpoints wherever a watched level could be crossed. Each leaf decides a
//! crossing with the exact bridge probability, and the crossing time is then
//! drawn from its exact conditional law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, InverseGaussian, StandardNormal, StandardUniform};

use crate::error::SimError;
use crate::levy::LevyModel;
use crate::numerics::quad::GL3;
use crate::numerics::special::exprel;

use super::jumps::JumpSampler;

/// Coarse step as a multiple of `dt` when no level is nearby.
pub(crate) const COARSE_FACTOR: f64 = 64.0;
/// Pieces whose crossing probability exceeds this are split further.
pub(crate) const REFINE_PROB: f64 = 1e-3;

#[derive(Debug, Clone)]
pub(crate) struct Dynamics {
    pub drift: f64,
    pub sigma: f64,
    pub jumps: JumpSampler,
}

impl Dynamics {
    pub(crate) fn new(model: &LevyModel) -> Result<Self, SimError> {
        let (jumps, folded) = JumpSampler::new(model)?;
        Ok(Self {
            drift: -model.canonical_drift() + folded,
            sigma: model.gaussian_var().sqrt(),
            jumps,
        })
    }
}

/// Independent per-path generators: jump times and sizes, coarse Gaussian
/// increments, and everything drawn during refinement. Keeping them apart
/// means strategies that refine differently still share the path skeleton.
pub(crate) struct Streams {
    pub jumps: ChaCha8Rng,
    pub coarse: ChaCha8Rng,
    pub fine: ChaCha8Rng,
}

impl Streams {
    pub(crate) fn new(seed: u64, path: u64) -> Self {
        let make = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(path.wrapping_mul(3).wrapping_add(k));
            r
        };
        Self {
            jumps: make(0),
            coarse: make(1),
            fine: make(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Hit {
    Up,
    Down,
    Horizon,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub time: f64,
    pub position: f64,
    pub hit: Hit,
    /// `∫_0^time e^{-q s} e^{X_s} ds`, conditional on the sampled skeleton.
    pub coupon: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct WalkSpec {
    /// First passage strictly above this level ends the walk.
    pub up: f64,
    /// First passage strictly below this level ends the walk.
    pub down: f64,
    pub horizon: f64,
    pub discount: f64,
    pub coupon: bool,
    pub track_sup: bool,
    pub dt: f64,
    pub coarse: f64,
    pub bridge: bool,
}

impl WalkSpec {
    pub(crate) fn new(dt: f64, horizon: f64, bridge: bool) -> Self {
        Self {
            up: f64::INFINITY,
            down: f64::NEG_INFINITY,
            horizon,
            discount: 0.0,
            coupon: false,
            track_sup: false,
            dt,
            coarse: COARSE_FACTOR * dt,
            bridge,
        }
    }
}

/// One stretch of continuous motion, followed by a jump of `jump_after` at `t1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub a: f64,
    pub b: f64,
    /// Sampled maximum and minimum of the bridge from `a` to `b`.
    pub max: f64,
    pub min: f64,
    pub jump_after: f64,
}

struct Walker<'a> {
    dynamics: &'a Dynamics,
    spec: &'a WalkSpec,
    streams: &'a mut Streams,
    coupon: f64,
    sup: f64,
    record: Option<&'a mut Vec<Piece>>,
}

pub(crate) fn walk(
    dynamics: &Dynamics,
    x0: f64,
    spec: &WalkSpec,
    streams: &mut Streams,
    record: Option<&mut Vec<Piece>>,
) -> Outcome {
    let mut w = Walker {
        dynamics,
        spec,
        streams,
        coupon: 0.0,
        sup: x0,
        record,
    };
    w.run(x0)
}

impl Walker<'_> {
    fn run(&mut self, x0: f64) -> Outcome {
        let lam = self.dynamics.jumps.intensity();
        let horizon = self.spec.horizon;
        let mut t = 0.0;
        let mut x = x0;
        let mut next_jump = self.next_arrival(0.0, lam);
        loop {
            let stop = next_jump.min(horizon);
            while t < stop {
                let t1 = if self.dynamics.sigma == 0.0 {
                    stop
                } else {
                    let t1 = t + self.spec.coarse;
                    // Avoid a sliver step just before `stop`.
                    if t1 >= stop - 1e-12 * stop.max(1.0) {
                        stop
                    } else {
                        t1
                    }
                };
                let b = self.increment(x, t1 - t);
                if let Some(out) = self.piece(t, t1, x, b) {
                    return out;
                }
                t = t1;
                x = b;
            }
            if next_jump >= horizon {
                return self.finish(horizon, x, Hit::Horizon);
            }
            let size = self.dynamics.jumps.sample(&mut self.streams.jumps);
            if let Some(rec) = self.record.as_deref_mut() {
                if let Some(last) = rec.last_mut() {
                    last.jump_after = size;
                }
            }
            x += size;
            self.sup = self.sup.max(x);
            if x > self.spec.up {
                return self.finish(t, x, Hit::Up);
            }
            next_jump = self.next_arrival(t, lam);
        }
    }

    fn next_arrival(&mut self, t: f64, lam: f64) -> f64 {
        if lam > 0.0 {
            let e: f64 = Exp1.sample(&mut self.streams.jumps);
            t + e / lam
        } else {
            f64::INFINITY
        }
    }

    fn increment(&mut self, x: f64, dt: f64) -> f64 {
        let d = self.dynamics;
        if d.sigma == 0.0 {
            x + d.drift * dt
        } else {
            let z: f64 = StandardNormal.sample(&mut self.streams.coarse);
            x + d.drift * dt + d.sigma * dt.sqrt() * z
        }
    }

    fn finish(&self, time: f64, position: f64, hit: Hit) -> Outcome {
        Outcome {
            time,
            position,
            hit,
            coupon: self.coupon,
            sup: self.sup,
        }
    }

    fn uniform(&mut self) -> f64 {
        // (0, 1], safe under a logarithm.
        1.0 - self.streams.fine.sample::<f64, _>(StandardUniform)
    }

    fn piece(&mut self, t0: f64, t1: f64, a: f64, b: f64) -> Option<Outcome> {
        let spec = *self.spec;
        let sigma = self.dynamics.sigma;
        if sigma == 0.0 {
            return self.linear_piece(t0, t1, a, b);
        }
        let (pu, pd) = crossing_probs(sigma, t1 - t0, a, b, spec.up, spec.down);
        let p = 1.0 - (1.0 - pu) * (1.0 - pd);
        if p > REFINE_PROB && t1 - t0 > spec.dt * (1.0 + 1e-9) {
            let tm = 0.5 * (t0 + t1);
            let z: f64 = StandardNormal.sample(&mut self.streams.fine);
            let m = 0.5 * (a + b) + 0.5 * sigma * (t1 - t0).sqrt() * z;
            if let Some(out) = self.piece(t0, tm, a, m) {
                return Some(out);
            }
            return self.piece(tm, t1, m, b);
        }
        let crossed = if spec.bridge {
            p >= 1.0 || (p > 0.0 && self.uniform() < p)
        } else {
            b > spec.up || b < spec.down
        };
        if !crossed {
            if spec.coupon {
                self.coupon += bridge_coupon(spec.discount, sigma, t0, t1, a, b);
            }
            if spec.track_sup || self.record.is_some() {
                let spread = -2.0 * sigma * sigma * (t1 - t0);
                let max = 0.5 * (a + b + ((b - a).powi(2) + spread * self.uniform().ln()).sqrt());
                let min = if self.record.is_some() {
                    0.5 * (a + b - ((b - a).powi(2) + spread * self.uniform().ln()).sqrt())
                } else {
                    a.min(b)
                };
                self.sup = self.sup.max(max);
                if let Some(rec) = self.record.as_deref_mut() {
                    rec.push(Piece {
                        t0,
                        t1,
                        a,
                        b,
                        max,
                        min,
                        jump_after: 0.0,
                    });
                }
            }
            return None;
        }
        if !spec.bridge {
            // Discrete monitoring: the crossing is seen at the grid point.
            if spec.coupon {
                self.coupon += bridge_coupon(spec.discount, sigma, t0, t1, a, b);
            }
            let hit = if b > spec.up { Hit::Up } else { Hit::Down };
            return Some(self.finish(t1, b, hit));
        }
        // Which level, then when: each crossing time is exact for the bridge.
        let (up, down) = if pu >= 1.0 || pd <= 0.0 {
            (true, pd >= 1.0 || (pd > 0.0 && self.uniform() < pd))
        } else if pd >= 1.0 || pu <= 0.0 {
            (pu > 0.0 && self.uniform() < pu, true)
        } else {
            // Conditional on at least one crossing, assuming independence.
            let wu = pu * (1.0 - pd);
            let wd = pd * (1.0 - pu);
            let wb = pu * pd;
            let u = self.uniform() * (wu + wd + wb);
            (u <= wu || u > wu + wd, u > wu)
        };
        let mut best: Option<(f64, f64, Hit)> = None;
        if up {
            let tc = self.hitting_time(t0, t1, spec.up - a, (spec.up - b).abs());
            best = Some((tc, spec.up, Hit::Up));
        }
        if down {
            let tc = self.hitting_time(t0, t1, a - spec.down, (b - spec.down).abs());
            if best.is_none_or(|(t, _, _)| tc < t) {
                best = Some((tc, spec.down, Hit::Down));
            }
        }
        let (tc, level, hit) = best.expect("a crossing was drawn");
        if spec.coupon {
            self.coupon += bridge_coupon(spec.discount, sigma, t0, tc, a, level);
        }
        if hit == Hit::Up {
            self.sup = self.sup.max(level);
        }
        Some(self.finish(tc, level, hit))
    }

    /// First hitting time of a level at distance `alpha` from the start and
    /// `beta` from the end of a bridge on `[t0, t1]`, given that it is hit.
    /// `s = T/(Δ - T)` is inverse Gaussian with mean `α/β` and shape `α²/Δ`.
    fn hitting_time(&mut self, t0: f64, t1: f64, alpha: f64, beta: f64) -> f64 {
        let delta = t1 - t0;
        let alpha = alpha.max(0.0);
        if alpha == 0.0 {
            return t0;
        }
        let shape = alpha * alpha / delta;
        let s = if beta > 1e-300 {
            match InverseGaussian::new(alpha / beta, shape) {
                Ok(ig) => ig.sample(&mut self.streams.fine),
                Err(_) => alpha / beta,
            }
        } else {
            // β = 0: the Lévy (one-sided stable) limit.
            let z: f64 = StandardNormal.sample(&mut self.streams.fine);
            shape / (z * z).max(1e-300)
        };
        let frac = if s.is_finite() { s / (1.0 + s) } else { 1.0 };
        t0 + delta * frac
    }

    fn linear_piece(&mut self, t0: f64, t1: f64, a: f64, b: f64) -> Option<Outcome> {
        let spec = *self.spec;
        let cross = |level: f64| t0 + (t1 - t0) * (level - a) / (b - a);
        let event = if b < spec.down {
            Some((cross(spec.down), spec.down, Hit::Down))
        } else if b > spec.up {
            Some((cross(spec.up), spec.up, Hit::Up))
        } else {
            None
        };
        let (end, xe) = match event {
            Some((tc, level, _)) => (tc, level),
            None => (t1, b),
        };
        if spec.coupon {
            self.coupon += bridge_coupon(spec.discount, 0.0, t0, end, a, xe);
        }
        self.sup = self.sup.max(xe);
        if let Some(rec) = self.record.as_deref_mut() {
            rec.push(Piece {
                t0,
                t1,
                a,
                b,
                max: a.max(b),
                min: a.min(b),
                jump_after: 0.0,
            });
        }
        event.map(|(tc, level, hit)| self.finish(tc, level, hit))
    }
}

/// Probabilities that a bridge from `a` to `b` over `delta` exceeds `up`
/// or goes below `down`.
pub(crate) fn crossing_probs(sigma: f64, delta: f64, a: f64, b: f64, up: f64, down: f64) -> (f64, f64) {
    let v = sigma * sigma * delta;
    let pu = if up == f64::INFINITY {
        0.0
    } else if a >= up || b >= up {
        1.0
    } else {
        (-2.0 * (up - a) * (up - b) / v).exp()
    };
    let pd = if down == f64::NEG_INFINITY {
        0.0
    } else if a <= down || b <= down {
        1.0
    } else {
        (-2.0 * (a - down) * (b - down) / v).exp()
    };
    (pu, pd)
}

/// `∫_{t0}^{t1} e^{-q s} E[e^{X_s} | X_{t0} = a, X_{t1} = b] ds` for a
/// Brownian bridge with volatility `sigma`, exact when `sigma = 0`.
pub(crate) fn bridge_coupon(q: f64, sigma: f64, t0: f64, t1: f64, a: f64, b: f64) -> f64 {
    let delta = t1 - t0;
    if delta <= 0.0 {
        return 0.0;
    }
    let k = (b - a) / delta;
    if sigma == 0.0 {
        return (-q * t0 + a).exp() * exprel(k - q, delta);
    }
    let half_var = 0.5 * sigma * sigma / delta;
    let mut acc = 0.0;
    for (node, weight) in GL3 {
        let u = node * delta;
        acc += weight * (-q * (t0 + u) + a + k * u + half_var * u * (delta - u)).exp();
    }
    acc * delta
}
