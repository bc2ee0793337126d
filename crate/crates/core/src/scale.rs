//! q-scale functions `W^{(q)}` and `Z^{(q)}`.
//!
//! `W` vanishes on `(-∞, 0)` and satisfies `∫_0^∞ e^{-βx} W(x) dx = 1/(ψ(β) - q)`
//! for `β > Φ(q)`. Rational exponents are handled by partial fractions; the
//! tabulated family by inverting the transform of `W_Φ(x) = e^{-Φx} W(x)`,
//! which is bounded and monotone.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::ScaleError;
use crate::levy::{JumpSpec, LevyModel, PathVariation};
use crate::numerics::inversion::EulerRule;
use crate::numerics::poly;
use crate::numerics::quad::integrate;
use crate::numerics::special::exprel1_c;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMethod {
    /// At most two exponential terms.
    ClosedFormTwoExp,
    /// Three exponential terms (Gaussian part plus exponential jumps).
    ClosedFormThreeExp,
    NumericInversion,
}

impl fmt::Display for ScaleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScaleMethod::ClosedFormTwoExp => "closed-form (two exponentials)",
            ScaleMethod::ClosedFormThreeExp => "closed-form (three exponentials)",
            ScaleMethod::NumericInversion => "numerical Laplace inversion",
        };
        f.write_str(s)
    }
}

/// Cache span and resolution for the inverted function.
const CACHE_LO: f64 = 1e-4;
const CACHE_HI: f64 = 50.0;
const CACHE_POINTS: usize = 2048;
/// The two Euler rules must agree to this relative level at every check point.
const CERTIFY_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
struct Term {
    root: Complex64,
    coef: Complex64,
}

#[derive(Debug, Clone)]
struct InvertedCache {
    rule: EulerRule,
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// Limited slopes, used only for the value interpolant.
    slopes: Vec<f64>,
    /// Inverted derivatives, interpolated directly for `W_Φ'`.
    derivs: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Repr {
    Closed(Vec<Term>),
    Inverted(Box<InvertedCache>),
}

#[derive(Debug, Clone)]
pub struct ScaleEvaluator {
    model: LevyModel,
    q: f64,
    phi: f64,
    w0: f64,
    method: ScaleMethod,
    repr: Repr,
}

/// `(e^z - 1 - z) / z^2`.
fn exprel2_c(z: Complex64) -> Complex64 {
    if z.norm() < 0.2 {
        let mut term = Complex64::new(0.5, 0.0);
        let mut acc = term;
        for n in 3..16 {
            term = term * z / n as f64;
            acc += term;
        }
        acc
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

impl ScaleEvaluator {
    /// Picks closed forms for Brownian and exponential-jump models, numerical
    /// inversion otherwise.
    pub fn new(model: &LevyModel, q: f64) -> Result<Self, ScaleError> {
        let method = match model.jumps() {
            JumpSpec::Tabulated(_) => ScaleMethod::NumericInversion,
            JumpSpec::Exponential { intensity, .. } if *intensity > 0.0 && model.gaussian_var() > 0.0 => {
                ScaleMethod::ClosedFormThreeExp
            }
            _ => ScaleMethod::ClosedFormTwoExp,
        };
        match Self::with_method(model, q, method) {
            Err(ScaleError::InvalidArgument(reason)) if method != ScaleMethod::NumericInversion => {
                log::info!("closed form unavailable ({reason}); inverting numerically");
                Self::with_method(model, q, ScaleMethod::NumericInversion)
            }
            other => other,
        }
    }

    pub fn with_method(model: &LevyModel, q: f64, method: ScaleMethod) -> Result<Self, ScaleError> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(ScaleError::InvalidArgument(format!("q must be finite and non-negative, got {q}")));
        }
        let phi = model.phi(q)?;
        let w0 = match model.path_variation() {
            PathVariation::Bounded { drift } => 1.0 / drift,
            PathVariation::Unbounded => 0.0,
        };
        let repr = match method {
            ScaleMethod::NumericInversion => Repr::Inverted(Box::new(build_cache(model, q, phi, w0)?)),
            _ => Repr::Closed(closed_form_terms(model, q, method)?),
        };
        Ok(Self {
            model: model.clone(),
            q,
            phi,
            w0,
            method,
            repr,
        })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Φ(q)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn method(&self) -> ScaleMethod {
        self.method
    }

    /// `W(0+)`: `1/d` for bounded variation, zero otherwise.
    pub fn w_at_zero(&self) -> f64 {
        self.w0
    }

    /// `W'(0+)`: `2/b²` with a Gaussian part, `(Π(0,∞) + q)/d²` for
    /// finite-activity bounded variation.
    pub fn w_prime_at_zero(&self) -> f64 {
        match self.model.path_variation() {
            PathVariation::Unbounded => 2.0 / self.model.gaussian_var(),
            PathVariation::Bounded { drift } => (self.model.jump_intensity() + self.q) / (drift * drift),
        }
    }

    /// `W_Φ(x) = e^{-Φx} W(x)`; bounded and non-decreasing.
    pub fn w_tilted(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Closed(terms) => {
                let span = terms.iter().fold(0.0f64, |m, t| m.max(t.root.norm())) * x;
                if span < 1.0 {
                    self.w(x) * (-self.phi * x).exp()
                } else {
                    terms
                        .iter()
                        .map(|t| (t.coef * ((t.root - self.phi) * x).exp()).re)
                        .sum()
                }
            }
            Repr::Inverted(c) => self.inverted_value(c, x).0,
        }
    }

    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Closed(terms) => {
                let mut acc = self.w0;
                for t in terms {
                    let z = t.root * x;
                    acc += (t.coef * exprel1_c(z) * z).re;
                }
                acc
            }
            Repr::Inverted(_) => (self.phi * x).exp() * self.w_tilted(x),
        }
    }

    /// Right derivative `W'(x+)`.
    pub fn w_prime(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Closed(terms) => terms.iter().map(|t| (t.coef * t.root * (t.root * x).exp()).re).sum(),
            Repr::Inverted(c) => {
                let (v, d) = self.inverted_value(c, x);
                (self.phi * x).exp() * (self.phi * v + d)
            }
        }
    }

    /// `Z(x) = 1 + q ∫_0^x W`.
    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        1.0 + self.q * self.w_integral(x)
    }

    /// `∫_0^x W(y) dy`.
    pub fn w_integral(&self, x: f64) -> f64 {
        self.w_exp_integral(0.0, x)
    }

    /// `(∫_0^x W, ∫_0^x e^{y} W(y) dy)`.
    pub fn w_integrals(&self, x: f64) -> (f64, f64) {
        (self.w_exp_integral(0.0, x), self.w_exp_integral(1.0, x))
    }

    /// `∫_0^x e^{k y} W(y) dy`.
    pub fn w_exp_integral(&self, k: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Closed(terms) => {
                // W = w0 + Σ c (e^{r y} - 1), and E(a, x) = ∫_0^x e^{a y} dy = x + a x² h(a x).
                let kc = Complex64::new(k, 0.0);
                let base = kc * exprel2_c(kc * x);
                let mut acc = self.w0 * x * exprel1_c(kc * x).re;
                for t in terms {
                    let a = t.root + k;
                    acc += (t.coef * (a * exprel2_c(a * x) - base)).re * x * x;
                }
                acc
            }
            Repr::Inverted(_) => {
                let f = |y: f64| (k * y).exp() * self.w(y);
                integrate(f, 0.0, x, 1e-13, 1e-12)
                    .or_else(|_| integrate(f, 0.0, x, 1e-10, 1e-10))
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN)
            }
        }
    }

    /// `|(ψ(β) - q) ∫_0^∞ e^{-βx} W(x) dx - 1|` for `β > Φ(q)`.
    pub fn laplace_selfcheck(&self, beta: f64) -> Result<f64, ScaleError> {
        if !(beta > self.phi) {
            return Err(ScaleError::InvalidArgument(format!("beta = {beta} must exceed Phi(q) = {}", self.phi)));
        }
        let gap = beta - self.phi;
        let upper = 60.0 / gap;
        let f = |x: f64| (-gap * x).exp() * self.w_tilted(x);
        let mut total = 0.0;
        let mut lo = 0.0;
        // Split at a few scales so the rule sees the fast initial variation.
        for hi in [1e-3, 1e-2, 0.1, 1.0, 10.0, f64::INFINITY] {
            let hi = hi.min(upper);
            if hi <= lo {
                continue;
            }
            total += integrate(f, lo, hi, 1e-15, 1e-13)?.value;
            lo = hi;
            if lo >= upper {
                break;
            }
        }
        let psi = self.model.laplace_exponent(beta)?;
        Ok(((psi - self.q) * total - 1.0).abs())
    }

    fn inverted_value(&self, c: &InvertedCache, x: f64) -> (f64, f64) {
        if x == 0.0 {
            return (self.w0, self.w_prime_at_zero() - self.phi * self.w0);
        }
        if x < CACHE_LO || x > CACHE_HI {
            return invert_point(&self.model, self.q, self.phi, self.w0, &c.rule, x);
        }
        let i = (c.nodes.partition_point(|&n| n <= x)).clamp(1, c.nodes.len() - 1) - 1;
        let (v, _) = hermite(c.nodes[i], c.nodes[i + 1], c.values[i], c.values[i + 1], c.slopes[i], c.slopes[i + 1], x);
        // Differentiating the value interpolant would amplify inversion noise
        // by 1/h on the fine nodes near zero.
        let j = i.saturating_sub(1).min(c.nodes.len() - 4);
        (v, lagrange4(&c.nodes[j..j + 4], &c.derivs[j..j + 4], x))
    }
}

fn lagrange4(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let mut l = 1.0;
        for j in 0..4 {
            if j != i {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += l * ys[i];
    }
    acc
}

fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let d = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (v, d)
}

fn closed_form_terms(model: &LevyModel, q: f64, method: ScaleMethod) -> Result<Vec<Term>, ScaleError> {
    let b2 = model.gaussian_var();
    // W = Σ N(r)/D'(r) e^{r x} where 1/(ψ - q) = N/D.
    let (numer, denom): (Vec<f64>, Vec<f64>) = match (model.jumps(), method) {
        (JumpSpec::NoJumps, ScaleMethod::ClosedFormTwoExp) => (vec![1.0], vec![-q, model.mu(), 0.5 * b2]),
        (JumpSpec::Exponential { intensity, decay }, _) if *intensity == 0.0 => {
            let _ = decay;
            (vec![1.0], vec![-q, model.canonical_drift(), 0.5 * b2])
        }
        (JumpSpec::Exponential { intensity, decay }, ScaleMethod::ClosedFormThreeExp)
        | (JumpSpec::Exponential { intensity, decay }, ScaleMethod::ClosedFormTwoExp) => {
            let (lam, rho, d) = (*intensity, *decay, model.canonical_drift());
            if (method == ScaleMethod::ClosedFormThreeExp) != (b2 > 0.0) {
                return Err(ScaleError::InvalidArgument(format!("{method} does not match this model")));
            }
            (
                vec![rho, 1.0],
                vec![-q * rho, rho * d - q - lam, d + 0.5 * rho * b2, 0.5 * b2],
            )
        }
        _ => {
            return Err(ScaleError::InvalidArgument(format!("{method} does not apply to this jump family")));
        }
    };
    let roots = poly::roots(&denom)?;
    let scale = roots.iter().fold(1.0f64, |m, r| m.max(r.norm()));
    for (i, a) in roots.iter().enumerate() {
        for b in &roots[i + 1..] {
            if (a - b).norm() < 1e-6 * scale {
                return Err(ScaleError::InvalidArgument("numerically double root".into()));
            }
        }
    }
    let mut terms = Vec::with_capacity(roots.len());
    for r in roots {
        let (n, _) = poly::eval_with_derivative(&numer, r);
        let (_, dd) = poly::eval_with_derivative(&denom, r);
        terms.push(Term { root: r, coef: n / dd });
    }
    Ok(terms)
}

/// Transform of `W_Φ`: `1 / (ψ(s + Φ) - q)`.
fn tilted_transform(model: &LevyModel, q: f64, phi: f64, s: Complex64) -> Complex64 {
    let v = (model.laplace_exponent_complex(s + phi) - q).inv();
    if v.re.is_finite() && v.im.is_finite() {
        v
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `(W_Φ(x), W_Φ'(x))` from a single batch of transform values.
fn invert_point(model: &LevyModel, q: f64, phi: f64, w0: f64, rule: &EulerRule, x: f64) -> (f64, f64) {
    let vals: Vec<Complex64> = rule.points(x).map(|s| tilted_transform(model, q, phi, s)).collect();
    let v = rule.combine(x, vals.iter().copied());
    // Transform of W_Φ' is sF - W_Φ(0). With bounded variation W_Φ(0) = 1/d and
    // the numerator s - (ψ(s+Φ) - q)/d is rewritten as -Φ - (J(s+Φ) - q)/d,
    // which avoids cancelling two O(|s|) terms.
    let d = rule.combine(
        x,
        rule.points(x).zip(vals.iter()).map(|(s, f)| {
            if w0 > 0.0 {
                if let Some(j) = model.jump_exponent_uncompensated(s + phi) {
                    let g = (-(j - q) * w0 - phi) * f;
                    if g.re.is_finite() && g.im.is_finite() {
                        return g;
                    }
                }
            }
            s * f - w0
        }),
    );
    (v, d)
}

fn build_cache(model: &LevyModel, q: f64, phi: f64, w0: f64) -> Result<InvertedCache, ScaleError> {
    let rule = EulerRule::PRIMARY;
    // Certify against a differently damped and truncated series first.
    for k in 0..10 {
        let x = 1e-2 * (CACHE_HI / 1e-2f64).powf(k as f64 / 9.0);
        let (primary, _) = invert_point(model, q, phi, w0, &rule, x);
        let check = EulerRule::CHECK.invert(|s| tilted_transform(model, q, phi, s), x);
        let scale = primary.abs().max(check.abs()).max(1e-300);
        let disagreement = (primary - check).abs() / scale;
        if !(disagreement <= CERTIFY_TOL) {
            return Err(ScaleError::Accuracy { at: x, disagreement });
        }
    }
    let ratio = (CACHE_HI / CACHE_LO).ln() / (CACHE_POINTS - 1) as f64;
    let nodes: Vec<f64> = (0..CACHE_POINTS)
        .map(|i| CACHE_LO * (ratio * i as f64).exp())
        .map(|x: f64| x.min(CACHE_HI))
        .collect();
    // Nodes are independent, so the parallel build is bit-identical to a serial one.
    let (values, mut slopes): (Vec<f64>, Vec<f64>) = nodes
        .par_iter()
        .map(|&x| invert_point(model, q, phi, w0, &rule, x))
        .unzip();
    let derivs = slopes.clone();
    // Fritsch–Carlson limiter keeps the interpolant monotone.
    for i in 0..CACHE_POINTS - 1 {
        let h = nodes[i + 1] - nodes[i];
        let delta = (values[i + 1] - values[i]) / h;
        if delta <= 0.0 {
            continue;
        }
        let a = slopes[i] / delta;
        let b = slopes[i + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            slopes[i] = tau * a * delta;
            slopes[i + 1] = tau * b * delta;
        }
    }
    Ok(InvertedCache {
        rule,
        nodes,
        values,
        slopes,
        derivs,
    })
}

/// `W_λ^{(p)}(x)` of the Esscher-tilted model via `e^{-λx} W^{(p + ψ(λ))}(x)`.
pub fn tilted_w(model: &LevyModel, lambda: f64, p: f64, x: f64) -> Result<f64, ScaleError> {
    let shifted = p + model.laplace_exponent(lambda)?;
    if shifted < 0.0 {
        return Err(ScaleError::InvalidArgument(format!("p + psi(lambda) = {shifted} is negative")));
    }
    let ev = ScaleEvaluator::new(model, shifted)?;
    Ok((-lambda * x).exp() * ev.w(x))
}
