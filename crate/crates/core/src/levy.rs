//! Spectrally positive Lévy processes and their Laplace exponents.
//!
//! Convention: `E[e^{-θ X_t}] = e^{t ψ(θ)}` with
//! `ψ(θ) = μθ + b²θ²/2 + ∫ (e^{-θz} - 1 + θz 1{z<1}) Π(dz)`.
//! Writing `d = μ + ∫_{(0,1)} z Π(dz)`, bounded-variation paths are
//! `X_t = -d t + (jumps)`.

use num_complex::Complex64;

use crate::error::{ModelError, NumericError};
use crate::numerics::roots::brent;
pub use crate::tabulated::TabulatedDensity;

#[derive(Debug, Clone, PartialEq)]
pub enum JumpSpec {
    NoJumps,
    /// Density `intensity * decay * e^{-decay z}` on `z > 0`.
    Exponential { intensity: f64, decay: f64 },
    Tabulated(TabulatedDensity),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathVariation {
    /// Carries the canonical drift `d > 0`.
    Bounded { drift: f64 },
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    mu: f64,
    gaussian_var: f64,
    jumps: JumpSpec,
    small_jump_mean: f64,
}

impl LevyModel {
    pub fn new(mu: f64, gaussian_var: f64, jumps: JumpSpec) -> Result<Self, ModelError> {
        if !mu.is_finite() {
            return Err(ModelError::InvalidParameter(format!("drift must be finite, got {mu}")));
        }
        if !(gaussian_var >= 0.0 && gaussian_var.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "Gaussian variance must be finite and non-negative, got {gaussian_var}"
            )));
        }
        let small_jump_mean = match &jumps {
            JumpSpec::NoJumps => 0.0,
            JumpSpec::Exponential { intensity, decay } => {
                if !(*intensity >= 0.0 && intensity.is_finite() && *decay > 0.0 && decay.is_finite()) {
                    return Err(ModelError::InvalidParameter(format!(
                        "exponential jumps need intensity >= 0 and decay > 0, got ({intensity}, {decay})"
                    )));
                }
                exp_small_jump_mean(*intensity, *decay)
            }
            JumpSpec::Tabulated(t) => t.small_jump_mean()?,
        };
        let model = Self {
            mu,
            gaussian_var,
            jumps,
            small_jump_mean,
        };
        if model.gaussian_var == 0.0 {
            let drift = model.canonical_drift();
            if drift <= 0.0 {
                return Err(ModelError::Subordinator { drift });
            }
        }
        Ok(model)
    }

    /// Brownian motion with drift: `X_t = -mu t + sqrt(gaussian_var) B_t`.
    pub fn brownian(mu: f64, gaussian_var: f64) -> Result<Self, ModelError> {
        Self::new(mu, gaussian_var, JumpSpec::NoJumps)
    }

    /// Builds the model from the canonical drift `d` instead of `μ`.
    pub fn with_canonical_drift(drift: f64, gaussian_var: f64, jumps: JumpSpec) -> Result<Self, ModelError> {
        let m1 = match &jumps {
            JumpSpec::NoJumps => 0.0,
            JumpSpec::Exponential { intensity, decay } => exp_small_jump_mean(*intensity, *decay),
            JumpSpec::Tabulated(t) => t.small_jump_mean()?,
        };
        Self::new(drift - m1, gaussian_var, jumps)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `b²`.
    pub fn gaussian_var(&self) -> f64 {
        self.gaussian_var
    }

    pub fn jumps(&self) -> &JumpSpec {
        &self.jumps
    }

    /// `∫_{(0,1)} z Π(dz)`.
    pub fn small_jump_mean(&self) -> f64 {
        self.small_jump_mean
    }

    /// `d = μ + ∫_{(0,1)} z Π(dz)`; `X_t = -d t + ...` between jumps when `b = 0`.
    pub fn canonical_drift(&self) -> f64 {
        self.mu + self.small_jump_mean
    }

    /// Total jump intensity `Π(0, ∞)` (all supported families are finite-activity).
    pub fn jump_intensity(&self) -> f64 {
        match &self.jumps {
            JumpSpec::NoJumps => 0.0,
            JumpSpec::Exponential { intensity, .. } => *intensity,
            JumpSpec::Tabulated(t) => t.mass_above(0.0),
        }
    }

    /// Infimum of the half-line on which `ψ` is finite (it is finite on `(lower, ∞)`).
    pub fn exponent_lower_limit(&self) -> f64 {
        match &self.jumps {
            JumpSpec::NoJumps => f64::NEG_INFINITY,
            JumpSpec::Exponential { intensity, decay } => {
                if *intensity == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -decay
                }
            }
            JumpSpec::Tabulated(t) => -t.tail_decay(),
        }
    }

    pub fn path_variation(&self) -> PathVariation {
        if self.gaussian_var > 0.0 {
            PathVariation::Unbounded
        } else {
            PathVariation::Bounded {
                drift: self.canonical_drift(),
            }
        }
    }

    /// Analytic continuation of `ψ` to `Re s > exponent_lower_limit()`.
    pub fn laplace_exponent_complex(&self, s: Complex64) -> Complex64 {
        let gauss = s * s * (0.5 * self.gaussian_var);
        match &self.jumps {
            JumpSpec::NoJumps => s * self.mu + gauss,
            JumpSpec::Exponential { intensity, decay } => {
                s * self.canonical_drift() + gauss - s * *intensity / (s + *decay)
            }
            JumpSpec::Tabulated(t) => s * self.mu + gauss + t.jump_exponent(s),
        }
    }

    /// `ψ(s) - d s = ∫ (e^{-sz} - 1) Π(dz)` for bounded variation paths,
    /// computed without cancelling the drift. `None` otherwise.
    pub fn jump_exponent_uncompensated(&self, s: Complex64) -> Option<Complex64> {
        let PathVariation::Bounded { .. } = self.path_variation() else {
            return None;
        };
        Some(match &self.jumps {
            JumpSpec::NoJumps => Complex64::new(0.0, 0.0),
            JumpSpec::Exponential { intensity, decay } => -s * *intensity / (s + *decay),
            JumpSpec::Tabulated(t) => t.uncompensated_exponent(s),
        })
    }

    pub fn laplace_exponent(&self, theta: f64) -> Result<f64, ModelError> {
        if !theta.is_finite() || theta <= self.exponent_lower_limit() {
            return Err(ModelError::DivergentExponent { theta });
        }
        let v = self.laplace_exponent_complex(Complex64::new(theta, 0.0)).re;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::DivergentExponent { theta })
        }
    }

    /// `ψ(-1)`, or `None` when the exponential moment does not exist.
    pub fn psi_minus_one(&self) -> Option<f64> {
        self.laplace_exponent(-1.0).ok()
    }

    /// Right derivative of `ψ` at zero, `μ - ∫_{[1,∞)} z Π(dz)` (possibly `-∞`
    /// is never reached for the supported families).
    pub fn exponent_slope_at_zero(&self) -> Result<f64, ModelError> {
        let big = match &self.jumps {
            JumpSpec::NoJumps => 0.0,
            JumpSpec::Exponential { intensity, decay } => {
                intensity * (-decay).exp() * (1.0 + 1.0 / decay)
            }
            JumpSpec::Tabulated(t) => t.large_jump_mean()?,
        };
        Ok(self.mu - big)
    }

    /// Right inverse `Φ(p) = sup{θ ≥ 0 : ψ(θ) = p}`.
    pub fn phi(&self, p: f64) -> Result<f64, ModelError> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(ModelError::DomainError(p));
        }
        let psi = |t: f64| self.laplace_exponent_complex(Complex64::new(t, 0.0)).re - p;
        let mut lo = 0.0;
        if p == 0.0 {
            if self.exponent_slope_at_zero()? >= 0.0 {
                return Ok(0.0);
            }
            // ψ dips below zero just right of the origin.
            let mut probe = 1.0;
            while psi(probe) >= 0.0 {
                probe *= 0.5;
                if probe < 1e-300 {
                    return Ok(0.0);
                }
            }
            lo = probe;
        }
        let mut hi = 1.0f64.max(2.0 * lo);
        while psi(hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(NumericError::NoConvergence { iterations: 1000 }.into());
            }
        }
        let root = brent(psi, lo, hi, 1e-15 * hi.max(1.0))?;
        Ok(root)
    }

    /// Exponential change of measure `dP^λ/dP = e^{-λ X_t - ψ(λ) t}`.
    pub fn esscher_tilt(&self, lambda: f64) -> Result<LevyModel, ModelError> {
        self.laplace_exponent(lambda)?;
        let b2 = self.gaussian_var;
        let jumps = match &self.jumps {
            JumpSpec::NoJumps => JumpSpec::NoJumps,
            JumpSpec::Exponential { intensity, decay } => JumpSpec::Exponential {
                intensity: intensity * decay / (decay + lambda),
                decay: decay + lambda,
            },
            JumpSpec::Tabulated(t) => JumpSpec::Tabulated(t.tilted(lambda)?),
        };
        Self::with_canonical_drift(self.canonical_drift() + b2 * lambda, b2, jumps)
    }

    /// Assumption (A): `q > ψ(-1)`, which makes `E[e^{sup X}]` finite at an
    /// independent exponential time of rate `q`.
    pub fn check_assumption_a(&self, q: f64) -> bool {
        matches!(self.psi_minus_one(), Some(v) if q > v)
    }

    /// `∫_{u>s} (1 - e^{-Φ(u-s)}) Π(du)` and `∫_{u>s} e^{u-s}(1 - e^{-(Φ+1)(u-s)}) Π(du)`,
    /// with the integration restricted to `u > 0` when `s < 0`.
    pub fn shifted_jump_integrals(&self, s: f64, phi_q: f64) -> Result<(f64, f64), ModelError> {
        match &self.jumps {
            JumpSpec::NoJumps => Ok((0.0, 0.0)),
            JumpSpec::Exponential { intensity, decay } => {
                let (lam, rho) = (*intensity, *decay);
                if rho <= 1.0 && lam > 0.0 {
                    return Err(ModelError::DivergentExponent { theta: -1.0 });
                }
                if s >= 0.0 {
                    let e = (-rho * s).exp();
                    Ok((
                        lam * e * phi_q / (rho + phi_q),
                        lam * rho * e * (phi_q + 1.0) / ((rho - 1.0) * (rho + phi_q)),
                    ))
                } else {
                    let ep = (phi_q * s).exp();
                    Ok((
                        lam * (1.0 - ep * rho / (rho + phi_q)),
                        lam * rho * ((-s).exp() / (rho - 1.0) - ep / (rho + phi_q)),
                    ))
                }
            }
            JumpSpec::Tabulated(t) => {
                if t.tail_decay() <= 1.0 {
                    return Err(ModelError::DivergentExponent { theta: -1.0 });
                }
                let decayed = t.shifted_exp_moment(s, -phi_q);
                Ok((
                    t.shifted_exp_moment(s, 0.0) - decayed,
                    t.shifted_exp_moment(s, 1.0) - decayed,
                ))
            }
        }
    }

    /// `∫_{u>L} (e^{u-L} - 1) Π(du)`.
    pub fn overshoot_excess(&self, level: f64) -> Result<f64, ModelError> {
        match &self.jumps {
            JumpSpec::NoJumps => Ok(0.0),
            JumpSpec::Exponential { intensity, decay } => {
                if *decay <= 1.0 {
                    return Err(ModelError::DivergentExponent { theta: -1.0 });
                }
                let l = level.max(0.0);
                Ok(intensity * (-decay * l).exp() * ((l - level).exp() * decay / (decay - 1.0) - 1.0))
            }
            JumpSpec::Tabulated(t) => {
                if t.tail_decay() <= 1.0 {
                    return Err(ModelError::DivergentExponent { theta: -1.0 });
                }
                Ok(t.shifted_exp_moment(level, 1.0) - t.shifted_exp_moment(level, 0.0))
            }
        }
    }
}

fn exp_small_jump_mean(intensity: f64, decay: f64) -> f64 {
    // λ ∫_0^1 z ρ e^{-ρz} dz = λ (1 - e^{-ρ}(1+ρ)) / ρ
    let r = decay;
    if r < 0.1 {
        // 1 - e^{-r}(1+r) = sum_{k>=2} (-1)^k (k-1) r^k / k!
        let mut term = 1.0;
        let mut acc = 0.0;
        for k in 1..20 {
            term *= -r / k as f64;
            if k >= 2 {
                acc += (k - 1) as f64 * term;
            }
        }
        intensity * acc / r
    } else {
        intensity * (1.0 - (-r).exp() * (1.0 + r)) / r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_exponent_and_inverse() {
        let m = LevyModel::brownian(0.0, 2.0).unwrap();
        assert_eq!(m.laplace_exponent(3.0).unwrap(), 9.0);
        assert!((m.phi(4.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(m.path_variation(), PathVariation::Unbounded);
    }

    #[test]
    fn exponential_jumps_small_mean() {
        let m = LevyModel::new(0.5, 0.0, JumpSpec::Exponential { intensity: 1.0, decay: 2.0 }).unwrap();
        let want = (1.0 - (-2.0f64).exp() * 3.0) / 2.0;
        assert!((m.small_jump_mean() - want).abs() < 1e-15);
        match m.path_variation() {
            PathVariation::Bounded { drift } => assert!((drift - 0.5 - want).abs() < 1e-15),
            _ => panic!("expected bounded variation"),
        }
    }

    #[test]
    fn subordinator_rejected() {
        let r = LevyModel::new(-1.0, 0.0, JumpSpec::Exponential { intensity: 1.0, decay: 2.0 });
        assert!(matches!(r, Err(ModelError::Subordinator { .. })));
        assert!(matches!(LevyModel::brownian(-1.0, 0.0), Err(ModelError::Subordinator { .. })));
    }

    #[test]
    fn divergence_below_decay() {
        let m = LevyModel::with_canonical_drift(2.0, 0.0, JumpSpec::Exponential { intensity: 1.0, decay: 0.8 })
            .unwrap();
        assert!(matches!(m.laplace_exponent(-1.0), Err(ModelError::DivergentExponent { .. })));
        assert!(!m.check_assumption_a(5.0));
    }

    #[test]
    fn phi_at_zero_with_upward_drift() {
        // Drift pushes the process up: ψ'(0+) < 0 and Φ(0) > 0.
        let m = LevyModel::brownian(-1.0, 2.0).unwrap();
        assert!((m.phi(0.0).unwrap() - 1.0).abs() < 1e-13);
        let m = LevyModel::brownian(1.0, 2.0).unwrap();
        assert_eq!(m.phi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_p_is_rejected() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        assert!(matches!(m.phi(-0.1), Err(ModelError::DomainError(_))));
    }
}
