//! Piecewise-linear Lévy densities with an exponential tail.
//!
//! The measure is `Π(du) = e^{-w u} g(u) du` where `g` is linear between grid
//! nodes and `g(u) = g_L e^{-ρ_t (u - z_L)}` beyond the last node. The factor
//! `e^{-w u}` records Esscher tilts exactly.

use num_complex::Complex64;

use crate::error::ModelError;
use crate::numerics::quad::integrate;
use crate::numerics::special::exprel1_c;

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
    tail_rate: f64,
    weight: f64,
    // Constants depending only on `weight`.
    phi_at_weight: f64,
    small_tilt_moment: f64,
}

/// `∫_0^h e^{-a t} dt`.
fn i0(a: Complex64, h: f64) -> Complex64 {
    exprel1_c(-a * h) * h
}

/// `∫_0^h t e^{-a t} dt`.
fn i1(a: Complex64, h: f64) -> Complex64 {
    let ah = a * h;
    if ah.norm() < 0.5 {
        // h^2 sum_n (-ah)^n / (n! (n+2))
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.5, 0.0);
        for n in 1..30 {
            term = term * (-ah) / n as f64;
            acc += term / (n + 2) as f64;
        }
        acc * h * h
    } else {
        (Complex64::new(1.0, 0.0) - (-ah).exp() * (ah + 1.0)) / (a * a)
    }
}

/// `e^{-au} - 1 + au` by series when `|au|` is small.
fn phi_kernel(a: Complex64, u: f64) -> Complex64 {
    let x = a * u;
    if x.norm() < 0.5 {
        let mut term = x * x * 0.5;
        let mut acc = term;
        for n in 3..30 {
            term = term * (-x) / n as f64;
            acc += term;
        }
        acc
    } else {
        (-x).exp() - 1.0 + x
    }
}

impl TabulatedDensity {
    /// Builds a density from strictly increasing positive nodes and
    /// non-negative values; `tail_rate` is the exponential decay rate beyond
    /// the last node. A node at `z = 1` is inserted when the grid straddles it.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, tail_rate: f64) -> Result<Self, ModelError> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(ModelError::InvalidParameter(
                "tabulated density needs at least two (z, value) pairs of equal length".into(),
            ));
        }
        if !(grid[0] > 0.0) || grid.iter().any(|z| !z.is_finite()) {
            return Err(ModelError::InvalidParameter("grid must be finite and start above zero".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidParameter("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::InvalidParameter("density values must be finite and non-negative".into()));
        }
        if !(tail_rate > 0.0 && tail_rate.is_finite()) {
            return Err(ModelError::InvalidParameter("tail rate must be positive".into()));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(ModelError::InvalidParameter("density is identically zero".into()));
        }
        if values[0] > 0.0 {
            log::warn!(
                "tabulated density is positive at its first node z = {}; mass below it is dropped",
                grid[0]
            );
        }
        let (mut grid, mut values) = (grid, values);
        if let Some(pos) = grid.iter().position(|&z| z > 1.0) {
            if pos > 0 && grid[pos - 1] < 1.0 {
                let (za, zb) = (grid[pos - 1], grid[pos]);
                let v = values[pos - 1] + (values[pos] - values[pos - 1]) * (1.0 - za) / (zb - za);
                grid.insert(pos, 1.0);
                values.insert(pos, v);
            }
        }
        let mut out = Self {
            grid,
            values,
            tail_rate,
            weight: 0.0,
            phi_at_weight: 0.0,
            small_tilt_moment: 0.0,
        };
        out.refresh_constants()?;
        Ok(out)
    }

    fn refresh_constants(&mut self) -> Result<(), ModelError> {
        let w = Complex64::new(self.weight, 0.0);
        self.phi_at_weight = self.phi_small(w).re;
        // R = ∫_{(0,1)} u (e^{-w u} - 1) g(u) du
        let w = self.weight;
        let mut r = 0.0;
        for (a, b, ga, slope) in self.segments() {
            let hi = b.min(1.0);
            if a >= hi {
                break;
            }
            r += integrate(
                |u| u * (-(w * u)).exp_m1() * (ga + slope * (u - a)),
                a,
                hi,
                1e-16,
                1e-14,
            )?
            .value;
        }
        self.small_tilt_moment = r;
        Ok(())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    /// Accumulated Esscher tilt parameter.
    pub fn tilt_weight(&self) -> f64 {
        self.weight
    }

    /// Decay rate of the measure beyond the last node.
    pub fn tail_decay(&self) -> f64 {
        self.weight + self.tail_rate
    }

    pub(crate) fn last_node(&self) -> f64 {
        *self.grid.last().expect("grid has at least two nodes")
    }

    pub(crate) fn last_value(&self) -> f64 {
        *self.values.last().expect("grid has at least two nodes")
    }

    /// `(start, end, g(start), slope)` for every linear segment.
    pub(crate) fn segments(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.grid.windows(2).zip(self.values.windows(2)).map(|(z, v)| {
            let slope = (v[1] - v[0]) / (z[1] - z[0]);
            (z[0], z[1], v[0], slope)
        })
    }

    /// Density of the (possibly tilted) Lévy measure.
    pub fn density(&self, u: f64) -> f64 {
        let z0 = self.grid[0];
        let zl = self.last_node();
        let g = if u < z0 {
            0.0
        } else if u >= zl {
            self.last_value() * (-self.tail_rate * (u - zl)).exp()
        } else {
            let i = self.grid.partition_point(|&z| z <= u) - 1;
            let (za, zb) = (self.grid[i], self.grid[i + 1]);
            self.values[i] + (self.values[i + 1] - self.values[i]) * (u - za) / (zb - za)
        };
        g * (-self.weight * u).exp()
    }

    /// Returns the measure tilted by `e^{-λ u}`.
    pub fn tilted(&self, lambda: f64) -> Result<Self, ModelError> {
        if !(lambda + self.tail_decay() > 0.0) {
            return Err(ModelError::DivergentExponent { theta: lambda });
        }
        let mut out = self.clone();
        out.weight += lambda;
        out.refresh_constants()?;
        Ok(out)
    }

    /// `Σ_seg ∫_seg φ(a, u) g(u) du` over the segments below one, `φ(a,u) = e^{-au} - 1 + au`.
    fn phi_small(&self, a: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (za, zb, ga, slope) in self.segments() {
            if za >= 1.0 {
                break;
            }
            let h = zb - za;
            if (a * zb).norm() < 0.5 {
                let c = 0.5 * (za + zb);
                let r = 0.5 * h;
                for (x, wt) in GL8 {
                    let u = c + r * x;
                    acc += phi_kernel(a, u) * (ga + slope * (u - za)) * (wt * r);
                }
            } else {
                let m0 = h * (ga + 0.5 * slope * h);
                // ∫ u g(u) du on the segment
                let m1 = h * ga * (za + 0.5 * h) + slope * h * h * (0.5 * za + h / 3.0);
                let e = (-a * za).exp() * (i0(a, h) * ga + i1(a, h) * slope);
                acc += e - m0 + a * m1;
            }
        }
        acc
    }

    /// Jump part of the Laplace exponent,
    /// `∫ (e^{-s u} - 1 + s u 1{u<1}) Π(du)`, analytically continued to
    /// `Re s > -tail_decay`.
    pub fn jump_exponent(&self, s: Complex64) -> Complex64 {
        let wc = Complex64::new(self.weight, 0.0);
        let mut acc = self.phi_small(s + wc) - self.phi_at_weight + s * self.small_tilt_moment;
        for seg in self.segments() {
            if seg.0 >= 1.0 {
                acc += self.segment_term(s, seg);
            }
        }
        let zl = self.last_node();
        let mut tail = self.tail_term(s);
        if zl < 1.0 {
            // s ∫_0^{1-zl} (zl + v) e^{-κ v} dv
            let len = 1.0 - zl;
            let k = Complex64::new(self.tail_decay(), 0.0);
            let mom = i0(k, len) * zl + i1(k, len);
            tail += s * mom * (self.last_value() * (-self.weight * zl).exp());
        }
        acc + tail
    }

    /// `∫ (e^{-s u} - 1) Π(du)` without a compensator. Finite because the
    /// density is bounded, and free of the `s·∫uΠ` cancellation at large `|s|`.
    pub fn uncompensated_exponent(&self, s: Complex64) -> Complex64 {
        let mut acc = self.tail_term(s);
        for seg in self.segments() {
            acc += self.segment_term(s, seg);
        }
        acc
    }

    /// `∫ e^{-wu} g(u) (e^{-su} - 1) du` over one linear segment.
    fn segment_term(&self, s: Complex64, (za, zb, ga, slope): (f64, f64, f64, f64)) -> Complex64 {
        let w = self.weight;
        let h = zb - za;
        if (s * zb).norm() < 0.5 {
            // Split so the weight stays smooth.
            let pieces = ((w.abs() * h).ceil() as usize).clamp(1, 64);
            let step = h / pieces as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..pieces {
                let c = za + (k as f64 + 0.5) * step;
                let r = 0.5 * step;
                for (x, wt) in GL8 {
                    let u = c + r * x;
                    let em1 = exprel1_c(-s * u) * (-s * u);
                    acc += em1 * ((-w * u).exp() * (ga + slope * (u - za)) * wt * r);
                }
            }
            acc
        } else {
            let wc = Complex64::new(w, 0.0);
            let a = s + wc;
            let tilted = (-a * za).exp() * (i0(a, h) * ga + i1(a, h) * slope);
            let plain = (-w * za).exp() * (i0(wc, h) * ga + i1(wc, h) * slope);
            tilted - plain
        }
    }

    /// Exponential tail beyond the last node, uncompensated.
    fn tail_term(&self, s: Complex64) -> Complex64 {
        let zl = self.last_node();
        let kappa = self.tail_decay();
        let big_g = self.last_value() * (-self.weight * zl).exp();
        ((-s * zl).exp() / (s + kappa) - 1.0 / kappa) * big_g
    }

    /// `∫_{(0,1)} u Π(du)`.
    pub fn small_jump_mean(&self) -> Result<f64, ModelError> {
        self.moment_u(0.0, 1.0)
    }

    /// `∫_{[1,∞)} u Π(du)`.
    pub fn large_jump_mean(&self) -> Result<f64, ModelError> {
        self.moment_u(1.0, f64::INFINITY)
    }

    /// `∫_{lo}^{hi} u Π(du)`.
    pub fn moment_u(&self, lo: f64, hi: f64) -> Result<f64, ModelError> {
        let w = self.weight;
        let mut acc = 0.0;
        for (za, zb, ga, slope) in self.segments() {
            let (a, b) = (za.max(lo), zb.min(hi));
            if a >= b {
                continue;
            }
            acc += integrate(|u| u * (-w * u).exp() * (ga + slope * (u - za)), a, b, 1e-16, 1e-14)?.value;
        }
        let zl = self.last_node();
        let a = lo.max(zl);
        if a < hi {
            let kappa = self.tail_decay();
            let big_g = self.last_value() * (-w * zl).exp();
            let upper = |x: f64| -> f64 {
                if x.is_infinite() {
                    0.0
                } else {
                    (-kappa * (x - zl)).exp() * (x / kappa + 1.0 / (kappa * kappa))
                }
            };
            acc += big_g * (upper(a) - upper(hi));
        }
        Ok(acc)
    }

    /// `∫_{u > max(s, 0)} e^{c (u - s)} Π(du)`; requires `c < tail_decay`.
    pub fn shifted_exp_moment(&self, s: f64, c: f64) -> f64 {
        let w = self.weight;
        let a_exp = Complex64::new(w - c, 0.0);
        let mut acc = 0.0;
        for (za, zb, ga, slope) in self.segments() {
            if zb <= s {
                continue;
            }
            let a = za.max(s);
            let g_a = ga + slope * (a - za);
            let h = zb - a;
            let core = i0(a_exp, h).re * g_a + i1(a_exp, h).re * slope;
            acc += (c * (a - s) - w * a).exp() * core;
        }
        let zl = self.last_node();
        let kappa = self.tail_decay();
        let a = s.max(zl);
        acc += self.last_value() * (c * (a - s) - w * a - self.tail_rate * (a - zl)).exp() / (kappa - c);
        acc
    }

    /// Total mass above `lo`.
    pub fn mass_above(&self, lo: f64) -> f64 {
        self.shifted_exp_moment(lo, 0.0)
    }
}
