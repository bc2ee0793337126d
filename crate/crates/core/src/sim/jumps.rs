//! Exact sampling of the compound Poisson part.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardUniform};

use crate::error::SimError;
use crate::levy::{JumpSpec, LevyModel, TabulatedDensity};
use crate::numerics::quad::integrate;

/// Jumps below this size are replaced by their mean drift.
pub const JUMP_CUTOFF: f64 = 1e-4;

#[derive(Debug, Clone)]
struct Segment {
    za: f64,
    zb: f64,
    ga: f64,
    slope: f64,
    /// Upper bound of the density on the segment, for rejection.
    bound: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct TabulatedSampler {
    segments: Vec<Segment>,
    /// Cumulative mass after each segment; the tail follows the last entry.
    cumulative: Vec<f64>,
    total: f64,
    weight: f64,
    last_node: f64,
    tail_decay: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum JumpSampler {
    None,
    Exponential { intensity: f64, decay: f64 },
    Tabulated(Box<TabulatedSampler>),
}

impl JumpSampler {
    /// Sampler and the drift contribution `∫_{(0, cut)} u Π(du)` of the
    /// jumps it leaves out.
    pub(crate) fn new(model: &LevyModel) -> Result<(Self, f64), SimError> {
        match model.jumps() {
            JumpSpec::NoJumps => Ok((JumpSampler::None, 0.0)),
            JumpSpec::Exponential { intensity, .. } if *intensity == 0.0 => Ok((JumpSampler::None, 0.0)),
            JumpSpec::Exponential { intensity, decay } => Ok((
                JumpSampler::Exponential {
                    intensity: *intensity,
                    decay: *decay,
                },
                0.0,
            )),
            JumpSpec::Tabulated(t) => {
                let (s, folded) = TabulatedSampler::new(t)?;
                Ok((JumpSampler::Tabulated(Box::new(s)), folded))
            }
        }
    }

    pub(crate) fn intensity(&self) -> f64 {
        match self {
            JumpSampler::None => 0.0,
            JumpSampler::Exponential { intensity, .. } => *intensity,
            JumpSampler::Tabulated(t) => t.total,
        }
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSampler::None => unreachable!("no jumps to sample"),
            JumpSampler::Exponential { decay, .. } => {
                let e: f64 = Exp1.sample(rng);
                e / decay
            }
            JumpSampler::Tabulated(t) => t.sample(rng),
        }
    }
}

impl TabulatedSampler {
    fn new(t: &TabulatedDensity) -> Result<(Self, f64), SimError> {
        let weight = t.tilt_weight();
        let grid = t.grid();
        let values = t.values();
        let lin = |za: f64, ga: f64, slope: f64, u: f64| (ga + slope * (u - za)) * (-weight * u).exp();
        let mut segments = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        let mut folded = 0.0;
        for i in 0..grid.len() - 1 {
            let (za, zb) = (grid[i], grid[i + 1]);
            let slope = (values[i + 1] - values[i]) / (zb - za);
            let ga = values[i];
            if za < JUMP_CUTOFF {
                let hi = zb.min(JUMP_CUTOFF);
                folded += integrate(|u| u * lin(za, ga, slope, u), za, hi, 1e-18, 1e-12)
                    .map_err(|e| SimError::NotSimulable(e.to_string()))?
                    .value;
            }
            let start = za.max(JUMP_CUTOFF);
            if start >= zb {
                continue;
            }
            let ga = ga + slope * (start - za);
            let mass = integrate(|u| lin(start, ga, slope, u), start, zb, 1e-16, 1e-12)
                .map_err(|e| SimError::NotSimulable(e.to_string()))?
                .value;
            let gb = ga + slope * (zb - start);
            let bound = ga.max(gb) * (-weight * start).exp().max((-weight * zb).exp());
            acc += mass;
            segments.push(Segment {
                za: start,
                zb,
                ga,
                slope,
                bound,
            });
            cumulative.push(acc);
        }
        let last_node = *grid.last().expect("grid is non-empty");
        let tail_decay = t.tail_decay();
        let tail = values[values.len() - 1] * (-weight * last_node).exp() / tail_decay;
        let total = acc + tail;
        if !(total > 0.0 && total.is_finite()) {
            return Err(SimError::NotSimulable(format!("jump intensity {total} above the cutoff")));
        }
        Ok((
            Self {
                segments,
                cumulative,
                total,
                weight,
                last_node,
                tail_decay,
            },
            folded,
        ))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample::<f64, _>(StandardUniform) * self.total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        if i == self.segments.len() {
            let e: f64 = Exp1.sample(rng);
            return self.last_node + e / self.tail_decay;
        }
        let s = &self.segments[i];
        loop {
            let v: f64 = rng.sample(StandardUniform);
            let z = s.za + (s.zb - s.za) * v;
            let f = (s.ga + s.slope * (z - s.za)) * (-self.weight * z).exp();
            let w: f64 = rng.sample(StandardUniform);
            if w * s.bound <= f {
                return z;
            }
        }
    }
}
