//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::NumericError;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrates `f` over `[lo, hi]` to within `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> Result<Quadrature, NumericError>
where
    F: FnMut(f64) -> f64,
{
    if lo == hi {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    if hi < lo {
        let r = integrate(f, hi, lo, abs_tol, rel_tol)?;
        return Ok(Quadrature {
            value: -r.value,
            error: r.error,
        });
    }
    let (value, error) = kronrod(&mut f, lo, hi);
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { lo, hi, value, error });
    loop {
        if !total.is_finite() {
            return Err(NumericError::NonFinite { at: 0.5 * (lo + hi) });
        }
        let tol = abs_tol.max(rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(NumericError::Quadrature {
                lo,
                hi,
                error: total_err,
                tolerance: tol,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval cannot be split further in floating point.
            return Err(NumericError::Quadrature {
                lo,
                hi,
                error: total_err,
                tolerance: tol,
            });
        }
        let (v1, e1) = kronrod(&mut f, worst.lo, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.hi);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece {
            lo: worst.lo,
            hi: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            lo: mid,
            hi: worst.hi,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated update drift.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Quadrature { value, error })
}

/// Convenience wrapper using the crate-wide default tolerances.
pub fn integrate_default<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64, NumericError> {
    integrate(f, lo, hi, 1e-10, 1e-12).map(|q| q.value)
}

/// Three-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub const GL3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];
