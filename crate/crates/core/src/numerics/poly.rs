//! Roots of low-degree real polynomials.

use num_complex::Complex64;

use crate::error::NumericError;

/// Evaluates `sum c[k] z^k` and its derivative.
pub fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of `sum c[k] z^k` (lowest degree first) by Aberth–Ehrlich
/// iteration with a final Newton polish. Roots whose imaginary part is at
/// rounding level are returned as exactly real.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>, NumericError> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && *c.last().expect("non-empty") == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = c[n];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    // Cauchy bound for the initial circle.
    let radius = 1.0 + monic[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut converged = false;
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = eval_with_derivative(&monic, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != k).map(|j| (z[k] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[k] -= step;
            max_step = max_step.max(step.norm() / z[k].norm().max(1e-300));
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericError::NoConvergence { iterations: 500 });
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(&monic, *r);
            if dp.norm() == 0.0 {
                break;
            }
            *r -= p / dp;
        }
        if r.im.abs() <= 1e-12 * r.norm().max(1.0) {
            let mut x = r.re;
            for _ in 0..3 {
                let (p, dp) = eval_with_derivative(&monic, Complex64::new(x, 0.0));
                if dp.re == 0.0 {
                    break;
                }
                x -= p.re / dp.re;
            }
            *r = Complex64::new(x, 0.0);
        }
    }
    Ok(z)
}
