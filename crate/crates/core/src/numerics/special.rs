//! Cancellation-free elementary building blocks.

use num_complex::Complex64;

/// `(e^{k x} - 1) / k`, equal to `x` in the limit `k -> 0`.
pub fn exprel(k: f64, x: f64) -> f64 {
    let kx = k * x;
    if kx.abs() < 1e-8 {
        x * (1.0 + 0.5 * kx)
    } else {
        kx.exp_m1() / k
    }
}

/// Complex `(e^{z} - 1) / z`, equal to 1 at `z = 0`.
pub fn exprel1_c(z: Complex64) -> Complex64 {
    if z.norm() < 0.2 {
        // Horner on sum_n z^n / (n+1)!
        let mut inv_fact = [0.0; 13];
        let mut f = 1.0;
        for (n, slot) in inv_fact.iter_mut().enumerate() {
            f *= (n + 1) as f64;
            *slot = 1.0 / f;
        }
        let mut acc = Complex64::new(inv_fact[12], 0.0);
        for n in (0..12).rev() {
            acc = acc * z + inv_fact[n];
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Complex `(e^{k x} - 1) / k`.
pub fn exprel_c(k: Complex64, x: f64) -> Complex64 {
    exprel1_c(k * x) * x
}
