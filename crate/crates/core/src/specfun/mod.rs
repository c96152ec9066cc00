//! Special functions and quadrature primitives.

mod bessel;
mod dd;
mod fourier;
mod quad;

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub use bessel::{
    bessel_i, bessel_i_scaled, bessel_k, bessel_k_neg, bessel_k_neg_scaled, bessel_k_scaled, bessel_k_scaled_dd_pair,
};
pub use dd::DoubleDouble;
pub use fourier::{fourier_inverse, FourierResult, FourierSpec};
pub use quad::{
    integrate, integrate_endpoint_singular, integrate_real_line, integrate_semi_infinite, Estimate, GaussLegendre,
    QuadMethod, QuadValue, QuadratureSpec,
};

use crate::error::{Error, Result};

/// Largest Hermite order accepted by [`hermite`].
pub const HERMITE_MAX_ORDER: usize = 60;

/// Complementary error function, `1 − (2/√π)∫₀^χ e^{−ρ²} dρ`.
pub fn erfc(chi: f64) -> f64 {
    libm::erfc(chi)
}

/// Scaled complementary error function `e^{χ²} erfc(χ)`.
pub fn erfcx(chi: f64) -> f64 {
    if chi < 0.0 {
        return 2.0 * (chi * chi).exp() - erfcx(-chi);
    }
    if chi < 26.0 {
        return (chi * chi).exp() * libm::erfc(chi);
    }
    // Asymptotic series; the smallest term at χ ≥ 26 is far below f64 resolution.
    let inv2 = 1.0 / (2.0 * chi * chi);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        term *= -((2 * k - 1) as f64) * inv2;
        sum += term;
    }
    sum / (chi * std::f64::consts::PI.sqrt())
}

/// `∫_χ^∞ erfc(s) ds`.
pub fn ierfc(chi: f64) -> f64 {
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    if chi < 0.0 {
        return 2.0 * -chi + ierfc(-chi);
    }
    if chi < 20.0 {
        // Cancellation costs a factor of about 2χ² in relative accuracy.
        return (-chi * chi).exp() * inv_sqrt_pi - chi * libm::erfc(chi);
    }
    let inv2 = 1.0 / (2.0 * chi * chi);
    // 1/√π − χ·erfcx(χ) = (1/√π) Σ_{k≥1} (−1)^{k+1} (2k−1)!! / (2χ²)^k
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..14 {
        term *= -((2 * k - 1) as f64) * inv2;
        sum -= term;
    }
    (-chi * chi).exp() * inv_sqrt_pi * sum
}

/// Physicists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> Result<f64> {
    if n > HERMITE_MAX_ORDER {
        return Err(Error::HermiteOrder(n));
    }
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return Ok(h0);
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    Ok(h1)
}

/// Field operations needed by the Hermite-function recurrence, so that the
/// same code serves real arguments and the complex-scaled arguments of the
/// continued spectrum.
pub trait Scalar: QuadValue + Mul<Output = Self> + Add<Output = Self> + Sub<Output = Self> {
    fn from_f64(x: f64) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
}

/// Normalized Hermite functions `h_n(ξ) = π^{−1/4}(2ⁿ n!)^{−1/2} H_n(ξ) e^{−ξ²/2}`
/// for `n = 0..=n_max`, by the stable normalized recurrence.
pub fn hermite_functions<T: Scalar>(n_max: usize, xi: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n_max + 1);
    let h0 = (xi * xi * -0.5).exp() * std::f64::consts::PI.powf(-0.25);
    out.push(h0);
    if n_max == 0 {
        return out;
    }
    out.push(xi * h0 * std::f64::consts::SQRT_2);
    for n in 1..n_max {
        let a = (2.0 / (n as f64 + 1.0)).sqrt();
        let b = (n as f64 / (n as f64 + 1.0)).sqrt();
        let next = xi * out[n] * a - out[n - 1] * b;
        out.push(next);
    }
    out
}

/// `c_n = n! / (2ⁿ (n/2)!²)` for even `n`, generated by `c_{n+2} = c_n (n+1)/(n+2)`.
pub fn central_binomial_ratio(n_max: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(n_max / 2 + 1);
    let mut cur = 1.0;
    let mut n = 0;
    while n <= n_max {
        c.push(cur);
        cur *= (n as f64 + 1.0) / (n as f64 + 2.0);
        n += 2;
    }
    c
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
