//! Closed-form Euclidean propagators, the oscillator spectral sum and its
//! continuation `ω → √(iz) ω`, and gauge transformations of kernels.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::domain::{holonomy, BoundaryData, Chain, GaugeSpec};
use crate::error::{Error, Result};
use crate::specfun::hermite_functions;

const SMALL: f64 = 1e-4;

/// `a / sinh a`, even and overflow-free.
pub fn x_over_sinh(a: f64) -> f64 {
    let a = a.abs();
    if a < SMALL {
        let a2 = a * a;
        return 1.0 - a2 / 6.0 + 7.0 * a2 * a2 / 360.0;
    }
    2.0 * a * (-a).exp() / -(-2.0 * a).exp_m1()
}

/// `ln(a / sinh a)`, finite where `a / sinh a` underflows.
pub fn ln_x_over_sinh(a: f64) -> f64 {
    let a = a.abs();
    if a < 1.0 {
        return x_over_sinh(a).ln();
    }
    (2.0 * a).ln() - a - (-(-2.0 * a).exp()).ln_1p()
}

/// `a coth a`, even.
pub fn x_coth(a: f64) -> f64 {
    let a = a.abs();
    if a < SMALL {
        let a2 = a * a;
        return 1.0 + a2 / 3.0 - a2 * a2 / 45.0;
    }
    a / (a).tanh()
}

/// `(m/2πT)^{D/2} e^{−m|y−x|²/2T}`.
pub fn kernel_free(b: &BoundaryData, mass: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::invalid("m", "mass must be > 0"));
    }
    let t = b.time;
    let d = b.dim() as f64;
    Ok((mass / (2.0 * PI * t)).powf(0.5 * d) * (-mass * b.x.dist2(&b.y) / (2.0 * t)).exp())
}

pub fn kernel_linear(b: &BoundaryData, slope: f64) -> Result<f64> {
    b.require_dim("kernel_linear", 1)?;
    let (x, y, t) = (b.x.x(), b.y.x(), b.time);
    let k = slope;
    let exponent = -(x - y).powi(2) / (2.0 * t) - 0.5 * k * t * (x + y) + k * k * t.powi(3) / 24.0;
    Ok((2.0 * PI * t).sqrt().recip() * exponent.exp())
}

/// Mehler kernel, written with `ωT coth ωT` and `ωT/sinh ωT` so that it is
/// finite for large `ωT` and tends to the free kernel as `ω → 0`.
pub fn kernel_harmonic(b: &BoundaryData, omega: f64) -> Result<f64> {
    b.require_dim("kernel_harmonic", 1)?;
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", "must be > 0"));
    }
    let (x, y, t) = (b.x.x(), b.y.x(), b.time);
    let a = omega * t;
    let s = x_over_sinh(a);
    let c = x_coth(a);
    let exponent = -((x * x + y * y) * c - 2.0 * x * y * s) / (2.0 * t);
    Ok((0.5 * (ln_x_over_sinh(a) - (2.0 * PI * t).ln()) + exponent).exp())
}

/// Fock–Schwinger kernel about the initial point,
/// `(eB / 4π sinh(eBT/2)) e^{−(eB/4)|x−y|² coth(eBT/2)}`.
pub fn kernel_magnetic_fs(b: &BoundaryData, eb: f64) -> Result<f64> {
    b.require_dim("kernel_magnetic_fs", 2)?;
    let t = b.time;
    let a = 0.5 * eb * t;
    let r2 = b.x.dist2(&b.y);
    Ok((ln_x_over_sinh(a) - (2.0 * PI * t).ln() - r2 / (2.0 * t) * x_coth(a)).exp())
}

/// `e^{−ie φ(y,x)} K̂`.
pub fn kernel_gauge_transform(k_hat: Complex64, g: &GaugeSpec, b: &BoundaryData, charge: f64) -> Result<Complex64> {
    b.require_dim("kernel_gauge_transform", 2)?;
    let phi = holonomy(g, b.x.coords2(), b.y.coords2());
    if phi == 0.0 {
        return Ok(k_hat);
    }
    Ok(k_hat * Complex64::from_polar(1.0, -charge * phi))
}

/// A magnetic kernel in an arbitrary gauge, held as its value in the
/// reference gauge together with the chain whose holonomy converts it.
/// Products and quotients combine chains symbolically, so gauge factors that
/// cancel do so exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasedKernel {
    pub reference_value: Complex64,
    pub chain: Chain,
}

impl PhasedKernel {
    pub fn mul(&self, other: &PhasedKernel) -> PhasedKernel {
        PhasedKernel {
            reference_value: self.reference_value * other.reference_value,
            chain: self.chain.clone().add(&other.chain),
        }
    }

    pub fn div(&self, other: &PhasedKernel) -> PhasedKernel {
        PhasedKernel {
            reference_value: self.reference_value / other.reference_value,
            chain: self.chain.clone().sub(&other.chain),
        }
    }

    pub fn resolve(&self, g: &GaugeSpec, charge: f64) -> Complex64 {
        self.reference_value * self.chain.phase(g, charge)
    }
}

/// `K(b, a; t)` for the constant field in the gauge `g`. The reference-gauge
/// value carries the straight-line phase `e^{−ie∫Â·dx}`, which vanishes when
/// `a` is the Fock–Schwinger base point.
pub fn kernel_magnetic(a: [f64; 2], b: [f64; 2], time: f64, charge: f64, g: &GaugeSpec) -> Result<PhasedKernel> {
    let bd = BoundaryData::d2(a, b, time)?;
    let k_hat = kernel_magnetic_fs(&bd, charge * g.field)?;
    let reference = GaugeSpec::reference_gauge(g.field, g.reference);
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let pot = reference.vector_potential(mid);
    let line = (b[0] - a[0]) * pot[0] + (b[1] - a[1]) * pot[1];
    let chain = if g.is_reference() { Chain::empty() } else { Chain::segment(a, b) };
    Ok(PhasedKernel { reference_value: Complex64::from_polar(k_hat, -charge * line), chain })
}

/// Bound-state data of the oscillator `V = ½ω²x²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralData {
    pub omega: f64,
    pub n_max: usize,
}

impl SpectralData {
    pub const DEFAULT_N_MAX: usize = 40;

    pub fn new(omega: f64, n_max: usize) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::invalid("omega", "must be > 0"));
        }
        Ok(SpectralData { omega, n_max })
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.omega * (n as f64 + 0.5)
    }

    /// `ψ_n(x)` for `n = 0..=n_max`.
    pub fn wavefunctions(&self, x: f64) -> Vec<f64> {
        let scale = self.omega.powf(0.25);
        hermite_functions(self.n_max, self.omega.sqrt() * x).into_iter().map(|h| h * scale).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralSum {
    pub value: f64,
    pub last_term: f64,
    /// Bound on the omitted terms `n > n_max`.
    pub tail_bound: f64,
}

/// `Σ_{n ≤ n_max} ψ_n(y) ψ_n(x) e^{−E_n T}`.
pub fn spectral_kernel(sd: &SpectralData, b: &BoundaryData) -> Result<SpectralSum> {
    b.require_dim("spectral_kernel", 1)?;
    let t = b.time;
    let px = sd.wavefunctions(b.x.x());
    let py = sd.wavefunctions(b.y.x());
    let mut value = 0.0;
    let mut last_term = 0.0;
    for n in 0..=sd.n_max {
        last_term = px[n] * py[n] * (-sd.energy(n) * t).exp();
        value += last_term;
    }
    // |ψ_n(x)| ≤ 0.8 ω^{1/4} for all n and x.
    let q = (-sd.omega * t).exp();
    let tail_bound = 0.64 * sd.omega.sqrt() * (-sd.energy(sd.n_max + 1) * t).exp() / (1.0 - q);
    let rel_tol = 1e-10;
    if last_term.abs() > rel_tol * value.abs() {
        log::warn!("spectral sum truncated at n = {}: last term {last_term:.3e} vs sum {value:.3e}", sd.n_max);
    }
    Ok(SpectralSum { value, last_term, tail_bound })
}

/// The oscillator spectrum continued by `ω → √(iz) ω`. For `z > 0`,
/// `√(iz) = e^{iπ/4}√z`, so every scaled energy has positive real part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuedSpectralData {
    pub omega: f64,
}

impl ContinuedSpectralData {
    pub fn scaled_omega(&self, z: f64) -> Complex64 {
        let phase = if z >= 0.0 { FRAC_PI_4 } else { -FRAC_PI_4 };
        Complex64::from_polar(self.omega * z.abs().sqrt(), phase)
    }

    /// `Ẽ_n(z) = √(iz) ω (n + ½)`.
    pub fn scaled_energy(&self, n: usize, z: f64) -> Complex64 {
        self.scaled_omega(z) * (n as f64 + 0.5)
    }

    /// `ψ̃_n(x)` for `n = 0..=n_max`.
    pub fn wavefunctions(&self, n_max: usize, x: f64, z: f64) -> Vec<Complex64> {
        let w = self.scaled_omega(z);
        let scale = w.powf(0.25);
        hermite_functions(n_max, w.sqrt() * x).into_iter().map(|h| h * scale).collect()
    }

    /// `Σ_n ψ̃_n(y) ψ̃_n(x) e^{−Ẽ_n T}`, summed until the terms fall below
    /// `1e-17` of the total or `n_cap` is reached. Returns the sum and the
    /// number of terms used.
    pub fn kernel(&self, b: &BoundaryData, z: f64, n_cap: usize) -> Result<(Complex64, usize)> {
        b.require_dim("continued spectral kernel", 1)?;
        if z == 0.0 {
            return Err(Error::invalid("z", "continuation is singular at z = 0"));
        }
        let (x, y, t) = (b.x.x(), b.y.x(), b.time);
        let w = self.scaled_omega(z);
        let decay = (-w * t).exp();
        let n_need = {
            let rate = (w * t).re;
            ((40.0 / rate).ceil() as usize).clamp(8, n_cap.max(8))
        };
        let n = n_need.min(n_cap);
        let px = self.wavefunctions(n, x, z);
        let py = if x == y { px.clone() } else { self.wavefunctions(n, y, z) };
        let mut e = (-w * t * 0.5).exp();
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..=n {
            sum += px[k] * py[k] * e;
            e *= decay;
        }
        Ok((sum, n + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GaugeKind;
    use crate::specfun::{integrate, integrate_real_line, QuadratureSpec};
    use proptest::prelude::*;

    fn b1(x: f64, y: f64, t: f64) -> BoundaryData {
        BoundaryData::d1(x, y, t).unwrap()
    }

    fn b2(x: [f64; 2], y: [f64; 2], t: f64) -> BoundaryData {
        BoundaryData::d2(x, y, t).unwrap()
    }

    #[test]
    fn free_values() {
        assert!((kernel_free(&b1(0.0, 0.0, 1.0), 1.0).unwrap() - 0.39894228040143267794).abs() < 1e-16);
        assert!((kernel_free(&b1(0.0, 1.0, 1.0), 1.0).unwrap() - 0.2419707245191433498).abs() < 1e-16);
        let k2 = kernel_free(&b2([0.0, 0.0], [0.0, 0.0], 1.0), 2.0).unwrap();
        assert!((k2 - 1.0 / PI).abs() < 1e-16);
        assert!(kernel_free(&b1(0.0, 0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn linear_values() {
        let k = kernel_linear(&b1(0.0, 0.0, 1.0), 1.0).unwrap();
        assert!((k - 0.41591603978195139287).abs() < 1e-15);
        let b = b1(0.3, -1.2, 0.7);
        assert_eq!(kernel_linear(&b, 0.0).unwrap(), kernel_free(&b, 1.0).unwrap());
    }

    #[test]
    fn harmonic_values() {
        let k = kernel_harmonic(&b1(0.0, 0.0, 1.0), 1.0).unwrap();
        assert!((k - 0.36800519870756081206).abs() < 1e-15);
        let b = b1(0.2, 0.5, 1.0);
        let lim = kernel_harmonic(&b, 1e-4).unwrap();
        assert!((lim / kernel_free(&b, 1.0).unwrap() - 1.0).abs() < 1e-6);
        let far = kernel_harmonic(&b1(0.1, 0.2, 800.0), 1.0).unwrap();
        let ground = (1.0 / PI).sqrt() * (-0.5 * (0.01 + 0.04) - 400.0f64).exp();
        assert!((far / ground - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnetic_values() {
        let k = kernel_magnetic_fs(&b2([0.3, 0.1], [0.3, 0.1], 1.0), 1.0).unwrap();
        assert!((k - 0.15271193332004124221).abs() < 1e-16);
        let b = b2([0.0, 0.2], [0.5, -0.4], 1.5);
        let tiny = kernel_magnetic_fs(&b, 1e-9).unwrap();
        assert!((tiny / kernel_free(&b, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(kernel_magnetic_fs(&b, 2.0).unwrap(), kernel_magnetic_fs(&b, -2.0).unwrap());
    }

    #[test]
    fn helper_series_match_closed_forms() {
        for a in [0.99e-4f64, 1.01e-4, 0.3, 0.999, 1.001, 40.0, 800.0] {
            let s = if a < 700.0 { a / a.sinh() } else { 0.0 };
            assert!((x_over_sinh(a) - s).abs() <= 1e-15 * s);
            if a < 700.0 {
                assert!((ln_x_over_sinh(a) - s.ln()).abs() < 1e-13);
            }
            assert!((x_coth(a) - a / a.tanh()).abs() < 1e-14 * x_coth(a));
        }
    }

    #[test]
    fn semigroup_1d() {
        let q = QuadratureSpec::adaptive(1e-14, 1e-12);
        #[allow(clippy::type_complexity)]
        let kernels: Vec<Box<dyn Fn(&BoundaryData) -> f64>> = vec![
            Box::new(|b| kernel_free(b, 1.0).unwrap()),
            Box::new(|b| kernel_linear(b, 0.7).unwrap()),
            Box::new(|b| kernel_harmonic(b, 1.3).unwrap()),
        ];
        for k in &kernels {
            let (x, y, t, total) = (0.3, -0.5, 0.4, 1.0);
            let conv = integrate_real_line(|z| k(&b1(x, z, t)) * k(&b1(z, y, total - t)), 0.0, &q).unwrap().value;
            let direct = k(&b1(x, y, total));
            assert!((conv / direct - 1.0).abs() < 1e-8, "{conv} vs {direct}");
        }
    }

    #[test]
    fn semigroup_magnetic_coincident() {
        let q = QuadratureSpec::adaptive(1e-12, 1e-10);
        let (eb, t, total) = (1.0, 0.35, 1.0);
        let c = [0.2, -0.1];
        let at = |r: f64, th: f64| [c[0] + r * th.cos(), c[1] + r * th.sin()];
        let conv = integrate(
            |th: f64| {
                integrate_real_line(
                    |r: f64| {
                        let r = r.abs();
                        let z = at(r, th);
                        0.5 * r
                            * kernel_magnetic_fs(&b2(c, z, t), eb).unwrap()
                            * kernel_magnetic_fs(&b2(z, c, total - t), eb).unwrap()
                    },
                    0.0,
                    &q,
                )
                .unwrap()
                .value
            },
            0.0,
            2.0 * PI,
            &q,
        )
        .unwrap()
        .value;
        let direct = kernel_magnetic_fs(&b2(c, c, total), eb).unwrap();
        assert!((conv / direct - 1.0).abs() < 1e-6, "{conv} vs {direct}");
    }

    /// Chapman–Kolmogorov with phases, off the diagonal and in Landau gauge.
    #[test]
    fn semigroup_magnetic_with_phases() {
        let q = QuadratureSpec::adaptive(1e-11, 1e-9);
        let (x, y) = ([0.1, 0.3], [0.6, -0.2]);
        let (charge, field, t, total) = (1.0, 1.2, 0.45, 1.0);
        let g = GaugeSpec::new(GaugeKind::Landau, field, x);
        let k = |a, b, s| kernel_magnetic(a, b, s, charge, &g).unwrap().resolve(&g, charge);
        let conv = integrate(
            |u: f64| {
                integrate(
                    |w: f64| {
                        let z = [u, w];
                        k(z, y, total - t) * k(x, z, t)
                    },
                    -6.0,
                    6.0,
                    &q,
                )
                .unwrap()
                .value
            },
            -6.0,
            6.0,
            &q,
        )
        .unwrap()
        .value;
        let direct = k(x, y, total);
        assert!((conv - direct).norm() < 1e-6 * direct.norm(), "{conv} vs {direct}");
    }

    #[test]
    fn gauge_transform_properties() {
        let k_hat = Complex64::new(0.3, 0.0);
        let b = b2([0.2, 0.1], [-0.4, 0.9], 1.0);
        let reference = GaugeSpec::reference_gauge(1.0, [0.2, 0.1]);
        assert_eq!(kernel_gauge_transform(k_hat, &reference, &b, 1.0).unwrap(), k_hat);
        let landau = GaugeSpec::new(GaugeKind::Landau, 1.0, [0.2, 0.1]);
        let same = b2([0.2, 0.1], [0.2, 0.1], 1.0);
        assert_eq!(kernel_gauge_transform(k_hat, &landau, &same, 1.0).unwrap(), k_hat);
        let moved = kernel_gauge_transform(k_hat, &landau, &b, 1.0).unwrap();
        assert!((moved.norm() - 0.3).abs() < 1e-16);
        assert!(moved.im != 0.0);
        // The phased kernel agrees with the transform formula.
        let pk = kernel_magnetic([0.2, 0.1], [-0.4, 0.9], 1.0, 1.0, &landau).unwrap();
        let fs = kernel_magnetic_fs(&b, 1.0).unwrap();
        let via = kernel_gauge_transform(Complex64::new(fs, 0.0), &landau, &b, 1.0).unwrap();
        assert!((pk.resolve(&landau, 1.0) - via).norm() < 1e-15);
    }

    #[test]
    fn spectral_sum_matches_mehler() {
        let sd = SpectralData::new(1.0, 40).unwrap();
        let s = spectral_kernel(&sd, &b1(0.0, 0.0, 1.0)).unwrap();
        assert!((s.value - 0.36800519870756081206).abs() < 1e-8);
        let b = b1(0.3, -0.2, 2.0);
        let s = spectral_kernel(&sd, &b).unwrap();
        assert!((s.value - kernel_harmonic(&b, 1.0).unwrap()).abs() < 1e-8);
        assert!(s.tail_bound < 1e-8);
    }

    #[test]
    fn spectral_ground_state_dominance_and_parity() {
        let sd = SpectralData::new(1.0, 40).unwrap();
        let b = b1(0.4, -0.3, 20.0);
        let s = spectral_kernel(&sd, &b).unwrap();
        let psi = sd.wavefunctions(0.4)[0] * sd.wavefunctions(-0.3)[0];
        assert!((s.value / (psi * (-10.0f64).exp()) - 1.0).abs() < 1e-8);
        let w = sd.wavefunctions(0.0);
        for n in (1..=40).step_by(2) {
            assert_eq!(w[n], 0.0);
        }
    }

    #[test]
    fn wavefunctions_are_orthonormal() {
        let sd = SpectralData::new(1.7, 10).unwrap();
        let q = QuadratureSpec::adaptive(1e-12, 1e-10);
        for n in 0..=10 {
            for m in 0..=n {
                let v = integrate_real_line(
                    |x| {
                        let w = sd.wavefunctions(x);
                        w[n] * w[m]
                    },
                    0.0,
                    &q,
                )
                .unwrap()
                .value;
                assert!((v - if n == m { 1.0 } else { 0.0 }).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn continued_spectrum() {
        let cs = ContinuedSpectralData { omega: 1.0 };
        for z in [0.01, 1.0, 50.0] {
            let mut last = 0.0;
            for n in 0..5 {
                let e = cs.scaled_energy(n, z);
                assert!(e.re > last);
                last = e.re;
            }
        }
        // The continued sum is the Mehler kernel at complex frequency √(iz)ω.
        let b = b1(0.0, 0.0, 1.0);
        for z in [0.3, 2.0, 30.0] {
            let (k, _) = cs.kernel(&b, z, 100000).unwrap();
            let w = cs.scaled_omega(z);
            let closed = (w / (2.0 * PI * (w * 1.0).sinh())).sqrt();
            assert!((k - closed).norm() < 1e-12 * closed.norm(), "z={z}: {k} vs {closed}");
        }
        let b = b1(0.3, -0.4, 1.5);
        let (k, _) = cs.kernel(&b, 4.0, 100000).unwrap();
        let w = cs.scaled_omega(4.0);
        let (x, y, t) = (0.3f64, -0.4f64, 1.5);
        let closed = (w / (2.0 * PI * (w * t).sinh())).sqrt()
            * (-(w / (2.0 * (w * t).sinh())) * ((x * x + y * y) * (w * t).cosh() - 2.0 * x * y)).exp();
        assert!((k - closed).norm() < 1e-12 * closed.norm());
    }

    proptest! {
        #[test]
        fn magnetic_kernel_is_rotation_invariant(
            x0 in -1.0f64..1.0, x1 in -1.0f64..1.0,
            y0 in -1.0f64..1.0, y1 in -1.0f64..1.0,
            angle in 0.0f64..std::f64::consts::TAU, eb in -3.0f64..3.0, t in 0.1f64..3.0,
        ) {
            let rot = |p: [f64; 2]| [p[0] * angle.cos() - p[1] * angle.sin(), p[0] * angle.sin() + p[1] * angle.cos()];
            let a = kernel_magnetic_fs(&b2([x0, x1], [y0, y1], t), eb).unwrap();
            let r = kernel_magnetic_fs(&b2(rot([x0, x1]), rot([y0, y1]), t), eb).unwrap();
            prop_assert!((a - r).abs() <= 1e-12 * a);
            prop_assert!(a > 0.0);
        }

        #[test]
        fn real_kernels_are_symmetric_and_positive(
            x in -2.0f64..2.0, y in -2.0f64..2.0, t in 0.05f64..5.0,
            k in -2.0f64..2.0, w in 0.01f64..3.0,
        ) {
            let (f, r) = (b1(x, y, t), b1(y, x, t));
            let (l1, l2) = (kernel_linear(&f, k).unwrap(), kernel_linear(&r, k).unwrap());
            let (h1, h2) = (kernel_harmonic(&f, w).unwrap(), kernel_harmonic(&r, w).unwrap());
            prop_assert!((l1 - l2).abs() <= 1e-14 * l1 && l1 > 0.0);
            prop_assert!((h1 - h2).abs() <= 1e-14 * h1 && h1 > 0.0);
        }
    }
}
