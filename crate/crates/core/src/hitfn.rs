//! The hit function `H̄(z | y, x; T)` and its normalized form
//! `H = H̄ / K(y, x; T)`.

use std::f64::consts::PI;
use std::ops::Div;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::domain::{BoundaryData, DistributionTable, GaugeKind, GaugeSpec, Grid, Position, PotentialSpec};
use crate::error::{Error, Result};
use crate::greens::{classical_path, green_free_coincident, green_harmonic_coincident, green_magnetic_coincident};
use crate::kernels::{kernel_free, kernel_harmonic, kernel_linear, kernel_magnetic, SpectralData};
use crate::specfun::{erfcx, integrate_endpoint_singular, QuadValue, QuadratureSpec};

/// Smallest coincident Green function admitted, `√` of the determinant floor.
const GREEN_FLOOR: f64 = 1e-15;

/// Normalized free hit function,
/// `√(π/2T) e^{(x−y)²/2T} Erfc[(|z−x| + |z−y|)/√(2T)]`.
pub fn hit_free_closed(b: &BoundaryData, z: f64) -> Result<f64> {
    b.require_dim("hit_free_closed", 1)?;
    let (x, y, t) = (b.x.x(), b.y.x(), b.time);
    let a = ((z - x).abs() + (z - y).abs()) / (2.0 * t).sqrt();
    let shift = (x - y).powi(2) / (2.0 * t) - a * a;
    Ok((PI / (2.0 * t)).sqrt() * erfcx(a) * shift.exp())
}

/// The free hit function as the bridge-marginal integral over `u = τ/T`.
pub fn hit_free_integral(b: &BoundaryData, z: f64, q: &QuadratureSpec) -> Result<f64> {
    b.require_dim("hit_free_integral", 1)?;
    let (x, y, t) = (b.x.x(), b.y.x(), b.time);
    let r = integrate_endpoint_singular(
        |u: f64| {
            let var = t * u * (1.0 - u);
            if var <= 0.0 {
                return 0.0;
            }
            let d = z - x - (y - x) * u;
            (-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
        },
        0.0,
        1.0,
        q,
    )?;
    Ok(r.value)
}

/// `∫₀^T dτ / (T √(2π G(τ,τ))) e^{−(z − x_c(τ))² / 2G(τ,τ)}` for a
/// user-supplied classical path and coincident Green function. Exact for
/// quadratic actions and a semi-classical approximation otherwise.
pub fn hit_quadratic_with(
    path: impl Fn(f64) -> f64,
    green: impl Fn(f64) -> f64,
    total: f64,
    z: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !(total > 0.0) {
        return Err(Error::invalid("T", "must be > 0"));
    }
    let r = integrate_endpoint_singular(
        |tau: f64| {
            let g = green(tau);
            if g <= GREEN_FLOOR {
                return 0.0;
            }
            let d = z - path(tau);
            (-d * d / (2.0 * g)).exp() / (2.0 * PI * g).sqrt()
        },
        0.0,
        total,
        q,
    )?;
    Ok(r.value / total)
}

/// Normalized hit function of a quadratic action.
pub fn hit_quadratic(p: &PotentialSpec, b: &BoundaryData, z: f64, q: &QuadratureSpec) -> Result<f64> {
    b.require_dim("hit_quadratic", 1)?;
    let cp = classical_path(p, b)?;
    let total = b.time;
    match *p {
        PotentialSpec::Free | PotentialSpec::Linear { .. } => hit_quadratic_with(
            |t| cp.eval_real(t),
            |t| green_free_coincident(t.clamp(0.0, total), total).unwrap_or(0.0),
            total,
            z,
            q,
        ),
        PotentialSpec::Harmonic { omega } => hit_quadratic_with(
            |t| cp.eval_real(t),
            |t| green_harmonic_coincident(t.clamp(0.0, total), total, omega).unwrap_or(0.0),
            total,
            z,
            q,
        ),
        PotentialSpec::MagneticConstant { .. } => {
            Err(Error::UnsupportedPotential { operation: "hit_quadratic", potential: p.to_string() })
        }
    }
}

/// Normalized magnetic hit function in the Fock–Schwinger gauge about `x`:
/// `∫₀^T dt/(2πT g(t)) e^{−(z − x(t))²/2g(t)}` with `𝒢(t,t) = g(t)·1` and
/// the complex classical path `x(t)`. Real when `x = y`; logarithmically
/// divergent at `z = x` and `z = y`, where `+∞` is returned.
pub fn hit_magnetic(b: &BoundaryData, eb: f64, z: [f64; 2], q: &QuadratureSpec) -> Result<Complex64> {
    b.require_dim("hit_magnetic", 2)?;
    if z == b.x.coords2() || z == b.y.coords2() {
        return Ok(Complex64::new(f64::INFINITY, 0.0));
    }
    let base = b.x.coords2();
    let p = PotentialSpec::magnetic(eb, 1.0, GaugeKind::FockSchwinger { base })?;
    let cp = classical_path(&p, b)?;
    let total = b.time;
    let r = integrate_endpoint_singular(
        |t: f64| {
            let t = t.clamp(0.0, total);
            let g = green_magnetic_coincident(t, total, eb).unwrap_or(0.0);
            if g <= GREEN_FLOOR {
                return Complex64::new(0.0, 0.0);
            }
            let xc = cp.eval(t);
            let d0 = Complex64::new(z[0], 0.0) - xc[0];
            let d1 = Complex64::new(z[1], 0.0) - xc[1];
            (-(d0 * d0 + d1 * d1) / (2.0 * g)).exp() / (2.0 * PI * g)
        },
        0.0,
        total,
        q,
    )?;
    Ok(r.value / total)
}

/// `(1/T) ∫₀^T dt K(z, x; t) K(y, z; T − t)`, divided by `K(y, x; T)` when
/// `normalize` is set. `kernel(from, to, t)` evaluates `K(to, from; t)`.
pub fn hit_via_kernels<V, K>(
    kernel: K,
    b: &BoundaryData,
    z: &Position,
    q: &QuadratureSpec,
    normalize: bool,
) -> Result<V>
where
    V: QuadValue + std::ops::Mul<Output = V> + Div<Output = V>,
    K: Fn(&Position, &Position, f64) -> V,
{
    let total = b.time;
    let r = integrate_endpoint_singular(
        |t: f64| {
            if t <= 0.0 || t >= total {
                return V::zero();
            }
            kernel(&b.x, z, t) * kernel(z, &b.y, total - t)
        },
        0.0,
        total,
        q,
    )?;
    let bar = r.value * (1.0 / total);
    if normalize {
        Ok(bar / kernel(&b.x, &b.y, total))
    } else {
        Ok(bar)
    }
}

/// Normalized magnetic hit function built from kernels in the gauge `g`.
/// The gauge factors of the three kernels form a closed chain, so the result
/// is independent of `g` bit for bit.
pub fn hit_magnetic_via_kernels(
    b: &BoundaryData,
    charge: f64,
    g: &GaugeSpec,
    z: [f64; 2],
    q: &QuadratureSpec,
) -> Result<Complex64> {
    b.require_dim("hit_magnetic_via_kernels", 2)?;
    let (x, y, total) = (b.x.coords2(), b.y.coords2(), b.time);
    // The chain of every integrand term is seg(x→z) + seg(z→y).
    let k_zx = |t: f64| kernel_magnetic(x, z, t, charge, g);
    let k_yz = |t: f64| kernel_magnetic(z, y, t, charge, g);
    let mid = total * 0.5;
    let chain = k_zx(mid)?.mul(&k_yz(mid)?).chain;
    let r = integrate_endpoint_singular(
        |t: f64| {
            if t <= 0.0 || t >= total {
                return Complex64::new(0.0, 0.0);
            }
            match (k_zx(t), k_yz(total - t)) {
                (Ok(a), Ok(c)) => a.mul(&c).reference_value,
                _ => Complex64::new(f64::NAN, 0.0),
            }
        },
        0.0,
        total,
        q,
    )?;
    let bar = crate::kernels::PhasedKernel { reference_value: r.value / total, chain };
    let kyx = kernel_magnetic(x, y, total, charge, g)?;
    Ok(bar.div(&kyx).resolve(g, charge))
}

/// Large-`T` forms of the oscillator hit function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticHit {
    /// The bound-state double sum divided by the spectral kernel.
    pub double_sum: f64,
    /// `|ψ₀(z)|²` plus the `1/T` correction.
    pub leading: f64,
    pub ground_density: f64,
}

/// `e^{−E_a T} (1 − e^{−(E_b − E_a)T}) / (E_b − E_a)` for `E_a < E_b`:
/// the exact `∫₀^T e^{−E_n t − E_m (T − t)} dt` without cancellation.
fn time_integral(en: f64, em: f64, total: f64) -> f64 {
    let (lo, hi) = if en < em { (en, em) } else { (em, en) };
    let gap = hi - lo;
    (-lo * total).exp() * -(-gap * total).exp_m1() / gap
}

pub fn hit_asymptotic_harmonic(omega: f64, b: &BoundaryData, z: f64, n_max: usize) -> Result<AsymptoticHit> {
    b.require_dim("hit_asymptotic_harmonic", 1)?;
    let sd = SpectralData::new(omega, n_max)?;
    let total = b.time;
    let px = sd.wavefunctions(b.x.x());
    let py = sd.wavefunctions(b.y.x());
    let pz = sd.wavefunctions(z);
    let energies: Vec<f64> = (0..=n_max).map(|n| sd.energy(n)).collect();
    for n in 0..=n_max {
        for m in 0..n {
            if (energies[n] - energies[m]).abs() <= 1e-12 * energies[n].abs().max(1.0) {
                return Err(Error::DegenerateSpectrum(m, n));
            }
        }
    }
    let mut bar = 0.0;
    let mut kernel = 0.0;
    for n in 0..=n_max {
        let wn = py[n] * pz[n];
        kernel += py[n] * px[n] * (-energies[n] * total).exp();
        for m in 0..=n_max {
            let w = wn * pz[m] * px[m];
            if w == 0.0 {
                continue;
            }
            let i = if n == m {
                total * (-energies[n] * total).exp()
            } else {
                time_integral(energies[n], energies[m], total)
            };
            bar += w * i;
        }
    }
    let double_sum = bar / (total * kernel);
    let ground_density = pz[0] * pz[0];
    let mut correction = 0.0;
    for n in 1..=n_max {
        let num = py[0] * pz[0] * pz[n] * px[n] + py[n] * pz[n] * pz[0] * px[0];
        correction += num / (energies[n] - energies[0]);
    }
    let leading = ground_density + correction / (total * py[0] * px[0]);
    Ok(AsymptoticHit { double_sum, leading, ground_density })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitMethod {
    ClosedForm,
    QuadraticQuadrature,
    KernelConvolution,
    Asymptotic { n_max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct HitRequest {
    pub potential: PotentialSpec,
    pub boundary: BoundaryData,
    pub z_grid: Grid,
    pub method: HitMethod,
}

impl HitRequest {
    fn validate(&self) -> Result<()> {
        let ok = match (self.method, &self.potential) {
            (HitMethod::ClosedForm, PotentialSpec::Free) => true,
            (HitMethod::ClosedForm, PotentialSpec::MagneticConstant { .. }) => true,
            (HitMethod::ClosedForm, _) => false,
            (HitMethod::QuadraticQuadrature, _) => true,
            (HitMethod::KernelConvolution, _) => true,
            (HitMethod::Asymptotic { .. }, PotentialSpec::Harmonic { .. }) => true,
            (HitMethod::Asymptotic { .. }, _) => false,
        };
        if !ok {
            return Err(Error::UnsupportedPotential { operation: "hit method", potential: self.potential.to_string() });
        }
        let want = if matches!(self.potential, PotentialSpec::MagneticConstant { .. }) { 2 } else { 1 };
        self.boundary.require_dim("hit request", want)?;
        let grid_dim = match self.z_grid {
            Grid::Line(_) => 1,
            Grid::Lattice { .. } => 2,
        };
        if grid_dim != want {
            return Err(Error::Dimension { operation: "hit grid", expected: want, actual: grid_dim });
        }
        Ok(())
    }

    fn point(&self, z: &Position, q: &QuadratureSpec) -> Result<Complex64> {
        let b = &self.boundary;
        let real = |v: f64| Complex64::new(v, 0.0);
        match (self.method, self.potential) {
            (HitMethod::ClosedForm, PotentialSpec::Free) => hit_free_closed(b, z.x()).map(real),
            (
                HitMethod::ClosedForm | HitMethod::QuadraticQuadrature,
                PotentialSpec::MagneticConstant { field, charge, .. },
            ) => hit_magnetic(b, field * charge, z.coords2(), q),
            (HitMethod::QuadraticQuadrature, p) => hit_quadratic(&p, b, z.x(), q).map(real),
            (HitMethod::KernelConvolution, PotentialSpec::MagneticConstant { field, charge, .. }) => {
                let g = self.potential.gauge_spec(b.x.coords2()).expect("magnetic");
                debug_assert_eq!(g.field, field);
                hit_magnetic_via_kernels(b, charge, &g, z.coords2(), q)
            }
            (HitMethod::KernelConvolution, p) => {
                let kernel = move |a: &Position, c: &Position, t: f64| {
                    let bd = BoundaryData::new(*a, *c, t).expect("valid kernel arguments");
                    match p {
                        PotentialSpec::Free => kernel_free(&bd, 1.0),
                        PotentialSpec::Linear { slope } => kernel_linear(&bd, slope),
                        PotentialSpec::Harmonic { omega } => kernel_harmonic(&bd, omega),
                        PotentialSpec::MagneticConstant { .. } => unreachable!(),
                    }
                    .unwrap_or(f64::NAN)
                };
                hit_via_kernels(kernel, b, z, q, true).map(real)
            }
            (HitMethod::Asymptotic { n_max }, PotentialSpec::Harmonic { omega }) => {
                hit_asymptotic_harmonic(omega, b, z.x(), n_max).map(|a| real(a.double_sum))
            }
            _ => unreachable!("validated"),
        }
    }

    /// Normalized `H` on every grid point, evaluated in parallel; the output
    /// does not depend on scheduling.
    pub fn evaluate(&self, q: &QuadratureSpec) -> Result<DistributionTable<Complex64>> {
        self.validate()?;
        let values = self.z_grid.positions().par_iter().map(|z| self.point(z, q)).collect::<Result<Vec<_>>>()?;
        DistributionTable::new(self.z_grid.clone(), values)
    }

    /// As [`evaluate`](Self::evaluate), for potentials with a real hit function.
    pub fn evaluate_real(&self, q: &QuadratureSpec) -> Result<DistributionTable<f64>> {
        if matches!(self.potential, PotentialSpec::MagneticConstant { .. }) {
            return Err(Error::UnsupportedPotential {
                operation: "real hit function",
                potential: self.potential.to_string(),
            });
        }
        Ok(self.evaluate(q)?.map(|c| c.re))
    }
}
