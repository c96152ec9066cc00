//! The path-averaged potential `P̄(v | y, x; T)`, the distribution of
//! `v = ∫₀^T V(x(t)) dt` (or `e∫A·dx`) over free bridges, and its normalized
//! form `P = P̄ / K₀`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::domain::{holonomy, BoundaryData, DistributionTable, GaugeSpec, Grid, PotentialSpec};
use crate::error::{Error, Result};
use crate::kernels::{kernel_free, ContinuedSpectralData};
use crate::specfun::{
    bessel_k_scaled_dd_pair, fourier_inverse, integrate_endpoint_singular, integrate_real_line, DoubleDouble,
    FourierSpec, NeumaierSum, QuadratureSpec,
};

/// A normalized path-averaged potential. Degenerate and closed-form cases are
/// kept symbolic so that weighted integrals stay exact.
#[derive(Clone, Debug, PartialEq)]
pub enum PapDistribution {
    /// `δ(v − at)`.
    Delta {
        at: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// `(π/2a) sech²(π(v − shift)/a)` with `a = |eBT|`.
    Sech2 {
        width: f64,
        shift: f64,
    },
    Table(DistributionTable<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PapWeight {
    /// `e^{−v}`, for scalar potentials.
    Decaying,
    /// `e^{−iv}`, for gauge fields.
    Oscillatory,
}

impl PapWeight {
    fn at(self, v: f64) -> Complex64 {
        match self {
            PapWeight::Decaying => Complex64::new((-v).exp(), 0.0),
            PapWeight::Oscillatory => Complex64::from_polar(1.0, -v),
        }
    }
}

impl PapDistribution {
    /// Density at `v`; `None` for a δ marker.
    pub fn density(&self, v: f64) -> Option<f64> {
        match *self {
            PapDistribution::Delta { .. } => None,
            PapDistribution::Gaussian { mean, variance } => {
                let d = v - mean;
                Some((-d * d / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt())
            }
            PapDistribution::Sech2 { width, shift } => Some(sech2_law(width, v - shift)),
            PapDistribution::Table(ref t) => Some(interpolate(t, v)),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PapDistribution::Delta { at } => at,
            PapDistribution::Gaussian { mean, .. } => mean,
            PapDistribution::Sech2 { shift, .. } => shift,
            PapDistribution::Table(ref t) => t.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            PapDistribution::Delta { .. } => 0.0,
            PapDistribution::Gaussian { variance, .. } => variance,
            PapDistribution::Sech2 { width, .. } => width * width / 12.0,
            PapDistribution::Table(ref t) => t.central_moment(2),
        }
    }

    /// Tabulates the distribution on a line grid. A δ marker has no grid form.
    pub fn on_grid(&self, grid: &Grid) -> Result<DistributionTable<f64>> {
        if let PapDistribution::Table(t) = self {
            if &t.grid == grid {
                return Ok(t.clone());
            }
        }
        let Some(points) = grid.points() else {
            return Err(Error::invalid("v_grid", "path-averaged potentials live on a line grid"));
        };
        let values = points
            .iter()
            .map(|&v| self.density(v).ok_or_else(|| Error::invalid("distribution", "a delta marker has no density")))
            .collect::<Result<Vec<_>>>()?;
        DistributionTable::new(grid.clone(), values)
    }
}

fn sech2_law(width: f64, v: f64) -> f64 {
    // sech²u = 4e^{−2|u|} / (1 + e^{−2|u|})², free of overflow.
    let e = (-2.0 * (PI * v / width).abs()).exp();
    PI / (2.0 * width) * 4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Linear interpolation on a line table, zero outside.
fn interpolate(t: &DistributionTable<f64>, v: f64) -> f64 {
    let p = t.points();
    if p.is_empty() || v < p[0] || v > p[p.len() - 1] {
        return 0.0;
    }
    let i = p.partition_point(|&g| g <= v).clamp(1, p.len() - 1);
    let (a, b) = (p[i - 1], p[i]);
    let w = if b > a { (v - a) / (b - a) } else { 0.0 };
    t.values[i - 1] * (1.0 - w) + t.values[i] * w
}

pub fn pap_free() -> PapDistribution {
    PapDistribution::Delta { at: 0.0 }
}

/// The linear-potential law: Gaussian with mean `kT(x+y)/2` and variance
/// `k²T³/12`; `k = 0` gives the δ marker.
pub fn pap_linear_distribution(b: &BoundaryData, k: f64) -> Result<PapDistribution> {
    b.require_dim("pap_linear", 1)?;
    if k == 0.0 {
        return Ok(pap_free());
    }
    let t = b.time;
    Ok(PapDistribution::Gaussian { mean: 0.5 * k * t * (b.x.x() + b.y.x()), variance: k * k * t.powi(3) / 12.0 })
}

pub fn pap_linear(b: &BoundaryData, k: f64, v: f64) -> Result<f64> {
    pap_linear_distribution(b, k)?.density(v).ok_or_else(|| Error::invalid("k", "k = 0 has the delta distribution"))
}

/// Partial sums of the Bessel-K series for the oscillator at `x = y = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Magnitude of the first omitted term.
    pub tail_estimate: f64,
    /// Largest term magnitude; `value` loses digits when this dwarfs it.
    pub largest_term: f64,
}

/// `c_n √A [(v_n − ¾) e^{−v_n}K_{1/4}(v_n) + v_n e^{−v_n}K_{5/4}(v_n)]` with
/// `A = (n + ½)ωT` and `v_n = A²/8v`, in double-double. Here
/// `e^{−v_n} Re K_ν(−v_n) = cos(νπ) e^{−v_n} K_ν(v_n)` on either side of the
/// cut, and `cos(−π/4) = −cos(−5π/4) = 1/√2`; that factor and the common
/// `v_n^{3/2}/A^{5/2} = √A/(8v)^{3/2}` are applied outside the sum.
fn series_term(wt: f64, c: DoubleDouble, n: usize, v: f64) -> Result<DoubleDouble> {
    let a = DoubleDouble::new(n as f64 + 0.5) * wt;
    let vn = a * a / (8.0 * v);
    if vn.hi > 400.0 {
        // Below e^{−800}: no representable contribution.
        return Ok(DoubleDouble::ZERO);
    }
    let damp = (-vn).exp();
    let damp2 = damp * damp;
    let (k14, k54) = bessel_k_scaled_dd_pair(0.25, vn)?;
    let (k14, k54) = (k14 * damp2, k54 * damp2);
    Ok(c * a.sqrt() * ((vn - 0.75) * k14 + vn * k54))
}

/// `P(v | 0, 0; T)` for `V = ω²x²/2` from the Bessel-K series over even
/// `n ≤ n_max`. For `v ≳ 2` the terms cancel to many orders below their
/// size, so they are formed and summed in double-double.
pub fn pap_harmonic_series(omega: f64, t: f64, v: f64, n_max: usize) -> Result<SeriesValue> {
    if !(omega > 0.0) || !(t > 0.0) {
        return Err(Error::invalid("omega, T", "must be > 0"));
    }
    if v <= 0.0 {
        return Ok(SeriesValue { value: 0.0, tail_estimate: 0.0, largest_term: 0.0 });
    }
    let wt = omega * t;
    let common = 32.0 * (wt / (2.0 * PI * PI)).sqrt() / (8.0 * v).powf(1.5);
    let mut c = DoubleDouble::ONE;
    let mut sum = DoubleDouble::ZERO;
    let mut largest = 0.0f64;
    let mut n = 0;
    while n <= n_max {
        let term = series_term(wt, c, n, v)?;
        largest = largest.max(term.hi.abs());
        sum = sum + term;
        c = c * (n as f64 + 1.0) / (n as f64 + 2.0);
        n += 2;
    }
    let tail = series_term(wt, c, n, v)?.hi.abs() * common;
    let value = sum.to_f64() * common;
    if tail > 1e-10 * value.abs() {
        log::warn!("harmonic series at v = {v}: first omitted term {tail:.3e} vs sum {value:.3e}");
    }
    Ok(SeriesValue { value, tail_estimate: tail, largest_term: largest * common })
}

/// The same Fourier integral as [`pap_harmonic_quadrature`] with the contour
/// rotated onto the positive imaginary axis, where only the intervals with
/// `sin θ < 0` contribute to the real part:
/// `(1/π) Σ_k (−1)^{k+1} ∫_{(2k−1)π}^{2kπ} e^{−vθ²/(ωT)²} √(θ/|sin θ|) 2θ/(ωT)² dθ`.
/// The square root turns by `π/2` at every zero of `sin θ`, hence the sign.
/// The first term dominates for `v ≳ 0.5`, so the value keeps full relative
/// precision where the series cancels.
pub fn pap_harmonic_branch_cut(omega: f64, t: f64, v: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(omega > 0.0) || !(t > 0.0) {
        return Err(Error::invalid("omega, T", "must be > 0"));
    }
    if v <= 0.0 {
        return Ok(0.0);
    }
    let wt2 = (omega * t).powi(2);
    // The value can sit far below any fixed absolute tolerance.
    let q = &QuadratureSpec { abs_tol: f64::MIN_POSITIVE, ..*q };
    let f = |th: f64| {
        let s = th.sin().abs();
        if s == 0.0 {
            return 0.0;
        }
        (-v * th * th / wt2).exp() * (th / s).sqrt() * 2.0 * th / wt2
    };
    let mut sum = NeumaierSum::default();
    for k in 1..=10_000usize {
        let a = (2 * k - 1) as f64 * PI;
        let piece = integrate_endpoint_singular(f, a, a + PI, q)?.value;
        sum.add(if k % 2 == 1 { piece } else { -piece });
        if piece <= 1e-18 * sum.value().abs() && v * a * a / wt2 > 40.0 {
            return Ok(sum.value() / PI);
        }
    }
    Err(Error::NoConvergence { subdivisions: 10_000, value: sum.value() / PI, error: f64::NAN })
}

/// `P` at `x = y = 0` by direct Fourier inversion over real `z` of the
/// continued spectral sum `Σ ψ̃_n(0)² e^{−Ẽ_n T} / K₀`, `Ẽ_n = √(iz) ω (n + ½)`.
/// Accurate where `P` is not far below the `O(1)` integrand.
pub fn pap_harmonic_quadrature(
    omega: f64,
    t: f64,
    v_grid: &Grid,
    n_max: usize,
    q: &QuadratureSpec,
) -> Result<DistributionTable<f64>> {
    if !(omega > 0.0) || !(t > 0.0) {
        return Err(Error::invalid("omega, T", "must be > 0"));
    }
    let b = BoundaryData::d1(0.0, 0.0, t)?;
    let k0 = kernel_free(&b, 1.0)?;
    let cs = ContinuedSpectralData { omega };
    let f = |z: f64| {
        if z == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        cs.kernel(&b, z, n_max).map(|(k, _)| k / k0).unwrap_or(Complex64::new(f64::NAN, 0.0))
    };
    // |F| ~ e^{−ωT√z/(2√2)}; stop where it is below 1e-17.
    let cutoff = (2.0 * 2f64.sqrt() * 40.0 / (omega * t)).powi(2);
    let spec = FourierSpec::new(0.0, cutoff).with_quadrature(*q);
    let r = fourier_inverse(f, v_grid, &spec)?;
    Ok(r.table.map(|c| c.re))
}

/// `(π/2eBT) sech²(πv/eBT)` at coincident endpoints; `eBT = 0` is `δ(v)`.
pub fn pap_magnetic_diagonal_distribution(eb: f64, t: f64) -> Result<PapDistribution> {
    if !(t > 0.0) || !eb.is_finite() {
        return Err(Error::invalid("eB, T", "need finite eB and T > 0"));
    }
    let width = (eb * t).abs();
    if width == 0.0 {
        return Ok(pap_free());
    }
    Ok(PapDistribution::Sech2 { width, shift: 0.0 })
}

pub fn pap_magnetic_diagonal(eb: f64, t: f64, v: f64) -> Result<f64> {
    pap_magnetic_diagonal_distribution(eb, t)?
        .density(v)
        .ok_or_else(|| Error::invalid("eB", "eB T = 0 has the delta distribution"))
}

/// Characteristic function of the reference-gauge magnetic `P`,
/// `(a z)/sinh(a z) · exp(−(r²/2T)[(a z) coth(a z) − 1])` with `a = eBT/2`.
fn magnetic_characteristic(eb: f64, t: f64, r2: f64, z: f64) -> f64 {
    let s = 0.5 * eb * t * z;
    if s.abs() < 1e-4 {
        let s2 = s * s;
        return (1.0 - s2 / 6.0 + 7.0 * s2 * s2 / 360.0) * (-(r2 / (2.0 * t)) * s2 / 3.0 * (1.0 - s2 / 15.0)).exp();
    }
    let a = s.abs();
    let ratio = 2.0 * a * (-a).exp() / -(-2.0 * a).exp_m1();
    let coth = 1.0 / a.tanh();
    ratio * (-(r2 / (2.0 * t)) * (a * coth - 1.0)).exp()
}

/// Reference-gauge `P` for the constant field by Fourier inversion; real,
/// and even in `v` for every pair of endpoints.
pub fn pap_magnetic_quadrature(
    b: &BoundaryData,
    eb: f64,
    v_grid: &Grid,
    q: &QuadratureSpec,
) -> Result<DistributionTable<f64>> {
    b.require_dim("pap_magnetic_quadrature", 2)?;
    let t = b.time;
    if eb == 0.0 {
        return Err(Error::invalid("eB", "eB = 0 has the delta distribution"));
    }
    let r2 = b.x.dist2(&b.y);
    let f = |z: f64| Complex64::new(magnetic_characteristic(eb, t, r2, z), 0.0);
    let cutoff = 2.0 * 42.0 / (eb * t).abs();
    let spec = FourierSpec::new(0.0, cutoff).with_quadrature(*q);
    let r = fourier_inverse(f, v_grid, &spec)?;
    Ok(r.table.map(|c| c.re))
}

/// `φ(y, x)` for the gauge of a request, relative to Fock–Schwinger about `x`.
fn gauge_offset(g: &GaugeSpec, b: &BoundaryData, charge: f64) -> f64 {
    charge * holonomy(g, b.x.coords2(), b.y.coords2())
}

/// `P_g(v) = P̂(v − eφ(y, x))` as an exact translation of the grid.
pub fn pap_gauge_shift(
    table: &DistributionTable<f64>,
    g: &GaugeSpec,
    b: &BoundaryData,
    charge: f64,
) -> Result<DistributionTable<f64>> {
    b.require_dim("pap_gauge_shift", 2)?;
    let Some(points) = table.grid.points() else {
        return Err(Error::invalid("table", "expected a line grid"));
    };
    let shift = gauge_offset(g, b, charge);
    let grid = Grid::line(points.iter().map(|v| v + shift).collect())?;
    Ok(DistributionTable { grid, values: table.values.clone(), stderr: table.stderr.clone() })
}

/// As [`pap_gauge_shift`], resampled onto the original grid by linear
/// interpolation. Fails when the shift carries more than `1e-6` of the mass
/// off the grid.
pub fn pap_gauge_shift_resampled(
    table: &DistributionTable<f64>,
    g: &GaugeSpec,
    b: &BoundaryData,
    charge: f64,
) -> Result<DistributionTable<f64>> {
    let shifted = pap_gauge_shift(table, g, b, charge)?;
    let values: Vec<f64> = table.points().iter().map(|&v| interpolate(&shifted, v)).collect();
    let out = DistributionTable::new(table.grid.clone(), values)?;
    let total = table.total_mass();
    let lost = total - out.total_mass();
    if lost.abs() > 1e-6 * total.abs().max(f64::MIN_POSITIVE) {
        let p = table.points();
        return Err(Error::ShiftOutsideGrid { shift: gauge_offset(g, b, charge), lo: p[0], hi: p[p.len() - 1] });
    }
    Ok(out)
}

/// `K = K₀ ∫ P(v) w(v) dv`. Closed forms are used where available; a table
/// is integrated by the trapezoid rule, with a warning when its edges still
/// carry weight.
pub fn kernel_from_pap(p: &PapDistribution, weight: PapWeight, k0: f64) -> Result<Complex64> {
    let integral = match *p {
        PapDistribution::Delta { at } => weight.at(at),
        PapDistribution::Gaussian { mean, variance } => match weight {
            PapWeight::Decaying => Complex64::new((-mean + 0.5 * variance).exp(), 0.0),
            PapWeight::Oscillatory => Complex64::from_polar((-0.5 * variance).exp(), -mean),
        },
        PapDistribution::Sech2 { width, shift } => {
            let h = 0.5 * width;
            let base = match weight {
                PapWeight::Oscillatory => Complex64::new(h / h.sinh(), 0.0),
                PapWeight::Decaying => {
                    if h >= PI {
                        return Err(Error::invalid("eBT", "the e^{-v} moment of sech² diverges for eBT >= 2π"));
                    }
                    Complex64::new(h / h.sin(), 0.0)
                }
            };
            base * weight.at(shift)
        }
        PapDistribution::Table(ref t) => {
            let p = t.points();
            if p.len() < 2 {
                return Err(Error::invalid("table", "need at least two grid points"));
            }
            let peak = t.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let edge = t.values[0].abs().max(t.values[p.len() - 1].abs());
            if edge > 1e-8 * peak {
                log::warn!("kernel recovery: table edges carry {:.3e} of the peak density", edge / peak);
            }
            let re = t.integrate_weighted(|v| weight.at(v).re);
            let im = t.integrate_weighted(|v| weight.at(v).im);
            Complex64::new(re, im)
        }
    };
    Ok(integral * k0)
}

/// `K₀ ∫ P(v) w(v) dv` for a density given as a function, by adaptive
/// quadrature over the real line.
pub fn kernel_from_density(
    density: impl Fn(f64) -> f64,
    weight: PapWeight,
    k0: f64,
    center: f64,
    q: &QuadratureSpec,
) -> Result<Complex64> {
    let r = integrate_real_line(
        |v| match density(v) {
            0.0 => Complex64::new(0.0, 0.0),
            d => weight.at(v) * d,
        },
        center,
        q,
    )?;
    Ok(r.value * k0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PapMethod {
    ClosedForm,
    BesselSeries { n_max: usize },
    FourierQuadrature { n_max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PapRequest {
    pub potential: PotentialSpec,
    pub boundary: BoundaryData,
    pub v_grid: Grid,
    pub method: PapMethod,
}

impl PapRequest {
    fn unsupported(&self) -> Error {
        Error::UnsupportedPotential {
            operation: "path-averaged potential method",
            potential: self.potential.to_string(),
        }
    }

    /// The distribution in the gauge of the potential (for fields), shifted
    /// from the reference gauge about `x` when necessary.
    pub fn evaluate(&self, q: &QuadratureSpec) -> Result<PapDistribution> {
        let b = &self.boundary;
        let Some(points) = self.v_grid.points() else {
            return Err(Error::invalid("v_grid", "path-averaged potentials live on a line grid"));
        };
        match (self.method, self.potential) {
            (PapMethod::ClosedForm, PotentialSpec::Free) => Ok(pap_free()),
            (PapMethod::ClosedForm, PotentialSpec::Linear { slope }) => pap_linear_distribution(b, slope),
            (PapMethod::ClosedForm, PotentialSpec::MagneticConstant { field, charge, .. }) => {
                b.require_dim("pap", 2)?;
                if b.x != b.y {
                    return Err(Error::invalid("boundary", "the closed form needs x = y; use fourier quadrature"));
                }
                pap_magnetic_diagonal_distribution(field * charge, b.time)
            }
            (PapMethod::BesselSeries { n_max }, PotentialSpec::Harmonic { omega }) => {
                b.require_dim("pap", 1)?;
                if b.x.x() != 0.0 || b.y.x() != 0.0 {
                    return Err(Error::invalid("boundary", "the Bessel series needs x = y = 0"));
                }
                let values = points
                    .par_iter()
                    .map(|&v| pap_harmonic_series(omega, b.time, v, n_max).map(|s| s.value))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PapDistribution::Table(DistributionTable::new(self.v_grid.clone(), values)?))
            }
            (PapMethod::FourierQuadrature { n_max }, PotentialSpec::Harmonic { omega }) => {
                b.require_dim("pap", 1)?;
                if b.x.x() != 0.0 || b.y.x() != 0.0 {
                    return Err(Error::invalid("boundary", "the oscillator quadrature needs x = y = 0"));
                }
                pap_harmonic_quadrature(omega, b.time, &self.v_grid, n_max, q).map(PapDistribution::Table)
            }
            (PapMethod::FourierQuadrature { .. }, PotentialSpec::MagneticConstant { field, charge, .. }) => {
                let table = pap_magnetic_quadrature(b, field * charge, &self.v_grid, q)?;
                let g = self.potential.gauge_spec(b.x.coords2()).ok_or_else(|| self.unsupported())?;
                if holonomy(&g, b.x.coords2(), b.y.coords2()) == 0.0 {
                    Ok(PapDistribution::Table(table))
                } else {
                    pap_gauge_shift_resampled(&table, &g, b, charge).map(PapDistribution::Table)
                }
            }
            _ => Err(self.unsupported()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GaugeKind;
    use crate::kernels::{kernel_harmonic, kernel_linear, kernel_magnetic_fs};
    use proptest::prelude::*;

    fn q() -> QuadratureSpec {
        QuadratureSpec::adaptive(1e-13, 1e-11)
    }

    #[test]
    fn linear_values_and_moments() {
        let b = BoundaryData::d1(0.0, 0.0, 1.0).unwrap();
        assert!((pap_linear(&b, 1.0, 0.0).unwrap() - 1.3819765978853419171).abs() < 1e-15);
        let b = BoundaryData::d1(0.3, -0.1, 2.0).unwrap();
        let p = pap_linear_distribution(&b, 0.5).unwrap();
        let mass = integrate_real_line(|v| p.density(v).unwrap(), p.mean(), &q()).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((p.mean() - 0.1).abs() < 1e-15);
        assert!((p.variance() - 0.25 * 8.0 / 12.0).abs() < 1e-15);
        // The printed product form agrees with the Gaussian form.
        let (k, t, s) = (0.5f64, 2.0f64, 0.2f64);
        for v in [-0.7, 0.0, 0.4, 1.3] {
            let printed = (6.0 / (PI * k * k * t.powi(3))).sqrt()
                * (-(1.5 / t) * s * s).exp()
                * (-(6.0 / (k * k * t.powi(3))) * (v * v - k * t * s * v)).exp();
            assert!((printed - p.density(v).unwrap()).abs() < 1e-14);
        }
        assert_eq!(pap_linear_distribution(&b, 0.0).unwrap(), PapDistribution::Delta { at: 0.0 });
        assert!(pap_linear(&b, 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_kernel_recovery() {
        let b = BoundaryData::d1(0.3, -0.1, 2.0).unwrap();
        let k0 = kernel_free(&b, 1.0).unwrap();
        let want = kernel_linear(&b, 0.5).unwrap();
        let p = pap_linear_distribution(&b, 0.5).unwrap();
        let closed = kernel_from_pap(&p, PapWeight::Decaying, k0).unwrap();
        assert!((closed.re / want - 1.0).abs() < 1e-14 && closed.im == 0.0);
        let quad = kernel_from_density(|v| p.density(v).unwrap(), PapWeight::Decaying, k0, p.mean(), &q()).unwrap();
        assert!((quad.re / want - 1.0).abs() < 1e-8);
        let free = kernel_from_pap(&pap_free(), PapWeight::Decaying, k0).unwrap();
        assert_eq!(free.re, k0);
    }

    #[test]
    fn linear_depends_on_endpoint_sum_only() {
        let a = pap_linear_distribution(&BoundaryData::d1(0.5, -0.1, 1.5).unwrap(), 0.7).unwrap();
        let c = pap_linear_distribution(&BoundaryData::d1(-0.1, 0.5, 1.5).unwrap(), 0.7).unwrap();
        let d = pap_linear_distribution(&BoundaryData::d1(0.2, 0.2, 1.5).unwrap(), 0.7).unwrap();
        assert_eq!(a, c);
        assert!((a.mean() - d.mean()).abs() < 1e-15 && a.variance() == d.variance());
    }

    #[test]
    fn harmonic_series_values() {
        // Frozen from a 30-digit evaluation of the same Fourier integral.
        let cases = [
            (0.05, 9.8054118891854127),
            (0.1, 3.8742242609288698),
            (0.5, 0.026559230068018404),
            (1.0, 1.3222563649992426e-4),
            (2.0, 4.7878502723780106e-9),
            (3.0, 2.0154218649813148e-13),
        ];
        for (v, want) in cases {
            let s = pap_harmonic_series(1.0, 1.0, v, 30).unwrap();
            assert!((s.value / want - 1.0).abs() < 1e-8, "v={v}: {} vs {want}", s.value);
        }
        assert_eq!(pap_harmonic_series(1.0, 1.0, -0.3, 30).unwrap().value, 0.0);
        assert_eq!(pap_harmonic_series(1.0, 1.0, 0.0, 30).unwrap().value, 0.0);
        let a = pap_harmonic_series(1.0, 1.0, 0.5, 30).unwrap().value;
        let b = pap_harmonic_series(1.0, 1.0, 0.5, 40).unwrap().value;
        assert!(((a - b) / b).abs() < 1e-10);
    }

    #[test]
    fn branch_cut_matches_series() {
        for v in [0.05, 0.1, 0.3, 0.5, 1.0, 1.5, 2.0] {
            let s = pap_harmonic_series(1.0, 1.0, v, 30).unwrap().value;
            let c = pap_harmonic_branch_cut(1.0, 1.0, v, &q()).unwrap();
            assert!((s / c - 1.0).abs() < 1e-7, "v={v}: {s} vs {c}");
        }
        let c = pap_harmonic_branch_cut(1.0, 1.0, 3.0, &q()).unwrap();
        assert!((c / 2.0154218649813148e-13 - 1.0).abs() < 1e-9, "{c}");
        let s = pap_harmonic_series(2.0, 0.7, 0.4, 30).unwrap().value;
        let c = pap_harmonic_branch_cut(2.0, 0.7, 0.4, &q()).unwrap();
        assert!((s / c - 1.0).abs() < 1e-7);
    }

    #[test]
    fn harmonic_quadrature_oracle() {
        let grid = Grid::line(vec![0.1, 0.5, 1.0]).unwrap();
        let t = pap_harmonic_quadrature(1.0, 1.0, &grid, 4000, &QuadratureSpec::adaptive(1e-14, 1e-10)).unwrap();
        for (v, p) in grid.points().unwrap().iter().zip(&t.values) {
            let s = pap_harmonic_series(1.0, 1.0, *v, 30).unwrap().value;
            assert!((p / s - 1.0).abs() < 1e-4, "v={v}: {p} vs {s}");
        }
    }

    #[test]
    fn harmonic_mass_and_kernel_recovery() {
        // Graded toward v = 0, where P rises steeply from zero.
        let grid = Grid::line((1..=600).map(|i| 6.0 * (i as f64 / 600.0).powi(2)).collect()).unwrap();
        let values =
            grid.points().unwrap().iter().map(|&v| pap_harmonic_series(1.0, 1.0, v, 30).unwrap().value).collect();
        let table = DistributionTable::new(grid, values).unwrap();
        assert!((table.total_mass() - 1.0).abs() < 1e-3, "{}", table.total_mass());
        let table = PapDistribution::Table(table);
        let b = BoundaryData::d1(0.0, 0.0, 1.0).unwrap();
        let k0 = kernel_free(&b, 1.0).unwrap();
        let k = kernel_from_pap(&table, PapWeight::Decaying, k0).unwrap().re;
        assert!((k / kernel_harmonic(&b, 1.0).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn magnetic_diagonal_law() {
        assert!((pap_magnetic_diagonal(1.0, 1.0, 0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((pap_magnetic_diagonal(1.0, 1.0, 1.0).unwrap() - 0.011689787948495048467).abs() < 1e-16);
        let d = pap_magnetic_diagonal_distribution(1.3, 0.8).unwrap();
        let mass = integrate_real_line(|v| d.density(v).unwrap(), 0.0, &q()).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-8);
        // Analytic normalization through the tanh antiderivative.
        let a = 1.3 * 0.8;
        let anti = |v: f64| 0.5 * (PI * v / a).tanh();
        assert!((anti(1e3) - anti(-1e3) - 1.0).abs() < 1e-15);
        assert_eq!(pap_magnetic_diagonal_distribution(0.0, 1.0).unwrap(), pap_free());
        assert!(pap_magnetic_diagonal(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn magnetic_kernel_recovery() {
        let b = BoundaryData::d2([0.2, 0.1], [0.2, 0.1], 1.0).unwrap();
        let k0 = kernel_free(&b, 1.0).unwrap();
        let want = kernel_magnetic_fs(&b, 1.0).unwrap();
        let d = pap_magnetic_diagonal_distribution(1.0, 1.0).unwrap();
        let closed = kernel_from_pap(&d, PapWeight::Oscillatory, k0).unwrap();
        assert!((closed.re / want - 1.0).abs() < 1e-14 && closed.im.abs() < 1e-17);
        let quad = kernel_from_density(|v| d.density(v).unwrap(), PapWeight::Oscillatory, k0, 0.0, &q()).unwrap();
        assert!((quad.re / want - 1.0).abs() < 1e-4 && quad.im.abs() < 1e-10);
        // The real weight gives the analytically continued moment.
        let real = kernel_from_pap(&d, PapWeight::Decaying, 1.0).unwrap().re;
        let num = kernel_from_density(|v| d.density(v).unwrap(), PapWeight::Decaying, 1.0, 0.0, &q()).unwrap().re;
        assert!((real - num).abs() < 1e-9);
        assert!(
            kernel_from_pap(&pap_magnetic_diagonal_distribution(7.0, 1.0).unwrap(), PapWeight::Decaying, 1.0).is_err()
        );
    }

    #[test]
    fn magnetic_quadrature() {
        let grid = Grid::uniform(-3.0, 3.0, 25).unwrap();
        let b = BoundaryData::d2([0.3, -0.2], [0.3, -0.2], 1.0).unwrap();
        let t = pap_magnetic_quadrature(&b, 1.0, &grid, &q()).unwrap();
        for (v, p) in grid.points().unwrap().iter().zip(&t.values) {
            assert!((p - pap_magnetic_diagonal(1.0, 1.0, *v).unwrap()).abs() < 1e-6, "v={v}");
        }
        let b = BoundaryData::d2([0.0, 0.0], [0.8, 0.5], 1.5).unwrap();
        let eb = 1.2;
        let grid = Grid::uniform(-12.0, 12.0, 2401).unwrap();
        let t = pap_magnetic_quadrature(&b, eb, &grid, &q()).unwrap();
        let n = t.values.len();
        for i in 0..n {
            assert!((t.values[i] - t.values[n - 1 - i]).abs() < 1e-10);
        }
        assert!((t.total_mass() - 1.0).abs() < 1e-6);
        let k0 = kernel_free(&b, 1.0).unwrap();
        let k = kernel_from_pap(&PapDistribution::Table(t), PapWeight::Oscillatory, k0).unwrap();
        assert!((k.re / kernel_magnetic_fs(&b, eb).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gauge_shift() {
        let x = [0.1, -0.3];
        let y = [0.9, 0.4];
        let b = BoundaryData::d2(x, y, 1.0).unwrap();
        let grid = Grid::uniform(-6.0, 6.0, 1201).unwrap();
        let table = pap_magnetic_quadrature(&b, 0.9, &grid, &q()).unwrap();
        let reference = GaugeSpec::reference_gauge(0.9, x);
        assert_eq!(pap_gauge_shift(&table, &reference, &b, 1.0).unwrap(), table);
        let landau = GaugeSpec::new(GaugeKind::Landau, 0.9, x);
        let shifted = pap_gauge_shift(&table, &landau, &b, 1.0).unwrap();
        let phi = holonomy(&landau, x, y);
        assert!(phi != 0.0);
        let moved = shifted.mean() - table.mean();
        assert!((moved - phi).abs() < 1e-12);
        assert!((shifted.central_moment(2) - table.central_moment(2)).abs() < 1e-12);
        assert!((shifted.central_moment(4) - table.central_moment(4)).abs() < 1e-12);
        let resampled = pap_gauge_shift_resampled(&table, &landau, &b, 1.0).unwrap();
        assert!((resampled.mean() - table.mean() - phi).abs() < 1e-4);
        let diag = BoundaryData::d2(x, x, 1.0).unwrap();
        assert_eq!(pap_gauge_shift(&table, &landau, &diag, 1.0).unwrap(), table);
        let far = GaugeSpec::new(GaugeKind::FockSchwinger { base: [40.0, -30.0] }, 0.9, x);
        assert!(matches!(pap_gauge_shift_resampled(&table, &far, &b, 1.0), Err(Error::ShiftOutsideGrid { .. })));
    }

    #[test]
    fn request_dispatch() {
        let grid = Grid::uniform(-2.0, 2.0, 41).unwrap();
        let free = PapRequest {
            potential: PotentialSpec::Free,
            boundary: BoundaryData::d1(0.0, 0.0, 1.0).unwrap(),
            v_grid: grid.clone(),
            method: PapMethod::ClosedForm,
        };
        assert_eq!(free.evaluate(&q()).unwrap(), pap_free());
        let bad = PapRequest { method: PapMethod::BesselSeries { n_max: 30 }, ..free.clone() };
        assert!(bad.evaluate(&q()).is_err());
        let ho = PapRequest {
            potential: PotentialSpec::harmonic(1.0).unwrap(),
            boundary: BoundaryData::d1(0.1, 0.0, 1.0).unwrap(),
            v_grid: grid.clone(),
            method: PapMethod::BesselSeries { n_max: 30 },
        };
        assert!(ho.evaluate(&q()).is_err());
        let mag = PapRequest {
            potential: PotentialSpec::magnetic(1.0, 1.0, GaugeKind::Landau).unwrap(),
            boundary: BoundaryData::d2([0.0, 0.0], [0.0, 0.0], 1.0).unwrap(),
            v_grid: grid.clone(),
            method: PapMethod::ClosedForm,
        };
        let d = mag.evaluate(&q()).unwrap();
        let t = d.on_grid(&grid).unwrap();
        assert!((t.values[20] - PI / 2.0).abs() < 1e-15);
        assert!(pap_free().on_grid(&grid).is_err());
    }

    proptest! {
        #[test]
        fn magnetic_diagonal_symmetries(eb in 0.1f64..4.0, t in 0.1f64..3.0, u in -5.0f64..5.0) {
            let v = u * eb * t;
            let p = pap_magnetic_diagonal(eb, t, v).unwrap();
            prop_assert_eq!(p, pap_magnetic_diagonal(eb, t, -v).unwrap());
            prop_assert_eq!(p, pap_magnetic_diagonal(-eb, t, -v).unwrap());
            prop_assert!(p > 0.0);
        }

        #[test]
        fn linear_is_symmetric(x in -2.0f64..2.0, y in -2.0f64..2.0, t in 0.2f64..3.0, k in -2.0f64..2.0, v in -3.0f64..3.0) {
            prop_assume!(k.abs() > 1e-3);
            let a = pap_linear(&BoundaryData::d1(x, y, t).unwrap(), k, v).unwrap();
            let c = pap_linear(&BoundaryData::d1(y, x, t).unwrap(), k, v).unwrap();
            prop_assert!((a - c).abs() <= 1e-14 * a.max(1e-300));
        }

        #[test]
        fn shift_preserves_shape(phi_base in -3.0f64..3.0) {
            let x = [0.0, 0.0];
            let y = [0.5, -0.5];
            let b = BoundaryData::d2(x, y, 1.0).unwrap();
            let grid = Grid::uniform(-4.0, 4.0, 161).unwrap();
            let table = pap_magnetic_diagonal_distribution(1.0, 1.0).unwrap().on_grid(&grid).unwrap();
            let g = GaugeSpec::new(GaugeKind::FockSchwinger { base: [phi_base, 1.0] }, 1.0, x);
            let s = pap_gauge_shift(&table, &g, &b, 1.0).unwrap();
            prop_assert!((s.central_moment(2) - table.central_moment(2)).abs() < 1e-10);
            prop_assert!((s.total_mass() - table.total_mass()).abs() < 1e-12);
        }
    }
}
