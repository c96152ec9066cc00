//! Dirichlet worldline Green functions and classical paths.
//!
//! Sign convention for the magnetic case: the field is `F₁₂ = B = −F₂₁`, and
//! [`green_magnetic`] with argument `β` inverts `−∂² − iβε∂`. The fluctuation
//! operator of the Fock–Schwinger action, `−∂² + ieF∂`, is therefore inverted
//! by `green_magnetic(.., −eB)`.

use num_complex::Complex64;

use crate::domain::{BoundaryData, PotentialSpec};
use crate::error::{Error, Result};
use crate::specfun::GaussLegendre;

/// A 2×2 complex matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

const SERIES_THRESHOLD: f64 = 1e-6;

fn check_time(t: f64, total: f64) -> Result<()> {
    if !(total > 0.0) {
        return Err(Error::invalid("T", "must be > 0"));
    }
    if !(0.0..=total).contains(&t) {
        return Err(Error::invalid("t", format!("{t} outside [0, {total}]")));
    }
    Ok(())
}

/// `−Δ(t, t′) = min(t,t′)(T − max(t,t′))/T`.
pub fn green_free(t: f64, t_prime: f64, total: f64) -> Result<f64> {
    check_time(t, total)?;
    check_time(t_prime, total)?;
    Ok(t.min(t_prime) * (total - t.max(t_prime)) / total)
}

pub fn green_free_coincident(t: f64, total: f64) -> Result<f64> {
    green_free(t, t, total)
}

/// `sinh(ωa) sinh(ωb) / (ω sinh(ωT))` for `a + b ≤ T`, without overflow.
fn sinh_ratio(a: f64, b: f64, total: f64, omega: f64) -> f64 {
    let num = (-2.0 * omega * a).exp_m1() * (-2.0 * omega * b).exp_m1();
    let den = -(-2.0 * omega * total).exp_m1();
    0.5 / omega * (omega * (a + b - total)).exp() * num / den
}

/// Two-time Green function of `−∂² + ω²` with Dirichlet data.
pub fn green_harmonic(t: f64, t_prime: f64, total: f64, omega: f64) -> Result<f64> {
    check_time(t, total)?;
    check_time(t_prime, total)?;
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", "must be > 0"));
    }
    Ok(sinh_ratio(t.min(t_prime), total - t.max(t_prime), total, omega))
}

/// `sinh(ωt) sinh(ω(T − t)) / (ω sinh(ωT))`.
pub fn green_harmonic_coincident(t: f64, total: f64, omega: f64) -> Result<f64> {
    green_harmonic(t, t, total, omega)
}

/// The constant-field worldline Green function `𝒢_{μν}(t, t′)`, with
/// `t₋ = t − t′` and `Θ(0) = ½`.
pub fn green_magnetic(t: f64, t_prime: f64, total: f64, field: f64) -> Result<Mat2> {
    check_time(t, total)?;
    check_time(t_prime, total)?;
    let tm = t - t_prime;
    let b = field;
    if (b * total).abs() < SERIES_THRESHOLD {
        let g = green_free(t, t_prime, total)?;
        let off = 0.5 * b * tm * g;
        return Ok(mat(g, Complex64::new(0.0, -off)));
    }
    let theta = if tm > 0.0 {
        1.0
    } else if tm == 0.0 {
        0.5
    } else {
        0.0
    };
    let h = 0.5 * b;
    let second = theta * (h * tm).sinh() - (h * t).sinh() * (h * (total - t_prime)).sinh() / (h * total).sinh();
    let scale = -2.0 / b * second;
    let diag = scale * (h * tm).cosh();
    let anti = Complex64::new(0.0, -scale * (h * tm).sinh());
    Ok(mat(diag, anti))
}

/// `d·1 + a·ε`.
fn mat(d: f64, a: Complex64) -> Mat2 {
    let dd = Complex64::new(d, 0.0);
    [[dd, a], [-a, dd]]
}

/// The coincident value `𝒢(t, t) = g(t)·1` with
/// `g = (2/B) sinh(Bt/2) sinh(B(T−t)/2) / sinh(BT/2)`, which equals the
/// harmonic coincident function at `ω = |B|/2`.
pub fn green_magnetic_coincident(t: f64, total: f64, field: f64) -> Result<f64> {
    check_time(t, total)?;
    if (field * total).abs() < SERIES_THRESHOLD {
        return green_free_coincident(t, total);
    }
    green_harmonic_coincident(t, total, 0.5 * field.abs())
}

pub fn mat_vec(m: &Mat2, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Extremal path of the Euclidean action with Dirichlet data `x(0) = x`,
/// `x(T) = y`. Magnetic paths are complex.
#[derive(Clone, Debug)]
pub struct ClassicalPath {
    boundary: BoundaryData,
    kind: PathKind,
}

#[derive(Clone, Debug)]
enum PathKind {
    Straight,
    Linear { slope: f64 },
    Harmonic { omega: f64 },
    Magnetic { eb: f64, source: [Complex64; 2], rule: GaussLegendre },
}

pub fn classical_path(p: &PotentialSpec, b: &BoundaryData) -> Result<ClassicalPath> {
    let kind = match *p {
        PotentialSpec::Free => PathKind::Straight,
        PotentialSpec::Linear { slope } => {
            b.require_dim("linear classical path", 1)?;
            PathKind::Linear { slope }
        }
        PotentialSpec::Harmonic { omega } => {
            b.require_dim("harmonic classical path", 1)?;
            PathKind::Harmonic { omega }
        }
        PotentialSpec::MagneticConstant { field, charge, .. } => {
            b.require_dim("magnetic classical path", 2)?;
            let eb = charge * field;
            let d = [b.y.get(0) - b.x.get(0), b.y.get(1) - b.x.get(1)];
            // b = ie F (y − x)/T with F = Bε
            let source = [Complex64::new(0.0, eb * d[1] / b.time), Complex64::new(0.0, -eb * d[0] / b.time)];
            PathKind::Magnetic { eb, source, rule: GaussLegendre::new(24) }
        }
    };
    Ok(ClassicalPath { boundary: *b, kind })
}

impl ClassicalPath {
    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    fn straight(&self, t: f64, i: usize) -> f64 {
        let (x, y) = (self.boundary.x.get(i), self.boundary.y.get(i));
        x + (y - x) * t / self.boundary.time
    }

    /// Position at `t` for a real path, first coordinate.
    pub fn eval_real(&self, t: f64) -> f64 {
        let total = self.boundary.time;
        let (x, y) = (self.boundary.x.get(0), self.boundary.y.get(0));
        if t == 0.0 {
            return x;
        }
        if t == total {
            return y;
        }
        match self.kind {
            PathKind::Straight => self.straight(t, 0),
            PathKind::Linear { slope } => x + ((y - x) / total - 0.5 * slope * total) * t + 0.5 * slope * t * t,
            PathKind::Harmonic { omega } => {
                // sinh(ωa)/sinh(ωT)
                let r = |a: f64| {
                    (omega * (a - total)).exp() * (-2.0 * omega * a).exp_m1() / (-2.0 * omega * total).exp_m1()
                };
                x * r(total - t) + y * r(t)
            }
            PathKind::Magnetic { .. } => self.eval(t)[0].re,
        }
    }

    /// Position at `t`; complex for the magnetic path, real otherwise.
    pub fn eval(&self, t: f64) -> [Complex64; 2] {
        let dim = self.boundary.dim();
        match &self.kind {
            PathKind::Magnetic { eb, source, rule } => {
                let total = self.boundary.time;
                let x0 = [self.straight(t, 0), self.straight(t, 1)];
                if t == 0.0 || t == total {
                    return [x0[0].into(), x0[1].into()];
                }
                let integral = integrated_green(*eb, t, total, rule);
                let shift = mat_vec(&integral, *source);
                [x0[0] - shift[0], x0[1] - shift[1]]
            }
            _ => {
                let first = Complex64::new(self.eval_real(t), 0.0);
                let second = if dim == 2 { self.straight(t, 1) } else { 0.0 };
                [first, second.into()]
            }
        }
    }
}

/// `∫₀^T 𝒢_M(t, t′) dt′` for the operator `−∂² + ieF∂`, split at the kink.
fn integrated_green(eb: f64, t: f64, total: f64, rule: &GaussLegendre) -> Mat2 {
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = [[zero; 2]; 2];
    for (a, b) in [(0.0, t), (t, total)] {
        for (tp, w) in rule.points(a, b) {
            let Ok(g) = green_magnetic(t, tp.clamp(0.0, total), total, -eb) else {
                continue;
            };
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += g[i][j] * w;
                }
            }
        }
    }
    acc
}
