//! The built-in invariant suite behind `pathxform verify`.

use std::f64::consts::PI;

use num_complex::Complex64;
use pathxform::domain::holonomy;
use pathxform::greens::{green_free, green_free_coincident, green_harmonic_coincident, green_magnetic};
use pathxform::hitfn::{hit_free_closed, hit_free_integral, hit_quadratic, hit_via_kernels};
use pathxform::kernels::{
    kernel_free, kernel_harmonic, kernel_linear, kernel_magnetic_fs, spectral_kernel, SpectralData,
};
use pathxform::pap::{
    kernel_from_density, pap_harmonic_branch_cut, pap_harmonic_series, pap_linear, pap_magnetic_diagonal, PapWeight,
};
use pathxform::sampler::{ensemble_1d, estimate_hit, estimate_kernel, slice_moments};
use pathxform::specfun::{bessel_k, erfcx, integrate_real_line, QuadratureSpec};
use pathxform::{BoundaryData, DistributionTable, GaugeKind, GaugeSpec, Grid, Position, PotentialSpec, Result};

pub const MODULES: &[&str] = &["domain", "specfun", "greens", "kernels", "hitfn", "pap", "sampler"];

/// A check returns its measured deviation and the tolerance it must stay below.
type CheckFn = fn(u64) -> Result<(f64, f64)>;

pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    run: CheckFn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub error: Option<String>,
}

fn q() -> QuadratureSpec {
    QuadratureSpec::adaptive(1e-13, 1e-11)
}

fn b1(x: f64, y: f64, t: f64) -> Result<BoundaryData> {
    BoundaryData::d1(x, y, t)
}

fn holonomy_antisymmetric(_: u64) -> Result<(f64, f64)> {
    let g = GaugeSpec::new(GaugeKind::Landau, 1.3, [0.0, 0.0]);
    let (x, y) = ([0.2, -0.7], [1.1, 0.4]);
    Ok(((holonomy(&g, x, y) + holonomy(&g, y, x)).abs(), 1e-14))
}

fn table_mass(_: u64) -> Result<(f64, f64)> {
    let grid = Grid::uniform(-8.0, 8.0, 1601)?;
    let values = grid.points().expect("line").iter().map(|v| (-0.5 * v * v).exp() / (2.0 * PI).sqrt()).collect();
    Ok(((DistributionTable::new(grid, values)?.total_mass() - 1.0).abs(), 1e-10))
}

fn erfcx_reference(_: u64) -> Result<(f64, f64)> {
    Ok(((erfcx(1.0) - 0.427583576155807004410750344491).abs(), 1e-15))
}

fn bessel_reference(_: u64) -> Result<(f64, f64)> {
    let a = (bessel_k(0.25, 1.0)? / 0.43073977444858552465694688454 - 1.0).abs();
    let b = (bessel_k(1.25, 0.5)? / 2.25206614114979869882952046869 - 1.0).abs();
    Ok((a.max(b), 1e-13))
}

fn magnetic_green_free_limit(_: u64) -> Result<(f64, f64)> {
    let mut worst = 0.0f64;
    for i in 0..=10 {
        for j in 0..=10 {
            let (t, tp) = (0.1 * i as f64, 0.1 * j as f64);
            let g = green_magnetic(t, tp, 1.0, 1e-6)?;
            let f = Complex64::new(green_free(t, tp, 1.0)?, 0.0);
            worst = worst.max((g[0][0] - f).norm()).max((g[1][1] - f).norm()).max(g[0][1].norm());
        }
    }
    Ok((worst, 1e-6))
}

fn harmonic_green_free_limit(_: u64) -> Result<(f64, f64)> {
    let mut worst = 0.0f64;
    for i in 1..10 {
        let t = 0.2 * i as f64;
        worst = worst.max((green_harmonic_coincident(t, 2.0, 1e-5)? - green_free_coincident(t, 2.0)?).abs());
    }
    Ok((worst, 1e-8))
}

fn harmonic_spectral(_: u64) -> Result<(f64, f64)> {
    let b = b1(0.3, -0.1, 2.0)?;
    let s = spectral_kernel(&SpectralData::new(1.0, 40)?, &b)?.value;
    Ok(((s / kernel_harmonic(&b, 1.0)? - 1.0).abs(), 1e-10))
}

fn magnetic_kernel_free_limit(_: u64) -> Result<(f64, f64)> {
    let b = BoundaryData::d2([0.1, 0.2], [0.1, 0.2], 1.5)?;
    Ok(((kernel_magnetic_fs(&b, 1e-5)? / kernel_free(&b, 1.0)? - 1.0).abs(), 1e-8))
}

fn free_hit_two_forms(_: u64) -> Result<(f64, f64)> {
    let b = b1(0.3, -0.5, 1.3)?;
    let mut worst = 0.0f64;
    for z in [-1.0, 0.1, 0.8] {
        worst = worst.max((hit_free_closed(&b, z)? - hit_free_integral(&b, z, &q())?).abs());
    }
    Ok((worst, 1e-10))
}

fn hit_dual_method(_: u64) -> Result<(f64, f64)> {
    let b = b1(0.3, -0.1, 2.0)?;
    let kernel = |a: &Position, c: &Position, t: f64| {
        BoundaryData::new(*a, *c, t).and_then(|bd| kernel_linear(&bd, 0.5)).unwrap_or(f64::NAN)
    };
    let p = PotentialSpec::linear(0.5)?;
    let a = hit_quadratic(&p, &b, 0.7, &q())?;
    let c: f64 = hit_via_kernels(kernel, &b, &Position::d1(0.7), &q(), true)?;
    Ok(((a - c).abs(), 1e-5))
}

fn hit_normalization(_: u64) -> Result<(f64, f64)> {
    let b = b1(0.5, -0.2, 1.3)?;
    let mass = integrate_real_line(
        |z| hit_free_closed(&b, z).unwrap_or(f64::NAN),
        0.15,
        &QuadratureSpec::adaptive(1e-12, 1e-10),
    )?
    .value;
    Ok(((mass - 1.0).abs(), 1e-8))
}

fn linear_kernel_recovery(_: u64) -> Result<(f64, f64)> {
    let b = b1(0.3, -0.1, 2.0)?;
    let k = kernel_from_density(
        |v| pap_linear(&b, 0.5, v).unwrap_or(f64::NAN),
        PapWeight::Decaying,
        kernel_free(&b, 1.0)?,
        -0.2,
        &q(),
    )?;
    Ok(((k.re / kernel_linear(&b, 0.5)? - 1.0).abs(), 1e-8))
}

fn series_vs_contour(_: u64) -> Result<(f64, f64)> {
    let mut worst = 0.0f64;
    for v in [0.1, 1.0, 3.0] {
        let s = pap_harmonic_series(1.0, 1.0, v, 30)?.value;
        worst = worst.max((s / pap_harmonic_branch_cut(1.0, 1.0, v, &q())? - 1.0).abs());
    }
    Ok((worst, 1e-4))
}

fn sech2_normalization(_: u64) -> Result<(f64, f64)> {
    let mass = integrate_real_line(|v| pap_magnetic_diagonal(1.0, 1.0, v).unwrap_or(f64::NAN), 0.0, &q())?.value;
    Ok(((mass - 1.0).abs(), 1e-8))
}

fn midpoint_variance(seed: u64) -> Result<(f64, f64)> {
    let e = ensemble_1d(100_000, 64, seed, 0.0, 0.0, 1.0)?;
    let (_, var, se) = slice_moments(&e, 32, 0)?;
    Ok(((var - 0.25).abs() / se, 3.0))
}

fn free_kernel_exact(seed: u64) -> Result<(f64, f64)> {
    let e = ensemble_1d(1000, 16, seed, 0.3, -0.1, 2.0)?;
    let k = estimate_kernel(&e, &PotentialSpec::Free)?;
    Ok(((k.value.re / kernel_free(&e.spec.boundary, 1.0)? - 1.0).abs() + k.stderr, 1e-15))
}

fn linear_kernel_estimate(seed: u64) -> Result<(f64, f64)> {
    let e = ensemble_1d(100_000, 64, seed, 0.3, -0.1, 2.0)?;
    let k = estimate_kernel(&e, &PotentialSpec::linear(0.5)?)?;
    Ok(((k.value.re - kernel_linear(&e.spec.boundary, 0.5)?).abs() / k.stderr, 3.0))
}

fn thread_determinism(seed: u64) -> Result<(f64, f64)> {
    let e = ensemble_1d(5000, 32, seed, 0.0, 0.4, 1.0)?;
    let p = PotentialSpec::harmonic(1.0)?;
    let grid = Grid::uniform(-1.5, 1.5, 31)?;
    let run = |threads: usize| -> Result<Vec<u64>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        pool.install(|| {
            let k = estimate_kernel(&e, &p)?;
            let h = estimate_hit(&e, &p, &grid)?;
            Ok([k.value.re, k.stderr].iter().chain(&h.table.values).map(|v| v.to_bits()).collect())
        })
    };
    let one = run(1)?;
    let differ = [4, 8].iter().map(|&t| run(t)).collect::<Result<Vec<_>>>()?.iter().filter(|r| **r != one).count();
    Ok((differ as f64, 0.5))
}

pub fn checks() -> Vec<Check> {
    let c = |module, name, run: CheckFn| Check { module, name, run };
    vec![
        c("domain", "holonomy_antisymmetric", holonomy_antisymmetric),
        c("domain", "table_unit_mass", table_mass),
        c("specfun", "erfcx_reference", erfcx_reference),
        c("specfun", "bessel_k_reference", bessel_reference),
        c("greens", "magnetic_free_limit", magnetic_green_free_limit),
        c("greens", "harmonic_free_limit", harmonic_green_free_limit),
        c("kernels", "harmonic_spectral_sum", harmonic_spectral),
        c("kernels", "magnetic_free_limit", magnetic_kernel_free_limit),
        c("hitfn", "free_closed_vs_integral", free_hit_two_forms),
        c("hitfn", "quadrature_vs_convolution", hit_dual_method),
        c("hitfn", "unit_mass", hit_normalization),
        c("pap", "linear_kernel_recovery", linear_kernel_recovery),
        c("pap", "series_vs_contour", series_vs_contour),
        c("pap", "sech2_unit_mass", sech2_normalization),
        c("sampler", "midpoint_variance_sigma", midpoint_variance),
        c("sampler", "free_kernel_exact", free_kernel_exact),
        c("sampler", "linear_kernel_sigma", linear_kernel_estimate),
        c("sampler", "thread_determinism", thread_determinism),
    ]
}

/// Runs the checks of `selector` (`all` or a module name). A check passes
/// when its deviation is strictly below `tolerance × tolerance_scale`.
pub fn run(selector: &str, seed: u64, tolerance_scale: f64) -> Option<Vec<CheckResult>> {
    if selector != "all" && !MODULES.contains(&selector) {
        return None;
    }
    let results = checks()
        .into_iter()
        .filter(|c| selector == "all" || c.module == selector)
        .map(|c| {
            let (measured, tolerance, error) = match (c.run)(seed) {
                Ok((m, t)) => (m, t * tolerance_scale, None),
                Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
            };
            let pass = error.is_none() && measured < tolerance;
            CheckResult { module: c.module, name: c.name, measured, tolerance, pass, error }
        })
        .collect();
    Some(results)
}
