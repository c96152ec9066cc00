use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;

use pathxform::domain::holonomy;
use pathxform::hitfn::{hit_via_kernels, HitMethod, HitRequest};
use pathxform::kernels::{kernel_free, kernel_harmonic, kernel_linear, kernel_magnetic};
use pathxform::pap::{
    kernel_from_density, kernel_from_pap, pap_harmonic_series, pap_linear_distribution, pap_magnetic_quadrature,
    PapDistribution, PapMethod, PapRequest, PapWeight,
};
use pathxform::sampler::{
    bin_edges, estimate_hit, estimate_kernel, estimate_pap, generate_ensemble, EnsembleSpec, HistogramEstimate,
};
use pathxform::specfun::integrate_real_line;
use pathxform::{BoundaryData, DistributionTable, Grid, Position, PotentialSpec};

use crate::config::RunConfig;
use crate::output::{out_file, time_tag, write_csv, write_gnuplot, Field, Series};
use crate::CliError;

fn create_out(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))
}

fn ensemble(cfg: &RunConfig, b: BoundaryData) -> Result<Option<pathxform::sampler::PathEnsemble>, CliError> {
    if cfg.paths == 0 {
        return Ok(None);
    }
    Ok(Some(generate_ensemble(EnsembleSpec::new(cfg.paths, cfg.steps, cfg.seed, b)?)?))
}

fn mc_columns(h: Option<&HistogramEstimate>, k: usize) -> (Field, Field) {
    match h {
        Some(h) => (h.table.values[k].into(), h.table.stderr.as_ref().map(|s| s[k]).into()),
        None => (Field::Empty, Field::Empty),
    }
}

fn report_histogram(what: &str, h: &HistogramEstimate) {
    println!("{what}: tail mass {:.3e}, {} empty bins", h.tail_mass, h.empty_bins.len());
}

fn hit_method(name: &str) -> Result<HitMethod, CliError> {
    Ok(match name {
        "closed" => HitMethod::ClosedForm,
        "quadrature" => HitMethod::QuadraticQuadrature,
        "convolution" => HitMethod::KernelConvolution,
        "asymptotic" => HitMethod::Asymptotic { n_max: 30 },
        other => {
            return Err(CliError::Config { key: "method".into(), message: format!("unknown hit method `{other}`") })
        }
    })
}

/// Hit function tables, one file per time.
pub fn cmd_hit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    if matches!(cfg.potential, PotentialSpec::MagneticConstant { .. }) {
        return Err(CliError::Config {
            key: "potential".into(),
            message: "hit tables are one-dimensional; the magnetic hit function is available from the library".into(),
        });
    }
    create_out(cfg)?;
    let primary = match cfg.method.as_deref() {
        Some(m) => hit_method(m)?,
        None if cfg.potential == PotentialSpec::Free => HitMethod::ClosedForm,
        None => HitMethod::QuadraticQuadrature,
    };
    let secondary = match primary {
        HitMethod::KernelConvolution => HitMethod::QuadraticQuadrature,
        _ => HitMethod::KernelConvolution,
    };
    let grid = cfg.z_grid.grid();
    let q = cfg.quadrature();
    let mut files = Vec::new();
    for &t in &cfg.times {
        let b = cfg.boundary(t);
        let request = |method| HitRequest { potential: cfg.potential, boundary: b, z_grid: grid.clone(), method };
        let analytic = request(primary).evaluate_real(&q)?;
        let second = request(secondary).evaluate_real(&q)?;
        let mc = match ensemble(cfg, b)? {
            Some(e) => Some(estimate_hit(&e, &cfg.potential, &grid)?),
            None => None,
        };
        if let Some(h) = &mc {
            report_histogram(&format!("hit T = {t}"), h);
        }
        let ground = |z: f64| match cfg.potential {
            PotentialSpec::Harmonic { omega } => Some((omega / PI).sqrt() * (-omega * z * z).exp()),
            _ => None,
        };
        let rows: Vec<Vec<Field>> = analytic
            .points()
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                let (m, s) = mc_columns(mc.as_ref(), k);
                vec![z.into(), analytic.values[k].into(), second.values[k].into(), m, s, ground(z).into()]
            })
            .collect();
        let name = format!("hit_T{}.csv", time_tag(t));
        let path = out_file(&cfg.out, &name);
        write_csv(&path, &["z", "analytic", "method2", "mc_estimate", "mc_stderr", "ground_state"], &rows)?;
        let mut series = vec![Series { columns: "1:2", style: "lines lw 2", title: "analytic" }];
        if mc.is_some() {
            series.push(Series { columns: "1:4:5", style: "yerrorbars pt 7 ps 0.5", title: "Monte Carlo" });
        }
        if ground(0.0).is_some() {
            series.push(Series { columns: "1:6", style: "lines dt 2", title: "ground state" });
        }
        write_gnuplot(&path.with_extension("gp"), &name, "z", "H(z)", &series)?;
        files.push(path);
    }
    Ok(files)
}

fn pap_method(cfg: &RunConfig, b: &BoundaryData) -> Result<PapMethod, CliError> {
    Ok(match cfg.method.as_deref() {
        Some("closed") => PapMethod::ClosedForm,
        Some("series") => PapMethod::BesselSeries { n_max: cfg.n_max },
        Some("fourier") => PapMethod::FourierQuadrature { n_max: 60 },
        Some(other) => {
            return Err(CliError::Config { key: "method".into(), message: format!("unknown pap method `{other}`") })
        }
        None => match cfg.potential {
            PotentialSpec::Harmonic { .. } => PapMethod::BesselSeries { n_max: cfg.n_max },
            PotentialSpec::MagneticConstant { .. } if b.x != b.y => PapMethod::FourierQuadrature { n_max: 60 },
            _ => PapMethod::ClosedForm,
        },
    })
}

/// A grid wide enough to show the distribution, when none is configured.
fn default_v_grid(cfg: &RunConfig, b: &BoundaryData) -> Result<Grid, CliError> {
    let g = match cfg.potential {
        PotentialSpec::Free => Grid::uniform(-1.0, 1.0, 41)?,
        PotentialSpec::Linear { slope } => match pap_linear_distribution(b, slope)? {
            PapDistribution::Gaussian { mean, variance } => {
                let w = 5.0 * variance.sqrt();
                Grid::uniform(mean - w, mean + w, 81)?
            }
            _ => Grid::uniform(-1.0, 1.0, 41)?,
        },
        PotentialSpec::Harmonic { omega } => {
            let top = 0.5 * (omega * b.time).powi(2);
            let h = top / 80.0;
            Grid::uniform(0.5 * h, top - 0.5 * h, 80)?
        }
        PotentialSpec::MagneticConstant { field, charge, .. } => {
            let eb = (field * charge).abs();
            let half = 1.5 * eb * b.time + 0.5 * eb * b.x.dist2(&b.y);
            let g = cfg.potential.gauge_spec(b.x.coords2()).expect("magnetic");
            let shift = charge * holonomy(&g, b.x.coords2(), b.y.coords2());
            Grid::uniform(shift.min(0.0) - half, shift.max(0.0) + half, 121)?
        }
    };
    Ok(g)
}

/// Path-averaged potential tables, one file per time.
pub fn cmd_pap(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    create_out(cfg)?;
    let q = cfg.quadrature();
    let mut files = Vec::new();
    for &t in &cfg.times {
        let b = cfg.boundary(t);
        let grid = match cfg.v_grid {
            Some(g) => g.grid(),
            None => default_v_grid(cfg, &b)?,
        };
        let points = grid.points().expect("line grid").to_vec();
        let method = pap_method(cfg, &b)?;
        let analytic: Vec<f64> = match (method, cfg.potential) {
            (PapMethod::BesselSeries { n_max }, PotentialSpec::Harmonic { omega }) => {
                if b.x.x() != 0.0 || b.y.x() != 0.0 {
                    return Err(CliError::Config {
                        key: "x".into(),
                        message: "the Bessel series needs x = y = 0".into(),
                    });
                }
                let terms = points
                    .par_iter()
                    .map(|&v| pap_harmonic_series(omega, t, v, n_max))
                    .collect::<Result<Vec<_>, _>>()?;
                let tail = terms.iter().map(|s| s.tail_estimate).fold(0.0, f64::max);
                println!("pap T = {t}: Bessel series with n <= {n_max}, largest truncation tail {tail:.3e}");
                terms.iter().map(|s| s.value).collect()
            }
            _ => {
                let dist =
                    PapRequest { potential: cfg.potential, boundary: b, v_grid: grid.clone(), method }.evaluate(&q)?;
                match dist {
                    PapDistribution::Delta { at } => {
                        // The bin-averaged δ: all mass in the bin holding `at`.
                        let edges = bin_edges(&grid)?;
                        (0..points.len())
                            .map(|k| {
                                if edges[k] <= at && at < edges[k + 1] {
                                    1.0 / (edges[k + 1] - edges[k])
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    }
                    d => d.on_grid(&grid)?.values,
                }
            }
        };
        let mc = match ensemble(cfg, b)? {
            Some(e) => Some(estimate_pap(&e, &cfg.potential, &grid)?),
            None => None,
        };
        if let Some(h) = &mc {
            report_histogram(&format!("pap T = {t}"), h);
        }
        let rows: Vec<Vec<Field>> = points
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let (m, s) = mc_columns(mc.as_ref(), k);
                vec![v.into(), analytic[k].into(), m, s]
            })
            .collect();
        let name = format!("pap_T{}.csv", time_tag(t));
        let path = out_file(&cfg.out, &name);
        write_csv(&path, &["v", "analytic", "mc_estimate", "mc_stderr"], &rows)?;
        let mut series = vec![Series { columns: "1:2", style: "lines lw 2", title: "analytic" }];
        if mc.is_some() {
            series.push(Series { columns: "1:3:4", style: "yerrorbars pt 7 ps 0.5", title: "Monte Carlo" });
        }
        write_gnuplot(&path.with_extension("gp"), &name, "v", "P(v)", &series)?;
        files.push(path);
    }
    Ok(files)
}

/// One row of the kernel comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelRow {
    pub method: &'static str,
    pub value: Complex64,
    pub stderr: Option<f64>,
}

fn scalar_kernel(p: PotentialSpec) -> impl Fn(&Position, &Position, f64) -> f64 + Copy {
    move |a: &Position, c: &Position, t: f64| {
        let Ok(b) = BoundaryData::new(*a, *c, t) else { return f64::NAN };
        match p {
            PotentialSpec::Free => kernel_free(&b, 1.0),
            PotentialSpec::Linear { slope } => kernel_linear(&b, slope),
            PotentialSpec::Harmonic { omega } => kernel_harmonic(&b, omega),
            PotentialSpec::MagneticConstant { .. } => unreachable!("scalar potentials only"),
        }
        .unwrap_or(f64::NAN)
    }
}

/// The kernel by every available route for the first configured time.
pub fn kernel_rows(cfg: &RunConfig) -> Result<Vec<KernelRow>, CliError> {
    let t = cfg.times[0];
    let b = cfg.boundary(t);
    let q = cfg.quadrature();
    let k0 = kernel_free(&b, 1.0)?;
    let real = |v: f64| Complex64::new(v, 0.0);
    let mut rows = Vec::new();
    let closed = match cfg.potential {
        PotentialSpec::MagneticConstant { charge, .. } => {
            let g = cfg.potential.gauge_spec(b.x.coords2()).expect("magnetic");
            kernel_magnetic(b.x.coords2(), b.y.coords2(), t, charge, &g)?.resolve(&g, charge)
        }
        p => real(scalar_kernel(p)(&b.x, &b.y, t)),
    };
    rows.push(KernelRow { method: "closed_form", value: closed, stderr: None });

    if !matches!(cfg.potential, PotentialSpec::MagneticConstant { .. }) {
        let kernel = scalar_kernel(cfg.potential);
        let centre = 0.5 * (b.x.x() + b.y.x());
        let outer = pathxform::specfun::QuadratureSpec::adaptive(cfg.abs_tol * 10.0, cfg.rel_tol * 10.0);
        let total = integrate_real_line(
            |z| hit_via_kernels(kernel, &b, &Position::d1(z), &q, false).unwrap_or(f64::NAN),
            centre,
            &outer,
        )?
        .value;
        rows.push(KernelRow { method: "hit_reconstruction", value: real(total), stderr: None });
    }

    let pap = match cfg.potential {
        PotentialSpec::Free => Some(kernel_from_pap(&PapDistribution::Delta { at: 0.0 }, PapWeight::Decaying, k0)?),
        PotentialSpec::Linear { slope } => {
            let d = pap_linear_distribution(&b, slope)?;
            Some(kernel_from_density(|v| d.density(v).unwrap_or(0.0), PapWeight::Decaying, k0, d.mean(), &q)?)
        }
        PotentialSpec::Harmonic { omega } if b.x.x() == 0.0 && b.y.x() == 0.0 => {
            let n_max = cfg.n_max;
            let density = |v: f64| {
                if v > 0.0 {
                    pap_harmonic_series(omega, t, v, n_max).map_or(f64::NAN, |s| s.value)
                } else {
                    0.0
                }
            };
            // Truncation at n_max is accurate while ((n + ½)ωT)²/8v stays above
            // about 40; beyond that P is below e^{-π²(n + ½)²/320} of its peak.
            let top = ((n_max as f64 + 0.5) * omega * t).powi(2) / 320.0;
            let r = pathxform::specfun::integrate(|v| density(v) * (-v).exp(), 0.0, top, &q)?;
            Some(real(r.value * k0))
        }
        PotentialSpec::Harmonic { .. } => None,
        PotentialSpec::MagneticConstant { field, charge, .. } => {
            let eb = field * charge;
            let g = cfg.potential.gauge_spec(b.x.coords2()).expect("magnetic");
            let shift = charge * holonomy(&g, b.x.coords2(), b.y.coords2());
            // Reference-gauge P on a wide grid, then the gauge phase.
            let half = 4.0 * eb.abs() * t + eb.abs() * b.x.dist2(&b.y);
            let grid = Grid::uniform(-half, half, 2001)?;
            let table: DistributionTable<f64> = pap_magnetic_quadrature(&b, eb, &grid, &q)?;
            let k_ref = kernel_from_pap(&PapDistribution::Table(table), PapWeight::Oscillatory, k0)?;
            Some(k_ref * Complex64::from_polar(1.0, -shift))
        }
    };
    if let Some(v) = pap {
        rows.push(KernelRow { method: "pap_reconstruction", value: v, stderr: None });
    }

    if let Some(e) = ensemble(cfg, b)? {
        let k = estimate_kernel(&e, &cfg.potential)?;
        rows.push(KernelRow { method: "feynman_kac", value: k.value, stderr: Some(k.stderr) });
    }
    Ok(rows)
}

pub fn cmd_kernel(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    create_out(cfg)?;
    let rows = kernel_rows(cfg)?;
    let closed = rows[0].value;
    let table: Vec<Vec<Field>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.into(),
                r.value.re.into(),
                r.value.im.into(),
                r.stderr.into(),
                (r.value - closed).norm().into(),
            ]
        })
        .collect();
    for r in &rows {
        let se = r.stderr.map(|s| format!(" +- {s:.3e}")).unwrap_or_default();
        println!(
            "{:<20} {:.12e} {:+.12e}i{se}  |diff| {:.3e}",
            r.method,
            r.value.re,
            r.value.im,
            (r.value - closed).norm()
        );
    }
    let path = out_file(&cfg.out, "kernel.csv");
    write_csv(&path, &["method", "re", "im", "stderr", "abs_discrepancy"], &table)?;
    Ok(path)
}

/// Writes the ensemble in the flat binary format and reports its kernel estimate.
pub fn cmd_sample(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    create_out(cfg)?;
    if cfg.paths == 0 {
        return Err(CliError::Config { key: "paths".into(), message: "must be > 0 to sample".into() });
    }
    let t = cfg.times[0];
    let e = generate_ensemble(EnsembleSpec::new(cfg.paths, cfg.steps, cfg.seed, cfg.boundary(t))?)?;
    let path = out_file(&cfg.out, "ensemble.bin");
    let file = std::fs::File::create(&path).map_err(|err| CliError::Io(format!("{}: {err}", path.display())))?;
    e.export(std::io::BufWriter::new(file))?;
    let k = estimate_kernel(&e, &cfg.potential)?;
    println!(
        "{} paths x {} steps, seed {}: K = {:.12e} {:+.12e}i +- {:.3e}",
        cfg.paths, cfg.steps, cfg.seed, k.value.re, k.value.im, k.stderr
    );
    Ok(path)
}
