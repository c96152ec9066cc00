//! Monte Carlo over free Brownian bridges: seeded ensembles, Feynman–Kac
//! kernel estimates, and histogram estimators of the hit function and the
//! path-averaged potential.
//!
//! Path `i` of an ensemble is drawn from its own ChaCha8 stream, keyed by
//! `(seed, i)`, and regenerated on demand rather than stored. Estimators reduce
//! over blocks of 100 paths in block order, so every result is bit-identical
//! for any number of worker threads.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::{BoundaryData, DistributionTable, EstimatorResult, GaugeSpec, Grid, Position, PotentialSpec};
use crate::error::{Error, Result};
use crate::kernels::kernel_free;

/// Paths per jackknife block.
pub const BLOCK_SIZE: usize = 100;

const MAGIC: &[u8; 8] = b"PXFWLENS";
const FORMAT_VERSION: u32 = 1;
/// Ensembles above this many stored coordinates are refused by
/// [`PathEnsemble::materialize`].
const MAX_MATERIALIZED: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    /// Number of time slices; a path has `n_steps + 1` points.
    pub n_steps: usize,
    pub seed: u64,
    pub boundary: BoundaryData,
}

impl EnsembleSpec {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64, boundary: BoundaryData) -> Result<Self> {
        let s = EnsembleSpec { n_paths, n_steps, seed, boundary };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be positive"));
        }
        if self.n_steps < 2 {
            return Err(Error::invalid("n_steps", "must be >= 2"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.boundary.time / self.n_steps as f64
    }
}

/// One discretized path, `n_steps + 1` points of dimension `dim`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub dim: usize,
    pub dt: f64,
    pub points: Vec<f64>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    /// The same points traversed backwards.
    pub fn reversed(&self) -> Path {
        let mut points = Vec::with_capacity(self.points.len());
        for j in (0..self.len()).rev() {
            points.extend_from_slice(self.point(j));
        }
        Path { dim: self.dim, dt: self.dt, points }
    }
}

/// A reproducible ensemble of Brownian bridges from `x` to `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub spec: EnsembleSpec,
}

pub fn generate_ensemble(spec: EnsembleSpec) -> Result<PathEnsemble> {
    spec.validate()?;
    Ok(PathEnsemble { spec })
}

impl PathEnsemble {
    pub fn dt(&self) -> f64 {
        self.spec.dt()
    }

    pub fn dim(&self) -> usize {
        self.spec.boundary.dim()
    }

    /// Path `i`, by sequential exact bridge sampling: given `x_j` at `t_j`,
    /// `x_{j+1}` is Gaussian with mean `x_j + (y − x_j) dt/(T − t_j)` and
    /// variance `dt (T − t_{j+1})/(T − t_j)`. The final point is `y` exactly.
    pub fn path(&self, i: usize) -> Path {
        let s = &self.spec;
        let dim = self.dim();
        let n = s.n_steps;
        let total = s.boundary.time;
        let dt = s.dt();
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(i as u64);
        let x = s.boundary.x.as_slice();
        let y = s.boundary.y.as_slice();
        let mut points = Vec::with_capacity((n + 1) * dim);
        points.extend_from_slice(x);
        for j in 0..n - 1 {
            let left = total - dt * j as f64;
            let right = total - dt * (j + 1) as f64;
            let sd = (dt * right / left).sqrt();
            for d in 0..dim {
                let cur = points[j * dim + d];
                let xi: f64 = StandardNormal.sample(&mut rng);
                points.push(cur + (y[d] - cur) * dt / left + sd * xi);
            }
        }
        points.extend_from_slice(y);
        Path { dim, dt, points }
    }

    /// All paths as one row-major array `n_paths × (n_steps + 1) × D`.
    pub fn materialize(&self) -> Result<Vec<f64>> {
        let s = &self.spec;
        let size = s.n_paths.checked_mul((s.n_steps + 1) * self.dim());
        match size {
            Some(n) if n <= MAX_MATERIALIZED => {}
            _ => return Err(Error::invalid("n_paths", "ensemble too large to hold in memory")),
        }
        let rows: Vec<Vec<f64>> = (0..s.n_paths).into_par_iter().map(|i| self.path(i).points).collect();
        Ok(rows.concat())
    }

    /// Values of `f` for every path, in path order.
    pub fn map_paths<T: Send>(&self, f: impl Fn(&Path) -> T + Sync) -> Vec<T> {
        (0..self.spec.n_paths).into_par_iter().map(|i| f(&self.path(i))).collect()
    }

    fn block_size(&self) -> usize {
        if self.spec.n_paths >= 2 * BLOCK_SIZE {
            BLOCK_SIZE
        } else {
            1
        }
    }

    /// Per-block accumulators, computed in parallel and returned in block
    /// order; within a block paths are folded sequentially.
    fn blocks<A: Send>(&self, init: impl Fn() -> A + Sync, add: impl Fn(&mut A, &Path) + Sync) -> Vec<(A, usize)> {
        let n = self.spec.n_paths;
        let bs = self.block_size();
        let n_blocks = n.div_ceil(bs);
        (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = init();
                let range = b * bs..((b + 1) * bs).min(n);
                let count = range.len();
                for i in range {
                    add(&mut acc, &self.path(i));
                }
                (acc, count)
            })
            .collect()
    }

    /// Writes the header and path data in the flat little-endian format.
    pub fn export(&self, mut w: impl Write) -> Result<()> {
        let s = &self.spec;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(s.n_paths as u64).to_le_bytes())?;
        w.write_all(&(s.n_steps as u64).to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&s.boundary.time.to_le_bytes())?;
        w.write_all(&s.seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity((s.n_steps + 1) * self.dim() * 8);
        for i in 0..s.n_paths {
            buf.clear();
            for v in self.path(i).points {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }
}

/// An ensemble read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredEnsemble {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dim: usize,
    pub time: f64,
    pub seed: u64,
    pub data: Vec<f64>,
}

impl StoredEnsemble {
    pub fn path(&self, i: usize) -> Path {
        let width = (self.n_steps + 1) * self.dim;
        Path {
            dim: self.dim,
            dt: self.time / self.n_steps as f64,
            points: self.data[i * width..(i + 1) * width].to_vec(),
        }
    }
}

pub fn import_ensemble(mut r: impl Read) -> Result<StoredEnsemble> {
    fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        r.read_exact(&mut b).map_err(|e| Error::Format(e.to_string()))?;
        Ok(b)
    }
    if &take::<8>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_paths = u64::from_le_bytes(take(&mut r)?) as usize;
    let n_steps = u64::from_le_bytes(take(&mut r)?) as usize;
    let dim = u32::from_le_bytes(take(&mut r)?) as usize;
    let time = f64::from_le_bytes(take(&mut r)?);
    let seed = u64::from_le_bytes(take(&mut r)?);
    if !(1..=2).contains(&dim) || n_steps < 2 || n_paths == 0 {
        return Err(Error::Format("inconsistent header".into()));
    }
    let count = n_paths
        .checked_mul((n_steps + 1) * dim)
        .filter(|&c| c <= MAX_MATERIALIZED)
        .ok_or_else(|| Error::Format("ensemble too large".into()))?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != count * 8 {
        return Err(Error::Format(format!("expected {} data bytes, found {}", count * 8, raw.len())));
    }
    let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(StoredEnsemble { n_paths, n_steps, dim, time, seed, data })
}

/// Midpoint rule `Σ V((x_j + x_{j+1})/2) dt` for a scalar potential on a
/// one-dimensional path.
pub fn line_integral_potential(path: &Path, p: &PotentialSpec) -> Result<f64> {
    if path.dim != 1 {
        return Err(Error::Dimension { operation: "line_integral_potential", expected: 1, actual: path.dim });
    }
    if p.scalar_value(0.0).is_none() {
        return Err(Error::UnsupportedPotential { operation: "line_integral_potential", potential: p.to_string() });
    }
    let pts = &path.points;
    let sum: f64 = pts.windows(2).map(|w| p.scalar_value(0.5 * (w[0] + w[1])).unwrap_or(0.0)).sum();
    Ok(sum * path.dt)
}

/// `e Σ A(midpoint) · (x_{j+1} − x_j)`, exact for each straight segment when
/// `A` is linear and odd under reversal of the path.
pub fn line_integral_gauge(path: &Path, charge: f64, g: &GaugeSpec) -> Result<f64> {
    if path.dim != 2 {
        return Err(Error::Dimension { operation: "line_integral_gauge", expected: 2, actual: path.dim });
    }
    let segment = |j: usize| {
        let a = path.point(j);
        let b = path.point(j + 1);
        let av = g.vector_potential([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        av[0] * (b[0] - a[0]) + av[1] * (b[1] - a[1])
    };
    // Pair segment j with its mirror n−1−j so that reversing the path negates
    // every partial sum exactly.
    let n = path.len() - 1;
    let mut sum = 0.0;
    for j in 0..n / 2 {
        sum += segment(j) + segment(n - 1 - j);
    }
    if n % 2 == 1 {
        sum += segment(n / 2);
    }
    Ok(charge * sum)
}

/// The path's contribution `v` to the path-averaged potential.
fn path_value(path: &Path, p: &PotentialSpec, g: Option<&GaugeSpec>) -> Result<f64> {
    match (*p, g) {
        (PotentialSpec::MagneticConstant { charge, .. }, Some(g)) => line_integral_gauge(path, charge, g),
        _ => line_integral_potential(path, p),
    }
}

fn gauge_for(ens: &PathEnsemble, p: &PotentialSpec) -> Result<Option<GaugeSpec>> {
    let b = &ens.spec.boundary;
    match p {
        PotentialSpec::MagneticConstant { .. } => {
            b.require_dim("magnetic sampling", 2)?;
            Ok(p.gauge_spec(b.x.coords2()))
        }
        _ => {
            b.require_dim("scalar-potential sampling", 1)?;
            Ok(None)
        }
    }
}

/// `v` for every path, in path order.
pub fn sample_line_integrals(ens: &PathEnsemble, p: &PotentialSpec) -> Result<Vec<f64>> {
    let g = gauge_for(ens, p)?;
    ens.map_paths(|path| path_value(path, p, g.as_ref())).into_iter().collect()
}

/// Delete-one-block jackknife of a ratio `Σ num / Σ den` of block sums.
fn jackknife_ratio<V>(num: &[V], den: &[f64]) -> (V, f64)
where
    V: Copy + std::ops::Add<Output = V> + std::ops::Sub<Output = V> + std::ops::Mul<f64, Output = V> + Norm,
{
    let b = num.len();
    let total_num = num.iter().skip(1).fold(num[0], |a, &x| a + x);
    let total_den: f64 = den.iter().sum();
    let value = total_num * (1.0 / total_den);
    if b < 2 {
        return (value, f64::NAN);
    }
    let loo: Vec<V> = (0..b).map(|i| (total_num - num[i]) * (1.0 / (total_den - den[i]))).collect();
    let mean = loo.iter().skip(1).fold(loo[0], |a, &x| a + x) * (1.0 / b as f64);
    let ss: f64 = loo.iter().map(|&x| (x - mean).norm_sqr()).sum();
    (value, ((b as f64 - 1.0) / b as f64 * ss).sqrt())
}

trait Norm {
    fn norm_sqr(self) -> f64;
}

impl Norm for f64 {
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Norm for Complex64 {
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
}

/// Feynman–Kac estimate `K₀ ⟨e^{−v}⟩` (scalar potentials) or `K₀ ⟨e^{−iv}⟩`
/// (gauge fields), with a block-jackknife standard error.
pub fn estimate_kernel(ens: &PathEnsemble, p: &PotentialSpec) -> Result<EstimatorResult<Complex64>> {
    let g = gauge_for(ens, p)?;
    let k0 = kernel_free(&ens.spec.boundary, 1.0)?;
    let gauge = g.is_some();
    let blocks = ens.blocks(
        || (Complex64::new(0.0, 0.0), None::<Error>),
        |acc, path| match path_value(path, p, g.as_ref()) {
            Ok(v) if gauge => acc.0 += Complex64::from_polar(1.0, -v),
            Ok(v) => acc.0 += Complex64::new((-v).exp(), 0.0),
            Err(e) => acc.1 = Some(e),
        },
    );
    let mut sums = Vec::with_capacity(blocks.len());
    let mut counts = Vec::with_capacity(blocks.len());
    for ((s, err), c) in blocks {
        if let Some(e) = err {
            return Err(e);
        }
        sums.push(s);
        counts.push(c as f64);
    }
    let (mean, se) = jackknife_ratio(&sums, &counts);
    Ok(EstimatorResult { value: mean * k0, stderr: se * k0, n_samples: ens.spec.n_paths })
}

/// Bin edges for a line grid whose points are bin centres: midpoints between
/// neighbours, with the outer bins as wide as their neighbours.
pub fn bin_edges(grid: &Grid) -> Result<Vec<f64>> {
    let Some(p) = grid.points() else {
        return Err(Error::invalid("grid", "histograms need a line grid"));
    };
    if p.len() < 2 {
        return Err(Error::invalid("grid", "histograms need at least two bins"));
    }
    let n = p.len();
    let mut e = Vec::with_capacity(n + 1);
    e.push(p[0] - 0.5 * (p[1] - p[0]));
    for w in p.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(p[n - 1] + 0.5 * (p[n - 1] - p[n - 2]));
    Ok(e)
}

fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    if !(x >= edges[0]) || x >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// A histogram estimate with the mass that fell outside the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramEstimate {
    /// Densities per bin, with jackknife standard errors.
    pub table: DistributionTable<f64>,
    /// Fraction of the (weighted) total outside the grid; the table
    /// integrates to `1 − tail_mass` exactly.
    pub tail_mass: f64,
    /// Bins never visited.
    pub empty_bins: Vec<usize>,
}

fn histogram_from_blocks(
    grid: &Grid,
    edges: &[f64],
    blocks: Vec<(Vec<f64>, f64, f64)>,
    scale: f64,
) -> Result<HistogramEstimate> {
    let nb = edges.len() - 1;
    let dens: Vec<f64> = blocks.iter().map(|b| b.1).collect();
    let total: f64 = dens.iter().sum();
    let tail: f64 = blocks.iter().map(|b| b.2).sum();
    let mut values = Vec::with_capacity(nb);
    let mut errs = Vec::with_capacity(nb);
    let mut empty = Vec::new();
    for k in 0..nb {
        let width = edges[k + 1] - edges[k];
        let num: Vec<f64> = blocks.iter().map(|b| b.0[k]).collect();
        if num.iter().all(|&x| x == 0.0) {
            empty.push(k);
        }
        let (v, se) = jackknife_ratio(&num, &dens);
        values.push(v / (scale * width));
        errs.push(se / (scale * width));
    }
    if !empty.is_empty() {
        log::warn!("histogram: {} of {nb} bins never visited", empty.len());
    }
    Ok(HistogramEstimate {
        table: DistributionTable::sampled(grid.clone(), values, errs)?,
        tail_mass: tail / (scale * total),
        empty_bins: empty,
    })
}

/// Histogram estimate of the normalized hit function. Each time slice
/// deposits `dt/2` at each of its endpoints (trapezoid in time), weighted by
/// `e^{−v}` of the whole path; bins are normalized by `T · width · Σ e^{−v}`.
///
/// Each bin estimates the average of the density over the bin, not its value
/// at the grid point. For a bin of width `h` the two differ by about
/// `h² H''/24`, which for wide bins near the peak exceeds the sampling error.
pub fn estimate_hit(ens: &PathEnsemble, p: &PotentialSpec, z_grid: &Grid) -> Result<HistogramEstimate> {
    ens.spec.boundary.require_dim("estimate_hit", 1)?;
    if p.scalar_value(0.0).is_none() {
        return Err(Error::UnsupportedPotential { operation: "estimate_hit", potential: p.to_string() });
    }
    let edges = bin_edges(z_grid)?;
    let nb = edges.len() - 1;
    let total = ens.spec.boundary.time;
    let half = 0.5 * ens.dt();
    let blocks = ens.blocks(
        || (vec![0.0; nb], 0.0, 0.0),
        |acc, path| {
            let w = (-line_integral_potential(path, p).unwrap_or(f64::INFINITY)).exp();
            acc.1 += w;
            let last = path.points.len() - 1;
            for (j, &x) in path.points.iter().enumerate() {
                let dwell = if j == 0 || j == last { half } else { 2.0 * half };
                match bin_of(&edges, x) {
                    Some(k) => acc.0[k] += w * dwell,
                    None => acc.2 += w * dwell,
                }
            }
        },
    );
    histogram_from_blocks(z_grid, &edges, blocks.into_iter().map(|b| b.0).collect(), total)
}

/// Histogram of `v` over unweighted bridges, normalized by `N · width`.
pub fn estimate_pap(ens: &PathEnsemble, p: &PotentialSpec, v_grid: &Grid) -> Result<HistogramEstimate> {
    let g = gauge_for(ens, p)?;
    let edges = bin_edges(v_grid)?;
    let nb = edges.len() - 1;
    let blocks = ens.blocks(
        || (vec![0.0; nb], 0.0, 0.0),
        |acc, path| {
            acc.1 += 1.0;
            match path_value(path, p, g.as_ref()).ok().and_then(|v| bin_of(&edges, v)) {
                Some(k) => acc.0[k] += 1.0,
                None => acc.2 += 1.0,
            }
        },
    );
    histogram_from_blocks(v_grid, &edges, blocks.into_iter().map(|b| b.0).collect(), 1.0)
}

/// Result of a two-sample Kolmogorov–Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("samples", "need two non-empty samples without NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsTest { statistic: d, p_value: kolmogorov_q(lambda) })
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("data", "need at least two positive pairs"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Sample mean and variance of the coordinate `d` at slice `j`, with the
/// standard error of the variance under a Gaussian assumption.
pub fn slice_moments(ens: &PathEnsemble, j: usize, d: usize) -> Result<(f64, f64, f64)> {
    if j > ens.spec.n_steps || d >= ens.dim() {
        return Err(Error::invalid("slice", "index out of range"));
    }
    let xs = ens.map_paths(|p| p.point(j)[d]);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var, var * (2.0 / (n - 1.0)).sqrt()))
}

/// Convenience: an ensemble between two one-dimensional points.
pub fn ensemble_1d(n_paths: usize, n_steps: usize, seed: u64, x: f64, y: f64, time: f64) -> Result<PathEnsemble> {
    generate_ensemble(EnsembleSpec::new(
        n_paths,
        n_steps,
        seed,
        BoundaryData::new(Position::d1(x), Position::d1(y), time)?,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{holonomy, GaugeKind};
    use crate::hitfn::hit_free_closed;
    use crate::kernels::{kernel_harmonic, kernel_linear};
    use proptest::prelude::*;

    fn ens2(n: usize, steps: usize, seed: u64, x: [f64; 2], y: [f64; 2], t: f64) -> PathEnsemble {
        generate_ensemble(EnsembleSpec::new(n, steps, seed, BoundaryData::d2(x, y, t).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn bridges_hit_both_endpoints() {
        let e = ensemble_1d(50, 17, 3, 0.4, -1.1, 1.7).unwrap();
        for i in 0..50 {
            let p = e.path(i);
            assert_eq!(p.len(), 18);
            assert_eq!(p.points[0], 0.4);
            assert_eq!(p.points[17], -1.1);
        }
        let e = ens2(10, 5, 3, [0.1, 0.2], [0.3, -0.4], 1.0);
        let p = e.path(7);
        assert_eq!(p.point(0), &[0.1, 0.2]);
        assert_eq!(p.point(5), &[0.3, -0.4]);
        assert!(EnsembleSpec::new(10, 1, 0, BoundaryData::d1(0.0, 0.0, 1.0).unwrap()).is_err());
        assert!(EnsembleSpec::new(0, 4, 0, BoundaryData::d1(0.0, 0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn bridge_marginals() {
        let e = ensemble_1d(100_000, 2, 42, 0.3, 0.9, 2.0).unwrap();
        let (mean, var, var_se) = slice_moments(&e, 1, 0).unwrap();
        assert!((mean - 0.6).abs() < 3.0 * (0.5f64 / 1e5).sqrt());
        assert!((var - 0.5).abs() < 3.0 * var_se);
        let e = ensemble_1d(20_000, 8, 9, 0.0, 0.0, 1.0).unwrap();
        for j in 1..8 {
            let t = j as f64 / 8.0;
            let (mean, var, var_se) = slice_moments(&e, j, 0).unwrap();
            let want = t * (1.0 - t);
            assert!(mean.abs() < 3.0 * (want / 2e4).sqrt(), "j={j}");
            assert!((var - want).abs() < 3.0 * var_se, "j={j}: {var} vs {want}");
        }
    }

    #[test]
    fn ensembles_are_reproducible() {
        let a = ensemble_1d(300, 16, 7, 0.0, 1.0, 1.0).unwrap();
        let b = ensemble_1d(300, 16, 7, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a.materialize().unwrap(), b.materialize().unwrap());
        let c = ensemble_1d(300, 16, 8, 0.0, 1.0, 1.0).unwrap();
        assert_ne!(a.path(0), c.path(0));
        assert_ne!(a.path(0), a.path(1));
        // A path does not depend on the ensemble size.
        let d = ensemble_1d(5, 16, 7, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a.path(4), d.path(4));
    }

    #[test]
    fn potential_line_integrals() {
        let flat = Path { dim: 1, dt: 0.1, points: vec![0.0; 11] };
        assert_eq!(line_integral_potential(&flat, &PotentialSpec::Free).unwrap(), 0.0);
        let lin = PotentialSpec::linear(1.0).unwrap();
        assert_eq!(line_integral_potential(&flat, &lin).unwrap(), 0.0);
        let c = Path { dim: 1, dt: 0.25, points: vec![1.5; 9] };
        assert!((line_integral_potential(&c, &lin).unwrap() - 3.0).abs() < 1e-15);
        // The midpoint rule is exact for linear V on any path.
        let e = ensemble_1d(3, 64, 1, 0.2, -0.3, 1.0).unwrap();
        let p = e.path(0);
        let trap: f64 = p.points.windows(2).map(|w| 0.5 * (w[0] + w[1]) * p.dt).sum();
        assert!((line_integral_potential(&p, &lin).unwrap() - trap).abs() < 1e-14);
        let mag = PotentialSpec::magnetic(1.0, 1.0, GaugeKind::Landau).unwrap();
        assert!(line_integral_potential(&p, &mag).is_err());
    }

    #[test]
    fn gauge_line_integrals() {
        let x = [0.2, -0.1];
        let y = [0.7, 0.4];
        let e = ens2(20, 64, 5, x, y, 1.0);
        let fs = GaugeSpec::reference_gauge(1.3, x);
        let landau = GaugeSpec::new(GaugeKind::Landau, 1.3, x);
        let phi = holonomy(&landau, x, y);
        for i in 0..20 {
            let p = e.path(i);
            let a = line_integral_gauge(&p, 0.8, &fs).unwrap();
            let b = line_integral_gauge(&p.reversed(), 0.8, &fs).unwrap();
            assert_eq!(a, -b);
            let l = line_integral_gauge(&p, 0.8, &landau).unwrap();
            assert!((l - a - 0.8 * phi).abs() < 1e-12);
        }
        let still = Path { dim: 2, dt: 0.1, points: [0.3, 0.3].repeat(11) };
        assert_eq!(line_integral_gauge(&still, 1.0, &landau).unwrap(), 0.0);
        // Counter-clockwise unit square encloses area 1.
        let square = Path { dim: 2, dt: 0.25, points: vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0] };
        assert!(
            (line_integral_gauge(&square, 1.0, &GaugeSpec::new(GaugeKind::Landau, 2.0, x)).unwrap() - 2.0).abs()
                < 1e-15
        );
    }

    #[test]
    fn kernel_estimates() {
        let e = ensemble_1d(1000, 16, 1, 0.3, -0.1, 2.0).unwrap();
        let free = estimate_kernel(&e, &PotentialSpec::Free).unwrap();
        assert_eq!(free.value.re, kernel_free(&e.spec.boundary, 1.0).unwrap());
        assert_eq!(free.stderr, 0.0);

        let e = ensemble_1d(100_000, 64, 11, 0.3, -0.1, 2.0).unwrap();
        let k = estimate_kernel(&e, &PotentialSpec::linear(0.5).unwrap()).unwrap();
        let want = kernel_linear(&e.spec.boundary, 0.5).unwrap();
        assert!((k.value.re - want).abs() < 3.0 * k.stderr, "{} ± {} vs {want}", k.value.re, k.stderr);

        // The midpoint rule misses the in-slice bridge fluctuations, a bias of
        // about K·T·dt/8; 512 slices keep it near one standard error.
        let e = ensemble_1d(100_000, 512, 12, 0.0, 0.0, 1.0).unwrap();
        let k = estimate_kernel(&e, &PotentialSpec::harmonic(1.0).unwrap()).unwrap();
        let want = kernel_harmonic(&e.spec.boundary, 1.0).unwrap();
        assert!((k.value.re - want).abs() < 3.0 * k.stderr, "{} ± {} vs {want}", k.value.re, k.stderr);
    }

    #[test]
    fn harmonic_bias_shrinks_with_slices() {
        let want = kernel_harmonic(&BoundaryData::d1(0.0, 0.0, 1.0).unwrap(), 1.0).unwrap();
        let bias = |steps| {
            let e = ensemble_1d(50_000, steps, 13, 0.0, 0.0, 1.0).unwrap();
            let k = estimate_kernel(&e, &PotentialSpec::harmonic(1.0).unwrap()).unwrap();
            ((k.value.re - want).abs(), k.stderr)
        };
        let (b16, s16) = bias(16);
        let (b32, s32) = bias(32);
        assert!(b32 <= b16 + 2.0 * (s16 + s32), "{b16} {b32}");
        assert!(b16 > 5.0 * s16);
    }

    #[test]
    fn magnetic_kernel_estimate() {
        let e = ens2(50_000, 128, 4, [0.0, 0.0], [0.0, 0.0], 1.0);
        let p = PotentialSpec::magnetic(1.0, 1.0, GaugeKind::FockSchwinger { base: [0.0, 0.0] }).unwrap();
        let k = estimate_kernel(&e, &p).unwrap();
        let want = crate::kernels::kernel_magnetic_fs(&e.spec.boundary, 1.0).unwrap();
        assert!((k.value.re - want).abs() < 3.5 * k.stderr, "{} ± {}", k.value, k.stderr);
        assert!(k.value.im.abs() < 3.5 * k.stderr);
    }

    #[test]
    fn hit_histogram() {
        let e = ensemble_1d(20_000, 128, 21, 0.0, 0.0, 2.0).unwrap();
        // z = 0 sits at a bin centre, not on an edge.
        let grid = Grid::uniform(-3.0, 3.0, 31).unwrap();
        let h = estimate_hit(&e, &PotentialSpec::Free, &grid).unwrap();
        let mass = h.table.values.iter().sum::<f64>() * 0.2;
        assert!((mass + h.tail_mass - 1.0).abs() < 1e-12);
        let edges = bin_edges(&grid).unwrap();
        let b = e.spec.boundary;
        let se = h.table.stderr.as_ref().unwrap();
        let mut bad = 0;
        for k in 0..31 {
            let avg = crate::specfun::integrate(
                |z| hit_free_closed(&b, z).unwrap(),
                edges[k],
                edges[k + 1],
                &Default::default(),
            )
            .unwrap()
            .value
                / 0.2;
            if (h.table.values[k] - avg).abs() > 3.0 * se[k] {
                bad += 1;
            }
        }
        assert!(bad <= 1, "{bad} bins off");
        // A weighted histogram stays normalized.
        let w = estimate_hit(&e, &PotentialSpec::harmonic(1.0).unwrap(), &grid).unwrap();
        assert!((w.table.values.iter().sum::<f64>() * 0.2 + w.tail_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_bins_estimate_bin_averages() {
        let e = ensemble_1d(20_000, 128, 22, 0.0, 0.0, 2.0).unwrap();
        let grid = Grid::uniform(-3.0, 3.0, 7).unwrap();
        let h = estimate_hit(&e, &PotentialSpec::Free, &grid).unwrap();
        let b = e.spec.boundary;
        let se = h.table.stderr.as_ref().unwrap()[3];
        let avg = crate::specfun::integrate(|z| hit_free_closed(&b, z).unwrap(), -0.5, 0.5, &Default::default())
            .unwrap()
            .value;
        let point = hit_free_closed(&b, 0.0).unwrap();
        assert!((h.table.values[3] - avg).abs() < 3.0 * se);
        assert!((h.table.values[3] - point).abs() > 5.0 * se, "{} vs {point} ± {se}", h.table.values[3]);
    }

    #[test]
    fn pap_histograms() {
        let e = ensemble_1d(1000, 16, 2, 0.1, 0.2, 1.0).unwrap();
        let grid = Grid::uniform(-1.0, 1.0, 21).unwrap();
        let free = estimate_pap(&e, &PotentialSpec::Free, &grid).unwrap();
        assert!((free.table.values[10] * 0.1 - 1.0).abs() < 1e-12);
        assert!(free.table.values.iter().enumerate().all(|(k, v)| k == 10 || *v == 0.0));
        assert_eq!(free.empty_bins.len(), 20);
        let narrow = Grid::uniform(-0.05, 0.05, 2).unwrap();
        let lin = estimate_pap(&e, &PotentialSpec::linear(3.0).unwrap(), &narrow).unwrap();
        assert!(lin.tail_mass > 0.5);
        let mass: f64 = lin.table.values.iter().sum::<f64>() * 0.1;
        assert!((mass + lin.tail_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn export_round_trip() {
        let e = ens2(7, 5, 99, [0.0, 1.0], [2.0, 3.0], 1.5);
        let mut buf = Vec::new();
        e.export(&mut buf).unwrap();
        let s = import_ensemble(&buf[..]).unwrap();
        assert_eq!((s.n_paths, s.n_steps, s.dim, s.time, s.seed), (7, 5, 2, 1.5, 99));
        assert_eq!(s.data, e.materialize().unwrap());
        assert_eq!(s.path(3), e.path(3));
        assert!(import_ensemble(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(import_ensemble(&bad[..]), Err(Error::Format(_))));
    }

    #[test]
    fn statistics_helpers() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let same = ks_two_sample(&a, &a).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        let moved: Vec<f64> = a.iter().map(|x| x + 0.3001).collect();
        let r = ks_two_sample(&a, &moved).unwrap();
        assert!((r.statistic - 0.302).abs() < 1e-12, "{}", r.statistic);
        assert!(r.p_value < 1e-10);
        // Q(1.36) ≈ 0.05 is the familiar 5% critical value.
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        let n = [1e3, 1e4, 1e5];
        let y: Vec<f64> = n.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&n, &y).unwrap() + 0.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let e = ensemble_1d(1000, 32, 77, 0.0, 0.5, 1.0).unwrap();
        let p = PotentialSpec::harmonic(1.3).unwrap();
        let grid = Grid::uniform(-2.0, 2.0, 20).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| (estimate_kernel(&e, &p).unwrap(), estimate_hit(&e, &p, &grid).unwrap()))
        };
        let one = run(1);
        for t in [3, 8] {
            let other = run(t);
            assert_eq!(one.0.value.re.to_bits(), other.0.value.re.to_bits());
            assert_eq!(one.0.stderr.to_bits(), other.0.stderr.to_bits());
            assert_eq!(one.1, other.1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn endpoints_are_exact(seed in any::<u64>(), x in -5.0f64..5.0, y in -5.0f64..5.0, t in 0.01f64..10.0, steps in 2usize..40) {
            let e = ensemble_1d(3, steps, seed, x, y, t).unwrap();
            for i in 0..3 {
                let p = e.path(i);
                prop_assert_eq!(p.points[0], x);
                prop_assert_eq!(p.points[steps], y);
                prop_assert!(p.points.iter().all(|v| v.is_finite()));
            }
        }

        #[test]
        fn gauge_integral_is_antisymmetric(seed in any::<u64>(), bx in -2.0f64..2.0, by in -2.0f64..2.0) {
            let e = ens2(2, 10, seed, [0.0, 0.0], [1.0, 0.5], 1.0);
            let g = GaugeSpec::new(GaugeKind::FockSchwinger { base: [bx, by] }, 0.7, [0.0, 0.0]);
            let p = e.path(1);
            prop_assert_eq!(line_integral_gauge(&p, 1.0, &g).unwrap(), -line_integral_gauge(&p.reversed(), 1.0, &g).unwrap());
        }
    }
}
