//! Core value types shared by every module: positions, boundary data,
//! potential and gauge descriptions, tabulated distributions and Monte Carlo
//! estimates.
//!
//! All types are immutable after construction and `Send + Sync`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A point in one or two spatial dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Position {
    coords: [f64; 2],
    dim: usize,
}

impl Position {
    pub fn d1(x: f64) -> Self {
        Position { coords: [x, 0.0], dim: 1 }
    }

    pub fn d2(x: f64, y: f64) -> Self {
        Position { coords: [x, y], dim: 2 }
    }

    pub fn from_slice(c: &[f64]) -> Result<Self> {
        match c {
            [x] => Ok(Self::d1(*x)),
            [x, y] => Ok(Self::d2(*x, *y)),
            _ => Err(Error::invalid("position", format!("expected 1 or 2 coordinates, got {}", c.len()))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Coordinate `i`; the unused second slot of a 1-D position reads as 0.
    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn coords2(&self) -> [f64; 2] {
        self.coords
    }

    pub fn dist2(&self, other: &Position) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn translate(&self, by: f64) -> Self {
        let mut p = *self;
        for c in &mut p.coords[..p.dim] {
            *c += by;
        }
        p
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "{}", self.coords[0]),
            _ => write!(f, "({}, {})", self.coords[0], self.coords[1]),
        }
    }
}

/// Endpoints and Euclidean time of a propagator matrix element `K(y, x; T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryData {
    pub x: Position,
    pub y: Position,
    pub time: f64,
}

impl BoundaryData {
    pub fn new(x: Position, y: Position, time: f64) -> Result<Self> {
        if !(time > 0.0) || !time.is_finite() {
            return Err(Error::invalid("T", format!("must be finite and > 0, got {time}")));
        }
        if x.dim() != y.dim() {
            return Err(Error::invalid("y", format!("dimension {} does not match x ({})", y.dim(), x.dim())));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid("x/y", "endpoints must be finite"));
        }
        Ok(BoundaryData { x, y, time })
    }

    pub fn d1(x: f64, y: f64, time: f64) -> Result<Self> {
        Self::new(Position::d1(x), Position::d1(y), time)
    }

    pub fn d2(x: [f64; 2], y: [f64; 2], time: f64) -> Result<Self> {
        Self::new(Position::d2(x[0], x[1]), Position::d2(y[0], y[1]), time)
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn with_time(&self, time: f64) -> Result<Self> {
        Self::new(self.x, self.y, time)
    }

    pub(crate) fn require_dim(&self, operation: &'static str, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::Dimension { operation, expected, actual: self.dim() })
        }
    }
}

/// The two concrete gauges for a constant magnetic field in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GaugeKind {
    /// `A_μ(p) = -½ F_μν (p - base)_ν`.
    FockSchwinger { base: [f64; 2] },
    /// `A(p) = (0, B p₁)`.
    Landau,
}

impl fmt::Display for GaugeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeKind::FockSchwinger { base } => {
                write!(f, "fock-schwinger({}, {})", base[0], base[1])
            }
            GaugeKind::Landau => write!(f, "landau"),
        }
    }
}

/// A gauge for the constant field `F₁₂ = B`, together with the gauge
/// function `Λ` that relates it to the reference Fock–Schwinger gauge about
/// `reference` (`A = Â + ∇Λ`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeSpec {
    pub kind: GaugeKind,
    pub field: f64,
    pub reference: [f64; 2],
}

impl GaugeSpec {
    pub fn new(kind: GaugeKind, field: f64, reference: [f64; 2]) -> Self {
        GaugeSpec { kind, field, reference }
    }

    /// The reference gauge itself: Fock–Schwinger about `reference`.
    pub fn reference_gauge(field: f64, reference: [f64; 2]) -> Self {
        Self::new(GaugeKind::FockSchwinger { base: reference }, field, reference)
    }

    pub fn vector_potential(&self, p: [f64; 2]) -> [f64; 2] {
        let b = self.field;
        match self.kind {
            GaugeKind::FockSchwinger { base } => [-0.5 * b * (p[1] - base[1]), 0.5 * b * (p[0] - base[0])],
            GaugeKind::Landau => [0.0, b * p[0]],
        }
    }

    /// Closed-form `Λ(p)` with `Λ ≡ 0` for the reference gauge.
    pub fn lambda(&self, p: [f64; 2]) -> f64 {
        let b = self.field;
        let r = self.reference;
        match self.kind {
            GaugeKind::FockSchwinger { base } => 0.5 * b * ((base[1] - r[1]) * p[0] + (r[0] - base[0]) * p[1]),
            GaugeKind::Landau => 0.5 * b * (p[0] * p[1] - r[1] * p[0] + r[0] * p[1]),
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(self.kind, GaugeKind::FockSchwinger { base } if base == self.reference)
    }
}

/// `φ(y, x) = Λ(y) − Λ(x)`, the path-independent integral of `A − Â`.
pub fn holonomy(g: &GaugeSpec, x: [f64; 2], y: [f64; 2]) -> f64 {
    if x == y || g.is_reference() {
        return 0.0;
    }
    g.lambda(y) - g.lambda(x)
}

/// A formal integer combination of oriented segments, tracked through its
/// boundary points. Gauge phases of products of kernels are holonomies of
/// such chains; coefficients of coincident points cancel exactly, so a
/// closed chain resolves to a phase of exactly zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Chain {
    terms: Vec<([f64; 2], i32)>,
}

impl Chain {
    pub fn empty() -> Self {
        Chain::default()
    }

    /// The segment from `from` to `to`, with boundary `to − from`.
    pub fn segment(from: [f64; 2], to: [f64; 2]) -> Self {
        let mut c = Chain::empty();
        c.push(to, 1);
        c.push(from, -1);
        c
    }

    fn push(&mut self, p: [f64; 2], coeff: i32) {
        let bits = |q: [f64; 2]| (q[0].to_bits(), q[1].to_bits());
        match self.terms.iter_mut().find(|(q, _)| bits(*q) == bits(p)) {
            Some((_, c)) => *c += coeff,
            None => self.terms.push((p, coeff)),
        }
        self.terms.retain(|(_, c)| *c != 0);
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(mut self, other: &Chain) -> Self {
        for &(p, c) in &other.terms {
            self.push(p, c);
        }
        self
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(mut self, other: &Chain) -> Self {
        for &(p, c) in &other.terms {
            self.push(p, -c);
        }
        self
    }

    pub fn is_closed(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn holonomy(&self, g: &GaugeSpec) -> f64 {
        self.terms.iter().map(|&(p, c)| f64::from(c) * g.lambda(p)).sum()
    }

    /// `e^{-i e φ}`; exactly one for a closed chain.
    pub fn phase(&self, g: &GaugeSpec, charge: f64) -> Complex64 {
        if self.is_closed() {
            return Complex64::new(1.0, 0.0);
        }
        Complex64::from_polar(1.0, -charge * self.holonomy(g))
    }
}

/// External potential or gauge field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialSpec {
    Free,
    Linear { slope: f64 },
    Harmonic { omega: f64 },
    MagneticConstant { field: f64, charge: f64, gauge: GaugeKind },
}

impl PotentialSpec {
    pub fn linear(slope: f64) -> Result<Self> {
        if !slope.is_finite() {
            return Err(Error::invalid("k", "slope must be finite"));
        }
        Ok(PotentialSpec::Linear { slope })
    }

    pub fn harmonic(omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::invalid("omega", format!("must be finite and > 0, got {omega}")));
        }
        Ok(PotentialSpec::Harmonic { omega })
    }

    pub fn magnetic(field: f64, charge: f64, gauge: GaugeKind) -> Result<Self> {
        if !field.is_finite() || !charge.is_finite() {
            return Err(Error::invalid("B/e", "field and charge must be finite"));
        }
        Ok(PotentialSpec::MagneticConstant { field, charge, gauge })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Free => "free",
            PotentialSpec::Linear { .. } => "linear",
            PotentialSpec::Harmonic { .. } => "harmonic",
            PotentialSpec::MagneticConstant { .. } => "magnetic",
        }
    }

    /// `V(p)` for scalar potentials; `None` for the gauge field.
    pub fn scalar_value(&self, p: f64) -> Option<f64> {
        match *self {
            PotentialSpec::Free => Some(0.0),
            PotentialSpec::Linear { slope } => Some(slope * p),
            PotentialSpec::Harmonic { omega } => Some(0.5 * omega * omega * p * p),
            PotentialSpec::MagneticConstant { .. } => None,
        }
    }

    /// The gauge description with `Λ` measured relative to Fock–Schwinger
    /// about `reference` (normally the initial point `x`).
    pub fn gauge_spec(&self, reference: [f64; 2]) -> Option<GaugeSpec> {
        match *self {
            PotentialSpec::MagneticConstant { field, gauge, .. } => Some(GaugeSpec::new(gauge, field, reference)),
            _ => None,
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Free => write!(f, "free"),
            PotentialSpec::Linear { slope } => write!(f, "linear(k={slope})"),
            PotentialSpec::Harmonic { omega } => write!(f, "harmonic(omega={omega})"),
            PotentialSpec::MagneticConstant { field, charge, gauge } => {
                write!(f, "magnetic(B={field}, e={charge}, {gauge})")
            }
        }
    }
}

/// Evaluation points of a tabulated distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Line(Vec<f64>),
    /// Product lattice; values are stored row-major with `xs` varying slowest.
    Lattice {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

fn check_monotone(points: &[f64]) -> Result<()> {
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonMonotoneGrid(i));
    }
    match points.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(Error::NonMonotoneGrid(i + 1)),
        None => Ok(()),
    }
}

impl Grid {
    pub fn line(points: Vec<f64>) -> Result<Self> {
        check_monotone(&points)?;
        Ok(Grid::Line(points))
    }

    pub fn lattice(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_monotone(&xs)?;
        check_monotone(&ys)?;
        Ok(Grid::Lattice { xs, ys })
    }

    /// `n` equally spaced points covering `[lo, hi]` inclusive.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("grid_points", "need at least 2 points"));
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::line((0..n).map(|i| lo + h * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Line(p) => p.len(),
            Grid::Lattice { xs, ys } => xs.len() * ys.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Option<&[f64]> {
        match self {
            Grid::Line(p) => Some(p),
            Grid::Lattice { .. } => None,
        }
    }

    /// Every evaluation point as a position of the grid's dimension.
    pub fn positions(&self) -> Vec<Position> {
        match self {
            Grid::Line(p) => p.iter().map(|&z| Position::d1(z)).collect(),
            Grid::Lattice { xs, ys } => xs.iter().flat_map(|&a| ys.iter().map(move |&b| Position::d2(a, b))).collect(),
        }
    }
}

/// Grid values of a distribution, with per-point standard errors when the
/// values were estimated by sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionTable<V = f64> {
    pub grid: Grid,
    pub values: Vec<V>,
    pub stderr: Option<Vec<f64>>,
}

impl<V: Copy> DistributionTable<V> {
    pub fn new(grid: Grid, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("values", format!("{} values for {} grid points", values.len(), grid.len())));
        }
        Ok(DistributionTable { grid, values, stderr: None })
    }

    pub fn sampled(grid: Grid, values: Vec<V>, stderr: Vec<f64>) -> Result<Self> {
        let mut t = Self::new(grid, values)?;
        if stderr.len() != t.values.len() || stderr.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("stderr", "one nonnegative value per grid point"));
        }
        t.stderr = Some(stderr);
        Ok(t)
    }

    pub fn points(&self) -> &[f64] {
        self.grid.points().unwrap_or(&[])
    }

    pub fn map<W: Copy>(&self, f: impl Fn(V) -> W) -> DistributionTable<W> {
        DistributionTable {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            stderr: self.stderr.clone(),
        }
    }
}

impl DistributionTable<f64> {
    /// Trapezoidal `∫ f(v) w(v) dv` over a line grid.
    pub fn integrate_weighted(&self, w: impl Fn(f64) -> f64) -> f64 {
        let p = self.points();
        p.windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] * w(g[0]) + v[1] * w(g[1])))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate_weighted(|_| 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.integrate_weighted(|v| v) / self.total_mass()
    }

    pub fn central_moment(&self, k: i32) -> f64 {
        let m = self.mean();
        self.integrate_weighted(|v| (v - m).powi(k)) / self.total_mass()
    }
}

/// A scalar Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorResult<V = f64> {
    pub value: V,
    pub stderr: f64,
    pub n_samples: usize,
}
