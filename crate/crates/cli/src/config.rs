//! `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pathxform::{BoundaryData, GaugeKind, Grid, Position, PotentialSpec};

use crate::CliError;

const KEYS: &[&str] = &[
    "potential",
    "k",
    "omega",
    "field",
    "charge",
    "gauge",
    "gauge_base",
    "x",
    "y",
    "T",
    "z_min",
    "z_max",
    "z_points",
    "v_min",
    "v_max",
    "v_points",
    "paths",
    "steps",
    "seed",
    "n_max",
    "abs_tol",
    "rel_tol",
    "out",
    "method",
];

/// Raw `key → value` pairs, later keys overriding earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected `key = value`", i + 1)));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Config { key: key.to_string(), message: "unknown key".into() });
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn number<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| bad(key, format!("cannot parse `{s}`"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key)
            .map(|s| {
                s.split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|_| bad(key, format!("cannot parse `{s}`"))))
                    .collect()
            })
            .transpose()
    }
}

fn bad(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), message: message.into() }
}

/// A one-dimensional grid of evaluation points, or none to let the command
/// choose from the potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Grid {
        Grid::uniform(self.min, self.max, self.points).expect("validated")
    }
}

/// Fully validated settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub x: Position,
    pub y: Position,
    pub times: Vec<f64>,
    pub z_grid: GridSpec,
    pub v_grid: Option<GridSpec>,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub n_max: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub out: PathBuf,
    pub method: Option<String>,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let x = position(raw, "x")?;
        let y = position(raw, "y")?;
        if x.dim() != y.dim() {
            return Err(bad("y", "x and y must have the same dimension"));
        }
        let potential = match raw.get("potential").unwrap_or("free") {
            "free" => PotentialSpec::Free,
            "linear" => PotentialSpec::linear(raw.number("k", 0.5)?).map_err(|e| bad("k", e.to_string()))?,
            "harmonic" => {
                PotentialSpec::harmonic(raw.number("omega", 1.0)?).map_err(|e| bad("omega", e.to_string()))?
            }
            "magnetic" => {
                let gauge = match raw.get("gauge").unwrap_or("fock-schwinger") {
                    "fock-schwinger" => {
                        let base = match raw.list("gauge_base")? {
                            None if x.dim() == 2 => x.coords2(),
                            None => [0.0, 0.0],
                            Some(b) if b.len() == 2 => [b[0], b[1]],
                            Some(_) => return Err(bad("gauge_base", "expected two coordinates")),
                        };
                        GaugeKind::FockSchwinger { base }
                    }
                    "landau" => GaugeKind::Landau,
                    other => return Err(bad("gauge", format!("unknown gauge `{other}`"))),
                };
                PotentialSpec::magnetic(raw.number("field", 1.0)?, raw.number("charge", 1.0)?, gauge)
                    .map_err(|e| bad("field", e.to_string()))?
            }
            other => return Err(bad("potential", format!("unknown potential `{other}`"))),
        };
        let want = if matches!(potential, PotentialSpec::MagneticConstant { .. }) { 2 } else { 1 };
        if x.dim() != want {
            return Err(bad("x", format!("{} needs {want}-dimensional endpoints", potential.name())));
        }
        let times = raw.list("T")?.unwrap_or_else(|| vec![2.0]);
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(bad("T", "every time must be finite and > 0"));
        }
        let z_grid = grid(raw, "z", Some((-3.0, 3.0, 61)))?.expect("default");
        let v_grid = grid(raw, "v", None)?;
        let steps = raw.number("steps", 256usize)?;
        if steps < 2 {
            return Err(bad("steps", "must be >= 2"));
        }
        let abs_tol = raw.number("abs_tol", 1e-12)?;
        let rel_tol = raw.number("rel_tol", 1e-10)?;
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) {
            return Err(bad("abs_tol", "tolerances must be > 0"));
        }
        let n_max = raw.number("n_max", 30usize)?;
        if n_max > pathxform::specfun::HERMITE_MAX_ORDER {
            return Err(bad("n_max", format!("must be <= {}", pathxform::specfun::HERMITE_MAX_ORDER)));
        }
        Ok(RunConfig {
            potential,
            x,
            y,
            times,
            z_grid,
            v_grid,
            paths: raw.number("paths", 100_000usize)?,
            steps,
            seed: raw.number("seed", 1u64)?,
            n_max,
            abs_tol,
            rel_tol,
            out: PathBuf::from(raw.get("out").unwrap_or(".")),
            method: raw.get("method").map(str::to_string),
        })
    }

    pub fn boundary(&self, time: f64) -> BoundaryData {
        BoundaryData::new(self.x, self.y, time).expect("validated")
    }

    pub fn quadrature(&self) -> pathxform::specfun::QuadratureSpec {
        pathxform::specfun::QuadratureSpec::adaptive(self.abs_tol, self.rel_tol)
    }
}

fn position(raw: &RawConfig, key: &str) -> Result<Position, CliError> {
    let c = raw.list(key)?.unwrap_or_else(|| vec![0.0]);
    Position::from_slice(&c).map_err(|e| bad(key, e.to_string()))
}

fn grid(raw: &RawConfig, prefix: &str, default: Option<(f64, f64, usize)>) -> Result<Option<GridSpec>, CliError> {
    let (kmin, kmax, kn) = (format!("{prefix}_min"), format!("{prefix}_max"), format!("{prefix}_points"));
    let given = [&kmin, &kmax, &kn].iter().filter(|k| raw.get(k).is_some()).count();
    let (min, max, points) = match (given, default) {
        (0, None) => return Ok(None),
        (0, Some(d)) => d,
        (3, _) => (raw.number(&kmin, 0.0)?, raw.number(&kmax, 0.0)?, raw.number(&kn, 0usize)?),
        _ => return Err(bad(&kmin, format!("set all of {kmin}, {kmax}, {kn}"))),
    };
    if !(min < max) || !min.is_finite() || !max.is_finite() {
        return Err(bad(&kmax, format!("need finite {kmin} < {kmax}")));
    }
    if points < 2 {
        return Err(bad(&kn, "need at least two points"));
    }
    Ok(Some(GridSpec { min, max, points }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn parses_comments_and_lists() {
        let c = run("# oscillator\npotential = harmonic  # trailing\nomega = 2\nT = 10, 20\n\nx = 0.5\n").unwrap();
        assert_eq!(c.potential, PotentialSpec::Harmonic { omega: 2.0 });
        assert_eq!(c.times, vec![10.0, 20.0]);
        assert_eq!(c.x, Position::d1(0.5));
        assert_eq!(c.paths, 100_000);
    }

    #[test]
    fn magnetic_defaults_to_fock_schwinger_about_x() {
        let c = run("potential = magnetic\nx = 0.1, 0.2\ny = 0.3, 0.4\nfield = 2").unwrap();
        match c.potential {
            PotentialSpec::MagneticConstant { field, gauge: GaugeKind::FockSchwinger { base }, .. } => {
                assert_eq!(field, 2.0);
                assert_eq!(base, [0.1, 0.2]);
            }
            other => panic!("{other:?}"),
        }
        assert!(run("potential = magnetic").is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let key = |text: &str| match run(text) {
            Err(CliError::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(key("T = -1"), "T");
        assert_eq!(key("T = 0"), "T");
        assert_eq!(key("colour = red"), "colour");
        assert_eq!(key("potential = cubic"), "potential");
        assert_eq!(key("potential = harmonic\nomega = 0"), "omega");
        assert_eq!(key("steps = 1"), "steps");
        assert_eq!(key("z_min = 1"), "z_min");
        assert_eq!(key("x = 0\ny = 1, 2"), "y");
        assert!(matches!(run("just words"), Err(CliError::Usage(_))));
    }
}
