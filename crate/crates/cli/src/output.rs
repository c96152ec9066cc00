//! CSV tables and gnuplot scripts.

use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}

impl From<Option<f64>> for Field {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Field::Empty, Field::Num)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn render(f: &Field) -> String {
    match f {
        Field::Num(v) => format_number(*v),
        Field::Text(s) => s.clone(),
        Field::Empty => String::new(),
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Field>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(render)).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// One curve or point set in a plot, drawn from columns of the CSV.
pub struct Series<'a> {
    pub columns: &'a str,
    pub style: &'a str,
    pub title: &'a str,
}

pub fn write_gnuplot(
    path: &Path,
    csv_name: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series<'_>],
) -> Result<(), CliError> {
    let png = Path::new(csv_name).with_extension("png");
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 800,560\n");
    s.push_str(&format!("set output '{}'\n", png.display()));
    s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    let parts: Vec<String> = series
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let file = if i == 0 { format!("'{csv_name}'") } else { "''".to_string() };
            format!("{file} using {} with {} title '{}'", c.columns, c.style, c.title)
        })
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    std::fs::write(path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn out_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// A file-name fragment for a time value: `2` → `2`, `0.5` → `0p5`.
pub fn time_tag(t: f64) -> String {
    format!("{t}").replace('.', "p").replace('-', "m")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn tags() {
        assert_eq!(time_tag(2.0), "2");
        assert_eq!(time_tag(0.25), "0p25");
    }
}
