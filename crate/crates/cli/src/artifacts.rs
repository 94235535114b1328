//! On-disk artifacts: pretty JSON reports and CSV tables.
//!
//! Floats are written with 17 significant digits so that reading a file back
//! reproduces every value bit for bit. `-inf` marks nodes off the support.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use wavelab_core::grid::{PeriodicGrid, ScalarField};
use wavelab_core::variational::{BoundaryReport, WaveSolution};

use crate::error::{CliError, CliResult};

pub const WAVE_JSON: &str = "wave.json";
pub const PROFILE_CSV: &str = "profile.csv";

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse_float(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values always serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// A CSV table with a header row and float columns.
pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> CliResult<()> {
    write_rows(
        path,
        header,
        rows.into_iter()
            .map(|row| row.into_iter().map(format_float).collect()),
    )
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> CliResult<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let _ = writeln!(text, "{}", row.join(","));
    }
    write_text(path, &text)
}

pub fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |message: String| CliError::Artifact {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|cell| {
                parse_float(cell).ok_or_else(|| bad(format!("row {}: bad number {cell:?}", k + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(bad(format!(
                "row {} has {} columns, header has {}",
                k + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn coordinate_header(grid: &PeriodicGrid, value: &'static str) -> Vec<&'static str> {
    if grid.dimension() == 1 {
        vec!["index", "y1", value]
    } else {
        vec!["index", "y1", "y2", value]
    }
}

/// One row per node: flat index, coordinates, value.
pub fn write_field(path: &Path, field: &ScalarField<f64>, column: &'static str) -> CliResult<()> {
    let grid = *field.grid();
    let rows = (0..grid.node_count()).map(|i| {
        let y = grid.coords::<f64>(i);
        let mut row = vec![i.to_string(), format_float(y[0])];
        if grid.dimension() == 2 {
            row.push(format_float(y[1]));
        }
        row.push(format_float(field.get(i)));
        row
    });
    write_rows(path, &coordinate_header(&grid, column), rows)
}

pub fn read_field(path: &Path, grid: PeriodicGrid) -> CliResult<ScalarField<f64>> {
    let (header, rows) = read_table(path)?;
    let bad = |message: String| CliError::Artifact {
        path: path.to_path_buf(),
        message,
    };
    if header.len() != grid.dimension() + 2 {
        return Err(CliError::DimensionMismatch {
            what: path.display().to_string(),
            expected: grid.dimension() + 2,
            got: header.len(),
        });
    }
    if rows.len() != grid.node_count() {
        return Err(bad(format!(
            "{} rows for a grid of {} nodes",
            rows.len(),
            grid.node_count()
        )));
    }
    let mut values = vec![0.0; rows.len()];
    let mut off = vec![false; rows.len()];
    for (k, row) in rows.iter().enumerate() {
        if row[0] != k as f64 {
            return Err(bad(format!("row {} carries index {}", k + 1, row[0])));
        }
        let v = *row.last().unwrap();
        if v == f64::NEG_INFINITY {
            off[k] = true;
        } else {
            values[k] = v;
        }
    }
    Ok(ScalarField::with_sentinels(grid, values, off)?)
}

pub fn support_json(sol: &WaveSolution<f64>) -> Value {
    let grid = *sol.support.grid();
    let components = if grid.dimension() == 1 && !sol.support.is_full() {
        json!(sol.support.runs_1d())
    } else {
        Value::Null
    };
    json!({
        "nodes": sol.support.count(),
        "full": sol.support.is_full(),
        "measure": sol.support.measure::<f64>(),
        "perimeter": sol.support.perimeter::<f64>(),
        "components": components,
    })
}

pub fn boundary_json(report: &BoundaryReport<f64>) -> Value {
    match report {
        BoundaryReport::Vacuous => json!({ "vacuous": true }),
        BoundaryReport::Checked {
            max_distance,
            endpoints,
            zeros,
        } => json!({
            "vacuous": false,
            "max_distance": max_distance,
            "zeros": zeros,
            "endpoints": endpoints.iter().map(|e| json!({
                "node": e.node,
                "position": e.position,
                "nearest_zero": e.nearest_zero,
                "distance": e.distance,
            })).collect::<Vec<_>>(),
        }),
    }
}

/// Writes `wave.json` and `profile.csv` into `dir`.
pub fn save_wave(
    dir: &Path,
    sol: &WaveSolution<f64>,
    boundary: Option<&BoundaryReport<f64>>,
) -> CliResult<Value> {
    let grid = *sol.profile.grid();
    let header = json!({
        "speed": sol.speed,
        "dimension": grid.dimension(),
        "resolution": grid.resolution(),
        "threshold": sol.threshold,
        "profile_residual": sol.profile_residual,
        "perimeter_gap": sol.perimeter_gap,
        "support": support_json(sol),
        "boundary": boundary.map(boundary_json),
        "profile": PROFILE_CSV,
    });
    write_field(&dir.join(PROFILE_CSV), &sol.profile, "psi")?;
    write_json(&dir.join(WAVE_JSON), &header)?;
    Ok(header)
}

/// A wave read back from disk.
#[derive(Debug, Clone)]
pub struct StoredWave {
    pub header: Value,
    pub speed: f64,
    pub threshold: f64,
    pub profile: ScalarField<f64>,
}

pub fn load_wave(header_path: &Path) -> CliResult<StoredWave> {
    let header = read_json(header_path)?;
    let bad = |message: &str| CliError::Artifact {
        path: header_path.to_path_buf(),
        message: message.into(),
    };
    let number = |key: &str| {
        header[key]
            .as_f64()
            .ok_or_else(|| bad(&format!("missing number {key:?}")))
    };
    let count = |key: &str| {
        header[key]
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| bad(&format!("missing integer {key:?}")))
    };
    let grid = PeriodicGrid::new(count("dimension")?, count("resolution")?)?;
    let csv: PathBuf = header_path.parent().unwrap_or(Path::new(".")).join(
        header["profile"]
            .as_str()
            .ok_or_else(|| bad("missing \"profile\""))?,
    );
    Ok(StoredWave {
        speed: number("speed")?,
        threshold: number("threshold")?,
        profile: read_field(&csv, grid)?,
        header,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
            -0.0,
            f64::NEG_INFINITY,
        ] {
            let back = parse_float(&format_float(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert!(parse_float(&format_float(f64::NAN)).unwrap().is_nan());
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
    }
}
