//! CSV ingestion/emission and JSON serialization of fitted artifacts.
//!
//! CSV layouts: Gaussian curves `replicate,t1[,t2],value`; point patterns
//! `t1[,t2]`; scalar samples `value`. All parse errors carry 1-based line
//! numbers.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dissimilarity::{BmdSolution, PosteriorBmd};
use crate::inference::{CoefficientPosterior, GaussianObservations, InferenceError, PointPattern};

#[derive(Error, Debug)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("unexpected header {got:?}; expected {expected}")]
    BadHeader { expected: &'static str, got: String },
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("line {line}: replicate {replicate:?} does not follow the site grid of the first replicate")]
    InconsistentGrid { line: usize, replicate: String },
    #[error("no data rows")]
    Empty,
}

fn bad_row(line: usize, message: impl Into<String>) -> IoError {
    IoError::BadRow {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize, name: &str) -> Result<f64, IoError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| bad_row(line, format!("cannot parse {name} from {field:?}")))
}

/// Header layout for the coordinate columns: 1 or 2 of them.
fn coord_columns(headers: &csv::StringRecord, offset: usize) -> Result<usize, IoError> {
    let names: Vec<&str> = headers.iter().skip(offset).collect();
    match names.as_slice() {
        ["t1", "value"] | ["t1"] => Ok(1),
        ["t1", "t2", "value"] | ["t1", "t2"] => Ok(2),
        _ => Err(IoError::BadHeader {
            expected: "t1[,t2][,value]",
            got: headers.iter().collect::<Vec<_>>().join(","),
        }),
    }
}

/// Reads replicated curve observations (`replicate,t1[,t2],value`).
///
/// Every replicate must visit the same site grid in the same order; the first
/// replicate defines it.
pub fn read_gaussian_csv<R: Read>(reader: R) -> Result<GaussianObservations, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("replicate") {
        return Err(IoError::BadHeader {
            expected: "replicate,t1[,t2],value",
            got: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let dim = coord_columns(&headers, 1)?;

    let mut order: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<(Vec<f64>, f64)>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| bad_row(line, e.to_string()))?;
        if record.len() != dim + 2 {
            return Err(bad_row(
                line,
                format!("expected {} fields, got {}", dim + 2, record.len()),
            ));
        }
        let replicate = record.get(0).unwrap_or("").to_string();
        let mut point = Vec::with_capacity(dim);
        for k in 0..dim {
            point.push(parse_f64(record.get(1 + k).unwrap(), line, "coordinate")?);
        }
        let value = parse_f64(record.get(1 + dim).unwrap(), line, "value")?;
        match order.iter().position(|r| *r == replicate) {
            Some(idx) => {
                if idx != order.len() - 1 {
                    return Err(bad_row(
                        line,
                        format!("rows of replicate {replicate:?} are not contiguous"),
                    ));
                }
                rows[idx].push((point, value));
            }
            None => {
                order.push(replicate);
                rows.push(vec![(point, value)]);
            }
        }
    }
    if rows.is_empty() {
        return Err(IoError::Empty);
    }

    let grid: Vec<Vec<f64>> = rows[0].iter().map(|(p, _)| p.clone()).collect();
    let mut values = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        let matches = row.len() == grid.len()
            && row.iter().zip(&grid).all(|((p, _), g)| p == g);
        if !matches {
            return Err(IoError::InconsistentGrid {
                line: 0,
                replicate: order[idx].clone(),
            });
        }
        values.push(row.iter().map(|(_, v)| *v).collect());
    }
    Ok(GaussianObservations::new(grid, values)?)
}

/// Writes the replicated-curve layout; replicates are numbered from 0.
pub fn write_gaussian_csv<W: Write>(
    out: &mut W,
    data: &GaussianObservations,
) -> Result<(), IoError> {
    let dim = data.points[0].len();
    if dim == 1 {
        writeln!(out, "replicate,t1,value")?;
    } else {
        writeln!(out, "replicate,t1,t2,value")?;
    }
    for (r, row) in data.values.iter().enumerate() {
        for (point, value) in data.points.iter().zip(row) {
            let coords: Vec<String> = point.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{r},{},{value}", coords.join(","))?;
        }
    }
    Ok(())
}

/// Reads a point pattern (`t1[,t2]`).
pub fn read_points_csv<R: Read>(reader: R) -> Result<PointPattern, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let dim = coord_columns(&headers, 0)?;
    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| bad_row(line, e.to_string()))?;
        if record.len() != dim {
            return Err(bad_row(
                line,
                format!("expected {dim} fields, got {}", record.len()),
            ));
        }
        let mut point = Vec::with_capacity(dim);
        for k in 0..dim {
            point.push(parse_f64(record.get(k).unwrap(), line, "coordinate")?);
        }
        points.push(point);
    }
    Ok(PointPattern::new(points))
}

pub fn write_points_csv<W: Write>(out: &mut W, pattern: &PointPattern) -> Result<(), IoError> {
    let dim = pattern.points.first().map_or(1, |p| p.len());
    if dim == 1 {
        writeln!(out, "t1")?;
    } else {
        writeln!(out, "t1,t2")?;
    }
    for p in &pattern.points {
        let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{}", coords.join(","))?;
    }
    Ok(())
}

/// Reads a single-column sample file (`value`), e.g. for empirical CDFs.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<f64>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 1 || headers.get(0) != Some("value") {
        return Err(IoError::BadHeader {
            expected: "value",
            got: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| bad_row(line, e.to_string()))?;
        samples.push(parse_f64(record.get(0).unwrap_or(""), line, "value")?);
    }
    if samples.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(samples)
}

pub fn write_samples_csv<W: Write>(out: &mut W, samples: &[f64]) -> Result<(), IoError> {
    writeln!(out, "value")?;
    for s in samples {
        writeln!(out, "{s}")?;
    }
    Ok(())
}

pub fn read_posterior_json(path: &Path) -> Result<CoefficientPosterior, IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_posterior_json(path: &Path, post: &CoefficientPosterior) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(post)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_solution_json(path: &Path, sol: &BmdSolution) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(sol)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-draw CSV of a posterior BMD: one row per draw with the center
/// coordinates, radius, and index.
pub fn write_posterior_draws_csv<W: Write>(
    out: &mut W,
    posterior: &PosteriorBmd,
) -> Result<(), IoError> {
    let dim = posterior.draws[0].center.len();
    let header: Vec<String> = (1..=dim)
        .map(|k| format!("center{k}"))
        .chain(["radius".to_string(), "index".to_string()])
        .collect();
    writeln!(out, "draw,{}", header.join(","))?;
    for (i, draw) in posterior.draws.iter().enumerate() {
        let coords: Vec<String> = draw.center.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{i},{},{},{}", coords.join(","), draw.radius, draw.index)?;
    }
    Ok(())
}
