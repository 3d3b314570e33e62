//! Matrix, mask, label and basis files, plus preprocessing for incomplete
//! data and feature trajectories.
//!
//! Matrices are stored `D` rows by `N` columns as comma-separated decimals
//! with an optional leading `#` comment line. Values are written in the
//! shortest form that parses back to the same number.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::data::{DataMatrix, SubspaceArrangement};
use crate::error::{Result, SscError};
use crate::rng::seeded;
use crate::scalar::Real;

fn parse_error(line: u64, column: usize, message: impl Into<String>) -> SscError {
    SscError::Parse { line: line as usize, column, message: message.into() }
}

/// Parses matrix text; rows are records and columns are fields.
pub fn parse_matrix<T: Real>(text: &str) -> Result<DMatrix<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<T>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(parse_error(
                    line,
                    record.len().min(first.len()) + 1,
                    format!("expected {} fields, found {}", first.len(), record.len()),
                ));
            }
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(k, field)| {
                field
                    .parse::<T>()
                    .map_err(|_| parse_error(line, k + 1, format!("not a number: {field:?}")))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

pub fn format_matrix<T: Real>(m: &DMatrix<T>, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    for r in 0..m.nrows() {
        let line: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix<T: Real>(path: impl AsRef<Path>) -> Result<DataMatrix<T>> {
    Ok(DataMatrix::new(parse_matrix(&fs::read_to_string(path)?)?))
}

pub fn write_matrix<T: Real>(m: &DMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let header = format!("D={} N={}", m.nrows(), m.ncols());
    write_text(path, &format_matrix(m, Some(&header)))
}

fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn parse_index(token: &str, line: usize, column: usize) -> Result<usize> {
    match token.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v - 1),
        _ => Err(SscError::Parse { line, column, message: format!("expected a 1-based index, found {token:?}") }),
    }
}

/// One line per point listing its known rows, 1-based and space-separated.
pub fn parse_masks(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .map(|(n, l)| {
            l.split_whitespace()
                .enumerate()
                .map(|(k, tok)| parse_index(tok, n + 1, k + 1))
                .collect()
        })
        .collect()
}

pub fn format_masks(masks: &[Vec<usize>]) -> String {
    masks
        .iter()
        .map(|m| m.iter().map(|r| (r + 1).to_string()).collect::<Vec<_>>().join(" ") + "\n")
        .collect()
}

pub fn read_masks(path: impl AsRef<Path>) -> Result<Vec<Vec<usize>>> {
    parse_masks(&fs::read_to_string(path)?)
}

pub fn write_masks(masks: &[Vec<usize>], path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &format_masks(masks))
}

/// One 1-based label per line; returned 0-based.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(n, l)| parse_index(l.trim(), n + 1, 1))
        .collect()
}

pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{}\n", l + 1)).collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_labels(&fs::read_to_string(path)?)
}

pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &format_labels(labels))
}

/// Bases stacked side by side, with a `# dims=d1,d2,...` header.
pub fn format_bases<T: Real>(arr: &SubspaceArrangement<T>) -> String {
    let dims: Vec<String> = arr.dims().iter().map(|d| d.to_string()).collect();
    let total: usize = arr.dims().iter().sum();
    let mut stacked = DMatrix::<T>::zeros(arr.ambient_dim(), total);
    let mut at = 0;
    for b in arr.bases() {
        stacked.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    format_matrix(&stacked, Some(&format!("dims={}", dims.join(","))))
}

pub fn parse_bases<T: Real>(text: &str) -> Result<Vec<DMatrix<T>>> {
    let header = text
        .lines()
        .next()
        .and_then(|l| l.trim().strip_prefix('#'))
        .and_then(|l| l.trim().strip_prefix("dims="))
        .ok_or_else(|| parse_error(1, 1, "missing '# dims=' header"))?;
    let dims = header
        .split(',')
        .enumerate()
        .map(|(k, tok)| tok.trim().parse::<usize>().map_err(|_| parse_error(1, k + 1, format!("bad dimension {tok:?}"))))
        .collect::<Result<Vec<usize>>>()?;
    let stacked = parse_matrix::<T>(text)?;
    let total: usize = dims.iter().sum();
    if total != stacked.ncols() {
        return Err(SscError::ShapeMismatch(format!(
            "header lists {total} basis columns, file has {}",
            stacked.ncols()
        )));
    }
    let mut at = 0;
    Ok(dims
        .iter()
        .map(|&d| {
            let b = stacked.columns(at, d).into_owned();
            at += d;
            b
        })
        .collect())
}

pub fn read_bases<T: Real>(path: impl AsRef<Path>) -> Result<Vec<DMatrix<T>>> {
    parse_bases(&fs::read_to_string(path)?)
}

pub fn write_bases<T: Real>(arr: &SubspaceArrangement<T>, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &format_bases(arr))
}

/// Keeps the rows known for every point; the second value lists them.
pub fn project_common_rows<T: Real>(data: &DataMatrix<T>) -> Result<(DataMatrix<T>, Vec<usize>)> {
    let y = data.values();
    let common: Vec<usize> = match data.masks() {
        None => (0..y.nrows()).collect(),
        Some(masks) => {
            let mut known = vec![0usize; y.nrows()];
            for m in masks {
                for &r in m {
                    known[r] += 1;
                }
            }
            (0..y.nrows()).filter(|&r| known[r] == masks.len()).collect()
        }
    };
    if common.is_empty() {
        return Err(SscError::EmptyCommonSupport);
    }
    let out = DMatrix::from_fn(common.len(), y.ncols(), |r, c| y[(common[r], c)]);
    Ok((DataMatrix::new(out), common))
}

/// Default fill magnitude: the largest known entry in absolute value.
pub fn max_known_magnitude<T: Real>(data: &DataMatrix<T>) -> T {
    let y = data.values();
    match data.masks() {
        None => y.amax(),
        Some(masks) => masks
            .iter()
            .enumerate()
            .flat_map(|(j, m)| m.iter().map(move |&r| (r, j)))
            .fold(T::zero(), |acc, (r, j)| acc.max(y[(r, j)].abs())),
    }
}

/// Replaces unknown entries with uniform draws in `[-magnitude, magnitude]`,
/// turning missing entries into sparse outlying ones.
pub fn fill_missing_random<T: Real>(data: &DataMatrix<T>, magnitude: Option<T>, seed: u64) -> DataMatrix<T> {
    let Some(masks) = data.masks() else {
        return data.clone();
    };
    let m = magnitude.unwrap_or_else(|| max_known_magnitude(data)).as_f64();
    let mut y = data.values().clone();
    let mut rng = seeded(seed);
    for (j, known) in masks.iter().enumerate() {
        let mut is_known = vec![false; y.nrows()];
        for &r in known {
            is_known[r] = true;
        }
        for (r, k) in is_known.iter().enumerate() {
            if !k {
                y[(r, j)] = if m > 0.0 { T::lit(rng.random_range(-m..=m)) } else { T::zero() };
            }
        }
    }
    DataMatrix::new(y)
}

/// Projects columns onto the top-`k` left singular vectors, optionally after
/// subtracting the column mean. The result is `k x N` in those coordinates.
pub fn pca_project<T: Real>(data: &DataMatrix<T>, k: usize, center: bool) -> Result<DataMatrix<T>> {
    let y = data.values();
    let (dim, n) = y.shape();
    if k == 0 || k > dim.min(n) {
        return Err(SscError::InvalidConfig(format!("projection dimension {k} must lie in 1..={}", dim.min(n))));
    }
    let mut work = y.clone();
    if center {
        let mean = y.column_mean();
        for mut c in work.column_iter_mut() {
            c -= &mean;
        }
    }
    let svd = work.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite"));
    let top = DMatrix::from_fn(dim, k, |r, c| u[(r, order[c])]);
    Ok(DataMatrix::new(top.transpose() * work))
}

/// Stacks per-frame image coordinates, `frames[f][i] = (x, y)` of point `i`
/// in frame `f`, into `2F`-dimensional trajectory columns.
pub fn stack_trajectories<T: Real>(frames: &[Vec<[T; 2]>]) -> Result<DataMatrix<T>> {
    let Some(first) = frames.first() else {
        return Err(SscError::ShapeMismatch("no frames".into()));
    };
    let n = first.len();
    if n == 0 {
        return Err(SscError::ShapeMismatch("frames contain no points".into()));
    }
    if let Some((f, frame)) = frames.iter().enumerate().find(|(_, fr)| fr.len() != n) {
        return Err(SscError::ShapeMismatch(format!("frame {f} has {} points, expected {n}", frame.len())));
    }
    let y = DMatrix::from_fn(2 * frames.len(), n, |r, i| frames[r / 2][i][r % 2]);
    Ok(DataMatrix::new(y))
}
