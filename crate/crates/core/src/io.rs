//! Plain-text point sets and measures, and JSON reports.
//!
//! A set file is a header `grid <d> <N>` followed by one point per line as
//! integer grid indices (`x` or `x y`). A measure file has the header
//! `measure <d> <N>` and lines `x [y] mass`. Blank lines and lines starting
//! with `#` are ignored.

use crate::dyadic::{DyadicMeasure, GridSet};
use crate::error::{LabError, Result};
use crate::experiment::ExperimentReport;
use crate::morton;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

fn parse_err(line: usize, message: impl Into<String>) -> LabError {
    LabError::Parse {
        line,
        message: message.into(),
    }
}

/// Numbered lines with content, skipping blanks and comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header(kind: &str, line: Option<(usize, &str)>) -> Result<(usize, u32)> {
    let (no, text) = line.ok_or_else(|| parse_err(1, format!("missing `{kind} <d> <N>` header")))?;
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != 3 || f[0] != kind {
        return Err(parse_err(no, format!("expected `{kind} <d> <N>`, found `{text}`")));
    }
    let dim: usize = f[1].parse().map_err(|_| parse_err(no, format!("bad dimension `{}`", f[1])))?;
    if dim != 1 && dim != 2 {
        return Err(parse_err(no, format!("dimension {dim} is not 1 or 2")));
    }
    let scale: u32 = f[2].parse().map_err(|_| parse_err(no, format!("bad scale `{}`", f[2])))?;
    if scale > crate::dyadic::max_depth(dim) {
        return Err(parse_err(no, format!("scale {scale} exceeds {}", crate::dyadic::max_depth(dim))));
    }
    Ok((dim, scale))
}

fn parse_point(no: usize, fields: &[&str], dim: usize, scale: u32) -> Result<[u64; 2]> {
    let side = 1u64 << scale;
    let mut p = [0u64; 2];
    for (i, f) in fields.iter().enumerate() {
        let v: u64 = f.parse().map_err(|_| parse_err(no, format!("bad coordinate `{f}`")))?;
        if v >= side {
            return Err(parse_err(no, format!("coordinate {v} outside [0, {side})")));
        }
        p[i] = v;
    }
    debug_assert_eq!(fields.len(), dim);
    Ok(p)
}

pub fn parse_grid_set(text: &str) -> Result<GridSet> {
    let mut lines = content_lines(text);
    let (dim, scale) = parse_header("grid", lines.next())?;
    let mut seen = HashMap::new();
    let mut points = Vec::new();
    for (no, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != dim {
            return Err(parse_err(no, format!("expected {dim} coordinates, found {}", f.len())));
        }
        let p = parse_point(no, &f, dim, scale)?;
        if let Some(first) = seen.insert(p, no) {
            return Err(parse_err(no, format!("duplicate point, first on line {first}")));
        }
        points.push(p);
    }
    GridSet::new(dim, scale, points)
}

pub fn format_grid_set(set: &GridSet) -> String {
    let mut out = format!("grid {} {}\n", set.dim(), set.scale());
    for p in set.points() {
        match set.dim() {
            1 => writeln!(out, "{}", p[0]),
            _ => writeln!(out, "{} {}", p[0], p[1]),
        }
        .expect("write to string");
    }
    out
}

/// Masses are normalized to total 1.
pub fn parse_measure(text: &str) -> Result<DyadicMeasure> {
    let mut lines = content_lines(text);
    let (dim, depth) = parse_header("measure", lines.next())?;
    let mut seen = HashMap::new();
    let mut cells = Vec::new();
    for (no, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != dim + 1 {
            return Err(parse_err(no, format!("expected {dim} coordinates and a mass, found {} fields", f.len())));
        }
        let p = parse_point(no, &f[..dim], dim, depth)?;
        let mass: f64 = f[dim]
            .parse()
            .map_err(|_| parse_err(no, format!("bad mass `{}`", f[dim])))?;
        if !mass.is_finite() || mass < 0.0 {
            return Err(parse_err(no, format!("mass {mass} is not a nonnegative number")));
        }
        if let Some(first) = seen.insert(p, no) {
            return Err(parse_err(no, format!("duplicate cell, first on line {first}")));
        }
        cells.push((morton::encode(dim, p), mass));
    }
    DyadicMeasure::from_weights(dim, depth, cells)
}

/// Masses use the shortest representation that parses back to the same `f64`.
pub fn format_measure(mu: &DyadicMeasure) -> String {
    let dim = mu.dim();
    let mut out = format!("measure {} {}\n", dim, mu.depth());
    for &(code, m) in mu.cells() {
        let p = morton::decode(dim, code);
        match dim {
            1 => writeln!(out, "{} {m}", p[0]),
            _ => writeln!(out, "{} {} {m}", p[0], p[1]),
        }
        .expect("write to string");
    }
    out
}

pub fn read_grid_set(path: &Path) -> Result<GridSet> {
    parse_grid_set(&std::fs::read_to_string(path)?)
}

pub fn write_grid_set(path: &Path, set: &GridSet) -> Result<()> {
    Ok(std::fs::write(path, format_grid_set(set))?)
}

pub fn read_measure(path: &Path) -> Result<DyadicMeasure> {
    parse_measure(&std::fs::read_to_string(path)?)
}

pub fn write_measure(path: &Path, mu: &DyadicMeasure) -> Result<()> {
    Ok(std::fs::write(path, format_measure(mu))?)
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    ExperimentReport::from_json(&std::fs::read_to_string(path)?)
}

pub fn write_report(path: &Path, report: &ExperimentReport) -> Result<()> {
    Ok(std::fs::write(path, report.to_json()? + "\n")?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_roundtrip() {
        let set = GridSet::new(2, 3, vec![[1, 2], [7, 0], [0, 0]]).unwrap();
        let text = format_grid_set(&set);
        assert_eq!(text, "grid 2 3\n0 0\n1 2\n7 0\n");
        assert_eq!(parse_grid_set(&text).unwrap(), set);
    }

    #[test]
    fn measure_text() {
        let mu = parse_measure("# comment\nmeasure 1 2\n3 0.75\n\n0 0.25\n").unwrap();
        assert_eq!(format_measure(&mu), "measure 1 2\n0 0.25\n3 0.75\n");
    }

    #[test]
    fn errors_carry_lines() {
        let line = |t: &str| match parse_grid_set(t) {
            Err(LabError::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line(""), 1);
        assert_eq!(line("grid 3 4\n"), 1);
        assert_eq!(line("grid 2 3\n1 1\n8 0\n"), 3);
        assert_eq!(line("grid 2 3\n1 1\n\n1 1\n"), 4);
        assert_eq!(line("grid 1 3\n1 1\n"), 2);
        assert!(matches!(
            parse_measure("measure 2 2\n0 0 x\n"),
            Err(LabError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_measure("measure 2 2\n0 0 -1\n"),
            Err(LabError::Parse { line: 2, .. })
        ));
    }
}
