//! Strict CSV readers and deterministic writers.
//!
//! All input files are UTF-8 with LF line endings and a mandatory header.
//! Identifiers are restricted to `[A-Za-z0-9_-]+`, which makes quoting
//! unnecessary; every parse error carries the file path and line number.
//! Writers format floats with the standard shortest round-trip `Display`
//! so that identical values always produce identical bytes.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use geodiv_core::cluster::AdjacencyGraph;
use geodiv_core::interpret::DemographicsAssignment;
use geodiv_core::model::TrafficMatrix;

use crate::error::{io_err, CliError, Result};

pub const TRAFFIC_HEADER: &str = "area_id,service_id,volume";
pub const ADJACENCY_HEADER: &str = "area_id_a,area_id_b";
pub const DEMOGRAPHICS_HEADER: &str = "area_id,level";

fn valid_id(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a whole file and splits it into (line number, line) pairs,
/// rejecting carriage returns and checking the header.
fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if text.contains('\r') {
        return Err(parse_err(
            path,
            1,
            "carriage return found; files must use LF line endings",
        ));
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == header => {}
        Some((_, first)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header {header:?}, found {first:?}"),
            ))
        }
        None => return Err(parse_err(path, 1, format!("empty file; expected header {header:?}"))),
    }
    Ok(lines
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn split_fields<'a>(
    path: &Path,
    line: usize,
    text: &'a str,
    expected: usize,
) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != expected {
        return Err(parse_err(
            path,
            line,
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    Ok(fields)
}

fn parse_id(path: &Path, line: usize, field: &str, what: &str) -> Result<String> {
    if !valid_id(field) {
        return Err(parse_err(
            path,
            line,
            format!("invalid {what} {field:?}; ids must match [A-Za-z0-9_-]+"),
        ));
    }
    Ok(field.to_string())
}

/// Loads a long-format traffic file into a matrix. Rows repeating an
/// (area, service) pair are summed; row and column order follow first
/// appearance in the file.
pub fn load_traffic(path: &Path) -> Result<TrafficMatrix> {
    let rows = read_rows(path, TRAFFIC_HEADER)?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    let mut triplets = Vec::with_capacity(rows.len());
    for (line, text) in &rows {
        let f = split_fields(path, *line, text, 3)?;
        let area = parse_id(path, *line, f[0], "area id")?;
        let service = parse_id(path, *line, f[1], "service id")?;
        let volume: f64 = f[2]
            .parse()
            .map_err(|_| parse_err(path, *line, format!("invalid volume {:?}", f[2])))?;
        if !volume.is_finite() {
            return Err(parse_err(path, *line, format!("non-finite volume {volume}")));
        }
        if volume < 0.0 {
            return Err(parse_err(path, *line, format!("negative volume {volume}")));
        }
        triplets.push((area, service, volume));
    }
    Ok(TrafficMatrix::from_triplets(triplets)?)
}

/// Loads an adjacency edge list over the given area order. Edges are
/// undirected; repeating a pair in either orientation is harmless,
/// self-loops and unknown ids are errors.
pub fn load_adjacency(path: &Path, area_ids: &[String]) -> Result<AdjacencyGraph> {
    let rows = read_rows(path, ADJACENCY_HEADER)?;
    let index: HashMap<&str, usize> = area_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for (line, text) in &rows {
        let f = split_fields(path, *line, text, 2)?;
        let a = parse_id(path, *line, f[0], "area id")?;
        let b = parse_id(path, *line, f[1], "area id")?;
        let ia = *index.get(a.as_str()).ok_or_else(|| CliError::UnknownArea {
            path: path.display().to_string(),
            id: a.clone(),
        })?;
        let ib = *index.get(b.as_str()).ok_or_else(|| CliError::UnknownArea {
            path: path.display().to_string(),
            id: b.clone(),
        })?;
        if ia == ib {
            return Err(parse_err(path, *line, format!("self-loop on area {a:?}")));
        }
        let key = (ia.min(ib), ia.max(ib));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    Ok(AdjacencyGraph::new(area_ids.len(), edges)?)
}

/// Raw demographics rows: (area id, 1-based level).
pub fn read_demographics(path: &Path) -> Result<Vec<(String, usize)>> {
    let rows = read_rows(path, DEMOGRAPHICS_HEADER)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, text) in &rows {
        let f = split_fields(path, *line, text, 2)?;
        let area = parse_id(path, *line, f[0], "area id")?;
        let level: usize = f[1]
            .parse()
            .map_err(|_| parse_err(path, *line, format!("invalid level {:?}", f[1])))?;
        if level == 0 {
            return Err(parse_err(path, *line, "levels are 1-based; found 0"));
        }
        if !seen.insert(area.clone()) {
            return Err(parse_err(path, *line, format!("duplicate area {area:?}")));
        }
        out.push((area, level));
    }
    Ok(out)
}

/// Aligns raw demographics rows with a target area order. Every row must
/// name an area from `known_ids` (the full traffic roster); areas outside
/// `target_ids` (dropped during modelling) are ignored. The number of
/// levels is the maximum level seen in the file.
pub fn align_demographics(
    path: &Path,
    rows: &[(String, usize)],
    known_ids: &[String],
    target_ids: &[String],
) -> Result<DemographicsAssignment> {
    let known: std::collections::HashSet<&str> = known_ids.iter().map(String::as_str).collect();
    let mut levels: HashMap<&str, usize> = HashMap::new();
    let mut max_level = 0usize;
    for (area, level) in rows {
        if !known.contains(area.as_str()) {
            return Err(CliError::UnknownArea {
                path: path.display().to_string(),
                id: area.clone(),
            });
        }
        levels.insert(area.as_str(), *level);
        max_level = max_level.max(*level);
    }
    if max_level < 2 {
        return Err(CliError::Config(format!(
            "{}: demographics need at least 2 levels, found {max_level}",
            path.display()
        )));
    }
    let labels: Vec<String> = (1..=max_level).map(|l| l.to_string()).collect();
    let by_area: Vec<Option<usize>> = target_ids
        .iter()
        .map(|id| levels.get(id.as_str()).map(|l| l - 1))
        .collect();
    Ok(DemographicsAssignment::new(labels, by_area)?)
}

/// Loads and aligns a demographics file in one step.
pub fn load_demographics(
    path: &Path,
    known_ids: &[String],
    target_ids: &[String],
) -> Result<DemographicsAssignment> {
    let rows = read_demographics(path)?;
    align_demographics(path, &rows, known_ids, target_ids)
}

/// A notion name for output files, derived from the file stem.
pub fn notion_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "demographics".to_string());
    let cleaned: String = stem
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() {
        "demographics".to_string()
    } else {
        cleaned
    }
}

/// Formats a float for CSV output: plain decimal in the comfortable range,
/// scientific notation outside it. Both forms round-trip through
/// `f64::from_str` and are deterministic for a given value.
pub fn fmt_f64(x: f64) -> String {
    // + 0.0 folds negative zero into plain zero.
    let x = x + 0.0;
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes a CSV file from a header and preformatted rows.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}
