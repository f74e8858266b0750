//! Plain-text graph formats.
//!
//! * edges: one `i<TAB>j` pair per line, 0-based ids
//! * features: CSV, one row per node, no header
//! * sensitive / labels: one `0` or `1` per line

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{Adjacency, Cleanup, Edge, Graph};

#[derive(Debug, Clone)]
pub struct GraphFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub sensitive: PathBuf,
    pub labels: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_binary_vector(path: &Path) -> Result<Vec<u8>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (line, l) in content_lines(&text) {
        let v: i64 = l
            .parse()
            .map_err(|_| parse_error(path, line, format!("expected an integer, got {l:?}")))?;
        if v != 0 && v != 1 {
            return Err(Error::Validation(format!(
                "{}:{line}: value {v} is not 0/1",
                path.display()
            )));
        }
        out.push(v as u8);
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(&text) {
        let row = l
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("bad number {cell:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_error(path, line, "non-finite feature value"));
        }
        rows.push(row);
    }
    let n = rows.len();
    let f = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, f), flat).map_err(|e| Error::Structure(e.to_string()))
}

pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (line, l) in content_lines(&text) {
        let mut parts = l.split_whitespace();
        let mut next = || -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| parse_error(path, line, "expected two node ids"))?;
            tok.parse()
                .map_err(|_| parse_error(path, line, format!("bad node id {tok:?}")))
        };
        let (i, j) = (next()?, next()?);
        if parts.next().is_some() {
            return Err(parse_error(path, line, "expected exactly two node ids"));
        }
        out.push((i, j));
    }
    Ok(out)
}

/// Loads a graph, symmetrizing the edge list. Self-loops and duplicate
/// edges are dropped and reported in the returned [`Cleanup`].
pub fn load_graph(files: &GraphFiles) -> Result<(Graph, Cleanup)> {
    let features = read_features(&files.features)?;
    let sensitive = read_binary_vector(&files.sensitive)?;
    let labels = files
        .labels
        .as_deref()
        .map(read_binary_vector)
        .transpose()?;
    let pairs = read_edges(&files.edges)?;
    let n = sensitive.len();
    let (adjacency, cleanup) = Adjacency::from_pairs(n, pairs)?;
    if cleanup.self_loops > 0 || cleanup.duplicates > 0 {
        log::warn!(
            "{}: dropped {} self-loops and {} duplicate edges",
            files.edges.display(),
            cleanup.self_loops,
            cleanup.duplicates
        );
    }
    Ok((Graph::new(adjacency, features, sensitive, labels)?, cleanup))
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_edges(path: &Path, edges: &[Edge]) -> Result<()> {
    let mut body = String::with_capacity(edges.len() * 12);
    for &(a, b) in edges {
        body.push_str(&format!("{a}\t{b}\n"));
    }
    write(path, &body)
}

/// Writes features with Rust's shortest round-trip float formatting.
pub fn write_features(path: &Path, x: &Array2<f64>) -> Result<()> {
    let mut body = String::new();
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        body.push_str(&cells.join(","));
        body.push('\n');
    }
    write(path, &body)
}

pub fn write_binary_vector(path: &Path, v: &[u8]) -> Result<()> {
    let body: String = v.iter().map(|x| format!("{x}\n")).collect();
    write(path, &body)
}

/// Writes `g` to `dir` as `edges.tsv`, `features.csv`, `sensitive.txt` and,
/// when present, `labels.txt`.
pub fn write_graph(dir: &Path, g: &Graph) -> Result<GraphFiles> {
    let files = GraphFiles {
        edges: dir.join("edges.tsv"),
        features: dir.join("features.csv"),
        sensitive: dir.join("sensitive.txt"),
        labels: g.labels().map(|_| dir.join("labels.txt")),
    };
    write_edges(&files.edges, g.edges())?;
    write_features(&files.features, g.features())?;
    write_binary_vector(&files.sensitive, g.sensitive())?;
    if let (Some(path), Some(y)) = (&files.labels, g.labels()) {
        write_binary_vector(path, y)?;
    }
    Ok(files)
}

pub(crate) fn write_text(path: &Path, body: &str) -> Result<()> {
    write(path, body)
}
