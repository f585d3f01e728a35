//! File formats: dense matrix CSV (comma-separated, no header) and the
//! plain-text edge list for graphs.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Read a dense matrix: one row per line, comma-separated values,
/// no header. Blank lines are ignored.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "{}:{}: '{}' is not a number",
                        path.display(),
                        lineno + 1,
                        tok.trim()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "{}:{}: row has {} values, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: empty matrix", path.display())));
    }
    let ncols = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let nrows = flat.len() / ncols;
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Read a vector: a single-column (or single-row) matrix CSV.
pub fn read_vector_csv(path: &Path) -> Result<Array1<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).to_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).to_owned())
    } else {
        Err(Error::Parse(format!(
            "{}: expected a vector, found a {}x{} matrix",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_matrix_csv(path: &Path, m: &ArrayView2<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_vector_csv(path: &Path, v: &ArrayView1<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for x in v.iter() {
        writeln!(out, "{x}")?;
    }
    Ok(())
}

/// Read an edge list: one `i j` pair per line, 0-based, whitespace
/// separated, `#` starts a comment. The vertex count is the largest
/// endpoint plus one unless a `# p = N` comment declares it explicitly
/// (needed for trailing isolated vertices).
pub fn read_edge_list(path: &Path) -> Result<Graph> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut edges = Vec::new();
    let mut declared_p: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        if let Some(comment) = line.split_once('#').map(|(_, c)| c) {
            let squeezed: String = comment.chars().filter(|c| !c.is_whitespace()).collect();
            if let Some(rest) = squeezed.strip_prefix("p=") {
                declared_p = rest.parse::<usize>().ok().or(declared_p);
            }
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(Error::Parse(format!(
                "{}:{}: expected 'i j', found '{}'",
                path.display(),
                lineno + 1,
                content.trim()
            )));
        }
        let parse = |tok: &str| {
            tok.parse::<usize>().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: '{}' is not a vertex index",
                    path.display(),
                    lineno + 1,
                    tok
                ))
            })
        };
        edges.push((parse(tokens[0])?, parse(tokens[1])?));
    }
    let max_endpoint = edges.iter().map(|&(i, j)| i.max(j)).max();
    let p = match (declared_p, max_endpoint) {
        (Some(p), _) => p,
        (None, Some(m)) => m + 1,
        (None, None) => {
            return Err(Error::Parse(format!(
                "{}: no edges and no '# p = N' declaration",
                path.display()
            )))
        }
    };
    Graph::from_edges(p, edges)
}

/// Write the edge list with a `# p = N` header so isolated vertices and
/// the exact vertex count round-trip.
pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# p = {}", g.p())?;
    for &(i, j) in g.edges() {
        writeln!(out, "{i} {j}")?;
    }
    Ok(())
}
