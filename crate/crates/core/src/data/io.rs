//! Plain-text dataset files.
//!
//! `nodes.csv` holds `node_id,label,f_0,...,f_{d-1}` with label `0`, `1`
//! or `?`; each relation has its own `edges_r{r}.csv` of `u,v` pairs. A
//! leading header line is allowed in every file. Floats are written in
//! shortest round-trip form, so saving and loading is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::{Label, MultiRelationGraph};

pub const NODE_FILE: &str = "nodes.csv";

pub fn edge_file_name(relation: usize) -> String {
    format!("edges_r{relation}.csv")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-empty data lines with their 1-based line numbers, skipping a
/// header whose first field is not a number.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .enumerate()
        .filter(|(k, (_, l))| {
            let first = l.split(',').next().unwrap_or("").trim();
            !(*k == 0 && first.parse::<usize>().is_err())
        })
        .map(|(_, x)| x)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{}`", field.trim())))
}

/// Reads a node file and per-relation edge files into a graph.
pub fn load_dataset(node_file: &Path, edge_files: &[PathBuf]) -> Result<MultiRelationGraph> {
    let text = read(node_file)?;
    let mut rows: Vec<(usize, usize, Label, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (line, content) in data_lines(&text) {
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() < 3 {
            return Err(parse_err(node_file, line, "expected node_id,label and at least one feature"));
        }
        let id: usize = parse_field(node_file, line, fields[0], "node id")?;
        let label = match fields[1].trim() {
            "0" => Label::Benign,
            "1" => Label::Fraud,
            "?" => Label::Unknown,
            other => return Err(parse_err(node_file, line, format!("invalid label `{other}`"))),
        };
        let feats = fields[2..]
            .iter()
            .map(|f| parse_field(node_file, line, f, "feature"))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(parse_err(
                    node_file,
                    line,
                    format!("ragged row: {} features, expected {w}", feats.len()),
                ))
            }
            _ => {}
        }
        rows.push((line, id, label, feats));
    }
    let n = rows.len();
    let d = width.ok_or_else(|| parse_err(node_file, 0, "no nodes"))?;

    let mut labels = vec![Label::Unknown; n];
    let mut x = Matrix::zeros((n, d));
    let mut present = vec![false; n];
    for (line, id, label, feats) in rows {
        if id >= n || present[id] {
            return Err(parse_err(
                node_file,
                line,
                format!("node ids must be dense and unique in 0..{n}; offending id {id}"),
            ));
        }
        present[id] = true;
        labels[id] = label;
        for (j, f) in feats.into_iter().enumerate() {
            x[[id, j]] = f;
        }
    }

    let mut edge_lists = Vec::with_capacity(edge_files.len());
    for path in edge_files {
        let text = read(path)?;
        let mut edges = Vec::new();
        for (line, content) in data_lines(&text) {
            let fields: Vec<&str> = content.split(',').collect();
            if fields.len() != 2 {
                return Err(parse_err(path, line, format!("expected `u,v`, got {} fields", fields.len())));
            }
            let u: usize = parse_field(path, line, fields[0], "node id")?;
            let v: usize = parse_field(path, line, fields[1], "node id")?;
            if u >= n || v >= n {
                return Err(parse_err(path, line, format!("edge ({u}, {v}) outside 0..{n}")));
            }
            edges.push((u, v));
        }
        edge_lists.push(edges);
    }
    MultiRelationGraph::new(n, x, labels, edge_lists)
}

/// Edge files `edges_r0.csv`, `edges_r1.csv`, ... present in `dir`.
pub fn edge_files_in(dir: &Path) -> Vec<PathBuf> {
    (0..)
        .map(|r| dir.join(edge_file_name(r)))
        .take_while(|p| p.is_file())
        .collect()
}

/// Loads `nodes.csv` and every `edges_r{r}.csv` from `dir`.
pub fn load_dir(dir: &Path) -> Result<MultiRelationGraph> {
    let edges = edge_files_in(dir);
    if edges.is_empty() {
        return Err(Error::NoRelations);
    }
    load_dataset(&dir.join(NODE_FILE), &edges)
}

/// Writes the graph into `dir` (created if missing) and returns the
/// paths written.
pub fn save_dataset(g: &MultiRelationGraph, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let mut text = String::from("node_id,label");
    for j in 0..g.feature_dim() {
        write!(text, ",f_{j}").expect("string write");
    }
    text.push('\n');
    for v in 0..g.num_nodes() {
        let label = match g.labels()[v] {
            Label::Benign => "0",
            Label::Fraud => "1",
            Label::Unknown => "?",
        };
        write!(text, "{v},{label}").expect("string write");
        for f in g.features().row(v) {
            write!(text, ",{f:?}").expect("string write");
        }
        text.push('\n');
    }
    let path = dir.join(NODE_FILE);
    write(&path, &text)?;
    written.push(path);

    for (r, rel) in g.relations().iter().enumerate() {
        let mut text = String::from("u,v\n");
        for &(u, v) in rel.edges() {
            writeln!(text, "{u},{v}").expect("string write");
        }
        let path = dir.join(edge_file_name(r));
        write(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
