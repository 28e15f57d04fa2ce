//! Plain-text dataset format.
//!
//! Edges file: one `u<TAB>v` pair per line with 0-based ids. Lines starting
//! with `#` and blank lines are skipped.
//!
//! Nodes file: a header `id<TAB>label<TAB>f0,f1,...,f{d-1}` followed by one
//! row per node, `id<TAB>label<TAB>x0,x1,...`. The label is a class index or
//! `-` for an unlabeled node. The header's label column may be written
//! `label:<c>` to declare the class count; otherwise it is one more than the
//! largest label seen.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Dataset, FeatureMatrix, Graph, LabelStore};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub fn load_graph(edge_path: &Path, node_path: &Path) -> Result<Dataset> {
    let (features, labels) = read_nodes(node_path)?;
    let n = labels.num_nodes();
    if n == 0 {
        return Err(Error::Structure(format!(
            "{} declares no nodes",
            node_path.display()
        )));
    }
    let edges = read_edges(edge_path, n)?;
    let graph = Graph::from_edges(n, edges)?;
    Ok(Dataset {
        graph,
        features,
        labels,
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        msg: msg.into(),
    }
}

fn read_edges(path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, lineno, "expected `u<TAB>v`"));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| parse_err(path, lineno, format!("bad node id {s:?}: {e}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= num_nodes || v >= num_nodes {
            return Err(Error::Structure(format!(
                "{}:{lineno}: edge ({u}, {v}) references a node outside 0..{num_nodes}",
                path.display()
            )));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_nodes(path: &Path) -> Result<(FeatureMatrix, LabelStore)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            l.as_ref()
                .map(|s| !s.trim().is_empty() && !s.starts_with('#'))
                .unwrap_or(true)
        });

    let Some((hline, header)) = lines.next() else {
        return Err(parse_err(path, 1, "missing header"));
    };
    let header = header?;
    let cols: Vec<&str> = header.trim_end().split('\t').collect();
    if cols.len() != 3 || cols[0] != "id" || !cols[1].starts_with("label") {
        return Err(parse_err(
            path,
            hline,
            "header must read `id<TAB>label<TAB>f0,f1,...`",
        ));
    }
    let declared_classes = match cols[1].strip_prefix("label") {
        Some("") => None,
        Some(rest) => match rest.strip_prefix(':').map(str::parse::<usize>) {
            Some(Ok(c)) => Some(c),
            _ => {
                return Err(parse_err(
                    path,
                    hline,
                    "label column must be `label` or `label:<c>`",
                ))
            }
        },
        None => unreachable!(),
    };
    let dim = if cols[2].is_empty() {
        0
    } else {
        cols[2].split(',').count()
    };

    let mut rows: Vec<(usize, Option<usize>, Vec<f64>)> = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let mut parts = line.trim_end().split('\t');
        let (Some(id), Some(label), feats) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(
                path,
                lineno,
                "expected `id<TAB>label<TAB>features`",
            ));
        };
        if parts.next().is_some() {
            return Err(parse_err(path, lineno, "too many columns"));
        }
        let id = id
            .parse::<usize>()
            .map_err(|e| parse_err(path, lineno, format!("bad id {id:?}: {e}")))?;
        let label = match label {
            "-" => None,
            s => Some(
                s.parse::<usize>()
                    .map_err(|e| parse_err(path, lineno, format!("bad label {s:?}: {e}")))?,
            ),
        };
        if let (Some(y), Some(c)) = (label, declared_classes) {
            if y >= c {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("label {y} conflicts with the declared {c} classes"),
                ));
            }
        }
        let feats = feats.unwrap_or("");
        let values: Vec<f64> = if feats.is_empty() {
            Vec::new()
        } else {
            feats
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(path, lineno, format!("bad feature {s:?}: {e}")))
                })
                .collect::<Result<_>>()?
        };
        if values.len() != dim {
            return Err(parse_err(
                path,
                lineno,
                format!("row has {} features, header declares {dim}", values.len()),
            ));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(path, lineno, "non-finite feature value"));
        }
        rows.push((id, label, values));
    }

    let n = rows.len();
    let mut seen = vec![false; n];
    let mut clean = vec![None; n];
    let mut data = vec![0.0; n * dim];
    for (id, label, values) in rows {
        if id >= n {
            return Err(Error::Structure(format!(
                "{}: node id {id} outside 0..{n}",
                path.display()
            )));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::Structure(format!(
                "{}: node id {id} appears twice",
                path.display()
            )));
        }
        clean[id] = label;
        data[id * dim..(id + 1) * dim].copy_from_slice(&values);
    }
    let num_classes =
        declared_classes.unwrap_or_else(|| clean.iter().flatten().max().map_or(0, |&m| m + 1));

    let values = Matrix::from_vec(n, dim, data)?;
    let (lo, hi) = values
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    // Declared range of raw features is their observed span; normalization
    // maps them onto [0, 1] before any mechanism sees them.
    let (alpha, beta) = if lo < hi {
        (lo, hi)
    } else {
        (lo.min(0.0), lo.max(0.0) + 1.0)
    };
    let features = FeatureMatrix::new(values, alpha, beta)?;
    let labels = LabelStore::new(num_classes, clean)?;
    Ok((features, labels))
}

pub fn write_edges(graph: &Graph, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (u, v) in graph.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_nodes(features: &FeatureMatrix, labels: &LabelStore, path: &Path) -> Result<()> {
    if features.num_nodes() != labels.num_nodes() {
        return Err(Error::Shape(format!(
            "{} feature rows vs {} labels",
            features.num_nodes(),
            labels.num_nodes()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let names: Vec<String> = (0..features.dim()).map(|i| format!("f{i}")).collect();
    writeln!(w, "id\tlabel:{}\t{}", labels.num_classes(), names.join(","))?;
    let mut buf = String::new();
    for (v, y) in labels.clean().iter().enumerate() {
        buf.clear();
        for (j, x) in features.values.row(v).iter().enumerate() {
            if j > 0 {
                buf.push(',');
            }
            buf.push_str(&x.to_string());
        }
        match y {
            Some(y) => writeln!(w, "{v}\t{y}\t{buf}")?,
            None => writeln!(w, "{v}\t-\t{buf}")?,
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn small_dataset_loads() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "# comment\n0\t1\n1\t0\n2\t2\n1\t2\n");
        let n = write(
            dir.path(),
            "n.tsv",
            "id\tlabel\tf0,f1\n0\t1\t0.5,1\n1\t-\t0,0\n2\t0\t1,0.25\n",
        );
        let ds = load_graph(&e, &n).unwrap();
        assert_eq!(ds.graph.num_nodes(), 3);
        assert_eq!(ds.graph.num_edges(), 2);
        assert_eq!(ds.features.dim(), 2);
        assert_eq!(ds.labels.num_classes(), 2);
        assert_eq!(ds.labels.clean(), &[Some(1), None, Some(0)]);
        ds.graph.validate().unwrap();
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "0\t1\nzero\t1\n");
        let n = write(dir.path(), "n.tsv", "id\tlabel\tf0\n0\t0\t1\n1\t0\t0\n");
        match load_graph(&e, &n) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn edge_out_of_range_is_structural() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "0\t7\n");
        let n = write(dir.path(), "n.tsv", "id\tlabel\tf0\n0\t0\t1\n1\t0\t0\n");
        assert!(matches!(load_graph(&e, &n), Err(Error::Structure(_))));
    }

    #[test]
    fn empty_node_file_is_structural() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "");
        let n = write(dir.path(), "n.tsv", "id\tlabel\tf0\n");
        assert!(matches!(load_graph(&e, &n), Err(Error::Structure(_))));
    }

    #[test]
    fn conflicting_dimension_or_class_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "0\t1\n");
        let n = write(
            dir.path(),
            "n.tsv",
            "id\tlabel\tf0,f1\n0\t0\t1,0\n1\t0\t0\n",
        );
        assert!(matches!(
            load_graph(&e, &n),
            Err(Error::Parse { line: 3, .. })
        ));
        let n = write(dir.path(), "n2.tsv", "id\tlabel:2\tf0\n0\t0\t1\n1\t2\t0\n");
        assert!(matches!(
            load_graph(&e, &n),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn write_then_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = crate::graph::generate_sbm(&crate::graph::SbmParams {
            num_nodes: 40,
            num_classes: 3,
            dim: 5,
            p_in: 0.3,
            p_out: 0.05,
            feature_signal: 0.5,
            seed: 1,
        })
        .unwrap();
        let e = dir.path().join("e.tsv");
        let n = dir.path().join("n.tsv");
        write_edges(&ds.graph, &e).unwrap();
        write_nodes(&ds.features, &ds.labels, &n).unwrap();
        let back = load_graph(&e, &n).unwrap();
        assert_eq!(back.graph, ds.graph);
        assert_eq!(back.labels.clean(), ds.labels.clean());
        assert_eq!(back.features.values, ds.features.values);
    }
}
