//! On-disk dataset layout and loading.
//!
//! A dataset directory holds:
//!
//! * `meta.json`: `{"name": ..., "n": ..., "m": ..., "c": ..., "d": ...}`,
//!   counts optional but validated when present;
//! * `edges.txt`: one `i j` pair per line, `#` comments allowed;
//! * `features.csv`: `n` rows of `d` comma-separated doubles, no header;
//! * `labels.txt`: one class id per line;
//! * optionally `train.txt`, `val.txt`, `test.txt`: one node id per line.
//!
//! Node ids are dense `0..n`. Writing uses the shortest `f64` representation
//! that parses back to the same bits, so a save/load cycle is exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::train::Split;

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: Graph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub fixed_split: Option<Split>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<u64>,
}

impl DatasetBundle {
    /// Validates the cross-field invariants and assembles a bundle.
    pub fn new(
        name: String,
        graph: Graph,
        features: DenseMatrix,
        labels: Vec<usize>,
        class_count: usize,
        fixed_split: Option<Split>,
    ) -> Result<Self> {
        let n = graph.n();
        if features.rows() != n {
            return Err(Error::InvalidDataset(format!(
                "{n} nodes but {} feature rows",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{n} nodes but {} labels",
                labels.len()
            )));
        }
        if class_count == 0 {
            return Err(Error::InvalidDataset("class count is zero".into()));
        }
        let mut seen = vec![false; class_count];
        for (i, &l) in labels.iter().enumerate() {
            if l >= class_count {
                return Err(Error::InvalidDataset(format!(
                    "node {i} has label {l}, but class count is {class_count}"
                )));
            }
            seen[l] = true;
        }
        if let Some(empty) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidDataset(format!("class {empty} has no nodes")));
        }
        if let Some(split) = &fixed_split {
            split.validate(n)?;
        }
        Ok(DatasetBundle {
            name,
            graph,
            features,
            labels,
            class_count,
            fixed_split,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: MetaFile = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;

    let labels = read_index_file(&dir.join("labels.txt"))?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::InvalidDataset("labels.txt is empty".into()));
    }
    let features = read_features(&dir.join("features.csv"), n)?;
    let graph = Graph::from_edge_list_file(&dir.join("edges.txt"), n)?;

    let class_count = match meta.c {
        Some(c) => c as usize,
        None => labels.iter().copied().max().unwrap_or(0) + 1,
    };

    check_meta("n", meta.n, graph.n() as u64)?;
    check_meta("m", meta.m, graph.m() as u64)?;
    check_meta("d", meta.d, features.cols() as u64)?;

    let split_paths = ["train.txt", "val.txt", "test.txt"].map(|f| dir.join(f));
    let present: Vec<bool> = split_paths.iter().map(|p| p.exists()).collect();
    let fixed_split = if present.iter().all(|&p| p) {
        Some(Split {
            train: read_index_file(&split_paths[0])?,
            val: read_index_file(&split_paths[1])?,
            test: read_index_file(&split_paths[2])?,
        })
    } else if present.iter().any(|&p| p) {
        return Err(Error::InvalidDataset(
            "split files must be given all together: train.txt, val.txt, test.txt".into(),
        ));
    } else {
        None
    };

    DatasetBundle::new(meta.name, graph, features, labels, class_count, fixed_split)
}

pub fn save_dataset(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = MetaFile {
        name: bundle.name.clone(),
        n: Some(bundle.n() as u64),
        m: Some(bundle.graph.m() as u64),
        c: Some(bundle.class_count as u64),
        d: Some(bundle.feature_dim() as u64),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write_file(&dir.join("meta.json"), &(meta_json + "\n"))?;

    let mut edges = String::new();
    for (i, j) in bundle.graph.edges() {
        let _ = writeln!(edges, "{i} {j}");
    }
    write_file(&dir.join("edges.txt"), &edges)?;

    let mut feats = String::new();
    for i in 0..bundle.n() {
        let row = bundle.features.row(i);
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                feats.push(',');
            }
            let _ = write!(feats, "{v}");
        }
        feats.push('\n');
    }
    write_file(&dir.join("features.csv"), &feats)?;

    let mut labels = String::new();
    for l in &bundle.labels {
        let _ = writeln!(labels, "{l}");
    }
    write_file(&dir.join("labels.txt"), &labels)?;

    if let Some(split) = &bundle.fixed_split {
        for (file, ids) in [
            ("train.txt", &split.train),
            ("val.txt", &split.val),
            ("test.txt", &split.test),
        ] {
            let mut text = String::new();
            for id in ids {
                let _ = writeln!(text, "{id}");
            }
            write_file(&dir.join(file), &text)?;
        }
    }
    Ok(())
}

/// Restricts a bundle to its largest connected component, remapping node ids
/// to a dense `0..n'` while preserving their relative order. Ties between
/// equal-sized components go to the one containing the smallest node id.
pub fn largest_connected_component(bundle: &DatasetBundle) -> Result<DatasetBundle> {
    let labels = bundle.graph.connected_components();
    let count = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut sizes = vec![0usize; count];
    for &l in &labels {
        sizes[l] += 1;
    }
    // Component labels are ordered by smallest member, so max_by_key with a
    // reversed index tiebreak picks the wanted one.
    let (keep, _) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one component");

    let old_ids: Vec<usize> = (0..bundle.n()).filter(|&i| labels[i] == keep).collect();
    let mut new_id = vec![usize::MAX; bundle.n()];
    for (new, &old) in old_ids.iter().enumerate() {
        new_id[old] = new;
    }

    let edges: Vec<(usize, usize)> = bundle
        .graph
        .edges()
        .into_iter()
        .filter(|&(i, j)| labels[i] == keep && labels[j] == keep)
        .map(|(i, j)| (new_id[i], new_id[j]))
        .collect();
    let graph = Graph::from_edges(&edges, old_ids.len())?;

    let mut features = DenseMatrix::zeros(old_ids.len(), bundle.feature_dim());
    let mut node_labels = Vec::with_capacity(old_ids.len());
    for (new, &old) in old_ids.iter().enumerate() {
        features.row_mut(new).copy_from_slice(bundle.features.row(old));
        node_labels.push(bundle.labels[old]);
    }

    let remap = |ids: &[usize]| -> Vec<usize> {
        ids.iter()
            .filter(|&&i| labels[i] == keep)
            .map(|&i| new_id[i])
            .collect()
    };
    let fixed_split = bundle.fixed_split.as_ref().map(|s| Split {
        train: remap(&s.train),
        val: remap(&s.val),
        test: remap(&s.test),
    });

    DatasetBundle::new(
        bundle.name.clone(),
        graph,
        features,
        node_labels,
        bundle.class_count,
        fixed_split,
    )
}

/// Writes rows of node representations with an id column, full precision.
pub fn export_embeddings(x: &DenseMatrix, ids: &[usize], path: &Path) -> Result<()> {
    for &id in ids {
        if id >= x.rows() {
            return Err(Error::InvalidArgument(format!(
                "node id {id} out of range for {} rows",
                x.rows()
            )));
        }
    }
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..x.cols()).map(|j| format!("f{j}")))
        .collect();
    let rows: Vec<Vec<String>> = ids
        .iter()
        .map(|&id| {
            std::iter::once(id.to_string())
                .chain(x.row(id).iter().map(|v| format!("{v}")))
                .collect()
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    export_csv(&header_refs, &rows, path)
}

/// Minimal CSV writer: values are written verbatim, callers guarantee they
/// contain no commas or newlines (numbers and simple keys always qualify).
pub fn export_csv(header: &[&str], rows: &[Vec<String>], path: &Path) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_file(path, &text)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn check_meta(field: &'static str, expected: Option<u64>, actual: u64) -> Result<()> {
    match expected {
        Some(e) if e != actual => Err(Error::MetaMismatch {
            field,
            expected: e,
            actual,
        }),
        _ => Ok(()),
    }
}

fn read_index_file(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: format!("invalid id {line:?}"),
        })?);
    }
    Ok(out)
}

fn read_features(path: &Path, n: usize) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("invalid number {tok:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("row has {} values, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::InvalidDataset(format!(
            "features.csv has {} rows but labels.txt has {n}",
            rows.len()
        )));
    }
    DenseMatrix::from_rows(&rows)
}

/// Resolves a dataset argument: a literal directory first, then `NAME` under
/// `root` when given.
pub fn resolve_dataset_dir(arg: &str, root: Option<&Path>) -> Option<PathBuf> {
    let direct = PathBuf::from(arg);
    if direct.is_dir() {
        return Some(direct);
    }
    if let Some(root) = root {
        let under = root.join(arg);
        if under.is_dir() {
            return Some(under);
        }
    }
    None
}
