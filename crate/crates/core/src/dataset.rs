//! Embedding datasets, labeled/unlabeled splits and the initial label matrix.
//!
//! # Embedding CSV
//!
//! ```text
//! #classes=3            (optional; overrides the inferred class count)
//! id,label,e0,e1,e2     (the label column is optional)
//! doc-a,0,0.1,-2.5,3
//! doc-b,,1.5,0.25,-1    (empty label: no ground truth for this row)
//! ```
//!
//! Labels are either all integers in `[0, C)` or arbitrary strings. String
//! labels are mapped to dense indices through their sorted (lexicographic)
//! dictionary, which is kept in [`EmbeddingDataset::class_names`].
//!
//! The writer emits every coordinate with 17 significant digits, so a
//! write/read cycle reproduces `X` bit for bit.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::index;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::rng;
use crate::{Error, Result};

const WHAT: &str = "embedding csv";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub ids: Vec<String>,
    /// `n × L1` embedding matrix, one row per text.
    pub x: Array2<f64>,
    /// Per-row class index; `None` when the file has no label column.
    pub truth: Option<Vec<Option<usize>>>,
    pub classes: usize,
    /// Sorted dictionary for string labels; `None` for integer labels.
    pub class_names: Option<Vec<String>>,
}

impl EmbeddingDataset {
    pub fn new(
        ids: Vec<String>,
        x: Array2<f64>,
        truth: Option<Vec<Option<usize>>>,
        classes: usize,
    ) -> Result<Self> {
        let ds = EmbeddingDataset {
            ids,
            x,
            truth,
            classes,
            class_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Dataset with complete ground truth.
    pub fn labeled(ids: Vec<String>, x: Array2<f64>, truth: Vec<usize>, classes: usize) -> Result<Self> {
        Self::new(ids, x, Some(truth.into_iter().map(Some).collect()), classes)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.x.dim();
        if n == 0 {
            return Err(Error::invalid("dataset", "no rows"));
        }
        if d == 0 {
            return Err(Error::invalid("dataset", "no embedding columns"));
        }
        if self.classes < 2 {
            return Err(Error::invalid("dataset", format!("class count {} < 2", self.classes)));
        }
        if self.ids.len() != n {
            return Err(Error::invalid(
                "dataset",
                format!("{} ids for {} rows", self.ids.len(), n),
            ));
        }
        if let Some(pos) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "dataset",
                format!("non-finite value in row {}", pos / d),
            ));
        }
        if let Some(truth) = &self.truth {
            if truth.len() != n {
                return Err(Error::invalid(
                    "dataset",
                    format!("{} labels for {} rows", truth.len(), n),
                ));
            }
            if let Some((i, c)) = truth
                .iter()
                .enumerate()
                .find_map(|(i, c)| c.filter(|&c| c >= self.classes).map(|c| (i, c)))
            {
                return Err(Error::invalid(
                    "dataset",
                    format!("row {i}: class {c} outside [0, {})", self.classes),
                ));
            }
        }
        if let Some(names) = &self.class_names {
            if names.len() > self.classes {
                return Err(Error::invalid(
                    "dataset",
                    format!("{} class names for {} classes", names.len(), self.classes),
                ));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.truth.as_ref().and_then(|t| t[i])
    }

    /// The ground truth as a plain vector, or an error if any row lacks it.
    pub fn complete_truth(&self) -> Result<Vec<usize>> {
        let truth = self
            .truth
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset", "no ground-truth labels"))?;
        truth
            .iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::invalid("dataset", format!("row {i} has no label"))))
            .collect()
    }

    /// Copy of the dataset with each row scaled to unit L2 norm. Zero rows
    /// are left as they are.
    pub fn normalized_rows(&self) -> Self {
        let mut out = self.clone();
        for mut row in out.x.rows_mut() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        out
    }

    /// Dataset with rows reordered so that row `i` of the result is row
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let x = self.x.select(ndarray::Axis(0), perm);
        EmbeddingDataset {
            ids: perm.iter().map(|&i| self.ids[i].clone()).collect(),
            x,
            truth: self.truth.as_ref().map(|t| perm.iter().map(|&i| t[i]).collect()),
            classes: self.classes,
            class_names: self.class_names.clone(),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub fn save_dataset(ds: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(ds)).map_err(|e| Error::io(path, e))
}

enum RawLabel<'a> {
    Missing,
    Text(&'a str, usize),
}

pub fn parse_csv(text: &str) -> Result<EmbeddingDataset> {
    let mut declared_classes: Option<usize> = None;
    let mut header: Option<(bool, usize)> = None; // (has_label, dims)
    let mut ids = Vec::new();
    let mut raw_labels = Vec::new();
    let mut values = Vec::new();

    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let Some((has_label, dims)) = header else {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(c) = comment.trim().strip_prefix("classes=") {
                    let c: usize = c
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(WHAT, lineno, format!("bad class count {c:?}")))?;
                    declared_classes = Some(c);
                }
                continue;
            }
            let (has_label, dims) = parse_header(line, lineno)?;
            header = Some((has_label, dims));
            continue;
        };

        let row = ids.len() + 1;
        let cells: Vec<&str> = line.split(',').collect();
        let expected = 1 + usize::from(has_label) + dims;
        if cells.len() != expected {
            return Err(Error::parse(
                WHAT,
                lineno,
                format!("row {row} has {} columns, header declares {expected}", cells.len()),
            ));
        }
        let id = cells[0];
        if id.is_empty() {
            return Err(Error::parse(WHAT, lineno, format!("row {row} has an empty id")));
        }
        ids.push(id.to_owned());
        let mut rest = &cells[1..];
        if has_label {
            let l = rest[0].trim();
            raw_labels.push(if l.is_empty() {
                RawLabel::Missing
            } else {
                RawLabel::Text(l, lineno)
            });
            rest = &rest[1..];
        }
        for (k, cell) in rest.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(WHAT, lineno, format!("row {row}, column e{k}: not a number: {cell:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    WHAT,
                    lineno,
                    format!("row {row}, column e{k}: non-finite value {cell:?}"),
                ));
            }
            values.push(v);
        }
    }

    let Some((has_label, dims)) = header else {
        return Err(Error::parse(WHAT, 1, "missing header line"));
    };
    let n = ids.len();
    if n == 0 {
        return Err(Error::parse(WHAT, 1, "no data rows"));
    }
    let x = Array2::from_shape_vec((n, dims), values).expect("row widths checked above");

    let (truth, classes, class_names) = if has_label {
        resolve_labels(&raw_labels, declared_classes)?
    } else {
        (None, declared_classes.unwrap_or(2), None)
    };
    let ds = EmbeddingDataset {
        ids,
        x,
        truth,
        classes,
        class_names,
    };
    ds.validate()?;
    Ok(ds)
}

fn parse_header(line: &str, lineno: usize) -> Result<(bool, usize)> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols[0] != "id" {
        return Err(Error::parse(WHAT, lineno, "header must start with `id`"));
    }
    let has_label = cols.get(1) == Some(&"label");
    let emb = &cols[1 + usize::from(has_label)..];
    if emb.is_empty() {
        return Err(Error::parse(WHAT, lineno, "header declares no embedding columns"));
    }
    for (k, name) in emb.iter().enumerate() {
        if *name != format!("e{k}") {
            return Err(Error::parse(
                WHAT,
                lineno,
                format!("expected column `e{k}`, found `{name}`"),
            ));
        }
    }
    Ok((has_label, emb.len()))
}

type ResolvedLabels = (Option<Vec<Option<usize>>>, usize, Option<Vec<String>>);

fn resolve_labels(raw: &[RawLabel<'_>], declared: Option<usize>) -> Result<ResolvedLabels> {
    let numeric = raw.iter().all(|l| match l {
        RawLabel::Missing => true,
        RawLabel::Text(t, _) => t.parse::<usize>().is_ok(),
    });

    if numeric {
        let mut truth = Vec::with_capacity(raw.len());
        let mut max = None::<usize>;
        for (row, l) in raw.iter().enumerate() {
            match l {
                RawLabel::Missing => truth.push(None),
                RawLabel::Text(t, lineno) => {
                    let c: usize = t.parse().expect("checked numeric");
                    if let Some(declared) = declared {
                        if c >= declared {
                            return Err(Error::parse(
                                WHAT,
                                *lineno,
                                format!("row {}: class {c} >= declared class count {declared}", row + 1),
                            ));
                        }
                    }
                    max = Some(max.map_or(c, |m| m.max(c)));
                    truth.push(Some(c));
                }
            }
        }
        let classes = declared.unwrap_or_else(|| max.map_or(2, |m| (m + 1).max(2)));
        return Ok((Some(truth), classes, None));
    }

    let names: BTreeSet<&str> = raw
        .iter()
        .filter_map(|l| match l {
            RawLabel::Text(t, _) => Some(*t),
            RawLabel::Missing => None,
        })
        .collect();
    let names: Vec<String> = names.into_iter().map(str::to_owned).collect();
    let classes = match declared {
        Some(c) if c < names.len() => {
            return Err(Error::invalid(
                "dataset",
                format!("{} distinct labels but #classes={c}", names.len()),
            ))
        }
        Some(c) => c,
        None => names.len().max(2),
    };
    let truth = raw
        .iter()
        .map(|l| match l {
            RawLabel::Missing => None,
            RawLabel::Text(t, _) => Some(names.binary_search_by(|n| n.as_str().cmp(t)).expect("name in dictionary")),
        })
        .collect();
    Ok((Some(truth), classes, Some(names)))
}

pub fn to_csv(ds: &EmbeddingDataset) -> String {
    let mut out = String::new();
    let has_label = ds.truth.is_some();
    writeln!(out, "#classes={}", ds.classes).unwrap();
    out.push_str("id");
    if has_label {
        out.push_str(",label");
    }
    for k in 0..ds.dim() {
        write!(out, ",e{k}").unwrap();
    }
    out.push('\n');
    for (i, row) in ds.x.rows().into_iter().enumerate() {
        out.push_str(&ds.ids[i]);
        if has_label {
            out.push(',');
            if let Some(c) = ds.label(i) {
                match &ds.class_names {
                    Some(names) => out.push_str(&names[c]),
                    None => write!(out, "{c}").unwrap(),
                }
            }
        }
        for v in row {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Gaussian blobs: `classes` isotropic unit-variance clusters, point `i`
/// belonging to class `i % classes`.
///
/// When `classes <= dim` the centers sit at `sep/√2 · e_c`, so every pair of
/// centers is exactly `sep` apart. With fewer dimensions than classes that
/// is impossible in general and the centers are placed on the first axis at
/// spacing `sep` instead.
pub fn synth_blobs(n: usize, dim: usize, classes: usize, sep: f64, seed: u64) -> Result<EmbeddingDataset> {
    if classes < 2 {
        return Err(Error::invalid("blobs", "need at least 2 classes"));
    }
    if n < classes {
        return Err(Error::invalid("blobs", format!("n = {n} < classes = {classes}")));
    }
    if dim == 0 {
        return Err(Error::invalid("blobs", "dimension must be positive"));
    }
    if !(sep >= 0.0 && sep.is_finite()) {
        return Err(Error::invalid("blobs", format!("separation {sep} must be finite and >= 0")));
    }

    let mut centers = Array2::<f64>::zeros((classes, dim));
    for c in 0..classes {
        if classes <= dim {
            centers[[c, c]] = sep / std::f64::consts::SQRT_2;
        } else {
            centers[[c, 0]] = sep * c as f64;
        }
    }

    let mut rng = rng::seeded(seed);
    let mut x = Array2::<f64>::zeros((n, dim));
    let truth: Vec<usize> = (0..n).map(|i| i % classes).collect();
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let center = centers.row(truth[i]);
        for (v, &mu) in row.iter_mut().zip(center) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = mu + z;
        }
    }
    let width = (n - 1).to_string().len();
    let ids = (0..n).map(|i| format!("blob{i:0width$}")).collect();
    EmbeddingDataset::labeled(ids, x, truth, classes)
}

/// A partition of `0..n` into labeled and unlabeled nodes, both sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSplit {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

impl LabeledSplit {
    /// Split with the given labeled nodes. Order does not matter and repeated
    /// indices are merged.
    pub fn from_labeled(n: usize, mut labeled: Vec<usize>) -> Result<Self> {
        labeled.sort_unstable();
        labeled.dedup();
        if labeled.is_empty() {
            return Err(Error::invalid("split", "no labeled nodes"));
        }
        if let Some(&bad) = labeled.iter().find(|&&i| i >= n) {
            return Err(Error::invalid("split", format!("index {bad} out of range for n = {n}")));
        }
        let mut is_labeled = vec![false; n];
        for &i in &labeled {
            is_labeled[i] = true;
        }
        let unlabeled = (0..n).filter(|&i| !is_labeled[i]).collect();
        Ok(LabeledSplit { labeled, unlabeled })
    }

    pub fn n(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n()];
        for &i in &self.labeled {
            m[i] = true;
        }
        m
    }
}

/// Sample `l` labeled nodes without replacement.
///
/// With `stratified`, the per-class quota is `l / C`, and the `l % C`
/// leftover slots go to randomly chosen classes, so quotas differ by at most
/// one. Both index sets come back sorted.
pub fn make_split(ds: &EmbeddingDataset, l: usize, seed: u64, stratified: bool) -> Result<LabeledSplit> {
    let n = ds.n();
    if l < 1 {
        return Err(Error::invalid("split", "labeled count must be at least 1"));
    }
    if l > n {
        return Err(Error::invalid("split", format!("labeled count {l} exceeds n = {n}")));
    }
    let mut rng = rng::seeded(seed);

    if !stratified {
        let labeled = index::sample(&mut rng, n, l).into_vec();
        return LabeledSplit::from_labeled(n, labeled);
    }

    let truth = ds
        .complete_truth()
        .map_err(|e| Error::invalid("split", format!("stratified split needs ground truth ({e})")))?;
    let classes = ds.classes;
    if l < classes {
        return Err(Error::invalid(
            "split",
            format!("stratified split needs l >= C ({l} < {classes})"),
        ));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in truth.iter().enumerate() {
        members[c].push(i);
    }

    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(&mut rng);
    let mut quota = vec![l / classes; classes];
    for &c in order.iter().take(l % classes) {
        quota[c] += 1;
    }

    let mut labeled = Vec::with_capacity(l);
    for c in 0..classes {
        if quota[c] > members[c].len() {
            return Err(Error::invalid(
                "split",
                format!("class {c} has {} members, needs {}", members[c].len(), quota[c]),
            ));
        }
        labeled.extend(
            index::sample(&mut rng, members[c].len(), quota[c])
                .into_iter()
                .map(|k| members[c][k]),
        );
    }
    LabeledSplit::from_labeled(n, labeled)
}

/// The `n × C` initial label matrix: one-hot rows for labeled nodes, zero
/// rows elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub y: Array2<f64>,
}

impl LabelMatrix {
    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn classes(&self) -> usize {
        self.y.ncols()
    }

    /// Class of a labeled row, if the row is one-hot.
    pub fn class_of(&self, i: usize) -> Option<usize> {
        self.y.row(i).iter().position(|&v| v == 1.0)
    }
}

pub fn build_label_matrix(ds: &EmbeddingDataset, split: &LabeledSplit) -> Result<LabelMatrix> {
    if split.n() != ds.n() {
        return Err(Error::shape(
            "build_label_matrix",
            format!("split covers {} nodes, dataset has {}", split.n(), ds.n()),
        ));
    }
    let mut y = Array2::zeros((ds.n(), ds.classes));
    for &i in &split.labeled {
        let c = ds
            .label(i)
            .ok_or_else(|| Error::invalid("label matrix", format!("labeled node {i} has no ground truth")))?;
        y[[i, c]] = 1.0;
    }
    Ok(LabelMatrix { y })
}
