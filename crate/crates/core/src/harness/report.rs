//! Sweep results and their CSV / markdown renderings.
//!
//! The CSV holds two sections separated by a blank line: one row per
//! (model, budget, repeat) under [`REPORT_HEADER`], then the aggregates
//! under [`AGGREGATE_HEADER`]. Floats use the shortest representation that
//! parses back to the same `f64`, so a parse/render cycle is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::{Error, Result};

pub const REPORT_HEADER: &str = "model,budget,repeat,seed,accuracy_pct,wall_ms";
pub const AGGREGATE_HEADER: &str = "model,budget,mean_pct,std_pct,repeats";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub budget: usize,
    pub repeat: usize,
    pub seed: u64,
    pub accuracy_pct: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub model: String,
    pub budget: usize,
    pub mean_pct: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for one repeat.
    pub std_pct: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvalReport {
    /// Builds a report and its aggregates. Aggregates follow the order in
    /// which each (model, budget) pair first appears.
    pub fn from_rows(rows: Vec<ResultRow>) -> Self {
        let aggregates = aggregate(&rows);
        EvalReport { rows, aggregates }
    }

    /// Models in order of first appearance.
    pub fn models(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for a in &self.aggregates {
            if !seen.contains(&a.model.as_str()) {
                seen.push(a.model.as_str());
            }
        }
        seen
    }

    pub fn budgets(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for a in &self.aggregates {
            if !seen.contains(&a.budget) {
                seen.push(a.budget);
            }
        }
        seen
    }

    pub fn aggregate_for(&self, model: &str, budget: usize) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.model == model && a.budget == budget)
    }

    /// Keeps only the named models.
    pub fn filter_models(&self, keep: &[&str]) -> Self {
        EvalReport {
            rows: self.rows.iter().filter(|r| keep.contains(&r.model.as_str())).cloned().collect(),
            aggregates: self
                .aggregates
                .iter()
                .filter(|a| keep.contains(&a.model.as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.model, r.budget, r.repeat, r.seed, r.accuracy_pct, r.wall_ms
            )
            .unwrap();
        }
        out.push('\n');
        out.push_str(AGGREGATE_HEADER);
        out.push('\n');
        for a in &self.aggregates {
            writeln!(out, "{},{},{},{},{}", a.model, a.budget, a.mean_pct, a.std_pct, a.repeats).unwrap();
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        const WHAT: &str = "report csv";
        let mut rows = Vec::new();
        let mut aggregates = Vec::new();
        let mut section = None;
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() {
                continue;
            }
            if line == REPORT_HEADER || line == AGGREGATE_HEADER {
                section = Some(line == REPORT_HEADER);
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |msg: String| Error::parse(WHAT, lineno, msg);
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad integer {s:?}")));
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            match section {
                None => return Err(bad("data before header".into())),
                Some(true) => {
                    if f.len() != 6 {
                        return Err(bad(format!("expected 6 fields, got {}", f.len())));
                    }
                    rows.push(ResultRow {
                        model: f[0].to_owned(),
                        budget: int(f[1])? as usize,
                        repeat: int(f[2])? as usize,
                        seed: int(f[3])?,
                        accuracy_pct: float(f[4])?,
                        wall_ms: int(f[5])?,
                    });
                }
                Some(false) => {
                    if f.len() != 5 {
                        return Err(bad(format!("expected 5 fields, got {}", f.len())));
                    }
                    aggregates.push(AggregateRow {
                        model: f[0].to_owned(),
                        budget: int(f[1])? as usize,
                        mean_pct: float(f[2])?,
                        std_pct: float(f[3])?,
                        repeats: int(f[4])? as usize,
                    });
                }
            }
        }
        Ok(EvalReport { rows, aggregates })
    }

    /// Models as rows, budgets as columns, mean accuracy in each cell.
    pub fn to_markdown(&self, caption: Option<&str>) -> String {
        let budgets = self.budgets();
        let mut out = String::new();
        if let Some(c) = caption {
            writeln!(out, "{c}\n").unwrap();
        }
        out.push_str("| Number of labeled texts |");
        for b in &budgets {
            write!(out, " {b} |").unwrap();
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(budgets.len()));
        out.push('\n');
        for model in self.models() {
            write!(out, "| {} |", display_name(model)).unwrap();
            for &b in &budgets {
                match self.aggregate_for(model, b) {
                    Some(a) => write!(out, " {:.2} |", a.mean_pct).unwrap(),
                    None => out.push_str(" – |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn display_name(model: &str) -> &str {
    match model {
        "gcn" => "Graph Convolutional Network",
        "logreg" => "Logistic Regression",
        other => other,
    }
}

fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(&str, usize)> = Vec::new();
    let mut groups: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.model.as_str(), r.budget);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.accuracy_pct);
    }
    order
        .into_iter()
        .map(|key| {
            let values = &groups[&key];
            let (mean_pct, std_pct) = mean_std(values);
            AggregateRow {
                model: key.0.to_owned(),
                budget: key.1,
                mean_pct,
                std_pct,
                repeats: values.len(),
            }
        })
        .collect()
}
