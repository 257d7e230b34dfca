use crate::{Error, Result};

/// One-vs-rest confusion counts for a chosen positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `Q = (TP + TN) / (TP + FP + TN + FN)`, as a percentage.
    pub fn accuracy_pct(&self) -> Result<f64> {
        percent(self.tp + self.tn, self.total())
    }
}

fn percent(hits: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("accuracy", "no items to score"));
    }
    Ok(100.0 * hits as f64 / total as f64)
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape(
            "metrics",
            format!("{} predictions, {} truth labels", pred.len(), truth.len()),
        ));
    }
    Ok(())
}

pub fn confusion_counts(pred: &[usize], truth: &[usize], positive: usize) -> Result<ConfusionCounts> {
    check_lengths(pred, truth)?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (t == positive, p == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Percentage of exact matches. For two classes this is the same number
/// as [`ConfusionCounts::accuracy_pct`], bit for bit.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    percent(hits, truth.len())
}
