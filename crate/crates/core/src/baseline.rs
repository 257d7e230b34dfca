//! Supervised multinomial logistic regression.
//!
//! Trained on labeled rows only, never looking at the graph or at unlabeled
//! features. The objective is the mean cross-entropy over the training rows
//! plus `l2/2 · ‖W‖²` (the bias is not penalized), minimized by full-batch
//! gradient descent from `W = 0, b = 0`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::gcn::{argmax_rows, softmax_row};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            lr: 0.5,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

impl LogRegParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("logreg params", format!("lr = {} must be finite and >= 0", self.lr)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("logreg params", format!("l2 = {} must be finite and >= 0", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    /// `L1 × C`
    pub w: Array2<f64>,
    /// length `C`
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegGradients {
    pub g_w: Array2<f64>,
    pub g_b: Array1<f64>,
}

impl LogRegModel {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LogRegModel {
            w: Array2::zeros((dim, classes)),
            b: Array1::zeros(classes),
        }
    }

    pub fn new(w: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if w.ncols() != b.len() {
            return Err(Error::shape(
                "logreg model",
                format!("W has {} columns, b has {} entries", w.ncols(), b.len()),
            ));
        }
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("logreg model", "non-finite parameter"));
        }
        Ok(LogRegModel { w, b })
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn classes(&self) -> usize {
        self.w.ncols()
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::shape(
                "logreg",
                format!("X has {} columns, model expects {}", x.ncols(), self.dim()),
            ));
        }
        Ok(x.dot(&self.w) + &self.b)
    }

    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut p = self.logits(x)?;
        for mut row in p.rows_mut() {
            let s = softmax_row(&row.to_vec());
            row.iter_mut().zip(s).for_each(|(d, v)| *d = v);
        }
        Ok(p)
    }

    /// Mean cross-entropy plus the L2 penalty.
    pub fn objective(&self, x: ArrayView2<'_, f64>, y: &[usize], l2: f64) -> Result<f64> {
        let logits = self.logits(x)?;
        let ce: f64 = logits
            .rows()
            .into_iter()
            .zip(y)
            .map(|(row, &c)| {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - row[c]
            })
            .sum();
        let penalty = 0.5 * l2 * self.w.iter().map(|v| v * v).sum::<f64>();
        Ok(ce / y.len() as f64 + penalty)
    }

    pub fn gradients(&self, x: ArrayView2<'_, f64>, y: &[usize], l2: f64) -> Result<LogRegGradients> {
        let mut delta = self.probabilities(x)?;
        for (mut row, &c) in delta.rows_mut().into_iter().zip(y) {
            row[c] -= 1.0;
        }
        let scale = 1.0 / y.len() as f64;
        let mut g_w = x.t().dot(&delta) * scale;
        if l2 > 0.0 {
            g_w.scaled_add(l2, &self.w);
        }
        let g_b = delta.sum_axis(Axis(0)) * scale;
        Ok(LogRegGradients { g_w, g_b })
    }
}

fn check_training_set(x: ArrayView2<'_, f64>, y: &[usize], classes: usize) -> Result<()> {
    if y.is_empty() {
        return Err(Error::invalid("logreg", "no training rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::shape(
            "logreg",
            format!("{} feature rows, {} labels", x.nrows(), y.len()),
        ));
    }
    if let Some(&c) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::invalid("logreg", format!("class {c} outside [0, {classes})")));
    }
    Ok(())
}

/// Like [`train_logreg`], also returning the objective trace (`epochs + 1`
/// entries, initial value first).
pub fn train_logreg_traced(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    classes: usize,
    hp: &LogRegParams,
) -> Result<(LogRegModel, Vec<f64>)> {
    hp.validate()?;
    check_training_set(x, y, classes)?;
    let mut model = LogRegModel::zeros(x.ncols(), classes);
    let mut trace = Vec::with_capacity(hp.epochs + 1);
    trace.push(model.objective(x, y, hp.l2)?);
    for epoch in 1..=hp.epochs {
        let g = model.gradients(x, y, hp.l2)?;
        model.w.scaled_add(-hp.lr, &g.g_w);
        model.b.scaled_add(-hp.lr, &g.g_b);
        let value = model.objective(x, y, hp.l2)?;
        if !value.is_finite() {
            return Err(Error::Diverged { epoch, loss: value });
        }
        trace.push(value);
    }
    Ok((model, trace))
}

/// `x` holds the labeled feature rows and `y` their classes.
pub fn train_logreg(x: ArrayView2<'_, f64>, y: &[usize], classes: usize, hp: &LogRegParams) -> Result<LogRegModel> {
    train_logreg_traced(x, y, classes, hp).map(|(m, _)| m)
}

pub fn predict_logreg(model: &LogRegModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(model.logits(x)?.view()))
}

pub fn predict_one(model: &LogRegModel, x: ArrayView1<'_, f64>) -> Result<usize> {
    predict_logreg(model, x.insert_axis(Axis(0)))
        .map(|p| p[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_epochs_is_zero_model() {
        let x = array![[1.0, 2.0], [-1.0, 0.5]];
        let hp = LogRegParams { epochs: 0, ..Default::default() };
        let m = train_logreg(x.view(), &[1, 2], 3, &hp).unwrap();
        assert_eq!(m, LogRegModel::zeros(2, 3));
        assert_eq!(predict_logreg(&m, x.view()).unwrap(), vec![0, 0]);
    }

    #[test]
    fn single_point_is_learned() {
        let x = array![[0.4, -1.3, 2.0]];
        let hp = LogRegParams { lr: 0.5, epochs: 200, ..Default::default() };
        let m = train_logreg(x.view(), &[2], 4, &hp).unwrap();
        let p = m.probabilities(x.view()).unwrap();
        assert!(p[[0, 2]] > 0.9, "{p}");
    }

    #[test]
    fn constant_logit_shift_keeps_predictions() {
        let x = array![[1.0, 2.0], [-1.0, 0.5], [3.0, -2.0]];
        let m = LogRegModel::new(array![[0.3, -0.2], [0.1, 0.4]], array![0.0, 0.1]).unwrap();
        let shifted = LogRegModel::new(m.w.clone(), &m.b + 5.0).unwrap();
        assert_eq!(predict_logreg(&m, x.view()).unwrap(), predict_logreg(&shifted, x.view()).unwrap());
    }

    #[test]
    fn input_validation() {
        let x = array![[1.0], [2.0]];
        let hp = LogRegParams::default();
        assert!(train_logreg(x.view(), &[0], 2, &hp).is_err());
        assert!(train_logreg(x.view(), &[0, 2], 2, &hp).is_err());
        assert!(train_logreg(x.slice(ndarray::s![0..0, ..]), &[], 2, &hp).is_err());
        let m = LogRegModel::zeros(2, 2);
        assert!(predict_logreg(&m, x.view()).is_err());
        assert_eq!(predict_one(&m, array![1.0, 1.0].view()).unwrap(), 0);
    }
}
