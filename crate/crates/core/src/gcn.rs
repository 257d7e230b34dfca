//! Two-layer graph convolutional network
//!
//! ```text
//! Z = softmax(S · ReLU(S · X · θ1) · θ2)
//! ```
//!
//! trained by full-batch gradient descent on the cross-entropy of the
//! labeled rows only. Unlabeled rows still shape the prediction through `S`,
//! which is what makes the setting transductive.
//!
//! Gradients are derived by hand. With `G2 = (Z − Y)` restricted to labeled
//! rows:
//!
//! ```text
//! ∂L/∂θ2 = (S·H1)ᵀ · G2
//! G1     = (S · G2 · θ2ᵀ) ⊙ [A1 > 0]
//! ∂L/∂θ1 = (S·X)ᵀ · G1
//! ```
//!
//! using `Sᵀ = S`.

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::LabelMatrix;
use crate::graph::PropagationMatrix;
use crate::rng;
use crate::{Error, Result};

/// GCN training settings.
///
/// The loss is a sum over labeled nodes, so its gradient grows with the
/// label budget and a fixed `lr` that is stable at a handful of labels can
/// stall (dead ReLUs, flat loss) at a few dozen. The default `lr = 0.05`
/// stays stable up to about 50 labels on the blob benchmarks; shrink it for
/// larger budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Hidden width `L2`.
    pub hidden: usize,
    pub weight_decay: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.05,
            epochs: 200,
            seed: 0,
            hidden: 16,
            weight_decay: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("hyperparams", format!("lr = {} must be finite and >= 0", self.lr)));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hyperparams", "hidden width must be >= 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(
                "hyperparams",
                format!("weight_decay = {} must be finite and >= 0", self.weight_decay),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    /// `L1 × L2`
    pub theta1: Array2<f64>,
    /// `L2 × C`
    pub theta2: Array2<f64>,
}

impl GcnModel {
    pub fn new(theta1: Array2<f64>, theta2: Array2<f64>) -> Result<Self> {
        if theta1.ncols() != theta2.nrows() {
            return Err(Error::shape(
                "gcn model",
                format!("theta1 is {:?}, theta2 is {:?}", theta1.dim(), theta2.dim()),
            ));
        }
        if theta1.iter().chain(theta2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("gcn model", "non-finite parameter"));
        }
        Ok(GcnModel { theta1, theta2 })
    }

    /// Glorot-uniform initialization: entries of a `fan_in × fan_out`
    /// matrix are drawn from `U(−b, b)`, `b = √(6 / (fan_in + fan_out))`.
    /// `θ1` is drawn first, row-major, then `θ2`.
    pub fn init(input: usize, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        if input == 0 || hidden == 0 || classes == 0 {
            return Err(Error::invalid(
                "gcn model",
                format!("dimensions must be positive, got ({input}, {hidden}, {classes})"),
            ));
        }
        let mut rng = rng::seeded(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
        };
        let theta1 = glorot(input, hidden);
        let theta2 = glorot(hidden, classes);
        Ok(GcnModel { theta1, theta2 })
    }

    /// `(L1, L2, C)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.theta1.nrows(), self.theta1.ncols(), self.theta2.ncols())
    }

    fn squared_norm(&self) -> f64 {
        self.theta1.iter().chain(self.theta2.iter()).map(|v| v * v).sum()
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Numerically stable softmax: the row maximum is subtracted before
/// exponentiating.
pub fn softmax_row(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

fn log_sum_exp(z: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = z.clone().fold(f64::NEG_INFINITY, f64::max);
    m + z.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax_rows(a: &Array2<f64>) -> Array2<f64> {
    let mut z = a.clone();
    for mut row in z.rows_mut() {
        let p = softmax_row(row.as_slice().expect("standard layout"));
        row.iter_mut().zip(p).for_each(|(dst, v)| *dst = v);
    }
    z
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `S · X`
    pub sx: Array2<f64>,
    /// `(S·X)·θ1`
    pub a1: Array2<f64>,
    /// `ReLU(A1)`
    pub h1: Array2<f64>,
    /// `S · H1`
    pub sh1: Array2<f64>,
    /// Logits `(S·H1)·θ2`
    pub a2: Array2<f64>,
    /// Row-wise softmax of `A2`
    pub z: Array2<f64>,
}

pub fn forward(model: &GcnModel, s: &PropagationMatrix, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
    if x.ncols() != model.theta1.nrows() {
        return Err(Error::shape(
            "gcn forward",
            format!("X has {} columns, theta1 expects {}", x.ncols(), model.theta1.nrows()),
        ));
    }
    let sx = s.matmul(x)?;
    forward_propagated(model, s, sx)
}

/// Forward pass from a precomputed `S·X`, which is constant during training.
pub fn forward_propagated(model: &GcnModel, s: &PropagationMatrix, sx: Array2<f64>) -> Result<ForwardCache> {
    if sx.ncols() != model.theta1.nrows() || sx.nrows() != s.n() {
        return Err(Error::shape(
            "gcn forward",
            format!("S·X is {:?}, expected ({}, {})", sx.dim(), s.n(), model.theta1.nrows()),
        ));
    }
    let a1 = sx.dot(&model.theta1);
    let h1 = a1.mapv(relu);
    let sh1 = s.matmul(h1.view())?;
    let a2 = sh1.dot(&model.theta2);
    let z = softmax_rows(&a2);
    Ok(ForwardCache { sx, a1, h1, sh1, a2, z })
}

/// Masked cross-entropy `−Σ_{k∈labeled} Σ_c Y_kc · ln Z_kc`, evaluated from
/// the logits as `Σ_c Y_kc · (lse(A2_k) − A2_kc)` so that tiny probabilities
/// never go through `ln`.
pub fn loss(cache: &ForwardCache, y: &LabelMatrix, labeled: &[usize]) -> f64 {
    labeled
        .iter()
        .map(|&k| {
            let logits = cache.a2.row(k);
            let lse = log_sum_exp(logits.iter().copied());
            y.y.row(k)
                .iter()
                .zip(logits)
                .filter(|(&t, _)| t != 0.0)
                .map(|(&t, &a)| t * (lse - a))
                .sum::<f64>()
        })
        .sum()
}

/// Loss plus the `weight_decay/2 · ‖θ‖²` penalty; the quantity that
/// [`train`] minimizes.
pub fn objective(model: &GcnModel, cache: &ForwardCache, y: &LabelMatrix, labeled: &[usize], weight_decay: f64) -> f64 {
    let base = loss(cache, y, labeled);
    if weight_decay > 0.0 {
        base + 0.5 * weight_decay * model.squared_norm()
    } else {
        base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub g_theta1: Array2<f64>,
    pub g_theta2: Array2<f64>,
}

pub fn backward(
    model: &GcnModel,
    s: &PropagationMatrix,
    cache: &ForwardCache,
    y: &LabelMatrix,
    labeled: &[usize],
    weight_decay: f64,
) -> Result<Gradients> {
    let (l1, l2, c) = model.dims();
    let n = s.n();
    if cache.sx.dim() != (n, l1) || cache.a1.dim() != (n, l2) || cache.z.dim() != (n, c) {
        return Err(Error::shape(
            "gcn backward",
            "forward cache does not match model and propagation matrix",
        ));
    }
    if y.y.dim() != (n, c) {
        return Err(Error::shape(
            "gcn backward",
            format!("Y is {:?}, expected ({n}, {c})", y.y.dim()),
        ));
    }

    let mut g2 = Array2::<f64>::zeros((n, c));
    for &k in labeled {
        let mut row = g2.row_mut(k);
        row.assign(&cache.z.row(k));
        row -= &y.y.row(k);
    }

    let mut g_theta2 = cache.sh1.t().dot(&g2);

    let back = g2.dot(&model.theta2.t());
    let mut g1 = s.matmul(back.view())?;
    Zip::from(&mut g1).and(&cache.a1).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
    let mut g_theta1 = cache.sx.t().dot(&g1);

    if weight_decay > 0.0 {
        g_theta1.scaled_add(weight_decay, &model.theta1);
        g_theta2.scaled_add(weight_decay, &model.theta2);
    }
    Ok(Gradients { g_theta1, g_theta2 })
}

/// Full-batch gradient descent, `θ ← θ − lr·∂L/∂θ`, for `hp.epochs` steps.
///
/// Returns the trained model and the objective trace, which has
/// `epochs + 1` entries: the initial value, then the value after each step.
/// `hp.seed` is not consulted here; it belongs to [`GcnModel::init`].
pub fn train(
    model: &GcnModel,
    s: &PropagationMatrix,
    x: ArrayView2<'_, f64>,
    y: &LabelMatrix,
    labeled: &[usize],
    hp: &Hyperparams,
) -> Result<(GcnModel, Vec<f64>)> {
    hp.validate()?;
    let mut model = model.clone();
    let mut cache = forward(&model, s, x)?;
    let mut trace = Vec::with_capacity(hp.epochs + 1);
    let first = objective(&model, &cache, y, labeled, hp.weight_decay);
    if !first.is_finite() {
        return Err(Error::Diverged { epoch: 0, loss: first });
    }
    trace.push(first);

    for epoch in 1..=hp.epochs {
        let grads = backward(&model, s, &cache, y, labeled, hp.weight_decay)?;
        model.theta1.scaled_add(-hp.lr, &grads.g_theta1);
        model.theta2.scaled_add(-hp.lr, &grads.g_theta2);
        let sx = std::mem::take(&mut cache.sx);
        cache = forward_propagated(&model, s, sx)?;
        let value = objective(&model, &cache, y, labeled, hp.weight_decay);
        // ReLU maps NaN to 0, so a blown-up θ1 can still yield a finite loss.
        if !value.is_finite() || !model.squared_norm().is_finite() {
            return Err(Error::Diverged { epoch, loss: value });
        }
        trace.push(value);
    }
    Ok((model, trace))
}

/// Per-row argmax; ties go to the lowest class index.
pub fn argmax_rows(m: ArrayView2<'_, f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn predict(cache: &ForwardCache) -> Vec<usize> {
    argmax_rows(cache.z.view())
}
