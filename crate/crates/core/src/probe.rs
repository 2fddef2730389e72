//! Attribute-encoding probe: a multinomial logistic regression fitted on
//! frozen embeddings, swept over L2 strengths and selected by validation
//! macro AUROC.

use crate::error::{Error, Result};
use crate::metrics::auroc;
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::FeatureMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Embeddings paired with the group label of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings<T> {
    pub features: Matrix<T>,
    pub labels: Vec<String>,
}

impl<T: Scalar> LabeledEmbeddings<T> {
    pub fn new(rows: &[Vec<T>], labels: Vec<String>) -> Result<Self> {
        let features = Matrix::from_rows(rows)?;
        if features.rows != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.rows,
                right: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }
}

/// Seven log-spaced strengths from 1e-5 to 10.
pub fn default_l2_grid() -> Vec<f64> {
    (0..7).map(|k| 10f64.powi(k - 5)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub l2_grid: Vec<f64>,
    /// Standardize features with train-split mean and standard deviation.
    pub standardize: bool,
    pub max_iter: usize,
    /// Gradient infinity-norm at which a fit counts as converged.
    pub tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            l2_grid: default_l2_grid(),
            standardize: true,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    fn fit(x: &Matrix<T>) -> Self {
        let n = T::of_usize(x.rows.max(1));
        let mut mean = vec![T::zero(); x.cols];
        for i in 0..x.rows {
            for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); x.cols];
        for i in 0..x.rows {
            for ((s, &v), &m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::zero() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = x.clone();
        for i in 0..x.rows {
            let row = &mut out.data[i * x.cols..(i + 1) * x.cols];
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// Weights of a fitted multinomial model: `n_classes` rows of `d + 1`
/// entries, the last being the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialFit<T> {
    pub weights: Vec<T>,
    pub n_classes: usize,
    pub n_features: usize,
    pub loss: T,
    pub grad_inf_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> MultinomialFit<T> {
    pub fn class_row(&self, k: usize) -> &[T] {
        let w = self.n_features + 1;
        &self.weights[k * w..(k + 1) * w]
    }

    pub fn probabilities(&self, x: &[T]) -> Vec<T> {
        let logits: Vec<T> = (0..self.n_classes)
            .map(|k| {
                let row = self.class_row(k);
                x.iter().zip(row).map(|(&a, &b)| a * b).sum::<T>() + row[self.n_features]
            })
            .collect();
        softmax(&logits)
    }
}

fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy plus `l2 / 2` times the squared norm of the
/// non-intercept weights, with its gradient.
fn objective<T: Scalar>(theta: &[T], x: &Matrix<T>, y: &[usize], k: usize, l2: T) -> (T, Vec<T>) {
    let d = x.cols;
    let w = d + 1;
    let n = T::of_usize(x.rows);
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); theta.len()];
    let mut logits = vec![T::zero(); k];
    for i in 0..x.rows {
        let row = x.row(i);
        for (c, z) in logits.iter_mut().enumerate() {
            let wc = &theta[c * w..(c + 1) * w];
            *z = row.iter().zip(wc).map(|(&a, &b)| a * b).sum::<T>() + wc[d];
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
        loss = loss + lse - logits[y[i]];
        for c in 0..k {
            let p = (logits[c] - lse).exp();
            let r = if c == y[i] { p - T::one() } else { p };
            let gc = &mut grad[c * w..(c + 1) * w];
            for (g, &a) in gc.iter_mut().zip(row) {
                *g = *g + r * a;
            }
            gc[d] = gc[d] + r;
        }
    }
    loss = loss / n;
    grad.iter_mut().for_each(|g| *g = *g / n);
    let mut penalty = T::zero();
    for c in 0..k {
        for j in 0..d {
            let t = theta[c * w + j];
            penalty = penalty + t * t;
            grad[c * w + j] = grad[c * w + j] + l2 * t;
        }
    }
    (loss + l2 * penalty * T::half(), grad)
}

/// Regularized training objective at `weights` (same layout as
/// [`MultinomialFit::weights`]).
pub fn training_loss<T: Scalar>(weights: &[T], x: &Matrix<T>, y: &[usize], n_classes: usize, l2: f64) -> T {
    objective(weights, x, y, n_classes, T::of(l2)).0
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

const LBFGS_MEMORY: usize = 10;

/// Fits the L2-regularized multinomial model with L-BFGS and a backtracking
/// Armijo line search, starting from zero weights. `y` holds class indices.
pub fn fit_multinomial<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    l2: f64,
    max_iter: usize,
    tol: f64,
) -> Result<MultinomialFit<T>> {
    if x.rows != y.len() {
        return Err(Error::LengthMismatch {
            left: x.rows,
            right: y.len(),
        });
    }
    if n_classes < 2 || y.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(Error::SingleClassTrain);
    }
    let l2 = T::of(l2);
    let tol = T::of(tol);
    let mut theta = vec![T::zero(); n_classes * (x.cols + 1)];
    let (mut loss, mut grad) = objective(&theta, x, y, n_classes, l2);
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut iterations = 0;
    let c1 = T::of(1e-4);

    while iterations < max_iter && inf_norm(&grad) > tol {
        iterations += 1;
        // two-loop recursion
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv, rho) in history.iter().rev() {
            let a = *rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, &yi)| *qi = *qi - a * yi);
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, yv, _)| dot(s, yv) / dot(yv, yv))
            .unwrap_or_else(|| T::one() / inf_norm(&grad).max(T::one()));
        q.iter_mut().for_each(|v| *v = *v * gamma);
        for ((s, yv, rho), &a) in history.iter().zip(alphas.iter().rev()) {
            let b = *rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, &si)| *qi = *qi + (a - b) * si);
        }
        let mut direction: Vec<T> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &direction);
        if slope >= T::zero() {
            history.clear();
            direction = grad.iter().map(|&g| -g).collect();
            slope = dot(&grad, &direction);
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let candidate: Vec<T> = theta.iter().zip(&direction).map(|(&t, &p)| t + step * p).collect();
            let (l, g) = objective(&candidate, x, y, n_classes, l2);
            if l.is_finite() && l <= loss + c1 * step * slope {
                accepted = Some((candidate, l, g));
                break;
            }
            step = step * T::half();
        }
        let Some((next, next_loss, next_grad)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let s: Vec<T> = next.iter().zip(&theta).map(|(&a, &b)| a - b).collect();
        let yv: Vec<T> = next_grad.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > T::epsilon() * dot(&yv, &yv) {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, yv, T::one() / sy));
        }
        let stalled = next_loss >= loss;
        theta = next;
        loss = next_loss;
        grad = next_grad;
        if stalled && inf_norm(&grad) > tol {
            // no measurable progress left at this precision
            break;
        }
    }
    let grad_inf_norm = inf_norm(&grad);
    Ok(MultinomialFit {
        weights: theta,
        n_classes,
        n_features: x.cols,
        loss,
        grad_inf_norm,
        iterations,
        converged: grad_inf_norm <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel<T> {
    pub classes: Vec<String>,
    pub l2_strength: f64,
    pub fit: MultinomialFit<T>,
    pub standardizer: Option<Standardizer<T>>,
    pub val_macro_auroc: Option<f64>,
}

impl<T: Scalar> ProbeModel<T> {
    /// Weight matrix in the layout `classes x (d + 1)`, intercept last,
    /// acting on standardized features when a standardizer is present.
    pub fn weights(&self) -> &[T] {
        &self.fit.weights
    }

    pub fn predict_proba(&self, x: &Matrix<T>) -> Result<Vec<Vec<T>>> {
        if x.cols != self.fit.n_features {
            return Err(Error::FeatureMismatch {
                expected: self.fit.n_features,
                found: x.cols,
            });
        }
        let xs = match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.clone(),
        };
        Ok((0..xs.rows).map(|i| self.fit.probabilities(xs.row(i))).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub l2: f64,
    pub val_macro_auroc: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit<T> {
    pub model: ProbeModel<T>,
    pub grid: Vec<GridPoint>,
}

fn encode_labels(labels: &[String], classes: &[String]) -> Vec<Option<usize>> {
    labels
        .iter()
        .map(|l| classes.binary_search(l).ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAuroc {
    pub class: String,
    pub auroc: f64,
}

/// One-vs-rest AUROCs for every class with both outcomes present, and
/// argmax accuracy over all rows.
fn score_probabilities<T: Scalar>(
    probs: &[Vec<T>],
    labels: &[String],
    classes: &[String],
) -> (Vec<ClassAuroc>, f64) {
    let encoded = encode_labels(labels, classes);
    let mut per_class = Vec::new();
    for (k, class) in classes.iter().enumerate() {
        let scores: Vec<T> = probs.iter().map(|p| p[k]).collect();
        let y: Vec<u8> = encoded.iter().map(|e| u8::from(*e == Some(k))).collect();
        if let Ok(a) = auroc(&scores, &y) {
            per_class.push(ClassAuroc {
                class: class.clone(),
                auroc: a.as_f64(),
            });
        }
    }
    let correct = probs
        .iter()
        .zip(&encoded)
        .filter(|(p, e)| {
            let argmax = p
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                .0;
            **e == Some(argmax)
        })
        .count();
    let accuracy = if probs.is_empty() {
        0.0
    } else {
        correct as f64 / probs.len() as f64
    };
    (per_class, accuracy)
}

fn macro_average(per_class: &[ClassAuroc]) -> f64 {
    if per_class.is_empty() {
        return 0.5;
    }
    per_class.iter().map(|c| c.auroc).sum::<f64>() / per_class.len() as f64
}

/// Sweeps the L2 grid and keeps the fit with the best validation macro
/// AUROC; ties go to the larger strength.
pub fn fit_probe<T: Scalar>(
    train: &LabeledEmbeddings<T>,
    val: &LabeledEmbeddings<T>,
    opts: &ProbeOptions,
) -> Result<ProbeFit<T>> {
    let classes: Vec<String> = train
        .labels
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClassTrain);
    }
    if val.features.cols != train.features.cols {
        return Err(Error::FeatureMismatch {
            expected: train.features.cols,
            found: val.features.cols,
        });
    }
    if opts.l2_grid.is_empty() || opts.l2_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidConfig("l2 grid must be non-empty and non-negative".into()));
    }
    let standardizer = opts.standardize.then(|| Standardizer::fit(&train.features));
    let x = match &standardizer {
        Some(s) => s.apply(&train.features),
        None => train.features.clone(),
    };
    let y: Vec<usize> = encode_labels(&train.labels, &classes)
        .into_iter()
        .map(|e| e.expect("train labels define the classes"))
        .collect();

    let mut grid = opts.l2_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let fits: Vec<Result<(f64, ProbeModel<T>)>> = grid
        .par_iter()
        .map(|&l2| {
            let fit = fit_multinomial(&x, &y, classes.len(), l2, opts.max_iter, opts.tol)?;
            let mut model = ProbeModel {
                classes: classes.clone(),
                l2_strength: l2,
                fit,
                standardizer: standardizer.clone(),
                val_macro_auroc: None,
            };
            let probs = model.predict_proba(&val.features)?;
            let (per_class, _) = score_probabilities(&probs, &val.labels, &classes);
            let score = macro_average(&per_class);
            model.val_macro_auroc = Some(score);
            Ok((score, model))
        })
        .collect();

    let mut best: Option<(f64, ProbeModel<T>)> = None;
    let mut points = Vec::with_capacity(fits.len());
    for fit in fits {
        let (score, model) = fit?;
        points.push(GridPoint {
            l2: model.l2_strength,
            val_macro_auroc: score,
            converged: model.fit.converged,
            iterations: model.fit.iterations,
        });
        if best.as_ref().is_none_or(|(b, _)| score >= *b) {
            best = Some((score, model));
        }
    }
    Ok(ProbeFit {
        model: best.expect("grid is non-empty").1,
        grid: points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub macro_auroc_val: Option<f64>,
    pub macro_auroc_test: f64,
    pub argmax_accuracy_test: f64,
    pub per_class_auroc: Vec<ClassAuroc>,
    pub l2_strength: f64,
    pub converged: bool,
    pub standardized: bool,
}

pub fn evaluate_probe<T: Scalar>(model: &ProbeModel<T>, test: &LabeledEmbeddings<T>) -> Result<ProbeReport> {
    let probs = model.predict_proba(&test.features)?;
    let (per_class, accuracy) = score_probabilities(&probs, &test.labels, &model.classes);
    Ok(ProbeReport {
        macro_auroc_val: model.val_macro_auroc,
        macro_auroc_test: macro_average(&per_class),
        argmax_accuracy_test: accuracy,
        per_class_auroc: per_class,
        l2_strength: model.l2_strength,
        converged: model.fit.converged,
        standardized: model.standardizer.is_some(),
    })
}
