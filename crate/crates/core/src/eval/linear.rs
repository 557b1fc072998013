use rayon::prelude::*;

use crate::error::{Error, Result};

/// Regularized hinge-loss training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            lambda: 1e-4,
            epochs: 2000,
        }
    }
}

impl LinearParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One-vs-rest linear classifier. Row `c` of `weights` scores class `c`;
/// its last entry is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub dim: usize,
}

impl LinearModel {
    pub fn score(&self, class: usize, x: &[f64]) -> f64 {
        let w = &self.weights[class];
        w[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[self.dim]
    }
}

/// Full-batch projected subgradient descent on
/// `lambda/2 |w|^2 + mean(max(0, 1 - y w.x))`, with step `1/(lambda t)` and
/// the iterates of the second half averaged. Deterministic.
fn train_binary(xs: &[&[f64]], ys: &[f64], dim: usize, params: &LinearParams) -> Vec<f64> {
    let n = xs.len() as f64;
    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; dim + 1];
    let mut avg = vec![0.0; dim + 1];
    let mut averaged = 0usize;
    let start_avg = params.epochs / 2 + 1;
    let mut grad = vec![0.0; dim + 1];
    for t in 1..=params.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in xs.iter().zip(ys) {
            let margin = y * (w[..dim].iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() + w[dim]);
            if margin < 1.0 {
                for (g, &v) in grad.iter_mut().zip(x.iter()) {
                    *g += y * v;
                }
                grad[dim] += y;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        let shrink = 1.0 - eta * lambda;
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi = shrink * *wi + eta * gi / n;
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|v| *v *= s);
        }
        if t >= start_avg {
            averaged += 1;
            let a = 1.0 / averaged as f64;
            for (m, &v) in avg.iter_mut().zip(&w) {
                *m += (v - *m) * a;
            }
        }
    }
    avg
}

/// Trains one binary classifier per class, class `c` against the rest.
pub fn linear_ovr_fit<P: AsRef<[f64]> + Sync>(
    vectors: &[P],
    classes: &[usize],
    num_classes: usize,
    params: &LinearParams,
) -> Result<LinearModel> {
    params.validate()?;
    if vectors.len() != classes.len() {
        return Err(Error::DimensionMismatch {
            left: vectors.len(),
            right: classes.len(),
        });
    }
    if let Some(&c) = classes.iter().find(|&&c| c >= num_classes) {
        return Err(Error::InvalidConfig(format!("class {c} out of range")));
    }
    let mut present = vec![false; num_classes];
    classes.iter().for_each(|&c| present[c] = true);
    let distinct = present.iter().filter(|&&p| p).count();
    if distinct < 2 {
        return Err(Error::TooFewClasses(distinct));
    }
    let dim = vectors[0].as_ref().len();
    let xs: Vec<&[f64]> = vectors.iter().map(AsRef::as_ref).collect();
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch { left: dim, right: x.len() });
    }
    let weights = (0..num_classes)
        .into_par_iter()
        .map(|c| {
            let ys: Vec<f64> = classes.iter().map(|&k| if k == c { 1.0 } else { -1.0 }).collect();
            train_binary(&xs, &ys, dim, params)
        })
        .collect();
    Ok(LinearModel { weights, dim })
}

/// Highest-scoring class, lowest index on ties.
pub fn linear_ovr_predict<P: AsRef<[f64]>>(model: &LinearModel, vectors: &[P]) -> Result<Vec<usize>> {
    vectors
        .iter()
        .map(|v| {
            let x = v.as_ref();
            if x.len() != model.dim {
                return Err(Error::DimensionMismatch { left: model.dim, right: x.len() });
            }
            let mut best = (0, f64::NEG_INFINITY);
            for c in 0..model.weights.len() {
                let s = model.score(c, x);
                if s > best.1 {
                    best = (c, s);
                }
            }
            Ok(best.0)
        })
        .collect()
}
