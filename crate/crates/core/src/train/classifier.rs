//! Softmax classifier over `[one-hot features ‖ root_h]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;

/// Weights are row-major with one row of width `n_sparse + dim` per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub n_labels: usize,
    pub n_sparse: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ClassifierParams {
    pub fn zeros(n_labels: usize, n_sparse: usize, dim: usize) -> Self {
        ClassifierParams {
            n_labels,
            n_sparse,
            dim,
            weights: vec![0.0; n_labels * (n_sparse + dim)],
            bias: vec![0.0; n_labels],
        }
    }

    pub fn width(&self) -> usize {
        self.n_sparse + self.dim
    }

    pub fn row(&self, label: usize) -> &[f64] {
        let w = self.width();
        &self.weights[label * w..(label + 1) * w]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_labels == 0 {
            return Err(Error::Checkpoint("classifier has no labels".into()));
        }
        if self.weights.len() != self.n_labels * self.width() || self.bias.len() != self.n_labels {
            return Err(Error::Checkpoint(format!(
                "classifier arrays do not match {} labels x {} inputs",
                self.n_labels,
                self.width()
            )));
        }
        Ok(())
    }

    fn check(&self, sparse: &SparseVector, dense: &[f64]) -> Result<()> {
        if sparse.dim() != self.n_sparse {
            return Err(Error::Dimension {
                expected: self.n_sparse,
                actual: sparse.dim(),
            });
        }
        if dense.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: dense.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, sparse: &SparseVector, dense: &[f64]) -> Result<Vec<f64>> {
        self.check(sparse, dense)?;
        Ok((0..self.n_labels)
            .map(|l| {
                let row = self.row(l);
                let s: f64 = sparse.indices().iter().map(|&i| row[i]).sum();
                let d: f64 = row[self.n_sparse..].iter().zip(dense).map(|(w, x)| w * x).sum();
                self.bias[l] + s + d
            })
            .collect())
    }

    /// `∂/∂dense` of a loss whose logit gradient is `d_logits`.
    pub fn dense_backward(&self, d_logits: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (l, &g) in d_logits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(&self.row(l)[self.n_sparse..]) {
                *o += g * w;
            }
        }
        out
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Label probabilities and the predicted label index.
pub fn classify(c: &ClassifierParams, sparse: &SparseVector, dense: &[f64]) -> Result<(Vec<f64>, usize)> {
    let probs = softmax(&c.logits(sparse, dense)?);
    let label = argmax(&probs);
    Ok((probs, label))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLoss {
    /// `-log p(gold)`.
    pub value: f64,
    pub probs: Vec<f64>,
    pub d_logits: Vec<f64>,
    pub d_dense: Vec<f64>,
}

/// Cross-entropy of the gold label and its gradients.
pub fn cross_entropy(
    c: &ClassifierParams,
    sparse: &SparseVector,
    dense: &[f64],
    gold: usize,
) -> Result<SoftmaxLoss> {
    if gold >= c.n_labels {
        return Err(Error::invalid(format!("gold label {gold} out of range")));
    }
    let logits = c.logits(sparse, dense)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let probs = softmax(&logits);
    let mut d_logits = probs.clone();
    d_logits[gold] -= 1.0;
    let d_dense = c.dense_backward(&d_logits);
    Ok(SoftmaxLoss {
        value: log_z - logits[gold],
        probs,
        d_logits,
        d_dense,
    })
}
