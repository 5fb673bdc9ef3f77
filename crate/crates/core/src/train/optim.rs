//! AdaGrad with L1 or L2 regularization, and early stopping.

use serde::{Deserialize, Serialize};

/// Added to `√G` so the first step never divides by zero.
pub const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    #[default]
    L1,
    L2,
}

impl std::str::FromStr for Regularization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Regularization::L1),
            "l2" => Ok(Regularization::L2),
            other => Err(format!("unknown regularization {other:?}, expected l1 or l2")),
        }
    }
}

/// Accumulated squared gradients, one slot per parameter coordinate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdaGradState {
    sum_sq: Vec<f64>,
}

impl AdaGradState {
    pub fn new(len: usize) -> Self {
        AdaGradState {
            sum_sq: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.sum_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum_sq.is_empty()
    }

    pub fn history(&self) -> &[f64] {
        &self.sum_sq
    }

    /// Extends the state with fresh coordinates, e.g. after rows are added to a table.
    pub fn grow_to(&mut self, len: usize) {
        if len > self.sum_sq.len() {
            self.sum_sq.resize(len, 0.0);
        }
    }

    /// `α / (√G_i + ε)`; infinite-history coordinates never occur in practice.
    pub fn effective_rate(&self, i: usize, alpha: f64) -> f64 {
        alpha / (self.sum_sq[i].sqrt() + ADAGRAD_EPS)
    }

    /// Updates coordinate `i` in place. `grad` is the gradient of the loss
    /// being minimized, without the penalty term.
    pub fn update(&mut self, i: usize, param: &mut f64, grad: f64, alpha: f64, lambda: f64, reg: Regularization) {
        self.sum_sq[i] += grad * grad;
        if self.sum_sq[i] == 0.0 {
            return;
        }
        let rate = self.effective_rate(i, alpha);
        match reg {
            Regularization::L2 => *param -= rate * (grad + lambda * *param),
            Regularization::L1 => {
                let stepped = *param - rate * grad;
                let penalty = rate * lambda * sign(stepped);
                let shrunk = stepped - penalty;
                // The penalty may pull a weight to zero but never across it.
                *param = if stepped != 0.0 && sign(shrunk) != sign(stepped) {
                    0.0
                } else {
                    shrunk
                };
            }
        }
    }

    /// Dense update of `params[offset..offset + grads.len()]`, where `params`
    /// is the slice those offsets refer to.
    pub fn step_at(
        &mut self,
        offset: usize,
        params: &mut [f64],
        grads: &[f64],
        alpha: f64,
        lambda: f64,
        reg: Regularization,
    ) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient lengths differ");
        for (k, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            self.update(offset + k, p, g, alpha, lambda, reg);
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One AdaGrad step over a whole parameter vector.
pub fn adagrad_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdaGradState,
    alpha: f64,
    lambda: f64,
    reg: Regularization,
) {
    assert_eq!(state.len(), params.len(), "optimizer state does not match parameters");
    state.step_at(0, params, grads, alpha, lambda, reg);
}

/// Tracks the best validation score; stops after `patience` epochs without
/// strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    epochs: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            epochs: 0,
            stale: 0,
        }
    }

    /// Records the score of the next epoch (1-based). Returns whether this
    /// epoch is the new best.
    pub fn observe(&mut self, score: f64) -> bool {
        self.epochs += 1;
        let improved = match self.best {
            None => true,
            Some((_, best)) => score > best,
        };
        if improved {
            self.best = Some((self.epochs, score));
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.best.is_some() && self.stale >= self.patience.max(1)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best.map(|(_, s)| s)
    }
}
