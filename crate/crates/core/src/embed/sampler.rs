use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};

/// Noise distribution `P(w) ∝ count(w)^exponent` for negative sampling.
#[derive(Debug, Clone)]
pub struct UnigramSampler {
    probs: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl UnigramSampler {
    pub fn new(counts: &[u64], exponent: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("sampler needs a non-empty vocabulary"));
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| if exponent == 0.0 { 1.0 } else { (c as f64).powf(exponent) })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::invalid("sampler weights must have positive finite mass"));
        }
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(UnigramSampler {
            probs: weights.iter().map(|w| w / total).collect(),
            dist,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(&vec![1; n], 0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Draws `k` ids i.i.d.; draws equal to `exclude` are redrawn.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        k: usize,
        exclude: Option<usize>,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if let Some(x) = exclude {
            let remaining = 1.0 - self.probs.get(x).copied().unwrap_or(0.0);
            if remaining <= 1e-12 {
                return Err(Error::invalid(format!(
                    "cannot draw negatives: id {x} holds all of the sampling mass"
                )));
            }
        }
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let id = self.dist.sample(rng);
            if Some(id) != exclude {
                out.push(id);
            }
        }
        Ok(out)
    }
}
