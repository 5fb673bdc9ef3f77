//! Skip-gram with negative sampling.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{EmbeddingKind, EmbeddingTable, UnigramSampler};
use crate::error::{Error, Result};
use crate::net::math::{axpy, dot, log_sigmoid, sigmoid};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 16,
            window: 2,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

/// Target ("input") and context ("output") vectors plus the noise sampler.
#[derive(Debug, Clone)]
pub struct SkipGram {
    cfg: SkipGramConfig,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    input: Vec<f64>,
    output: Vec<f64>,
    sampler: UnigramSampler,
    rng: Rng,
}

impl SkipGram {
    pub fn new<S: AsRef<str>>(sentences: &[Vec<S>], cfg: SkipGramConfig) -> Result<Self> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for s in sentences {
            for w in s {
                *counts.entry(w.as_ref()).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::invalid("skip-gram needs a non-empty corpus"));
        }
        let vocab: Vec<String> = counts.keys().map(|w| w.to_string()).collect();
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let sampler = UnigramSampler::new(&counts.values().copied().collect::<Vec<_>>(), 0.75)?;
        let mut rng = rng::seeded(cfg.seed);
        let d = cfg.dim;
        let scale = 0.5 / d as f64;
        let input = (0..vocab.len() * d).map(|_| rng.gen_range(-scale..scale)).collect();
        let output = vec![0.0; vocab.len() * d];
        Ok(SkipGram {
            cfg,
            vocab,
            index,
            input,
            output,
            sampler,
            rng,
        })
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn input_vector(&self, id: usize) -> &[f64] {
        let d = self.cfg.dim;
        &self.input[id * d..(id + 1) * d]
    }

    pub fn output_vector(&self, id: usize) -> &[f64] {
        let d = self.cfg.dim;
        &self.output[id * d..(id + 1) * d]
    }

    pub fn set_output_vector(&mut self, id: usize, v: &[f64]) {
        let d = self.cfg.dim;
        self.output[id * d..(id + 1) * d].copy_from_slice(v);
    }

    /// `log σ(v_c·v_w) + Σ log σ(-v_n·v_w)` for one (target, context) pair.
    pub fn pair_objective(&self, target: usize, context: usize, negatives: &[usize]) -> f64 {
        let vw = self.input_vector(target);
        let mut obj = log_sigmoid(dot(self.output_vector(context), vw));
        for &n in negatives {
            obj += log_sigmoid(-dot(self.output_vector(n), vw));
        }
        obj
    }

    /// Gradients of [`Self::pair_objective`] with respect to the target vector,
    /// the context vector and each negative's context vector.
    pub fn pair_gradients(
        &self,
        target: usize,
        context: usize,
        negatives: &[usize],
    ) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let vw = self.input_vector(target);
        let vc = self.output_vector(context);
        let g = sigmoid(-dot(vc, vw));
        let mut d_target: Vec<f64> = vc.iter().map(|x| g * x).collect();
        let d_context: Vec<f64> = vw.iter().map(|x| g * x).collect();
        let d_negs = negatives
            .iter()
            .map(|&n| {
                let vn = self.output_vector(n);
                let g = -sigmoid(dot(vn, vw));
                axpy(g, vn, &mut d_target);
                vw.iter().map(|x| g * x).collect()
            })
            .collect();
        (d_target, d_context, d_negs)
    }

    /// One ascent step on a single pair.
    pub fn step(&mut self, target: usize, context: usize, negatives: &[usize], lr: f64) {
        let (dt, dc, dn) = self.pair_gradients(target, context, negatives);
        let d = self.cfg.dim;
        axpy(lr, &dc, &mut self.output[context * d..(context + 1) * d]);
        for (&n, g) in negatives.iter().zip(&dn) {
            axpy(lr, g, &mut self.output[n * d..(n + 1) * d]);
        }
        axpy(lr, &dt, &mut self.input[target * d..(target + 1) * d]);
    }

    /// All (target, context) id pairs within the window.
    pub fn pairs<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<(usize, usize)> {
        let ids: Vec<usize> = sentence.iter().filter_map(|w| self.id(w.as_ref())).collect();
        let c = self.cfg.window;
        let mut pairs = Vec::new();
        for (t, &w) in ids.iter().enumerate() {
            let lo = t.saturating_sub(c);
            let hi = (t + c + 1).min(ids.len());
            for (j, &ctx) in ids.iter().enumerate().take(hi).skip(lo) {
                if j != t {
                    pairs.push((w, ctx));
                }
            }
        }
        pairs
    }

    pub fn draw_negatives(&mut self, context: usize) -> Vec<usize> {
        if self.sampler.len() < 2 {
            return Vec::new();
        }
        self.sampler
            .sample(self.cfg.negatives, Some(context), &mut self.rng)
            .expect("vocabulary has at least two words")
    }

    pub fn train_epoch<S: AsRef<str>>(&mut self, sentences: &[Vec<S>]) {
        let mut order: Vec<usize> = (0..sentences.len()).collect();
        order.shuffle(&mut self.rng);
        let lr = self.cfg.learning_rate;
        for s in order {
            for (w, c) in self.pairs(&sentences[s]) {
                let negs = self.draw_negatives(c);
                self.step(w, c, &negs, lr);
            }
        }
    }

    pub fn into_table(self) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(EmbeddingKind::Word, self.cfg.dim);
        for (i, w) in self.vocab.iter().enumerate() {
            t.push(w, self.input_vector(i));
        }
        t
    }
}

/// Trains target vectors over `sentences` and returns them as a word table.
pub fn skipgram_train<S: AsRef<str>>(
    sentences: &[Vec<S>],
    cfg: SkipGramConfig,
) -> Result<EmbeddingTable> {
    let epochs = cfg.epochs;
    let mut model = SkipGram::new(sentences, cfg)?;
    for _ in 0..epochs {
        model.train_epoch(sentences);
    }
    Ok(model.into_table())
}

/// Bigram phrase score `(count_ij - δ) / (count_i · count_j)`.
pub fn phrase_score(count_ij: u64, count_i: u64, count_j: u64, discount: f64) -> Result<f64> {
    let denom = count_i as f64 * count_j as f64;
    if denom == 0.0 {
        return Err(Error::invalid("phrase score undefined for zero unigram counts"));
    }
    Ok((count_ij as f64 - discount) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn phrase_scores() {
        assert_abs_diff_eq!(phrase_score(10, 5, 4, 0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(phrase_score(3, 5, 4, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(phrase_score(0, 5, 4, 1.0).unwrap(), -0.05);
        assert!(phrase_score(1, 0, 4, 0.0).is_err());
    }

    #[test]
    fn empty_corpus_rejected() {
        let empty: Vec<Vec<&str>> = vec![];
        assert!(skipgram_train(&empty, SkipGramConfig::default()).is_err());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = vec![vec!["a", "b", "c"], vec!["c", "b", "a"]];
        let cfg = SkipGramConfig {
            epochs: 0,
            ..Default::default()
        };
        let init = SkipGram::new(&corpus, cfg.clone()).unwrap().into_table();
        assert_eq!(skipgram_train(&corpus, cfg).unwrap(), init);
    }

    #[test]
    fn pairs_respect_window() {
        let corpus = vec![vec!["a", "b", "c", "d"]];
        let cfg = SkipGramConfig {
            window: 1,
            ..Default::default()
        };
        let m = SkipGram::new(&corpus, cfg).unwrap();
        // a-b, b-a, b-c, c-b, c-d, d-c
        assert_eq!(m.pairs(&corpus[0]).len(), 6);
    }
}
