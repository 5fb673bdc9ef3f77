//! Losses, optimizer, and the pre-training and fine-tuning loops.

mod classifier;
mod config;
mod finetune;
mod loss;
mod model;
mod optim;
mod pretrain;

use std::collections::BTreeMap;

pub use classifier::{argmax, classify, cross_entropy, softmax, ClassifierParams, SoftmaxLoss};
pub use config::{Preset, PresetFlags, TrainConfig};
pub use finetune::{finetune, FinetuneReport};
pub use loss::{entity_loss, score, word_loss, EntityLoss, WordLoss};
pub use model::{prepare_all, Checkpoint, LeafKey, PreparedInstance, PreparedTree, CHECKPOINT_VERSION};
pub use optim::{adagrad_step, AdaGradState, EarlyStopping, Regularization, ADAGRAD_EPS};
pub use pretrain::{pretrain, PretrainReport};

use crate::embed::{EmbeddingTable, UnigramSampler};
use crate::rng::Rng;

/// Stream ids for the training RNGs derived from the config seed.
const PRETRAIN_STREAM: u64 = 0x9e7;
const FINETUNE_STREAM: u64 = 0xf17e;

/// A leaf input resolved to a table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Row {
    Entity(usize),
    Word(usize),
}

fn ensure_leaf_rows(leaves: &[LeafKey], words: &mut EmbeddingTable, entities: &mut EmbeddingTable) -> Vec<Row> {
    leaves
        .iter()
        .map(|leaf| match leaf {
            LeafKey::Entity(id) => Row::Entity(entities.ensure(id)),
            LeafKey::Word(w) => Row::Word(words.ensure(w)),
        })
        .collect()
}

fn row_inputs(rows: &[Row], words: &EmbeddingTable, entities: &EmbeddingTable) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| match *r {
            Row::Entity(i) => entities.row(i).to_vec(),
            Row::Word(i) => words.row(i).to_vec(),
        })
        .collect()
}

/// Sparse per-row gradient accumulator for an embedding table.
struct RowGrads {
    dim: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl RowGrads {
    fn new(dim: usize) -> Self {
        RowGrads {
            dim,
            rows: BTreeMap::new(),
        }
    }

    fn add(&mut self, row: usize, scale: f64, g: &[f64]) {
        let acc = self.rows.entry(row).or_insert_with(|| vec![0.0; self.dim]);
        for (a, x) in acc.iter_mut().zip(g) {
            *a += scale * x;
        }
    }

    /// AdaGrad step on every touched row.
    fn apply(
        self,
        table: &mut EmbeddingTable,
        state: &mut AdaGradState,
        alpha: f64,
        lambda: f64,
        reg: Regularization,
    ) {
        state.grow_to(table.len() * self.dim);
        for (row, g) in self.rows {
            state.step_at(row * self.dim, table.row_mut(row), &g, alpha, lambda, reg);
        }
    }
}

/// Negatives for `exclude`, or none when the sampler cannot avoid it.
fn draw_negatives(sampler: Option<&UnigramSampler>, k: usize, exclude: usize, rng: &mut Rng) -> Vec<usize> {
    match sampler {
        Some(s) => s.sample(k, Some(exclude), rng).unwrap_or_default(),
        None => Vec::new(),
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
