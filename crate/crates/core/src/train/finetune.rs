use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::classifier::{argmax, classify, cross_entropy, ClassifierParams};
use super::model::{prepare_all, Checkpoint, PreparedInstance};
use super::optim::{AdaGradState, EarlyStopping};
use super::{all_finite, ensure_leaf_rows, row_inputs, Row, RowGrads, FINETUNE_STREAM};
use crate::corpus::Instance;
use crate::error::{Error, Result};
use crate::features::build_dictionary;
use crate::net::{tree_backward, tree_forward};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FinetuneReport {
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (the last one without validation data).
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    /// Accuracy of the on-line predictions made during each epoch.
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

/// Dense classifier input for an instance, read-only.
fn dense_input(model: &Checkpoint, prep: &PreparedInstance) -> Result<Vec<f64>> {
    match &prep.tree {
        Some(tree) => Ok(model.forward(tree)?.root_h().to_vec()),
        None => Ok(vec![0.0; model.dim]),
    }
}

fn accuracy_on(model: &Checkpoint, prepared: &[PreparedInstance], gold: &[Option<usize>]) -> Result<f64> {
    if prepared.is_empty() {
        return Ok(0.0);
    }
    let c = model.classifier.as_ref().expect("classifier initialized");
    let hits: Vec<bool> = prepared
        .par_iter()
        .zip(gold)
        .map(|(p, g)| {
            let (_, label) = classify(c, &p.sparse, &dense_input(model, p)?)?;
            Ok(Some(label) == *g)
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / prepared.len() as f64)
}

/// Supervised training of the softmax classifier over hand-crafted features
/// and, unless the preset disables it, the LSTM root representation.
///
/// Builds and freezes the feature dictionary and the label vocabulary from
/// `train`. With a non-empty `val`, training stops once validation accuracy
/// has not improved for `patience` epochs and the best parameters are kept.
pub fn finetune(model: &mut Checkpoint, train: &[Instance], val: &[Instance]) -> Result<FinetuneReport> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("fine-tuning needs at least one training instance"));
    }
    let d = model.dim;

    model.dictionary = build_dictionary(train);
    let mut labels: Vec<String> = train.iter().map(|i| i.relation.clone()).collect();
    labels.sort();
    labels.dedup();
    model.labels = labels;
    let n_sparse = model.dictionary.len();
    model.classifier = Some(ClassifierParams::zeros(model.labels.len(), n_sparse, d));

    let prepared = prepare_all(train, &model.dictionary, cfg.use_lstm, 0)?;
    let gold: Vec<usize> = train
        .iter()
        .map(|i| model.label_index(&i.relation).expect("label from training set"))
        .collect();
    let rows: Vec<Vec<Row>> = prepared
        .iter()
        .map(|p| match &p.tree {
            Some(t) => ensure_leaf_rows(&t.leaves, &mut model.words, &mut model.entities),
            None => Vec::new(),
        })
        .collect();

    let val_prepared = prepare_all(val, &model.dictionary, cfg.use_lstm, 0)?;
    let val_gold: Vec<Option<usize>> = val.iter().map(|i| model.label_index(&i.relation)).collect();
    let unseen = val_gold.iter().filter(|g| g.is_none()).count();
    if unseen > 0 {
        log::warn!("{unseen} validation instances carry labels unseen in training; they count as errors");
    }

    let update_entities = cfg.use_lstm && cfg.update_entity_vectors && cfg.finetune_updates_vectors;
    let update_words = cfg.use_lstm && cfg.update_word_vectors && cfg.finetune_updates_vectors;
    let width = n_sparse + d;
    let n_labels = model.labels.len();
    let mut w_state = AdaGradState::new(n_labels * width);
    let mut b_state = AdaGradState::new(n_labels);
    let mut lstm_state = AdaGradState::new(model.lstm.len());
    let mut ent_state = AdaGradState::new(model.entities.len() * d);
    let mut word_state = AdaGradState::new(model.words.len() * d);

    let mut r = rng::derive(cfg.seed, FINETUNE_STREAM);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best: Option<Checkpoint> = None;
    let mut report = FinetuneReport::default();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut r);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for &idx in &order {
            let prep = &prepared[idx];
            let fwd = match &prep.tree {
                Some(t) => {
                    let inputs = row_inputs(&rows[idx], &model.words, &model.entities);
                    Some(tree_forward(&model.lstm, &t.topo, &inputs)?)
                }
                None => None,
            };
            let dense = fwd.as_ref().map_or_else(|| vec![0.0; d], |f| f.root_h().to_vec());
            let c = model.classifier.as_mut().expect("classifier initialized");
            let ce = cross_entropy(c, &prep.sparse, &dense, gold[idx])?;
            loss_sum += ce.value;
            hits += usize::from(argmax(&ce.probs) == gold[idx]);

            for (l, &g) in ce.d_logits.iter().enumerate() {
                let base = l * width;
                for &i in prep.sparse.indices() {
                    w_state.update(base + i, &mut c.weights[base + i], g, cfg.alpha_fc, cfg.lambda_fc, cfg.finetune_reg);
                }
                if fwd.is_some() {
                    for (k, x) in dense.iter().enumerate() {
                        let j = base + n_sparse + k;
                        w_state.update(j, &mut c.weights[j], g * x, cfg.alpha_fc, cfg.lambda_fc, cfg.finetune_reg);
                    }
                }
                b_state.update(l, &mut c.bias[l], g, cfg.alpha_fc, cfg.lambda_fc, cfg.finetune_reg);
            }

            if let (Some(fwd), Some(tree)) = (fwd, &prep.tree) {
                let root = tree.topo.root();
                let grads = tree_backward(&model.lstm, &tree.topo, &fwd, &[(root, ce.d_dense)])?;
                lstm_state.step_at(
                    0,
                    model.lstm.as_mut_slice(),
                    grads.params.as_slice(),
                    cfg.alpha_fw,
                    cfg.lambda_fw,
                    cfg.finetune_reg,
                );
                let mut ent_grads = RowGrads::new(d);
                let mut word_grads = RowGrads::new(d);
                for (row, g) in rows[idx].iter().zip(&grads.inputs) {
                    match *row {
                        Row::Entity(i) => ent_grads.add(i, 1.0, g),
                        Row::Word(i) => word_grads.add(i, 1.0, g),
                    }
                }
                if update_entities {
                    ent_grads.apply(&mut model.entities, &mut ent_state, cfg.alpha_pe, cfg.lambda_pe, cfg.finetune_reg);
                }
                if update_words {
                    word_grads.apply(&mut model.words, &mut word_state, cfg.alpha_pe, cfg.lambda_pe, cfg.finetune_reg);
                }
            }
        }

        let n = prepared.len() as f64;
        if !loss_sum.is_finite() || !all_finite(model.lstm.as_slice()) {
            return Err(Error::NonFinite(format!("fine-tuning diverged in epoch {epoch}")));
        }
        report.epochs_run = epoch;
        report.train_loss.push(loss_sum / n);
        report.train_accuracy.push(hits as f64 / n);

        if val_prepared.is_empty() {
            report.best_epoch = epoch;
            continue;
        }
        let acc = accuracy_on(model, &val_prepared, &val_gold)?;
        log::debug!("finetune epoch {epoch}: loss {:.6}, val accuracy {acc:.4}", loss_sum / n);
        report.val_accuracy.push(acc);
        if stopper.observe(acc) {
            report.best_epoch = epoch;
            best = Some(model.clone());
        }
        if stopper.should_stop() {
            break;
        }
    }

    if let Some(b) = best {
        *model = b;
    }
    Ok(report)
}

#[cfg(test)]
fn model_accuracy(model: &Checkpoint, instances: &[Instance]) -> Result<f64> {
    let prepared = prepare_all(instances, &model.dictionary, model.config.use_lstm, 0)?;
    let gold: Vec<Option<usize>> = instances.iter().map(|i| model.label_index(&i.relation)).collect();
    accuracy_on(model, &prepared, &gold)
}
